//! Power grids over the (beta, r) plane: per-cell Monte-Carlo power, the
//! binomial substantiality test, per-strip logistic fits yielding the
//! empirical transition point, and the closed-form theory curves.

use crate::classic::{fisher_stat, logrank, min_p, weighted_logrank, WeightScheme};
use crate::data::IntervalTable;
use crate::decay::{calibrate, simulate, DecayParams, Hypothesis};
use crate::error::{Result, SurvError};
use crate::hc::hchg;
use crate::hyg::{interval_pvalues, Direction};
use crate::resample::NullCalibration;
use crate::seed::derive_seed;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

/// Test statistics comparable on the power grid. All are oriented so
/// that large values reject: min-P enters as `1/p_(1)` and FDR* as
/// `max_t t/p_(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Hchg,
    Logrank,
    Gehan,
    TaroneWare,
    Peto,
    Fh10,
    Fh11,
    Fisher,
    Minp,
    Fdrstar,
}

impl Statistic {
    pub const ALL: [Statistic; 10] = [
        Statistic::Hchg,
        Statistic::Logrank,
        Statistic::Gehan,
        Statistic::TaroneWare,
        Statistic::Peto,
        Statistic::Fh10,
        Statistic::Fh11,
        Statistic::Fisher,
        Statistic::Minp,
        Statistic::Fdrstar,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Hchg => "hchg",
            Statistic::Logrank => "logrank",
            Statistic::Gehan => "gehan",
            Statistic::TaroneWare => "tarone-ware",
            Statistic::Peto => "peto",
            Statistic::Fh10 => "fh-1-0",
            Statistic::Fh11 => "fh-1-1",
            Statistic::Fisher => "fisher",
            Statistic::Minp => "minp",
            Statistic::Fdrstar => "fdrstar",
        }
    }

    pub fn parse(name: &str) -> Result<Statistic> {
        Statistic::ALL
            .iter()
            .find(|s| s.name() == name)
            .copied()
            .ok_or_else(|| SurvError::Argument(format!("unknown statistic {name:?}")))
    }

    /// Evaluate on a count table, testing for excess events in group y.
    pub fn eval(&self, table: &IntervalTable, gamma0: f64) -> f64 {
        match self {
            Statistic::Hchg => hchg(table, Direction::YExcess, gamma0)
                .map(|r| r.statistic)
                .unwrap_or(f64::NEG_INFINITY),
            Statistic::Logrank => logrank(table).statistic,
            Statistic::Gehan => weighted_logrank(table, WeightScheme::Gehan).statistic,
            Statistic::TaroneWare => {
                weighted_logrank(table, WeightScheme::TaroneWare).statistic
            }
            Statistic::Peto => weighted_logrank(table, WeightScheme::Peto).statistic,
            Statistic::Fh10 => {
                weighted_logrank(table, WeightScheme::FlemingHarrington { p: 1.0, q: 0.0 })
                    .statistic
            }
            Statistic::Fh11 => {
                weighted_logrank(table, WeightScheme::FlemingHarrington { p: 1.0, q: 1.0 })
                    .statistic
            }
            Statistic::Fisher => fisher_stat(&interval_pvalues(table, Direction::YExcess)),
            Statistic::Minp => 1.0 / min_p(&interval_pvalues(table, Direction::YExcess)),
            Statistic::Fdrstar => {
                1.0 / crate::classic::fdr_star(&interval_pvalues(table, Direction::YExcess))
            }
        }
    }
}

/// Exact upper tail `Pr(Binomial(N, p) >= k)`.
pub fn binom_sf(k: u64, n: u64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SurvError::Argument(format!(
            "p must lie in [0, 1], got {p}"
        )));
    }
    if k > n + 1 {
        return Err(SurvError::Argument(format!("k = {k} exceeds N + 1 = {}", n + 1)));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if k > n {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (n_f, p_ln, q_ln) = (n as f64, p.ln(), (1.0 - p).ln());
    let ln_term = |j: u64| {
        ln_gamma(n_f + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0)
            + j as f64 * p_ln
            + (n - j) as f64 * q_ln
    };
    let mut term = ln_term(k).exp();
    let mut sum = term;
    let mut comp = 0.0_f64;
    let mut j = k;
    while j < n {
        let ratio = ((n - j) as f64 / (j + 1) as f64) * (p / (1.0 - p));
        term *= ratio;
        if ratio < 1.0 && term < 1e-18 * sum {
            break;
        }
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        j += 1;
    }
    Ok(sum.min(1.0))
}

/// True iff the Monte-Carlo power is statistically distinguishable from
/// the nominal level: `Pr(Binomial(N, alpha) >= N * B_hat) <= alpha1`.
pub fn substantial(b_hat: f64, n: u64, alpha: f64, alpha1: f64) -> Result<bool> {
    let k = (b_hat * n as f64).round() as u64;
    Ok(binom_sf(k, n, alpha)? <= alpha1)
}

/// Monte-Carlo power of one statistic at one `(beta, r)` cell: the
/// fraction of `n_reps` H1 simulations whose statistic strictly exceeds
/// the calibrated null quantile.
pub fn power_cell(
    params: &DecayParams,
    statistic: Statistic,
    gamma0: f64,
    calib: &NullCalibration,
    n_reps: usize,
    cell_seed: u64,
) -> Result<f64> {
    if calib.statistic_name != statistic.name() {
        return Err(SurvError::Argument(format!(
            "calibration is for {:?}, not {:?}",
            calib.statistic_name,
            statistic.name()
        )));
    }
    let rejections: usize = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let out = simulate(params, Hypothesis::H1, derive_seed(cell_seed, &[rep as u64]));
            usize::from(statistic.eval(&out.table, gamma0) > calib.quantile)
        })
        .sum();
    Ok(rejections as f64 / n_reps as f64)
}

/// Result of the ridge-regularized logistic fit
/// `Pr(substantial) = 1 / (1 + exp(theta1 * r + theta0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticFit {
    pub theta0: f64,
    pub theta1: f64,
    /// All indicators identical: the crossing point is not interior.
    pub separated: bool,
}

/// Maximum-likelihood logistic fit with ridge penalty 1e-6, Newton
/// iterations until the gradient infinity-norm drops below 1e-8 or 100
/// iterations.
pub fn logistic_fit(r_values: &[f64], indicators: &[bool]) -> Result<LogisticFit> {
    if r_values.len() != indicators.len() || r_values.len() < 2 {
        return Err(SurvError::Argument(
            "logistic fit needs two same-length arrays of length >= 2".into(),
        ));
    }
    let separated = indicators.iter().all(|&b| b) || indicators.iter().all(|&b| !b);
    const RIDGE: f64 = 1e-6;
    // fit in (a, b) with Pr = sigmoid(a + b r); theta0 = -a, theta1 = -b
    let (mut a, mut b) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let (mut g0, mut g1) = (-RIDGE * a, -RIDGE * b);
        let (mut h00, mut h01, mut h11) = (RIDGE, 0.0_f64, RIDGE);
        for (&r, &y) in r_values.iter().zip(indicators) {
            let eta = a + b * r;
            let p = 1.0 / (1.0 + (-eta).exp());
            let resid = f64::from(y as u8) - p;
            g0 += resid;
            g1 += resid * r;
            let w = p * (1.0 - p);
            h00 += w;
            h01 += w * r;
            h11 += w * r * r;
        }
        if g0.abs().max(g1.abs()) < 1e-8 {
            break;
        }
        let det = h00 * h11 - h01 * h01;
        if det.abs() < 1e-300 {
            break;
        }
        a += (h11 * g0 - h01 * g1) / det;
        b += (h00 * g1 - h01 * g0) / det;
    }
    Ok(LogisticFit {
        theta0: -a,
        theta1: -b,
        separated,
    })
}

/// Crossing point of the fitted response with 1/2: `-theta0 / theta1`.
/// `None` when the fit is flat.
pub fn rho_hat(theta0: f64, theta1: f64) -> Option<f64> {
    if theta1 == 0.0 {
        None
    } else {
        Some(-theta0 / theta1)
    }
}

/// Theoretical phase-transition curve of the HC test:
/// 0 for beta <= 1/2, `2(beta - 1/2)` on (1/2, 3/4), and
/// `2(1 - sqrt(1 - beta))^2` on [3/4, 1).
pub fn rho_theory(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SurvError::Argument(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(if beta <= 0.5 {
        0.0
    } else if beta < 0.75 {
        2.0 * (beta - 0.5)
    } else {
        let s = 1.0 - (1.0 - beta).sqrt();
        2.0 * s * s
    })
}

/// Phase-transition curve of Bonferroni / FDR* tests:
/// `2(1 - sqrt(1 - beta))^2` on (1/2, 1), 0 at or below 1/2.
pub fn rho_bonf(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SurvError::Argument(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(if beta <= 0.5 {
        0.0
    } else {
        let s = 1.0 - (1.0 - beta).sqrt();
        2.0 * s * s
    })
}

/// How the per-strip transition point is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RhoEstimate {
    Value(f64),
    /// All strips substantial: the crossing lies at or below the grid.
    AtMostMin(f64),
    /// No strip substantial: the crossing lies above the grid.
    AboveMax(f64),
    Undefined,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerGrid {
    pub statistic: Statistic,
    pub beta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    /// `power[beta_index][r_index]`.
    pub power: Vec<Vec<f64>>,
    pub substantial: Vec<Vec<bool>>,
    pub n_reps: usize,
    pub alpha: f64,
    pub alpha1: f64,
    pub null_quantile: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionPoint {
    pub beta: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub rho_hat: RhoEstimate,
    pub rho_theory: f64,
    pub rho_bonf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionCurve {
    pub statistic: Statistic,
    pub points: Vec<TransitionPoint>,
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub beta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub t_len: usize,
    pub x0: Option<u64>,
    pub y0: Option<u64>,
    pub lambda_bar: Option<f64>,
    pub n_reps: usize,
    pub n_null_sims: usize,
    pub alpha: f64,
    pub alpha1: f64,
    pub gamma0: f64,
    pub statistics: Vec<Statistic>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRunResult {
    pub grids: Vec<PowerGrid>,
    pub curves: Vec<TransitionCurve>,
}

/// Run the full experiment: one shared null calibration per statistic at
/// r = 0, per-cell Monte-Carlo powers, substantiality flags, and per-beta
/// logistic fits. Deterministic given `master_seed` regardless of the
/// parallel schedule.
pub fn run_grid(config: &GridConfig) -> Result<GridRunResult> {
    if config.beta_grid.is_empty() || config.r_grid.is_empty() {
        return Err(SurvError::Argument("grids must be non-empty".into()));
    }
    if config.beta_grid.windows(2).any(|w| w[0] >= w[1])
        || config.r_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(SurvError::Argument("grids must be strictly ascending".into()));
    }
    for &level in [config.alpha, config.alpha1].iter() {
        if !(level > 0.0 && level < 1.0) {
            return Err(SurvError::Argument(format!(
                "levels must lie in (0, 1), got {level}"
            )));
        }
    }
    let n_stats = config.statistics.len();

    // Shared null calibration: simulate H0 once per replicate, evaluate
    // every statistic on the same table.
    let null_beta = config.beta_grid[0];
    let null_params = calibrate(
        config.t_len,
        null_beta,
        0.0,
        config.x0,
        config.y0,
        config.lambda_bar,
    )?;
    let null_samples: Vec<Vec<f64>> = (0..config.n_null_sims)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(config.master_seed, &[u64::MAX, rep as u64]);
            let out = simulate(&null_params, Hypothesis::H0, seed);
            config
                .statistics
                .iter()
                .map(|s| s.eval(&out.table, config.gamma0))
                .collect()
        })
        .collect();
    let calibrations: Vec<NullCalibration> = (0..n_stats)
        .map(|si| {
            let mut sample: Vec<f64> = null_samples.iter().map(|row| row[si]).collect();
            sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = (((1.0 - config.alpha) * config.n_null_sims as f64).ceil() as usize)
                .clamp(1, config.n_null_sims);
            let quantile = sample[idx - 1];
            NullCalibration {
                statistic_name: config.statistics[si].name().to_string(),
                n_sims: config.n_null_sims,
                sample,
                alpha: config.alpha,
                quantile,
                seed: config.master_seed,
            }
        })
        .collect();

    // Per-cell powers; H1 tables shared across statistics within a cell.
    let cells: Vec<(usize, usize)> = (0..config.beta_grid.len())
        .flat_map(|bi| (0..config.r_grid.len()).map(move |ri| (bi, ri)))
        .collect();
    let cell_counts: Vec<Vec<usize>> = cells
        .par_iter()
        .map(|&(bi, ri)| {
            let params = calibrate(
                config.t_len,
                config.beta_grid[bi],
                config.r_grid[ri],
                config.x0,
                config.y0,
                config.lambda_bar,
            )
            .map_err(|e| {
                SurvError::Argument(format!(
                    "cell (beta={}, r={}): {e}",
                    config.beta_grid[bi], config.r_grid[ri]
                ))
            })?;
            let mut counts = vec![0usize; n_stats];
            for rep in 0..config.n_reps {
                let seed = derive_seed(
                    config.master_seed,
                    &[bi as u64, ri as u64, rep as u64],
                );
                let out = simulate(&params, Hypothesis::H1, seed);
                for (si, stat) in config.statistics.iter().enumerate() {
                    if stat.eval(&out.table, config.gamma0) > calibrations[si].quantile {
                        counts[si] += 1;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;

    let mut grids = Vec::with_capacity(n_stats);
    let mut curves = Vec::with_capacity(n_stats);
    for (si, &stat) in config.statistics.iter().enumerate() {
        let mut power = vec![vec![0.0; config.r_grid.len()]; config.beta_grid.len()];
        let mut flags = vec![vec![false; config.r_grid.len()]; config.beta_grid.len()];
        for (ci, &(bi, ri)) in cells.iter().enumerate() {
            let b_hat = cell_counts[ci][si] as f64 / config.n_reps as f64;
            power[bi][ri] = b_hat;
            flags[bi][ri] =
                substantial(b_hat, config.n_reps as u64, config.alpha, config.alpha1)?;
        }
        let mut points = Vec::with_capacity(config.beta_grid.len());
        for (bi, &beta) in config.beta_grid.iter().enumerate() {
            let fit = logistic_fit(&config.r_grid, &flags[bi])?;
            let estimate = if fit.separated {
                if flags[bi][0] {
                    RhoEstimate::AtMostMin(config.r_grid[0])
                } else {
                    RhoEstimate::AboveMax(*config.r_grid.last().unwrap())
                }
            } else {
                match rho_hat(fit.theta0, fit.theta1) {
                    Some(v) => RhoEstimate::Value(v),
                    None => RhoEstimate::Undefined,
                }
            };
            points.push(TransitionPoint {
                beta,
                theta0: fit.theta0,
                theta1: fit.theta1,
                rho_hat: estimate,
                rho_theory: rho_theory(beta)?,
                rho_bonf: rho_bonf(beta)?,
            });
        }
        grids.push(PowerGrid {
            statistic: stat,
            beta_grid: config.beta_grid.clone(),
            r_grid: config.r_grid.clone(),
            power,
            substantial: flags,
            n_reps: config.n_reps,
            alpha: config.alpha,
            alpha1: config.alpha1,
            null_quantile: calibrations[si].quantile,
        });
        curves.push(TransitionCurve {
            statistic: stat,
            points,
        });
    }
    Ok(GridRunResult { grids, curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_binom_sf(k: u64, n: u64, p: f64) -> f64 {
        // direct enumeration oracle, fine for n <= ~1000
        let mut sum = 0.0;
        for j in k..=n {
            let mut ln = 0.0;
            for i in 0..j {
                ln += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            }
            sum += (ln + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp();
        }
        sum
    }

    #[test]
    fn binom_sf_examples() {
        assert_eq!(binom_sf(0, 10, 0.3).unwrap(), 1.0);
        assert!((binom_sf(2, 2, 0.5).unwrap() - 0.25).abs() < 1e-12);
        assert!(binom_sf(100, 1000, 0.05).unwrap() <= 1e-9);
    }

    #[test]
    fn binom_sf_matches_enumeration() {
        for (k, n, p) in [(3u64, 20u64, 0.1), (7, 50, 0.4), (1, 5, 0.9), (12, 12, 0.6)] {
            let got = binom_sf(k, n, p).unwrap();
            let want = exact_binom_sf(k, n, p);
            assert!((got - want).abs() < 1e-12, "k={k} n={n} p={p}");
        }
    }

    #[test]
    fn substantiality_examples() {
        assert!(!substantial(0.0, 1000, 0.05, 0.05).unwrap());
        assert!(substantial(0.10, 1000, 0.05, 0.05).unwrap());
        assert!(!substantial(0.05, 1000, 0.05, 0.05).unwrap());
    }

    #[test]
    fn substantiality_is_monotone_in_power() {
        let mut last = false;
        for k in 0..=100u64 {
            let now = substantial(k as f64 / 100.0, 100, 0.05, 0.05).unwrap();
            assert!(now >= last);
            last = now;
        }
    }

    #[test]
    fn logistic_fit_step_response() {
        let r: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<bool> = r.iter().map(|&v| v >= 1.0).collect();
        let fit = logistic_fit(&r, &y).unwrap();
        assert!(!fit.separated);
        let rho = rho_hat(fit.theta0, fit.theta1).unwrap();
        assert!((0.9..=1.0).contains(&rho), "rho = {rho}");
    }

    #[test]
    fn logistic_fit_flags_separation() {
        let r = [0.0, 0.5, 1.0];
        assert!(logistic_fit(&r, &[true, true, true]).unwrap().separated);
        assert!(logistic_fit(&r, &[false, false, false]).unwrap().separated);
    }

    #[test]
    fn rho_hat_solves_crossing() {
        assert_eq!(rho_hat(1.0, -1.0), Some(1.0));
        assert_eq!(rho_hat(0.0, -2.0), Some(0.0));
        assert_eq!(rho_hat(0.5, 0.0), None);
    }

    #[test]
    fn theory_curve_values() {
        assert!((rho_theory(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(rho_theory(0.5).unwrap(), 0.0);
        assert!((rho_theory(0.99).unwrap() - 1.62).abs() < 1e-12);
        assert!((rho_bonf(0.6).unwrap() - 0.27018).abs() < 1e-5);
        assert!(rho_theory(0.0).is_err());
        assert!(rho_theory(1.0).is_err());
    }

    #[test]
    fn theory_curve_continuous_and_dominated() {
        // continuity at 3/4 and rho <= rho_bonf with equality on [3/4, 1)
        let left = rho_theory(0.75 - 1e-12).unwrap();
        let right = rho_theory(0.75).unwrap();
        assert!((left - right).abs() < 1e-9);
        let mut prev = 0.0;
        for i in 1..1000 {
            let beta = i as f64 / 1000.0;
            let rho = rho_theory(beta).unwrap();
            let bonf = rho_bonf(beta).unwrap();
            assert!(rho <= bonf + 1e-15);
            assert!(rho >= prev);
            if beta >= 0.75 {
                assert!((rho - bonf).abs() < 1e-15);
            }
            prev = rho;
        }
    }

    #[test]
    fn power_cell_rejects_mismatched_calibration() {
        let params = calibrate(10, 0.6, 1.0, Some(50), Some(50), Some(0.1)).unwrap();
        let calib = NullCalibration {
            statistic_name: "logrank".into(),
            n_sims: 10,
            sample: vec![0.0; 10],
            alpha: 0.05,
            quantile: 0.0,
            seed: 0,
        };
        assert!(power_cell(&params, Statistic::Hchg, 0.3, &calib, 5, 1).is_err());
    }

    #[test]
    fn grid_is_deterministic() {
        let config = GridConfig {
            beta_grid: vec![0.6, 0.8],
            r_grid: vec![0.5, 1.5],
            t_len: 50,
            x0: None,
            y0: None,
            lambda_bar: None,
            n_reps: 20,
            n_null_sims: 50,
            alpha: 0.05,
            alpha1: 0.05,
            gamma0: 0.3,
            statistics: vec![Statistic::Hchg, Statistic::Logrank],
            master_seed: 99,
        };
        let a = run_grid(&config).unwrap();
        let b = run_grid(&config).unwrap();
        assert_eq!(a.grids[0].power, b.grids[0].power);
        assert_eq!(a.grids[1].power, b.grids[1].power);
    }
}
