//! Exact hypergeometric kernels: PMF, upper-tail probability, the
//! per-interval one-sided P-value series, and the randomized P-value.

use crate::data::IntervalTable;
use crate::error::{Result, SurvError};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Parameters of `HyG(M, N, n)`: draw `n` items without replacement from
/// a population of `M` items containing `N` type-A items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HygParams {
    pub population: u64,
    pub type_a: u64,
    pub draws: u64,
}

impl HygParams {
    pub fn new(population: u64, type_a: u64, draws: u64) -> Result<Self> {
        if type_a > population || draws > population {
            return Err(SurvError::Argument(format!(
                "invalid hypergeometric parameters: M={population}, N={type_a}, n={draws}"
            )));
        }
        Ok(Self {
            population,
            type_a,
            draws,
        })
    }

    /// Support of the count: `[max(0, n - (M - N)), min(n, N)]`.
    pub fn support(&self) -> (u64, u64) {
        let lo = self
            .draws
            .saturating_sub(self.population - self.type_a);
        let hi = self.draws.min(self.type_a);
        (lo, hi)
    }
}

/// Direction of the one-sided per-interval test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Tests for excess events in group y.
    YExcess,
    /// Tests for excess events in group x (roles of x and y swapped).
    XExcess,
}

/// The hypergeometric P-values `p_1..p_T` for one test direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSeries {
    pub values: Vec<f64>,
    pub direction: Direction,
}

fn ln_binom(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn ln_pmf_at(params: &HygParams, k: u64) -> f64 {
    ln_binom(params.type_a, k) + ln_binom(params.population - params.type_a, params.draws - k)
        - ln_binom(params.population, params.draws)
}

/// `Pr(HyG(M, N, n) = k)`; 0 outside the support.
pub fn hyg_pmf(params: &HygParams, k: i64) -> f64 {
    let (lo, hi) = params.support();
    if k < 0 || (k as u64) < lo || (k as u64) > hi {
        return 0.0;
    }
    ln_pmf_at(params, k as u64).exp()
}

/// Upper tail `Pr(HyG(M, N, n) >= m)`.
///
/// Exactly 1 at or below the lower support bound and exactly 0 above the
/// upper bound. Terms are accumulated from `m` upward via the PMF
/// recurrence with compensated summation, stopping once past the mode and
/// below `1e-18` of the running sum.
pub fn hyg_sf(params: &HygParams, m: i64) -> f64 {
    let (lo, hi) = params.support();
    if m <= lo as i64 {
        return 1.0;
    }
    if m > hi as i64 {
        return 0.0;
    }
    let m = m as u64;
    let n_f = params.draws as f64;
    let big_n = params.type_a as f64;
    let big_m = params.population as f64;

    let mut term = ln_pmf_at(params, m).exp();
    let mut sum = term;
    let mut comp = 0.0_f64; // Kahan compensation
    let mut k = m;
    while k < hi {
        let kf = k as f64;
        let ratio = (big_n - kf) * (n_f - kf) / ((kf + 1.0) * (big_m - big_n - n_f + kf + 1.0));
        term *= ratio;
        if ratio < 1.0 && term < 1e-18 * sum {
            break;
        }
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        k += 1;
    }
    sum.min(1.0)
}

/// The per-interval hypergeometric P-value series of a count table.
///
/// For `YExcess`: `p_t = Pr(HyG(n_x(t-1)+n_y(t-1), n_y(t-1), o_x(t)+o_y(t)) >= o_y(t))`.
/// Intervals with no events yield `p_t = 1`.
pub fn interval_pvalues(table: &IntervalTable, direction: Direction) -> PValueSeries {
    let mut values = Vec::with_capacity(table.len());
    for t in 1..=table.len() {
        let (nx, ny, ox, oy) = (
            table.n_x_prev[t - 1],
            table.n_y_prev[t - 1],
            table.o_x[t - 1],
            table.o_y[t - 1],
        );
        let (type_a, m) = match direction {
            Direction::YExcess => (ny, oy),
            Direction::XExcess => (nx, ox),
        };
        let total_events = ox + oy;
        if total_events == 0 {
            values.push(1.0);
            continue;
        }
        let params = HygParams {
            population: nx + ny,
            type_a,
            draws: total_events,
        };
        values.push(hyg_sf(&params, m as i64));
    }
    PValueSeries { values, direction }
}

/// Randomized P-value `sf(m) - u * pmf(m)`, clamped to `[0, 1]`.
///
/// Both terms use the same type-A count, which makes the result exactly
/// uniform over (0,1) under the null.
pub fn randomized_pvalue(params: &HygParams, m: i64, u: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(SurvError::Argument(format!(
            "randomization draw must lie in [0,1), got {u}"
        )));
    }
    let value = hyg_sf(params, m) - u * hyg_pmf(params, m);
    Ok(value.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::IntervalTable;

    /// Exact rational oracle via u128 binomials, valid for M <= 60.
    fn binom_table(max_n: usize) -> Vec<Vec<u128>> {
        let mut c = vec![vec![0u128; max_n + 1]; max_n + 1];
        for n in 0..=max_n {
            c[n][0] = 1;
            for k in 1..=n {
                c[n][k] = c[n - 1][k - 1] + if k <= n - 1 { c[n - 1][k] } else { 0 };
            }
        }
        c
    }

    fn exact_sf(c: &[Vec<u128>], m_pop: u64, n_a: u64, n_draw: u64, m: i64) -> f64 {
        let lo = n_draw.saturating_sub(m_pop - n_a);
        let hi = n_draw.min(n_a);
        let mut num: u128 = 0;
        for k in lo..=hi {
            if (k as i64) >= m {
                num += c[n_a as usize][k as usize]
                    * c[(m_pop - n_a) as usize][(n_draw - k) as usize];
            }
        }
        num as f64 / c[m_pop as usize][n_draw as usize] as f64
    }

    #[test]
    fn pmf_small_enumeration() {
        let p = HygParams::new(4, 2, 2).unwrap();
        assert!((hyg_pmf(&p, 1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_outside_support_is_zero() {
        let p = HygParams::new(10, 4, 3).unwrap();
        assert_eq!(hyg_pmf(&p, -1), 0.0);
        assert_eq!(hyg_pmf(&p, 5), 0.0);
    }

    #[test]
    fn pmf_all_type_a() {
        let p = HygParams::new(5, 5, 3).unwrap();
        assert!((hyg_pmf(&p, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sf_examples() {
        let p = HygParams::new(4, 2, 2).unwrap();
        assert!((hyg_sf(&p, 1) - 5.0 / 6.0).abs() < 1e-12);
        let p = HygParams::new(20, 10, 2).unwrap();
        assert!((hyg_sf(&p, 2) - 9.0 / 38.0).abs() < 1e-12);
        assert_eq!(hyg_sf(&p, 0), 1.0);
    }

    #[test]
    fn sf_matches_exact_oracle_small() {
        let c = binom_table(25);
        for m_pop in 1..=25u64 {
            for n_a in 0..=m_pop {
                for n_draw in 0..=m_pop {
                    let p = HygParams::new(m_pop, n_a, n_draw).unwrap();
                    let (_, hi) = p.support();
                    for m in 0..=(hi as i64 + 1) {
                        let got = hyg_sf(&p, m);
                        let want = exact_sf(&c, m_pop, n_a, n_draw, m);
                        assert!(
                            (got - want).abs() < 1e-12,
                            "M={m_pop} N={n_a} n={n_draw} m={m}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn sf_difference_is_pmf() {
        let cases = [(30u64, 12u64, 9u64), (50, 25, 20), (17, 3, 11)];
        for (m_pop, n_a, n_draw) in cases {
            let p = HygParams::new(m_pop, n_a, n_draw).unwrap();
            let (lo, hi) = p.support();
            for m in lo as i64..=hi as i64 {
                let diff = hyg_sf(&p, m) - hyg_sf(&p, m + 1);
                assert!((diff - hyg_pmf(&p, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interval_pvalue_directions() {
        let table = IntervalTable::new(
            vec![10],
            vec![10],
            vec![0],
            vec![2],
            vec![0],
            vec![0],
        )
        .unwrap();
        let py = interval_pvalues(&table, Direction::YExcess);
        assert!((py.values[0] - 9.0 / 38.0).abs() < 1e-12);
        let px = interval_pvalues(&table, Direction::XExcess);
        assert_eq!(px.values[0], 1.0);
    }

    #[test]
    fn interval_pvalue_zero_events() {
        let table = IntervalTable::new(
            vec![10],
            vec![10],
            vec![0],
            vec![0],
            vec![0],
            vec![0],
        )
        .unwrap();
        let p = interval_pvalues(&table, Direction::YExcess);
        assert_eq!(p.values[0], 1.0);
    }

    #[test]
    fn directional_pvalues_overlap_at_atom() {
        // p_y + p_x >= 1: the observed atom is counted in both tails.
        let table = IntervalTable::new(
            vec![14, 10, 8],
            vec![12, 9, 6],
            vec![3, 2, 1],
            vec![2, 1, 3],
            vec![1, 0, 0],
            vec![1, 2, 0],
        )
        .unwrap();
        let py = interval_pvalues(&table, Direction::YExcess);
        let px = interval_pvalues(&table, Direction::XExcess);
        for t in 0..table.len() {
            assert!(py.values[t] + px.values[t] >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn randomized_pvalue_cases() {
        // zero-event interval: sf = pmf = 1 at m = 0
        let p = HygParams::new(20, 10, 0).unwrap();
        assert!((randomized_pvalue(&p, 0, 0.25).unwrap() - 0.75).abs() < 1e-12);

        let p = HygParams::new(20, 10, 2).unwrap();
        assert!((randomized_pvalue(&p, 2, 0.5).unwrap() - 9.0 / 76.0).abs() < 1e-12);
        assert_eq!(randomized_pvalue(&p, 2, 0.0).unwrap(), hyg_sf(&p, 2));
    }

    #[test]
    fn randomized_pvalue_rejects_bad_u() {
        let p = HygParams::new(20, 10, 2).unwrap();
        assert!(randomized_pvalue(&p, 1, 1.0).is_err());
        assert!(randomized_pvalue(&p, 1, -0.1).is_err());
    }
}
