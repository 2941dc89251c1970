//! Classical comparison baselines: the log-rank statistic and its
//! weighted variants, plus the Fisher / min-P / FDR* combiners of the
//! hypergeometric P-values.

use crate::data::IntervalTable;
use crate::hyg::PValueSeries;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRankResult {
    pub statistic: f64,
    pub numerator: f64,
    pub variance: f64,
    pub e_t: Vec<f64>,
    pub v_t: Vec<f64>,
    /// Set when the total variance is zero and the statistic is reported
    /// as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    LogRank,
    Gehan,
    TaroneWare,
    Peto,
    FlemingHarrington { p: f64, q: f64 },
}

/// Pooled survival proportion lagged by one interval: the weight for
/// interval `t` uses the pooled curve at `t - 1`, with value 1 at t = 0.
fn pooled_survival_lagged(table: &IntervalTable) -> Vec<f64> {
    let t_len = table.len();
    let n0 = table.n_x_prev[0] + table.n_y_prev[0];
    let mut out = Vec::with_capacity(t_len);
    let mut at_risk = n0;
    let mut cum_censored = 0u64;
    for t in 0..t_len {
        let denom = n0 - cum_censored;
        out.push(if denom == 0 {
            0.0
        } else {
            at_risk as f64 / denom as f64
        });
        at_risk -= table.o_x[t] + table.o_y[t] + table.c_x[t] + table.c_y[t];
        cum_censored += table.c_x[t] + table.c_y[t];
    }
    out
}

/// Weighted log-rank statistic `sum w_t (o_y(t) - e_t) / sqrt(sum w_t^2 v_t)`.
///
/// Intervals with pooled at-risk count <= 1 contribute zero to both sums.
pub fn weighted_logrank(table: &IntervalTable, scheme: WeightScheme) -> LogRankResult {
    let t_len = table.len();
    let survival = match scheme {
        WeightScheme::Peto | WeightScheme::FlemingHarrington { .. } => {
            Some(pooled_survival_lagged(table))
        }
        _ => None,
    };
    let mut e_t = Vec::with_capacity(t_len);
    let mut v_t = Vec::with_capacity(t_len);
    let mut numerator = 0.0;
    let mut variance = 0.0;
    for t in 0..t_len {
        let nx = table.n_x_prev[t] as f64;
        let ny = table.n_y_prev[t] as f64;
        let n = nx + ny;
        let o = (table.o_x[t] + table.o_y[t]) as f64;
        if n <= 1.0 {
            e_t.push(0.0);
            v_t.push(0.0);
            continue;
        }
        let e = o * ny / n;
        let v = (ny * nx / (n - 1.0)) * (o / n) * (1.0 - o / n);
        let w = match scheme {
            WeightScheme::LogRank => 1.0,
            WeightScheme::Gehan => n,
            WeightScheme::TaroneWare => n.sqrt(),
            WeightScheme::Peto => survival.as_ref().unwrap()[t],
            WeightScheme::FlemingHarrington { p, q } => {
                let s = survival.as_ref().unwrap()[t];
                s.powf(p) * (1.0 - s).powf(q)
            }
        };
        e_t.push(e);
        v_t.push(v);
        numerator += w * (table.o_y[t] as f64 - e);
        variance += w * w * v;
    }
    let degenerate = variance <= 0.0;
    LogRankResult {
        statistic: if degenerate {
            0.0
        } else {
            numerator / variance.sqrt()
        },
        numerator,
        variance,
        e_t,
        v_t,
        degenerate,
    }
}

/// The unweighted log-rank statistic; large values indicate excess
/// events in group y.
pub fn logrank(table: &IntervalTable) -> LogRankResult {
    weighted_logrank(table, WeightScheme::LogRank)
}

/// Fisher combination `F_T = 2 sum log(1/p_t)`; `+inf` when some p is 0.
pub fn fisher_stat(pvalues: &PValueSeries) -> f64 {
    2.0 * pvalues.values.iter().map(|p| -p.ln()).sum::<f64>()
}

/// The smallest P-value (the Bonferroni test statistic is `1/min_p`).
pub fn min_p(pvalues: &PValueSeries) -> f64 {
    pvalues.values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// The FDR functional `min_t p_(t) / t` over the sorted P-values.
pub fn fdr_star(pvalues: &PValueSeries) -> f64 {
    let mut sorted = pvalues.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| p / (i + 1) as f64)
        .fold(f64::INFINITY, f64::min)
}
