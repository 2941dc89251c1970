//! The Higher Criticism statistic over hypergeometric P-values, the
//! HC-threshold departure set, and the one-sided / strict / two-way
//! decision procedures.

use crate::data::IntervalTable;
use crate::error::{Result, SurvError};
use crate::hyg::{interval_pvalues, Direction, PValueSeries};
use serde::Serialize;

/// Outcome of the HC maximization over the sorted P-values.
#[derive(Debug, Clone, PartialEq)]
pub struct HchgResult {
    /// The HCHG value; `f64::NEG_INFINITY` when every rank in range is
    /// degenerate (p in {0, 1}).
    pub statistic: f64,
    pub gamma0: f64,
    /// 1-based maximizing rank; 0 when degenerate.
    pub argmax_rank: usize,
    /// The order statistic `p_(i*)`; NaN when degenerate.
    pub threshold_p: f64,
    /// 1-based interval indices `t` with `p_t <= threshold_p`.
    pub delta_star: Vec<usize>,
    pub pvalues: PValueSeries,
}

impl HchgResult {
    pub fn is_degenerate(&self) -> bool {
        self.argmax_rank == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    OneSidedY,
    OneSidedX,
    StrictY,
    StrictX,
    TwoWay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestDecision {
    pub reject: bool,
    pub statistic: f64,
    pub critical_value: f64,
    pub mode: TestMode,
}

/// The HC statistic `max_{1 <= i <= max(1, floor(gamma0 * T))} HC_{i;T}`
/// with `HC_{i;T} = sqrt(T) * (i/T - p_(i)) / sqrt(p_(i) (1 - p_(i)))`.
///
/// Ranks with `p_(i) (1 - p_(i)) = 0` are excluded from the maximization.
pub fn hc_statistic(pvalues: &PValueSeries, gamma0: f64) -> Result<HchgResult> {
    let t_len = pvalues.values.len();
    if t_len == 0 {
        return Err(SurvError::Argument("empty P-value series".into()));
    }
    if !(gamma0 > 0.0 && gamma0 <= 1.0) {
        return Err(SurvError::Argument(format!(
            "gamma0 must lie in (0, 1], got {gamma0}"
        )));
    }
    // sort ascending, ties broken by original index
    let mut order: Vec<usize> = (0..t_len).collect();
    order.sort_by(|&a, &b| {
        pvalues.values[a]
            .partial_cmp(&pvalues.values[b])
            .unwrap()
            .then(a.cmp(&b))
    });

    let i_max = ((gamma0 * t_len as f64).floor() as usize).max(1);
    let sqrt_t = (t_len as f64).sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut best_rank = 0usize;
    for i in 1..=i_max.min(t_len) {
        let p = pvalues.values[order[i - 1]];
        let denom = p * (1.0 - p);
        if denom <= 0.0 {
            continue;
        }
        let term = sqrt_t * (i as f64 / t_len as f64 - p) / denom.sqrt();
        if term > best {
            best = term;
            best_rank = i;
        }
    }

    let (threshold_p, delta_star) = if best_rank == 0 {
        (f64::NAN, Vec::new())
    } else {
        let threshold = pvalues.values[order[best_rank - 1]];
        let delta = (0..t_len)
            .filter(|&t| pvalues.values[t] <= threshold)
            .map(|t| t + 1)
            .collect();
        (threshold, delta)
    };
    Ok(HchgResult {
        statistic: best,
        gamma0,
        argmax_rank: best_rank,
        threshold_p,
        delta_star,
        pvalues: pvalues.clone(),
    })
}

/// HCHG of a count table in one direction.
pub fn hchg(table: &IntervalTable, direction: Direction, gamma0: f64) -> Result<HchgResult> {
    hc_statistic(&interval_pvalues(table, direction), gamma0)
}

/// One-sided test: reject iff the HCHG statistic strictly exceeds the
/// critical value.
pub fn test_hchg(
    table: &IntervalTable,
    direction: Direction,
    gamma0: f64,
    critical_value: f64,
) -> Result<TestDecision> {
    let result = hchg(table, direction, gamma0)?;
    Ok(TestDecision {
        reject: result.statistic > critical_value,
        statistic: result.statistic,
        critical_value,
        mode: match direction {
            Direction::YExcess => TestMode::OneSidedY,
            Direction::XExcess => TestMode::OneSidedX,
        },
    })
}

/// Strictly one-sided test: reject for a group only when its direction
/// exceeds the critical value while the reversed direction does not.
pub fn test_strict(
    table: &IntervalTable,
    gamma0: f64,
    critical_value: f64,
) -> Result<TestDecision> {
    let stat_y = hchg(table, Direction::YExcess, gamma0)?.statistic;
    let stat_x = hchg(table, Direction::XExcess, gamma0)?.statistic;
    let y_rejects = stat_y > critical_value;
    let x_rejects = stat_x > critical_value;
    let (mode, statistic, reject) = match (y_rejects, x_rejects) {
        (true, false) => (TestMode::StrictY, stat_y, true),
        (false, true) => (TestMode::StrictX, stat_x, true),
        // both or neither: report the stronger direction, no rejection
        _ => {
            if stat_y >= stat_x {
                (TestMode::StrictY, stat_y, false)
            } else {
                (TestMode::StrictX, stat_x, false)
            }
        }
    };
    Ok(TestDecision {
        reject,
        statistic,
        critical_value,
        mode,
    })
}

/// Two-way "any effect" test: reject iff either direction exceeds the
/// critical value.
pub fn test_two_way(
    table: &IntervalTable,
    gamma0: f64,
    critical_value: f64,
) -> Result<TestDecision> {
    let stat_y = hchg(table, Direction::YExcess, gamma0)?.statistic;
    let stat_x = hchg(table, Direction::XExcess, gamma0)?.statistic;
    Ok(TestDecision {
        reject: stat_y > critical_value || stat_x > critical_value,
        statistic: stat_y.max(stat_x),
        critical_value,
        mode: TestMode::TwoWay,
    })
}
