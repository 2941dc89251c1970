//! Piece-wise homogeneous exponential decay generator with rare and weak
//! departures: Poisson event counts per interval, with the y-group rate
//! perturbed on a random sparse set of intervals.

use crate::data::IntervalTable;
use crate::error::{Result, SurvError};
use crate::seed::derived_rng;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

/// Decay-model parameters with the `(beta, r)` calibration materialized:
/// `epsilon = T^(-beta)`, `delta(t) = (r/2) ln(T) / n(t)` with
/// `n(t) = ((x0 + y0)/2) e^(-lambda_bar t)`, and
/// `lambda_prime(t) = (sqrt(lambda_bar) + sqrt(delta(t)))^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayParams {
    pub t_len: usize,
    pub x0: u64,
    pub y0: u64,
    pub lambda_bar: f64,
    pub beta: f64,
    pub r: f64,
    pub epsilon: f64,
    /// `delta(t)` for t = 1..=T, indexed by t - 1.
    pub delta: Vec<f64>,
    /// `lambda_prime(t)` for t = 1..=T, indexed by t - 1.
    pub lambda_prime: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H0,
    H1,
}

/// One simulated cohort: the count table (no censoring) plus the ground
/// truth set of perturbed intervals (1-based; empty under H0).
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub table: IntervalTable,
    pub nonnull_set: Vec<usize>,
    pub seed: u64,
}

/// Materialize `DecayParams` from `(T, beta, r)`, defaulting
/// `x0 = y0 = round(T ln T)` and `lambda_bar = 2/T` when omitted.
pub fn calibrate(
    t_len: usize,
    beta: f64,
    r: f64,
    x0: Option<u64>,
    y0: Option<u64>,
    lambda_bar: Option<f64>,
) -> Result<DecayParams> {
    if t_len < 2 {
        return Err(SurvError::Argument("T must be at least 2".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SurvError::Argument(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if !(r >= 0.0) {
        return Err(SurvError::Argument(format!("r must be >= 0, got {r}")));
    }
    let t_f = t_len as f64;
    let default_n0 = (t_f * t_f.ln()).round() as u64;
    let x0 = x0.unwrap_or(default_n0);
    let y0 = y0.unwrap_or(default_n0);
    if x0 == 0 || y0 == 0 {
        return Err(SurvError::Argument("x0 and y0 must be positive".into()));
    }
    let lambda_bar = lambda_bar.unwrap_or(2.0 / t_f);
    if !(lambda_bar > 0.0 && lambda_bar <= 1.0) {
        return Err(SurvError::Argument(format!(
            "lambda_bar must lie in (0, 1], got {lambda_bar}"
        )));
    }
    let epsilon = t_f.powf(-beta);
    let half_pop = (x0 + y0) as f64 / 2.0;
    let mut delta = Vec::with_capacity(t_len);
    let mut lambda_prime = Vec::with_capacity(t_len);
    for t in 1..=t_len {
        let n_t = half_pop * (-lambda_bar * t as f64).exp();
        let d = (r / 2.0) * t_f.ln() / n_t;
        delta.push(d);
        // exact equality with lambda_bar when r = 0, so H1 at r = 0
        // reproduces H0 bit for bit
        lambda_prime.push(if d == 0.0 {
            lambda_bar
        } else {
            let s = lambda_bar.sqrt() + d.sqrt();
            s * s
        });
    }
    Ok(DecayParams {
        t_len,
        x0,
        y0,
        lambda_bar,
        beta,
        r,
        epsilon,
        delta,
        lambda_prime,
    })
}

fn poisson_draw<R: Rng>(rng: &mut R, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// Simulate one cohort under `hypothesis`.
///
/// The RNG is split into a membership stream and an event stream, both
/// derived from `seed`; under H1 the perturbed set is drawn first for all
/// t, then event counts per t. Poisson draws are clamped at the current
/// at-risk count.
pub fn simulate(params: &DecayParams, hypothesis: Hypothesis, seed: u64) -> SimOutcome {
    let t_len = params.t_len;
    let mut nonnull_set = Vec::new();
    if hypothesis == Hypothesis::H1 {
        let mut membership_rng = derived_rng(seed, &[0]);
        for t in 1..=t_len {
            if membership_rng.gen::<f64>() < params.epsilon {
                nonnull_set.push(t);
            }
        }
    }
    let mut events_rng = derived_rng(seed, &[1]);
    let mut n_x_prev = Vec::with_capacity(t_len);
    let mut n_y_prev = Vec::with_capacity(t_len);
    let mut o_x = Vec::with_capacity(t_len);
    let mut o_y = Vec::with_capacity(t_len);
    let (mut nx, mut ny) = (params.x0, params.y0);
    let mut nonnull_iter = nonnull_set.iter().peekable();
    for t in 1..=t_len {
        n_x_prev.push(nx);
        n_y_prev.push(ny);
        let rate_y = if nonnull_iter.peek() == Some(&&t) {
            nonnull_iter.next();
            params.lambda_prime[t - 1]
        } else {
            params.lambda_bar
        };
        let ox = poisson_draw(&mut events_rng, nx as f64 * params.lambda_bar).min(nx);
        let oy = poisson_draw(&mut events_rng, ny as f64 * rate_y).min(ny);
        o_x.push(ox);
        o_y.push(oy);
        nx -= ox;
        ny -= oy;
    }
    let zeros = vec![0u64; t_len];
    let table = IntervalTable {
        n_x_prev,
        n_y_prev,
        o_x,
        o_y,
        c_x: zeros.clone(),
        c_y: zeros,
    };
    SimOutcome {
        table,
        nonnull_set,
        seed,
    }
}
