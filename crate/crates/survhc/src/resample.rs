//! Simulated null distributions: random group relabeling, empirical
//! quantiles, and permutation P-values. Expensive calibrations can be
//! persisted as a JSON header plus a CSV of the sorted sample.

use crate::data::{Group, IntervalTable, SurvivalDataset};
use crate::error::{Result, SurvError};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A simulated null distribution of one statistic together with its
/// empirical `1 - alpha` quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCalibration {
    pub statistic_name: String,
    pub n_sims: usize,
    /// Sorted ascending.
    pub sample: Vec<f64>,
    pub alpha: f64,
    pub quantile: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CalibrationHeader {
    statistic_name: String,
    n_sims: usize,
    alpha: f64,
    quantile: f64,
    seed: u64,
}

/// Ceiling-index empirical quantile: `sample[ceil((1 - alpha) * n)]`,
/// 1-based.
fn quantile_index(n: usize, alpha: f64) -> usize {
    (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n)
}

/// Run `n_sims` independent null replicates of `statistic` and return the
/// sorted sample with its `1 - alpha` quantile.
///
/// `statistic` receives the replicate's derived seed; replicates run in
/// parallel and the result is independent of scheduling.
pub fn null_quantile<F>(
    statistic_name: &str,
    statistic: F,
    n_sims: usize,
    alpha: f64,
    master_seed: u64,
) -> Result<NullCalibration>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if n_sims == 0 {
        return Err(SurvError::Argument("n_sims must be positive".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SurvError::Argument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut sample = (0..n_sims)
        .into_par_iter()
        .map(|i| {
            statistic(crate::seed::derive_seed(master_seed, &[i as u64])).map_err(|e| {
                SurvError::Replicate {
                    replicate: i,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = sample[quantile_index(n_sims, alpha) - 1];
    Ok(NullCalibration {
        statistic_name: statistic_name.to_string(),
        n_sims,
        sample,
        alpha,
        quantile,
        seed: master_seed,
    })
}

/// Add-one permutation P-value `(1 + #{null >= observed}) / (1 + N0)`.
pub fn empirical_pvalue(observed: f64, calib: &NullCalibration) -> f64 {
    let below = calib.sample.partition_point(|&v| v < observed);
    let ge = calib.n_sims - below;
    (1 + ge) as f64 / (1 + calib.n_sims) as f64
}

/// Randomly relabel groups: exactly `floor(n/2)` subjects become x and
/// the rest y, uniformly over such assignments; (time, status) pairs are
/// untouched.
pub fn permute_groups<R: Rng>(data: &SurvivalDataset, rng: &mut R) -> Result<SurvivalDataset> {
    let n = data.subjects.len();
    if n < 2 {
        return Err(SurvError::Argument(
            "relabeling needs at least 2 subjects".into(),
        ));
    }
    let labels = random_split_labels(n, rng);
    let subjects = data
        .subjects
        .iter()
        .zip(labels)
        .map(|(s, group)| crate::data::SubjectRecord { group, ..*s })
        .collect();
    SurvivalDataset::new(subjects)
}

/// A uniformly random assignment of `floor(n/2)` X labels among n slots.
fn random_split_labels<R: Rng>(n: usize, rng: &mut R) -> Vec<Group> {
    let mut idx: Vec<usize> = (0..n).collect();
    let n_x = n / 2;
    // partial Fisher-Yates: the first n_x entries are a uniform subset
    for i in 0..n_x {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut labels = vec![Group::Y; n];
    for &i in &idx[..n_x] {
        labels[i] = Group::X;
    }
    labels
}

/// Per-subject fate reconstructed from an interval table. Relabeling at
/// this level is equivalent to relabeling subjects and re-binning, since
/// relabeling never moves a subject's time.
#[derive(Debug, Clone, Copy)]
enum Fate {
    Event(usize),
    Censored(usize),
    Survivor,
}

fn table_fates(table: &IntervalTable, group: Group) -> Vec<Fate> {
    let mut fates = Vec::new();
    for t in 1..=table.len() {
        for _ in 0..table.events(group, t) {
            fates.push(Fate::Event(t));
        }
        for _ in 0..table.censored(group, t) {
            fates.push(Fate::Censored(t));
        }
    }
    for _ in 0..table.n_after(group, table.len()) {
        fates.push(Fate::Survivor);
    }
    fates
}

/// Relabel the subjects underlying an interval table: pool both groups,
/// assign `floor(n/2)` to x and the rest to y uniformly, rebuild counts.
pub fn relabel_table<R: Rng>(table: &IntervalTable, rng: &mut R) -> Result<IntervalTable> {
    let mut fates = table_fates(table, Group::X);
    fates.extend(table_fates(table, Group::Y));
    let n = fates.len();
    if n < 2 {
        return Err(SurvError::Argument(
            "relabeling needs at least 2 subjects".into(),
        ));
    }
    let labels = random_split_labels(n, rng);
    let t_len = table.len();
    let mut o_x = vec![0u64; t_len];
    let mut o_y = vec![0u64; t_len];
    let mut c_x = vec![0u64; t_len];
    let mut c_y = vec![0u64; t_len];
    let (mut x0, mut y0) = (0u64, 0u64);
    for (fate, label) in fates.iter().zip(labels) {
        match label {
            Group::X => x0 += 1,
            Group::Y => y0 += 1,
        }
        match (fate, label) {
            (Fate::Event(t), Group::X) => o_x[t - 1] += 1,
            (Fate::Event(t), Group::Y) => o_y[t - 1] += 1,
            (Fate::Censored(t), Group::X) => c_x[t - 1] += 1,
            (Fate::Censored(t), Group::Y) => c_y[t - 1] += 1,
            (Fate::Survivor, _) => {}
        }
    }
    let mut n_x_prev = vec![0u64; t_len];
    let mut n_y_prev = vec![0u64; t_len];
    n_x_prev[0] = x0;
    n_y_prev[0] = y0;
    for t in 1..t_len {
        n_x_prev[t] = n_x_prev[t - 1] - o_x[t - 1] - c_x[t - 1];
        n_y_prev[t] = n_y_prev[t - 1] - o_y[t - 1] - c_y[t - 1];
    }
    IntervalTable::new(n_x_prev, n_y_prev, o_x, o_y, c_x, c_y)
}

fn with_suffix(stem: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    std::path::PathBuf::from(s)
}

impl NullCalibration {
    /// Persist as `<stem>.json` (header) and `<stem>.csv` (sorted sample).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let header = CalibrationHeader {
            statistic_name: self.statistic_name.clone(),
            n_sims: self.n_sims,
            alpha: self.alpha,
            quantile: self.quantile,
            seed: self.seed,
        };
        std::fs::write(
            with_suffix(stem, ".json"),
            serde_json::to_string_pretty(&header)?,
        )?;
        let mut csv = String::with_capacity(self.sample.len() * 12);
        csv.push_str("value\n");
        for v in &self.sample {
            csv.push_str(&format!("{v}\n"));
        }
        std::fs::write(with_suffix(stem, ".csv"), csv)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let header: CalibrationHeader =
            serde_json::from_str(&std::fs::read_to_string(with_suffix(stem, ".json"))?)?;
        let csv = std::fs::read_to_string(with_suffix(stem, ".csv"))?;
        let mut sample = Vec::with_capacity(header.n_sims);
        for (i, line) in csv.lines().enumerate() {
            if i == 0 {
                continue;
            }
            sample.push(line.parse::<f64>().map_err(|_| SurvError::Parse {
                line: i + 1,
                msg: format!("bad sample value {line:?}"),
            })?);
        }
        if sample.len() != header.n_sims {
            return Err(SurvError::Validation(format!(
                "calibration sample size {} does not match header n_sims {}",
                sample.len(),
                header.n_sims
            )));
        }
        if sample.windows(2).any(|w| w[0] > w[1]) {
            return Err(SurvError::Validation(
                "calibration sample is not sorted".into(),
            ));
        }
        Ok(NullCalibration {
            statistic_name: header.statistic_name,
            n_sims: header.n_sims,
            sample,
            alpha: header.alpha,
            quantile: header.quantile,
            seed: header.seed,
        })
    }
}
