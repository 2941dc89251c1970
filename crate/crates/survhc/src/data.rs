//! Core survival data types: subject-level records, per-interval count
//! tables, CSV ingestion, equal-width binning, and the survival curve.

use crate::error::{Result, SurvError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Event,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub time: f64,
    pub status: Status,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    pub subjects: Vec<SubjectRecord>,
}

impl SurvivalDataset {
    pub fn new(subjects: Vec<SubjectRecord>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(SurvError::Validation("dataset is empty".into()));
        }
        Ok(Self { subjects })
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.subjects.iter().filter(|s| s.group == group).count()
    }
}

/// Per-interval at-risk/event/censor counts for both groups over
/// intervals `t = 1..=T`. Vectors are indexed by `t - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalTable {
    pub n_x_prev: Vec<u64>,
    pub n_y_prev: Vec<u64>,
    pub o_x: Vec<u64>,
    pub o_y: Vec<u64>,
    pub c_x: Vec<u64>,
    pub c_y: Vec<u64>,
}

impl IntervalTable {
    pub fn new(
        n_x_prev: Vec<u64>,
        n_y_prev: Vec<u64>,
        o_x: Vec<u64>,
        o_y: Vec<u64>,
        c_x: Vec<u64>,
        c_y: Vec<u64>,
    ) -> Result<Self> {
        let table = Self {
            n_x_prev,
            n_y_prev,
            o_x,
            o_y,
            c_x,
            c_y,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.n_x_prev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_x_prev.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let t_len = self.n_x_prev.len();
        if t_len == 0 {
            return Err(SurvError::Validation("interval table is empty".into()));
        }
        for v in [
            &self.n_y_prev,
            &self.o_x,
            &self.o_y,
            &self.c_x,
            &self.c_y,
        ] {
            if v.len() != t_len {
                return Err(SurvError::Validation(
                    "interval table columns have unequal lengths".into(),
                ));
            }
        }
        for t in 0..t_len {
            if self.o_x[t] + self.c_x[t] > self.n_x_prev[t] {
                return Err(SurvError::Validation(format!(
                    "t={}: o_x + c_x exceeds n_x_prev",
                    t + 1
                )));
            }
            if self.o_y[t] + self.c_y[t] > self.n_y_prev[t] {
                return Err(SurvError::Validation(format!(
                    "t={}: o_y + c_y exceeds n_y_prev",
                    t + 1
                )));
            }
            if t + 1 < t_len {
                if self.n_x_prev[t + 1] != self.n_x_prev[t] - self.o_x[t] - self.c_x[t] {
                    return Err(SurvError::Validation(format!(
                        "t={}: n_x_prev is not self-consistent",
                        t + 2
                    )));
                }
                if self.n_y_prev[t + 1] != self.n_y_prev[t] - self.o_y[t] - self.c_y[t] {
                    return Err(SurvError::Validation(format!(
                        "t={}: n_y_prev is not self-consistent",
                        t + 2
                    )));
                }
            }
        }
        Ok(())
    }

    /// At-risk count in `group` at the start of interval `t` (1-based).
    pub fn n_prev(&self, group: Group, t: usize) -> u64 {
        match group {
            Group::X => self.n_x_prev[t - 1],
            Group::Y => self.n_y_prev[t - 1],
        }
    }

    pub fn events(&self, group: Group, t: usize) -> u64 {
        match group {
            Group::X => self.o_x[t - 1],
            Group::Y => self.o_y[t - 1],
        }
    }

    pub fn censored(&self, group: Group, t: usize) -> u64 {
        match group {
            Group::X => self.c_x[t - 1],
            Group::Y => self.c_y[t - 1],
        }
    }

    /// At-risk count after interval `t`: `n_prev(t) - o(t) - c(t)`.
    pub fn n_after(&self, group: Group, t: usize) -> u64 {
        self.n_prev(group, t) - self.events(group, t) - self.censored(group, t)
    }

    /// A copy of the table with the roles of groups x and y swapped.
    pub fn swapped(&self) -> IntervalTable {
        IntervalTable {
            n_x_prev: self.n_y_prev.clone(),
            n_y_prev: self.n_x_prev.clone(),
            o_x: self.o_y.clone(),
            o_y: self.o_x.clone(),
            c_x: self.c_y.clone(),
            c_y: self.c_x.clone(),
        }
    }
}

/// Survival proportions per group, `s(t) = n(t) / (n(0) - C(t))` with
/// `C(t)` the cumulative censored count up to `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KaplanMeierCurve {
    pub s_x: Vec<f64>,
    pub s_y: Vec<f64>,
}

fn parse_status(raw: &str, line: usize) -> Result<Status> {
    match raw {
        "1" | "event" => Ok(Status::Event),
        "0" | "censored" => Ok(Status::Censored),
        other => Err(SurvError::Parse {
            line,
            msg: format!("unknown status {other:?} (expected 1/0 or event/censored)"),
        }),
    }
}

fn parse_group(raw: &str, line: usize) -> Result<Group> {
    match raw {
        "x" => Ok(Group::X),
        "y" => Ok(Group::Y),
        other => Err(SurvError::Validation(format!(
            "line {line}: unknown group label {other:?} (expected x or y)"
        ))),
    }
}

/// Parse subject-level CSV with header `time,status,group`.
pub fn parse_subjects(text: &str) -> Result<SurvivalDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SurvError::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    if header.trim() != "time,status,group" {
        return Err(SurvError::Parse {
            line: 1,
            msg: format!("expected header `time,status,group`, got {header:?}"),
        });
    }
    let mut subjects = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(SurvError::Parse {
                line,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let time: f64 = fields[0].parse().map_err(|_| SurvError::Parse {
            line,
            msg: format!("bad time value {:?}", fields[0]),
        })?;
        if !time.is_finite() || time < 0.0 {
            return Err(SurvError::Validation(format!(
                "line {line}: time must be a non-negative real, got {time}"
            )));
        }
        let status = parse_status(fields[1], line)?;
        let group = parse_group(fields[2], line)?;
        subjects.push(SubjectRecord {
            time,
            status,
            group,
        });
    }
    SurvivalDataset::new(subjects)
}

/// Parse interval-count CSV with header `t,n_x_prev,n_y_prev,o_x,o_y[,c_x,c_y]`.
///
/// When the censor columns are missing they are reconstructed from the
/// self-consistency residual against the next row, or taken as 0 on the
/// last row.
pub fn parse_intervals(text: &str) -> Result<IntervalTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SurvError::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let with_censor = match header.trim() {
        "t,n_x_prev,n_y_prev,o_x,o_y" => false,
        "t,n_x_prev,n_y_prev,o_x,o_y,c_x,c_y" => true,
        other => {
            return Err(SurvError::Parse {
                line: 1,
                msg: format!("unexpected header {other:?}"),
            })
        }
    };
    let ncols = if with_censor { 7 } else { 5 };
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.trim().split(',').collect();
        if fields.len() != ncols {
            return Err(SurvError::Parse {
                line,
                msg: format!("expected {ncols} fields, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(ncols);
        for f in &fields {
            row.push(f.parse::<u64>().map_err(|_| SurvError::Parse {
                line,
                msg: format!("bad count value {f:?}"),
            })?);
        }
        let expected_t = rows.len() as u64 + 1;
        if row[0] != expected_t {
            return Err(SurvError::Parse {
                line,
                msg: format!("expected t={expected_t}, got t={} (gap or reorder)", row[0]),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SurvError::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    let t_len = rows.len();
    let mut n_x_prev = Vec::with_capacity(t_len);
    let mut n_y_prev = Vec::with_capacity(t_len);
    let mut o_x = Vec::with_capacity(t_len);
    let mut o_y = Vec::with_capacity(t_len);
    let mut c_x = Vec::with_capacity(t_len);
    let mut c_y = Vec::with_capacity(t_len);
    for (t, row) in rows.iter().enumerate() {
        n_x_prev.push(row[1]);
        n_y_prev.push(row[2]);
        o_x.push(row[3]);
        o_y.push(row[4]);
        if with_censor {
            c_x.push(row[5]);
            c_y.push(row[6]);
        } else if t + 1 < t_len {
            let residual = |prev: u64, o: u64, next: u64, col: &str| -> Result<u64> {
                prev.checked_sub(o)
                    .and_then(|after| after.checked_sub(next))
                    .ok_or_else(|| {
                        SurvError::Validation(format!(
                            "t={}: {col} counts are not self-consistent",
                            t + 1
                        ))
                    })
            };
            c_x.push(residual(row[1], row[3], rows[t + 1][1], "x")?);
            c_y.push(residual(row[2], row[4], rows[t + 1][2], "y")?);
        } else {
            c_x.push(0);
            c_y.push(0);
        }
    }
    IntervalTable::new(n_x_prev, n_y_prev, o_x, o_y, c_x, c_y)
}

/// Render an interval table in the canonical CSV column order.
pub fn render_intervals(table: &IntervalTable) -> String {
    let mut out = String::from("t,n_x_prev,n_y_prev,o_x,o_y,c_x,c_y\n");
    for t in 0..table.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t + 1,
            table.n_x_prev[t],
            table.n_y_prev[t],
            table.o_x[t],
            table.o_y[t],
            table.c_x[t],
            table.c_y[t]
        ));
    }
    out
}

/// Consolidate subject times into `t_bins` equal-width intervals.
///
/// Interval `t` covers `((t-1)w, t*w]` with `w = max_time / t_bins`;
/// time 0 is clamped into interval 1.
pub fn bin_subjects(data: &SurvivalDataset, t_bins: usize) -> Result<IntervalTable> {
    if t_bins == 0 {
        return Err(SurvError::Argument("number of bins must be positive".into()));
    }
    let max_time = data
        .subjects
        .iter()
        .map(|s| s.time)
        .fold(0.0_f64, f64::max);
    if max_time <= 0.0 {
        return Err(SurvError::Degenerate(
            "all subject times are 0; cannot form intervals".into(),
        ));
    }
    let width = max_time / t_bins as f64;
    let mut o_x = vec![0u64; t_bins];
    let mut o_y = vec![0u64; t_bins];
    let mut c_x = vec![0u64; t_bins];
    let mut c_y = vec![0u64; t_bins];
    for s in &data.subjects {
        // bin index: smallest t with s.time <= t*w, clamped to [1, T]
        let bin = ((s.time / width).ceil() as usize).clamp(1, t_bins) - 1;
        let target = match (s.group, s.status) {
            (Group::X, Status::Event) => &mut o_x,
            (Group::Y, Status::Event) => &mut o_y,
            (Group::X, Status::Censored) => &mut c_x,
            (Group::Y, Status::Censored) => &mut c_y,
        };
        target[bin] += 1;
    }
    let mut n_x_prev = vec![0u64; t_bins];
    let mut n_y_prev = vec![0u64; t_bins];
    n_x_prev[0] = data.group_size(Group::X) as u64;
    n_y_prev[0] = data.group_size(Group::Y) as u64;
    for t in 1..t_bins {
        n_x_prev[t] = n_x_prev[t - 1] - o_x[t - 1] - c_x[t - 1];
        n_y_prev[t] = n_y_prev[t - 1] - o_y[t - 1] - c_y[t - 1];
    }
    IntervalTable::new(n_x_prev, n_y_prev, o_x, o_y, c_x, c_y)
}

/// Survival curve per group, using `s(t) = n(t) / (n(0) - C(t))` with a
/// cumulative censored count `C(t)`. A zero denominator yields 0 for that
/// and later `t`.
pub fn km_curve(table: &IntervalTable) -> KaplanMeierCurve {
    let curve_for = |group: Group| -> Vec<f64> {
        let n0 = table.n_prev(group, 1);
        let mut cum_censored = 0u64;
        let mut out = Vec::with_capacity(table.len());
        for t in 1..=table.len() {
            cum_censored += table.censored(group, t);
            let denom = n0.saturating_sub(cum_censored);
            if denom == 0 {
                out.push(0.0);
            } else {
                out.push(table.n_after(group, t) as f64 / denom as f64);
            }
        }
        out
    };
    KaplanMeierCurve {
        s_x: curve_for(Group::X),
        s_y: curve_for(Group::Y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_event_row() {
        let ds = parse_subjects("time,status,group\n1.0,1,x").unwrap();
        assert_eq!(
            ds.subjects,
            vec![SubjectRecord {
                time: 1.0,
                status: Status::Event,
                group: Group::X
            }]
        );
    }

    #[test]
    fn parse_censored_status_words() {
        let ds = parse_subjects("time,status,group\n2.5,0,y").unwrap();
        assert_eq!(ds.subjects[0].status, Status::Censored);
        assert_eq!(ds.subjects[0].group, Group::Y);
        let ds2 = parse_subjects("time,status,group\n2.5,censored,y").unwrap();
        assert_eq!(ds.subjects, ds2.subjects);
    }

    #[test]
    fn parse_rejects_negative_time() {
        let err = parse_subjects("time,status,group\n-1,1,x").unwrap_err();
        assert!(matches!(err, SurvError::Validation(_)));
    }

    #[test]
    fn parse_rejects_unknown_group() {
        let err = parse_subjects("time,status,group\n1,1,z").unwrap_err();
        assert!(matches!(err, SurvError::Validation(_)));
    }

    #[test]
    fn parse_names_bad_line() {
        let err = parse_subjects("time,status,group\n1,1,x\noops").unwrap_err();
        match err {
            SurvError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn intervals_infer_censor_residual() {
        let table =
            parse_intervals("t,n_x_prev,n_y_prev,o_x,o_y\n1,10,10,0,2\n2,10,8,1,0").unwrap();
        assert_eq!(table.c_x, vec![0, 0]);
        assert_eq!(table.c_y, vec![0, 0]);
        assert_eq!(table.n_x_prev, vec![10, 10]);
        assert_eq!(table.n_y_prev, vec![10, 8]);
    }

    #[test]
    fn intervals_reject_event_overflow() {
        let err = parse_intervals("t,n_x_prev,n_y_prev,o_x,o_y\n1,5,5,6,0").unwrap_err();
        assert!(matches!(err, SurvError::Validation(_)));
    }

    #[test]
    fn intervals_reject_gap_in_t() {
        let err =
            parse_intervals("t,n_x_prev,n_y_prev,o_x,o_y\n1,5,5,1,0\n3,4,5,0,0").unwrap_err();
        assert!(matches!(err, SurvError::Parse { line: 3, .. }));
    }

    #[test]
    fn render_parse_round_trip() {
        let table = IntervalTable::new(
            vec![10, 7, 5],
            vec![9, 8, 8],
            vec![2, 1, 0],
            vec![1, 0, 3],
            vec![1, 1, 0],
            vec![0, 0, 1],
        )
        .unwrap();
        let round = parse_intervals(&render_intervals(&table)).unwrap();
        assert_eq!(round, table);
    }

    #[test]
    fn bin_subjects_hand_example() {
        let ds = SurvivalDataset::new(vec![
            SubjectRecord {
                time: 0.5,
                status: Status::Event,
                group: Group::X,
            },
            SubjectRecord {
                time: 1.5,
                status: Status::Event,
                group: Group::Y,
            },
            SubjectRecord {
                time: 2.5,
                status: Status::Censored,
                group: Group::X,
            },
        ])
        .unwrap();
        let table = bin_subjects(&ds, 3).unwrap();
        assert_eq!(table.n_x_prev, vec![2, 1, 1]);
        assert_eq!(table.n_y_prev, vec![1, 1, 0]);
        assert_eq!(table.o_x, vec![1, 0, 0]);
        assert_eq!(table.o_y, vec![0, 1, 0]);
        assert_eq!(table.c_x, vec![0, 0, 1]);
        assert_eq!(table.c_y, vec![0, 0, 0]);
    }

    #[test]
    fn bin_subjects_single_bin() {
        let ds = SurvivalDataset::new(vec![SubjectRecord {
            time: 1.0,
            status: Status::Event,
            group: Group::X,
        }])
        .unwrap();
        let table = bin_subjects(&ds, 1).unwrap();
        assert_eq!(table.n_x_prev, vec![1]);
        assert_eq!(table.o_x, vec![1]);
    }

    #[test]
    fn bin_subjects_distinct_times_one_per_bin() {
        // Brute-force oracle: with T = subject count and distinct times,
        // each occupied bin holds exactly one event or censoring.
        let times = [0.7, 1.9, 2.5, 3.9, 5.0];
        let ds = SurvivalDataset::new(
            times
                .iter()
                .enumerate()
                .map(|(i, &time)| SubjectRecord {
                    time,
                    status: if i % 2 == 0 {
                        Status::Event
                    } else {
                        Status::Censored
                    },
                    group: if i < 3 { Group::X } else { Group::Y },
                })
                .collect(),
        )
        .unwrap();
        let table = bin_subjects(&ds, times.len()).unwrap();
        let width = 5.0 / times.len() as f64;
        let mut expected = vec![0u64; times.len()];
        for &time in &times {
            let bin = ((time / width).ceil() as usize).clamp(1, times.len()) - 1;
            expected[bin] += 1;
        }
        for t in 0..times.len() {
            let total = table.o_x[t] + table.o_y[t] + table.c_x[t] + table.c_y[t];
            assert_eq!(total, expected[t]);
            assert!(total <= 1);
        }
    }

    #[test]
    fn bin_subjects_zero_times_degenerate() {
        let ds = SurvivalDataset::new(vec![SubjectRecord {
            time: 0.0,
            status: Status::Event,
            group: Group::X,
        }])
        .unwrap();
        assert!(matches!(
            bin_subjects(&ds, 2),
            Err(SurvError::Degenerate(_))
        ));
    }

    #[test]
    fn km_no_censoring() {
        let table = IntervalTable::new(
            vec![10],
            vec![10],
            vec![0],
            vec![2],
            vec![0],
            vec![0],
        )
        .unwrap();
        let curve = km_curve(&table);
        assert_eq!(curve.s_y[0], 0.8);
        assert_eq!(curve.s_x[0], 1.0);
    }

    #[test]
    fn km_with_censoring() {
        let table = IntervalTable::new(
            vec![10],
            vec![10],
            vec![1],
            vec![0],
            vec![1],
            vec![0],
        )
        .unwrap();
        let curve = km_curve(&table);
        assert!((curve.s_x[0] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn km_identity_without_events() {
        let table = IntervalTable::new(
            vec![5, 5],
            vec![4, 4],
            vec![0, 0],
            vec![0, 0],
            vec![0, 0],
            vec![0, 0],
        )
        .unwrap();
        let curve = km_curve(&table);
        assert!(curve.s_x.iter().all(|&s| s == 1.0));
        assert!(curve.s_y.iter().all(|&s| s == 1.0));
    }
}
