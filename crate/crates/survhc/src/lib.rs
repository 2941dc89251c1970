//! Two-sample survival comparison tuned for rare, weak, temporally
//! localized hazard differences.
//!
//! The pipeline: bin subject-level data into per-interval count tables
//! ([`data`]), turn each interval into an exact hypergeometric P-value
//! ([`hyg`]), and combine the series with Higher Criticism ([`hc`]).
//! Classical baselines live in [`classic`], simulated-null calibration in
//! [`resample`], the decaying-cohort generator in [`decay`], and the
//! power-grid / phase-transition machinery in [`phase`].

pub mod classic;
pub mod data;
pub mod decay;
pub mod error;
pub mod hc;
pub mod hyg;
pub mod phase;
pub mod resample;
pub mod seed;
pub mod svg;

pub use error::{Result, SurvError};
