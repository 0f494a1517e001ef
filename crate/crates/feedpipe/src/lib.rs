//! Feed-intake pipeline: from raw electronic-feeder event logs and 15-minute
//! weather records to cleaned meal data, environmental comfort indices, and
//! trained intake-prediction models with Shapley explanations.
//!
//! The crate is organized as a set of batch stages that each read and write
//! plain artifacts (CSV / JSON / a small binary column store):
//!
//! * [`ingest`] — CSV parsing, validation, and a statistics-matched synthetic
//!   data generator (the real feeder dataset is confidential).
//! * [`sessionize`] — feeding events aggregated into meals (20-min gap rule,
//!   2 h / 10 kg caps) and per-animal daily behavior traits.
//! * [`cleanse`] — two-pass outlier replacement: penalized-spline smoothing
//!   followed by monotone spline regression, both with the 3×IQR rule.
//! * [`weather`] — daily weather aggregation and the 8,736-column lagged
//!   feature matrix (13 variables × 96 slots × 7 days).
//! * [`pca`], [`indices`], [`kmeans`] — principal components at 95% variance,
//!   the InComfort and EASI indices scaled to [-1, 1], and 5-class k-means
//!   comfort classification.
//! * [`models`] — gradient-boosted regression trees and a Bayesian ridge
//!   baseline with stratified splitting and 3-fold CV.
//! * [`shap`] — path-dependent tree Shapley attribution, importance ranking,
//!   and what-if response sweeps.

pub mod cleanse;
pub mod diag;
pub mod indices;
pub mod ingest;
pub mod kmeans;
pub mod models;
pub mod pca;
pub mod sessionize;
pub mod shap;
pub mod spline;
pub mod synth;
pub mod weather;

pub use diag::Diagnostic;
