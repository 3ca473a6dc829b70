//! Regression discontinuity analysis: local polynomial estimation with
//! robust bias-corrected inference, local randomization inference, fuzzy
//! designs, discrete scores and falsification diagnostics.
//!
//! The usual flow is [`dataset::load_csv`] → [`bandwidth::select_bandwidth`]
//! → [`continuity::estimate_sharp`] / [`continuity::estimate_fuzzy`], with
//! [`locrand`] for window-based inference and [`falsify`] for the
//! diagnostic battery.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::too_many_arguments
)]

pub mod bandwidth;
pub mod continuity;
pub mod dataset;
pub mod dgp;
pub mod error;
pub mod falsify;
pub mod kernel;
mod linalg;
pub mod locrand;
pub mod rdplot;
pub mod seed;
pub mod stats;
pub mod wls;

pub use bandwidth::{select_bandwidth, BandwidthSelection};
pub use continuity::{
    estimate_fuzzy, estimate_sharp, EstimationSpec, FuzzyResult, Interval, RDResult,
};
pub use dataset::{
    derive_assignment, load_csv, score_profile, ColumnMap, Compliance, RDDataset, RDDesign,
    ScoreProfile, Side, Target, TreatedSide,
};
pub use error::{RdError, Result};
pub use falsify::{DensityTestResult, DiagnosticReport};
pub use kernel::Kernel;
pub use locrand::{
    fisher_test, select_window, RandInfResult, TestStatistic, Window, WindowSelectionTrace,
};
pub use wls::{local_fit, LocalFit, VarianceMethod};
