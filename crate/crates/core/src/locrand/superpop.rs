//! Large-sample (super-population) inference inside a window: Welch
//! difference in means, and the Wald ratio with a delta-method interval.

use serde::{Deserialize, Serialize};

use super::Window;
use crate::continuity::Interval;
use crate::dataset::{RDDataset, RDDesign, Side, Target};
use crate::error::{RdError, Result};
use crate::stats::z_test_p;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDifference {
    pub estimate: f64,
    pub se: f64,
    pub ci: Interval,
    pub p_value: f64,
}

impl MeanDifference {
    fn new(estimate: f64, se: f64, z: f64) -> Self {
        MeanDifference {
            estimate,
            se,
            ci: Interval::centered(estimate, z * se),
            p_value: z_test_p(estimate, se),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperPopResult {
    pub outcome: MeanDifference,
    pub first_stage: Option<MeanDifference>,
    pub ratio: Option<MeanDifference>,
    pub n_treated: usize,
    pub n_control: usize,
    pub window: Window,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, s2)
}

/// First-sample mean minus second-sample mean with the unequal-variance standard error.
fn welch(treated: &[f64], control: &[f64]) -> (f64, f64) {
    let (mt, vt) = mean_var(treated);
    let (mc, vc) = mean_var(control);
    (
        mt - mc,
        (vt / treated.len() as f64 + vc / control.len() as f64).sqrt(),
    )
}

/// Difference in means of `target` between the at-or-above and below units
/// in `window`; with `fuzzy`, also the take-up difference and their ratio.
pub fn superpop_estimate(
    data: &RDDataset,
    design: &RDDesign,
    window: &Window,
    target: &Target,
    fuzzy: bool,
    critical_value: f64,
) -> Result<SuperPopResult> {
    let y = data.column(target)?;
    let d = if fuzzy {
        Some(data.received().ok_or(RdError::MissingReceived)?)
    } else {
        None
    };
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    for (i, &x) in data.score().iter().enumerate() {
        if window.contains(x) && y[i].is_finite() {
            if design.side_of(x) == Side::Below {
                rows_b.push(i);
            } else {
                rows_a.push(i);
            }
        }
    }
    for (rows, side) in [(&rows_b, Side::Below), (&rows_a, Side::AtOrAbove)] {
        if rows.is_empty() {
            return Err(RdError::EmptySide(side));
        }
        if rows.len() < 2 {
            return Err(RdError::InsufficientObservations {
                side,
                needed: 2,
                found: rows.len(),
            });
        }
    }
    let pick = |col: &[f64], rows: &[usize]| rows.iter().map(|&i| col[i]).collect::<Vec<_>>();
    let (ty, se_y) = welch(&pick(y, &rows_a), &pick(y, &rows_b));
    let outcome = MeanDifference::new(ty, se_y, critical_value);
    let (first_stage, ratio) = match d {
        None => (None, None),
        Some(d) => {
            let (td, se_d) = welch(&pick(d, &rows_a), &pick(d, &rows_b));
            if td.abs() < 1e-12 {
                return Err(RdError::ZeroFirstStage(td));
            }
            let theta = ty / td;
            // Delta method: the ratio's linearization is (Y - θD) / τ_D.
            let z = |rows: &[usize]| {
                rows.iter()
                    .map(|&i| y[i] - theta * d[i])
                    .collect::<Vec<_>>()
            };
            let (_, se_z) = welch(&z(&rows_a), &z(&rows_b));
            (
                Some(MeanDifference::new(td, se_d, critical_value)),
                Some(MeanDifference::new(theta, se_z / td.abs(), critical_value)),
            )
        }
    };
    let (n_treated, n_control) = if design.is_treated_side(Side::AtOrAbove) {
        (rows_a.len(), rows_b.len())
    } else {
        (rows_b.len(), rows_a.len())
    };
    Ok(SuperPopResult {
        outcome,
        first_stage,
        ratio,
        n_treated,
        n_control,
        window: *window,
    })
}
