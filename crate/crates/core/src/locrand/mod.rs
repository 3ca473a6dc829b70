//! Local randomization inference: inside a window around the cutoff,
//! treatment is analysed as if randomly assigned with fixed margins.

mod fisher;
mod superpop;
mod window;

pub use fisher::{
    at_least_as_extreme, binomial_coefficient, RandMethod, TestStatistic, EXACT_LIMIT, TIE_RTOL,
};
pub use superpop::{superpop_estimate, MeanDifference, SuperPopResult};
pub use window::{
    candidate_windows, select_window, CovariateBalance, WindowCandidate, WindowGrowth,
    WindowSelectionConfig, WindowSelectionTrace,
};

use serde::{Deserialize, Serialize};

use crate::continuity::Interval;
use crate::dataset::{RDDataset, RDDesign, Side, Target};
use crate::error::{RdError, Result};
use fisher::{permutation_p, Arm};

/// Closed score interval `[lower, upper]` containing the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
    /// Observations in `[lower, c)`.
    pub n_minus: usize,
    /// Observations in `[c, upper]`.
    pub n_plus: usize,
}

impl Window {
    pub fn new(data: &RDDataset, design: &RDDesign, lower: f64, upper: f64) -> Result<Window> {
        let c = design.cutoff;
        if !(lower <= c && c <= upper) {
            return Err(RdError::InvalidArgument(format!(
                "window [{lower}, {upper}] does not contain the cutoff {c}"
            )));
        }
        let (mut n_minus, mut n_plus) = (0, 0);
        for &x in data.score() {
            if x >= lower && x < c {
                n_minus += 1;
            } else if x >= c && x <= upper {
                n_plus += 1;
            }
        }
        Ok(Window {
            lower,
            upper,
            n_minus,
            n_plus,
        })
    }

    /// `[c - half_width, c + half_width]`.
    pub fn symmetric(data: &RDDataset, design: &RDDesign, half_width: f64) -> Result<Window> {
        Window::new(
            data,
            design,
            design.cutoff - half_width,
            design.cutoff + half_width,
        )
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn total(&self) -> usize {
        self.n_minus + self.n_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizationConfig {
    /// Monte Carlo draws when exact enumeration is infeasible.
    pub reps: usize,
    pub seed: u64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            reps: 1000,
            seed: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandInfResult {
    pub target: Target,
    pub statistic_kind: TestStatistic,
    /// At-or-above group minus below group (difference in means, or the
    /// ratio of the outcome and take-up differences).
    pub statistic: f64,
    pub p_value: f64,
    pub method: RandMethod,
    /// Number of assignments in the reference distribution (including the observed one).
    pub n_permutations: u64,
    pub ci: Option<Interval>,
    pub seed: u64,
    pub window: Window,
    pub n_treated: usize,
    pub n_control: usize,
}

/// Response (and take-up) values inside the window, with the positions of
/// the at-or-above units. Statistics contrast that group with the rest.
struct WindowSample {
    y: Vec<f64>,
    d: Option<Vec<f64>>,
    above: Vec<usize>,
}

fn window_sample(
    data: &RDDataset,
    design: &RDDesign,
    window: &Window,
    target: &Target,
    need_received: bool,
) -> Result<WindowSample> {
    let col = data.column(target)?;
    let d_col = if need_received {
        Some(data.received().ok_or(RdError::MissingReceived)?)
    } else {
        None
    };
    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut above_idx = Vec::new();
    let (mut below, mut above) = (0, 0);
    for (i, &x) in data.score().iter().enumerate() {
        if !window.contains(x) || !col[i].is_finite() {
            continue;
        }
        if design.side_of(x) == Side::Below {
            below += 1;
        } else {
            above += 1;
            above_idx.push(y.len());
        }
        y.push(col[i]);
        if let Some(dc) = d_col {
            d.push(dc[i]);
        }
    }
    if below + above == 0 {
        return Err(RdError::EmptyWindow);
    }
    if below == 0 {
        return Err(RdError::EmptySide(Side::Below));
    }
    if above == 0 {
        return Err(RdError::EmptySide(Side::AtOrAbove));
    }
    Ok(WindowSample {
        y,
        d: d_col.map(|_| d),
        above: above_idx,
    })
}

fn fisher_on_sample(
    s: &WindowSample,
    statistic: TestStatistic,
    config: &RandomizationConfig,
) -> (f64, fisher::PermutationOutcome) {
    let arm = Arm::new(&s.y, s.d.as_deref(), s.above.len());
    let observed = arm.statistic(&s.above, statistic);
    let out = permutation_p(&arm, observed, statistic, config.reps, config.seed);
    (observed, out)
}

/// Fisherian test of the sharp null of no effect on `target` inside `window`.
pub fn fisher_test(
    data: &RDDataset,
    design: &RDDesign,
    window: &Window,
    target: &Target,
    statistic: TestStatistic,
    config: &RandomizationConfig,
) -> Result<RandInfResult> {
    let s = window_sample(
        data,
        design,
        window,
        target,
        statistic == TestStatistic::TwoStage,
    )?;
    let (observed, out) = fisher_on_sample(&s, statistic, config);
    let (n_above, n_below) = (s.above.len(), s.y.len() - s.above.len());
    let (n_treated, n_control) = if design.is_treated_side(Side::AtOrAbove) {
        (n_above, n_below)
    } else {
        (n_below, n_above)
    };
    Ok(RandInfResult {
        target: target.clone(),
        statistic_kind: statistic,
        statistic: observed,
        p_value: out.p_value,
        method: out.method,
        n_permutations: out.assignments,
        ci: None,
        seed: config.seed,
        window: *window,
        n_treated,
        n_control,
    })
}

/// Confidence set for a constant additive effect by test inversion over
/// `grid`: the hull of the grid values not rejected at level `alpha`.
/// Under [`TestStatistic::TwoStage`] the adjustment is `τ·D`, otherwise `τ`
/// times the at-or-above indicator.
#[allow(clippy::too_many_arguments)]
pub fn fisher_ci(
    data: &RDDataset,
    design: &RDDesign,
    window: &Window,
    target: &Target,
    statistic: TestStatistic,
    grid: &[f64],
    alpha: f64,
    config: &RandomizationConfig,
) -> Result<Interval> {
    if grid.is_empty() {
        return Err(RdError::EmptyGrid);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RdError::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let base = window_sample(
        data,
        design,
        window,
        target,
        statistic == TestStatistic::TwoStage,
    )?;
    let mut is_above = vec![false; base.y.len()];
    for &i in &base.above {
        is_above[i] = true;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &tau in grid {
        let y: Vec<f64> = base
            .y
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let dose = match (&base.d, statistic) {
                    (Some(d), TestStatistic::TwoStage) => d[i],
                    _ => f64::from(u8::from(is_above[i])),
                };
                v - tau * dose
            })
            .collect();
        let adjusted = WindowSample {
            y,
            d: base.d.clone(),
            above: base.above.clone(),
        };
        let (_, out) = fisher_on_sample(&adjusted, statistic, config);
        if out.p_value >= alpha {
            lo = lo.min(tau);
            hi = hi.max(tau);
        }
    }
    if lo > hi {
        return Err(RdError::EmptyConfidenceSet);
    }
    Ok(Interval {
        lower: lo,
        upper: hi,
    })
}

/// Evenly spaced grid `lower, lower + step, ..., <= upper`.
pub fn effect_grid(lower: f64, upper: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(upper >= lower) {
        return Err(RdError::EmptyGrid);
    }
    let m = ((upper - lower) / step + 1e-9).floor() as usize;
    Ok((0..=m).map(|i| lower + i as f64 * step).collect())
}
