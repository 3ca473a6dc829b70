//! Covariate-balance window selection: grow nested windows around the
//! cutoff, test each covariate in each window, and keep the largest window
//! before the first imbalance.

use serde::{Deserialize, Serialize};

use super::{fisher_test, RandomizationConfig, TestStatistic, Window};
use crate::dataset::{profile_of, RDDataset, RDDesign, Side, Target};
use crate::error::{RdError, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum WindowGrowth {
    /// Mass points when the score has heavy repetition, otherwise
    /// [`WindowGrowth::Observations`] with 5 per side.
    #[default]
    Auto,
    /// One distinct score value per side per step, starting at the innermost pair.
    MassPoints,
    /// Symmetric half-widths `k · step`, `k = 1, 2, ...`.
    Width(f64),
    /// Each step adds this many observations per side (symmetric half-widths
    /// taken at the larger of the two side distances).
    Observations(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSelectionConfig {
    pub covariates: Vec<String>,
    pub threshold: f64,
    pub min_side: usize,
    pub growth: WindowGrowth,
    /// Cap on the number of candidates evaluated; `None` tries every candidate.
    pub max_windows: Option<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl WindowSelectionConfig {
    pub fn new(covariates: Vec<String>) -> Self {
        WindowSelectionConfig {
            covariates,
            threshold: 0.15,
            min_side: 10,
            growth: WindowGrowth::Auto,
            max_windows: Some(10),
            reps: 1000,
            seed: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub covariate: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCandidate {
    pub window: Window,
    pub min_p_value: f64,
    pub balance: Vec<CovariateBalance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSelectionTrace {
    pub candidates: Vec<WindowCandidate>,
    pub chosen: Window,
    pub threshold: f64,
    /// Even the smallest window failed; `chosen` is then that window.
    pub no_balanced_window: bool,
    pub seed: u64,
}

/// Sorted distances `|x - c|` per side, and distinct values ordered outward.
struct SideScores {
    below: Vec<f64>,
    above: Vec<f64>,
}

fn side_scores(data: &RDDataset, design: &RDDesign) -> SideScores {
    let c = design.cutoff;
    let mut below = Vec::new();
    let mut above = Vec::new();
    for &x in data.score() {
        match Side::of(x, c) {
            Side::Below => below.push(c - x),
            Side::AtOrAbove => above.push(x - c),
        }
    }
    below.sort_by(f64::total_cmp);
    above.sort_by(f64::total_cmp);
    SideScores { below, above }
}

fn dedup_sorted(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = v.to_vec();
    out.dedup();
    out
}

/// Ordered list of nested candidate windows.
pub fn candidate_windows(
    data: &RDDataset,
    design: &RDDesign,
    growth: WindowGrowth,
    min_side: usize,
    max_windows: Option<usize>,
) -> Result<Vec<Window>> {
    let c = design.cutoff;
    let s = side_scores(data, design);
    if s.below.is_empty() {
        return Err(RdError::EmptySide(Side::Below));
    }
    if s.above.is_empty() {
        return Err(RdError::EmptySide(Side::AtOrAbove));
    }
    let cap = max_windows.unwrap_or(usize::MAX);
    let growth = match growth {
        WindowGrowth::Auto => {
            let profile = profile_of(data.score(), c);
            if profile.is_discrete() || (profile.has_mass_points() && 2 * profile.k <= profile.n) {
                WindowGrowth::MassPoints
            } else {
                WindowGrowth::Observations(5)
            }
        }
        g => g,
    };
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    match growth {
        WindowGrowth::Auto => unreachable!(),
        WindowGrowth::MassPoints => {
            let db = dedup_sorted(&s.below);
            let da = dedup_sorted(&s.above);
            for k in 0..db.len().max(da.len()) {
                let lo = db[k.min(db.len() - 1)];
                let hi = da[k.min(da.len() - 1)];
                bounds.push((c - lo, c + hi));
            }
        }
        WindowGrowth::Width(step) => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(RdError::InvalidArgument(format!(
                    "window step must be positive, got {step}"
                )));
            }
            let reach = s.below.last().unwrap().max(*s.above.last().unwrap());
            let mut k = 1.0;
            loop {
                let w = k * step;
                let nb = s.below.partition_point(|&d| d <= w);
                let na = s.above.partition_point(|&d| d <= w);
                if nb >= min_side && na >= min_side {
                    bounds.push((c - w, c + w));
                }
                if w >= reach {
                    break;
                }
                k += 1.0;
            }
        }
        WindowGrowth::Observations(m) => {
            if m == 0 {
                return Err(RdError::InvalidArgument(
                    "window step must add observations".into(),
                ));
            }
            let mut j = min_side.max(1);
            loop {
                let nb = j.min(s.below.len());
                let na = j.min(s.above.len());
                let w = s.below[nb - 1].max(s.above[na - 1]);
                bounds.push((c - w, c + w));
                if nb == s.below.len() && na == s.above.len() {
                    break;
                }
                j += m;
            }
            if s.below.len() < min_side || s.above.len() < min_side {
                bounds.clear();
            }
        }
    }
    // Keep only strictly growing windows.
    let mut windows = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (lo, hi) in bounds {
        if let Some((plo, phi)) = last {
            if !(lo <= plo && hi >= phi && (lo < plo || hi > phi)) {
                continue;
            }
        }
        last = Some((lo, hi));
        windows.push(Window::new(data, design, lo, hi)?);
        if windows.len() >= cap {
            break;
        }
    }
    if windows.is_empty() {
        return Err(RdError::TooFewObservations(format!(
            "no window holds {min_side} observations on each side"
        )));
    }
    Ok(windows)
}

/// Runs the nested-window balance search.
pub fn select_window(
    data: &RDDataset,
    design: &RDDesign,
    config: &WindowSelectionConfig,
) -> Result<WindowSelectionTrace> {
    if config.covariates.is_empty() {
        return Err(RdError::InvalidArgument(
            "window selection needs at least one covariate".into(),
        ));
    }
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(RdError::InvalidArgument(format!(
            "threshold must be in (0, 1), got {}",
            config.threshold
        )));
    }
    for name in &config.covariates {
        if data.covariate(name).is_none() {
            return Err(RdError::MissingColumn(name.clone()));
        }
    }
    let windows = candidate_windows(
        data,
        design,
        config.growth,
        config.min_side,
        config.max_windows,
    )?;
    let mut candidates = Vec::new();
    let mut chosen: Option<Window> = None;
    for w in windows {
        let mut balance = Vec::with_capacity(config.covariates.len());
        for (j, name) in config.covariates.iter().enumerate() {
            let rc = RandomizationConfig {
                reps: config.reps,
                seed: derive_seed(config.seed, j as u64),
            };
            let r = fisher_test(
                data,
                design,
                &w,
                &Target::Covariate(name.clone()),
                TestStatistic::DiffMeans,
                &rc,
            )?;
            balance.push(CovariateBalance {
                covariate: name.clone(),
                statistic: r.statistic,
                p_value: r.p_value,
            });
        }
        let min_p = balance
            .iter()
            .map(|b| b.p_value)
            .fold(f64::INFINITY, f64::min);
        candidates.push(WindowCandidate {
            window: w,
            min_p_value: min_p,
            balance,
        });
        if min_p < config.threshold {
            break;
        }
        chosen = Some(w);
    }
    let no_balanced_window = chosen.is_none();
    Ok(WindowSelectionTrace {
        chosen: chosen.unwrap_or(candidates[0].window),
        candidates,
        threshold: config.threshold,
        no_balanced_window,
        seed: config.seed,
    })
}
