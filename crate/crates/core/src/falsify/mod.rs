//! Falsification and diagnostic battery: manipulation tests, covariate and
//! placebo-outcome balance, placebo cutoffs, donut holes, neighbourhood
//! sensitivity and the first-stage F statistic.

mod density;

pub use density::{
    binomial_counts_test, binomial_density_test, default_bin_width, density_discontinuity_test,
    DensityMethod, DensityTestResult, DENSITY_MIN_SUPPORT, MIN_BINS_PER_SIDE,
};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::continuity::{
    estimate_fuzzy, estimate_sharp, BandwidthChoice, BiasBandwidthChoice, EstimationSpec,
    FuzzyResult, Interval, RDResult,
};
use crate::dataset::{Compliance, RDDataset, RDDesign, Side, Target};
use crate::error::{RdError, Result};
use crate::locrand::{
    fisher_test, superpop_estimate, RandInfResult, RandomizationConfig, SuperPopResult,
    TestStatistic, Window,
};

/// First-stage F below this value is flagged as weak.
pub const WEAK_FIRST_STAGE_F: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Continuity,
    LocalRandomization,
    FuzzyRatio,
}

/// The full result behind a diagnostic row, including the exact specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RowDetail {
    Continuity {
        result: RDResult,
    },
    Fuzzy {
        result: FuzzyResult,
    },
    LocalRandomization {
        fisher: RandInfResult,
        superpop: Option<SuperPopResult>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub label: String,
    pub detail: RowDetail,
}

impl DiagnosticRow {
    /// Headline estimate: the continuity point estimate, the fuzzy ratio,
    /// or the in-window difference in means.
    pub fn estimate(&self) -> f64 {
        match &self.detail {
            RowDetail::Continuity { result } => result.point,
            RowDetail::Fuzzy { result } => result.ratio.point,
            RowDetail::LocalRandomization { fisher, .. } => fisher.statistic,
        }
    }

    /// Robust p-value (continuity) or Fisherian p-value.
    pub fn p_value(&self) -> f64 {
        match &self.detail {
            RowDetail::Continuity { result } => result.p_rbc,
            RowDetail::Fuzzy { result } => result.ratio.p_rbc,
            RowDetail::LocalRandomization { fisher, .. } => fisher.p_value,
        }
    }

    /// Robust interval (continuity) or the large-sample interval in a window.
    pub fn ci(&self) -> Option<Interval> {
        match &self.detail {
            RowDetail::Continuity { result } => Some(result.ci_rbc),
            RowDetail::Fuzzy { result } => Some(result.ratio.ci_rbc),
            RowDetail::LocalRandomization { superpop, .. } => {
                superpop.as_ref().map(|s| match &s.ratio {
                    Some(r) => r.ci,
                    None => s.outcome.ci,
                })
            }
        }
    }

    /// Human-readable neighbourhood: `h=...` or `[lower, upper]`.
    pub fn neighborhood(&self) -> String {
        match &self.detail {
            RowDetail::Continuity { result } => format!("h={:.4}", result.h),
            RowDetail::Fuzzy { result } => format!("h={:.4}", result.ratio.h),
            RowDetail::LocalRandomization { fisher, .. } => {
                format!("[{}, {}]", fisher.window.lower, fisher.window.upper)
            }
        }
    }

    /// Observations below and at-or-above the cutoff used by the row.
    pub fn counts(&self) -> (usize, usize) {
        match &self.detail {
            RowDetail::Continuity { result } => (result.n_minus_h, result.n_plus_h),
            RowDetail::Fuzzy { result } => (result.ratio.n_minus_h, result.ratio.n_plus_h),
            RowDetail::LocalRandomization { fisher, .. } => {
                (fisher.window.n_minus, fisher.window.n_plus)
            }
        }
    }

    fn size(&self) -> f64 {
        match &self.detail {
            RowDetail::Continuity { result } => result.h,
            RowDetail::Fuzzy { result } => result.ratio.h,
            RowDetail::LocalRandomization { fisher, .. } => {
                fisher.window.upper - fisher.window.lower
            }
        }
    }
}

/// Estimate by continuity, choosing sharp or fuzzy from the design.
fn continuity_row(
    label: String,
    data: &RDDataset,
    design: &RDDesign,
    spec: &EstimationSpec,
) -> Result<DiagnosticRow> {
    let detail = match design.compliance {
        Compliance::Sharp => RowDetail::Continuity {
            result: estimate_sharp(data, design, spec)?,
        },
        Compliance::Fuzzy => RowDetail::Fuzzy {
            result: estimate_fuzzy(data, design, spec)?,
        },
    };
    Ok(DiagnosticRow { label, detail })
}

fn window_row(
    label: String,
    data: &RDDataset,
    design: &RDDesign,
    window: &Window,
    target: &Target,
    statistic: TestStatistic,
    config: &RandomizationConfig,
    critical_value: f64,
) -> Result<DiagnosticRow> {
    let fisher = fisher_test(data, design, window, target, statistic, config)?;
    let fuzzy = statistic == TestStatistic::TwoStage;
    let superpop = superpop_estimate(data, design, window, target, fuzzy, critical_value).ok();
    Ok(DiagnosticRow {
        label,
        detail: RowDetail::LocalRandomization { fisher, superpop },
    })
}

/// How balance tests are run.
#[derive(Debug, Clone, PartialEq)]
pub enum BalanceSettings {
    /// Each covariate gets its own estimate (and its own bandwidth when `spec` is data-driven).
    Continuity(EstimationSpec),
    /// Fisherian difference in means in a fixed window.
    LocalRandomization {
        window: Window,
        config: RandomizationConfig,
    },
    /// Fuzzy ratio estimator with the covariate as outcome.
    FuzzyRatio(EstimationSpec),
}

impl BalanceSettings {
    pub fn framework(&self) -> Framework {
        match self {
            BalanceSettings::Continuity(_) => Framework::Continuity,
            BalanceSettings::LocalRandomization { .. } => Framework::LocalRandomization,
            BalanceSettings::FuzzyRatio(_) => Framework::FuzzyRatio,
        }
    }
}

/// One balance row per covariate (or placebo outcome), in the given order.
pub fn covariate_balance(
    data: &RDDataset,
    design: &RDDesign,
    covariates: &[String],
    settings: &BalanceSettings,
) -> Result<Vec<DiagnosticRow>> {
    if covariates.is_empty() {
        return Err(RdError::InvalidArgument("no covariates given".into()));
    }
    covariates
        .iter()
        .map(|name| {
            let target = Target::Covariate(name.clone());
            match settings {
                BalanceSettings::Continuity(spec) => {
                    let d = data.retarget(&target)?;
                    Ok(DiagnosticRow {
                        label: name.clone(),
                        detail: RowDetail::Continuity {
                            result: estimate_sharp(&d, design, spec)?,
                        },
                    })
                }
                BalanceSettings::FuzzyRatio(spec) => {
                    let d = data.retarget(&target)?;
                    Ok(DiagnosticRow {
                        label: name.clone(),
                        detail: RowDetail::Fuzzy {
                            result: estimate_fuzzy(&d, design, spec)?,
                        },
                    })
                }
                BalanceSettings::LocalRandomization { window, config } => window_row(
                    name.clone(),
                    data,
                    design,
                    window,
                    &target,
                    TestStatistic::DiffMeans,
                    config,
                    1.96,
                ),
            }
        })
        .collect()
}

/// Re-estimates at artificial cutoffs using only the observations on the side
/// of the true cutoff that contains each placebo cutoff.
pub fn placebo_cutoffs(
    data: &RDDataset,
    design: &RDDesign,
    spec: &EstimationSpec,
    cutoffs: &[f64],
) -> Result<Vec<DiagnosticRow>> {
    let c = design.cutoff;
    cutoffs
        .iter()
        .map(|&pc| {
            if pc == c {
                return Err(RdError::SideAmbiguous(pc));
            }
            let side = Side::of(pc, c);
            let x = data.score();
            let sub = data.filter_rows(|i| Side::of(x[i], c) == side);
            let (lo, hi) = sub
                .score()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            if !(lo < pc && pc < hi) {
                return Err(RdError::CutoffOutsideSupport(pc));
            }
            // Take-up has no jump at a placebo cutoff, so these rows are reduced-form (ITT).
            let placebo = RDDesign {
                cutoff: pc,
                compliance: Compliance::Sharp,
                ..*design
            };
            continuity_row(format!("c={pc}"), &sub, &placebo, spec)
        })
        .collect()
}

/// Drops observations with `|x - c| <= r` for each radius and re-estimates at
/// the bandwidths chosen on the full sample. `r = 0` drops nothing.
pub fn donut_hole(
    data: &RDDataset,
    design: &RDDesign,
    spec: &EstimationSpec,
    radii: &[f64],
) -> Result<Vec<DiagnosticRow>> {
    let (h, b) = spec.resolve_bandwidths(data, design)?;
    let fixed = EstimationSpec {
        h: BandwidthChoice::Manual(h),
        b: BiasBandwidthChoice::Manual(b),
        ..*spec
    };
    let c = design.cutoff;
    radii
        .iter()
        .map(|&r| {
            if !(r >= 0.0) {
                return Err(RdError::InvalidArgument(format!(
                    "donut radius must be nonnegative, got {r}"
                )));
            }
            let label = format!("r={r}");
            if r == 0.0 {
                return continuity_row(label, data, design, &fixed);
            }
            let x = data.score();
            let sub = data.filter_rows(|i| (x[i] - c).abs() > r);
            continuity_row(label, &sub, design, &fixed)
        })
        .collect()
}

/// Neighbourhoods for a sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Neighborhoods {
    Bandwidths(Vec<f64>),
    Windows {
        windows: Vec<Window>,
        config: RandomizationConfig,
    },
}

/// Re-estimates at each neighbourhood with everything else fixed. Rows are
/// ordered by neighbourhood size (stable for duplicates).
pub fn sensitivity_sweep(
    data: &RDDataset,
    design: &RDDesign,
    spec: &EstimationSpec,
    neighborhoods: &Neighborhoods,
) -> Result<Vec<DiagnosticRow>> {
    let mut rows = match neighborhoods {
        Neighborhoods::Bandwidths(hs) => hs
            .iter()
            .map(|&h| {
                let s = EstimationSpec {
                    h: BandwidthChoice::Manual(h),
                    ..*spec
                };
                continuity_row(format!("h={h}"), data, design, &s)
            })
            .collect::<Result<Vec<_>>>()?,
        Neighborhoods::Windows { windows, config } => {
            let stat = match design.compliance {
                Compliance::Sharp => TestStatistic::DiffMeans,
                Compliance::Fuzzy => TestStatistic::TwoStage,
            };
            windows
                .iter()
                .map(|w| {
                    window_row(
                        format!("[{}, {}]", w.lower, w.upper),
                        data,
                        design,
                        w,
                        &Target::Outcome,
                        stat,
                        config,
                        spec.critical_value,
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    rows.sort_by(|a, b| a.size().total_cmp(&b.size()));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstStageF {
    pub f: f64,
    /// Coefficient on the assignment indicator.
    pub coefficient: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub weak: bool,
}

/// F statistic of the assignment indicator in an OLS regression of take-up on
/// assignment, using observations with `|x - c| <= h`.
pub fn first_stage_f(data: &RDDataset, design: &RDDesign, h: f64) -> Result<FirstStageF> {
    first_stage_f_between(data, design, design.cutoff - h, design.cutoff + h)
}

/// As [`first_stage_f`], on the scores in `[lower, upper]`.
pub fn first_stage_f_between(
    data: &RDDataset,
    design: &RDDesign,
    lower: f64,
    upper: f64,
) -> Result<FirstStageF> {
    let d = data.received().ok_or(RdError::MissingReceived)?;
    let mut treated = Vec::new();
    let mut control = Vec::new();
    let mut below = 0usize;
    for (i, &x) in data.score().iter().enumerate() {
        if x < lower || x > upper {
            continue;
        }
        if design.side_of(x) == Side::Below {
            below += 1;
        }
        if design.assigned(x) {
            treated.push(d[i]);
        } else {
            control.push(d[i]);
        }
    }
    let total = treated.len() + control.len();
    if below == 0 {
        return Err(RdError::EmptySide(Side::Below));
    }
    if below == total {
        return Err(RdError::EmptySide(Side::AtOrAbove));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mt, mc) = (mean(&treated), mean(&control));
    let ssr: f64 = treated.iter().map(|v| (v - mt).powi(2)).sum::<f64>()
        + control.iter().map(|v| (v - mc).powi(2)).sum::<f64>();
    let coefficient = mt - mc;
    let f = if total > 2 {
        let s2 = ssr / (total - 2) as f64;
        let var = s2 * (1.0 / treated.len() as f64 + 1.0 / control.len() as f64);
        if var > 0.0 {
            coefficient * coefficient / var
        } else if coefficient == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        f64::NAN
    };
    Ok(FirstStageF {
        f,
        coefficient,
        lower,
        upper,
        n_treated: treated.len(),
        n_control: control.len(),
        weak: !(f >= WEAK_FIRST_STAGE_F),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosticReport {
    pub density: Vec<DensityTestResult>,
    pub balance_rows: Vec<DiagnosticRow>,
    pub placebo_rows: Vec<DiagnosticRow>,
    pub donut_rows: Vec<DiagnosticRow>,
    pub sensitivity_rows: Vec<DiagnosticRow>,
    pub first_stage_f: Option<FirstStageF>,
    pub flags: Vec<String>,
}

impl DiagnosticReport {
    /// Adds warnings derived from the collected rows.
    pub fn refresh_flags(&mut self) {
        self.flags.clear();
        if let Some(f) = &self.first_stage_f {
            if f.weak {
                self.flags.push(format!(
                    "weak first stage: F = {:.2} < {WEAK_FIRST_STAGE_F}",
                    f.f
                ));
            }
        }
        for t in &self.density {
            if t.p_value < 0.05 {
                self.flags
                    .push(format!("density test rejects at 5% (p = {:.4})", t.p_value));
            }
        }
        for r in &self.balance_rows {
            if r.p_value() < 0.05 {
                self.flags
                    .push(format!("imbalance in {} (p = {:.4})", r.label, r.p_value()));
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| RdError::InvalidData(e.to_string()))
    }

    /// Markdown tables, one per non-empty section.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.density.is_empty() {
            out.push_str("## Density tests\n\n| method | statistic | p-value | n below | n above |\n|---|---|---|---|---|\n");
            for t in &self.density {
                let m = match t.method {
                    DensityMethod::Binomial => "binomial",
                    DensityMethod::LocalLinearDensity => "local linear",
                };
                let _ = writeln!(
                    out,
                    "| {m} | {:.3} | {:.3} | {} | {} |",
                    t.statistic, t.p_value, t.n_below, t.n_above
                );
            }
            out.push('\n');
        }
        for (title, rows) in [
            ("Balance", &self.balance_rows),
            ("Placebo cutoffs", &self.placebo_rows),
            ("Donut hole", &self.donut_rows),
            ("Sensitivity", &self.sensitivity_rows),
        ] {
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "## {title}\n");
            out.push_str("| row | neighborhood | estimate | p-value | CI | n below | n above |\n|---|---|---|---|---|---|---|\n");
            for r in rows {
                let ci = r.ci().map_or_else(
                    || "-".to_string(),
                    |c| format!("[{:.2}, {:.2}]", c.lower, c.upper),
                );
                let (nb, na) = r.counts();
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.2} | {:.2} | {} | {} | {} |",
                    r.label,
                    r.neighborhood(),
                    r.estimate(),
                    r.p_value(),
                    ci,
                    nb,
                    na
                );
            }
            out.push('\n');
        }
        if let Some(f) = &self.first_stage_f {
            let _ = writeln!(
                out,
                "## First stage\n\nF = {:.2} on [{}, {}] ({} treated, {} control){}\n",
                f.f,
                f.lower,
                f.upper,
                f.n_treated,
                f.n_control,
                if f.weak { ", weak" } else { "" }
            );
        }
        if !self.flags.is_empty() {
            out.push_str("## Flags\n\n");
            for fl in &self.flags {
                let _ = writeln!(out, "- {fl}");
            }
        }
        out
    }
}
