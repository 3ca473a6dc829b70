//! Continuity-based RD estimation with conventional and robust
//! bias-corrected inference.
//!
//! On each side, the order-`p` intercept at bandwidth `h` is the linear
//! functional `μ = Σ l_i y_i`. Its leading bias is `λ β_{p+1}` with
//! `λ = Σ l_i (x_i - c)^(p+1)`, and `β_{p+1} = Σ g_i y_i` is the
//! `(p+1)`-th coefficient of an order-`q` fit at bandwidth `b`. The
//! bias-corrected intercept is therefore `Σ (l_i - λ g_i) y_i`, and both
//! variances are sandwich forms over the same per-observation residual
//! variances:
//!
//! ```text
//! V     = Σ_sides Σ_i l_i^2 σ_i^2
//! V_rbc = Σ_sides Σ_i (l_i - λ g_i)^2 σ_i^2
//! W     = max(V_rbc - V, 0)
//! ```
//!
//! The robust interval is `(τ - B) ± z sqrt(V + W)`.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidth_with, BiasBandwidthRule, SelectorOptions};
use crate::dataset::{RDDataset, RDDesign, Side, Target};
use crate::error::{RdError, Result};
use crate::kernel::Kernel;
use crate::stats::z_test_p;
use crate::wls::{nn_residuals, SideDesign, VarianceMethod, NN_NEIGHBORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Interval {
        Interval {
            lower: center - half_width,
            upper: center + half_width,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Main bandwidth: data-driven or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    #[default]
    MseOptimal,
    Manual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasBandwidthChoice {
    #[default]
    SameAsMain,
    Optimized,
    Manual(f64),
}

/// Estimator configuration: kernel, polynomial orders, bandwidths, variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationSpec {
    pub kernel: Kernel,
    pub p: usize,
    pub q: usize,
    pub h: BandwidthChoice,
    pub b: BiasBandwidthChoice,
    pub variance: VarianceMethod,
    pub nn_neighbors: usize,
    pub critical_value: f64,
}

impl Default for EstimationSpec {
    fn default() -> Self {
        EstimationSpec {
            kernel: Kernel::Triangular,
            p: 1,
            q: 2,
            h: BandwidthChoice::MseOptimal,
            b: BiasBandwidthChoice::SameAsMain,
            variance: VarianceMethod::NearestNeighbor,
            nn_neighbors: NN_NEIGHBORS,
            critical_value: 1.96,
        }
    }
}

impl EstimationSpec {
    pub fn with_order(mut self, p: usize) -> Self {
        self.p = p;
        self.q = p + 1;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    /// Fixes `h`; `b` follows `h` unless set separately.
    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.h = BandwidthChoice::Manual(h);
        self
    }

    pub fn with_bias_bandwidth(mut self, b: f64) -> Self {
        self.b = BiasBandwidthChoice::Manual(b);
        self
    }

    pub fn with_variance(mut self, variance: VarianceMethod) -> Self {
        self.variance = variance;
        self
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.critical_value = crate::stats::critical_value(level);
        self
    }

    /// Resolves `(h, b)` for the outcome column of `data`.
    pub fn resolve_bandwidths(&self, data: &RDDataset, design: &RDDesign) -> Result<(f64, f64)> {
        let rule = match self.b {
            BiasBandwidthChoice::Optimized => BiasBandwidthRule::Optimized,
            _ => BiasBandwidthRule::SameAsMain,
        };
        let (h, b_sel) = match (self.h, self.b) {
            (BandwidthChoice::Manual(h), BiasBandwidthChoice::Optimized) => {
                let sel = select_bandwidth_with(
                    data,
                    design,
                    self.p,
                    self.kernel,
                    &Target::Outcome,
                    SelectorOptions {
                        bias_bandwidth: rule,
                    },
                )?;
                (h, sel.b)
            }
            (BandwidthChoice::Manual(h), _) => (h, h),
            (BandwidthChoice::MseOptimal, _) => {
                let sel = select_bandwidth_with(
                    data,
                    design,
                    self.p,
                    self.kernel,
                    &Target::Outcome,
                    SelectorOptions {
                        bias_bandwidth: rule,
                    },
                )?;
                (sel.h, sel.b)
            }
        };
        let b = match self.b {
            BiasBandwidthChoice::Manual(b) => b,
            BiasBandwidthChoice::SameAsMain => h,
            BiasBandwidthChoice::Optimized => b_sel,
        };
        Ok((h, b))
    }

    fn validate(&self) -> Result<()> {
        if self.q < self.p + 1 {
            return Err(RdError::InvalidArgument(format!(
                "bias order q={} must be at least p+1={}",
                self.q,
                self.p + 1
            )));
        }
        if !(self.critical_value > 0.0) {
            return Err(RdError::InvalidArgument(
                "critical value must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    /// Jump in the outcome (sharp effect, or intention-to-treat in a fuzzy design).
    SharpOutcome,
    /// Jump in the probability of receiving treatment.
    FirstStage,
    /// Outcome jump divided by the first-stage jump.
    FuzzyRatio,
}

/// Point estimate and inference for one RD estimand. Field order is the
/// serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDResult {
    pub estimand: Estimand,
    pub point: f64,
    pub bias_correction: f64,
    pub variance_conventional: f64,
    pub variance_rbc_extra: f64,
    pub se_conventional: f64,
    pub se_robust: f64,
    pub ci_conventional: Interval,
    pub ci_rbc: Interval,
    pub p_conventional: f64,
    pub p_rbc: f64,
    pub h: f64,
    pub b: f64,
    pub n_minus_h: usize,
    pub n_plus_h: usize,
    pub p: usize,
    pub q: usize,
    pub kernel: Kernel,
    pub variance_method: VarianceMethod,
    pub critical_value: f64,
}

impl RDResult {
    pub fn bias_corrected(&self) -> f64 {
        self.point - self.bias_correction
    }
}

/// Per-side linear-functional pieces shared by all responses.
struct SidePieces {
    /// Union of rows with positive weight at `h` or `b`.
    rows: Vec<usize>,
    /// Intercept weights `l_i` on `rows` (zero outside the `h` window).
    ell: Vec<f64>,
    /// Bias-corrected weights `l_i - λ g_i` on `rows`.
    omega: Vec<f64>,
    lambda: f64,
    /// Weights of the `(p+1)`-th coefficient of the order-`q` fit.
    g: Vec<f64>,
    design_p: SideDesign,
    design_q: SideDesign,
}

impl SidePieces {
    fn new(
        x: &[f64],
        cutoff: f64,
        side: Side,
        spec: &EstimationSpec,
        h: f64,
        b: f64,
    ) -> Result<Self> {
        let design_p = SideDesign::new(x, cutoff, side, spec.p, h, spec.kernel)?;
        let design_q = SideDesign::new(x, cutoff, side, spec.q, b, spec.kernel)?;
        let ell_p = design_p.functional_weights(0);
        let g_q = design_q.functional_weights(spec.p + 1);
        let lambda: f64 = ell_p
            .iter()
            .zip(&design_p.dist)
            .map(|(l, u)| l * u.powi(spec.p as i32 + 1))
            .sum();

        let mut rows: Vec<usize> = design_p
            .rows
            .iter()
            .chain(&design_q.rows)
            .copied()
            .collect();
        rows.sort_unstable();
        rows.dedup();
        let pos = |r: usize| rows.binary_search(&r).expect("row in union");
        let mut ell = vec![0.0; rows.len()];
        for (r, l) in design_p.rows.iter().zip(&ell_p) {
            ell[pos(*r)] = *l;
        }
        let mut g = vec![0.0; rows.len()];
        for (r, v) in design_q.rows.iter().zip(&g_q) {
            g[pos(*r)] = *v;
        }
        let omega = ell.iter().zip(&g).map(|(l, gi)| l - lambda * gi).collect();
        Ok(SidePieces {
            rows,
            ell,
            omega,
            lambda,
            g,
            design_p,
            design_q,
        })
    }

    fn intercept(&self, y: &[f64]) -> f64 {
        self.design_p.coefficients(y)[0]
    }

    fn bias(&self, y: &[f64], p: usize) -> f64 {
        self.lambda * self.design_q.coefficients(y)[p + 1]
    }

    /// Residual vectors (aligned with `rows`) for the conventional and the
    /// robust variance, one per response.
    fn residuals(
        &self,
        x: &[f64],
        ys: &[&[f64]],
        spec: &EstimationSpec,
        side: Side,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        match spec.variance {
            VarianceMethod::NearestNeighbor => {
                let xs: Vec<f64> = self.rows.iter().map(|&i| x[i]).collect();
                let cols: Vec<Vec<f64>> = ys
                    .iter()
                    .map(|y| self.rows.iter().map(|&i| y[i]).collect())
                    .collect();
                let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                let r = nn_residuals(&xs, &refs, spec.nn_neighbors, side)?;
                Ok((r.clone(), r))
            }
            VarianceMethod::PlugInResidual => {
                let spread = |design: &SideDesign, y: &[f64]| {
                    let coef = design.coefficients(y);
                    let res = design.residuals(y, &coef);
                    let mut out = vec![0.0; self.rows.len()];
                    for (r, e) in design.rows.iter().zip(res) {
                        let k = self.rows.binary_search(r).expect("row in union");
                        out[k] = e;
                    }
                    out
                };
                let conv = ys.iter().map(|y| spread(&self.design_p, y)).collect();
                let rbc = ys.iter().map(|y| spread(&self.design_q, y)).collect();
                Ok((conv, rbc))
            }
        }
    }
}

fn quad_form(w: &[f64], r: &[f64]) -> f64 {
    w.iter().zip(r).map(|(a, e)| a * a * e * e).sum()
}

struct Fitted {
    below: SidePieces,
    above: SidePieces,
    h: f64,
    b: f64,
    n_minus_h: usize,
    n_plus_h: usize,
}

fn fit_both_sides(x: &[f64], cutoff: f64, spec: &EstimationSpec, h: f64, b: f64) -> Result<Fitted> {
    spec.validate()?;
    if !(h > 0.0) {
        return Err(RdError::BandwidthTooSmall(h));
    }
    if !(b > 0.0) {
        return Err(RdError::BandwidthTooSmall(b));
    }
    let below = SidePieces::new(x, cutoff, Side::Below, spec, h, b)?;
    let above = SidePieces::new(x, cutoff, Side::AtOrAbove, spec, h, b)?;
    let n_minus_h = x.iter().filter(|&&v| v < cutoff && v >= cutoff - h).count();
    let n_plus_h = x
        .iter()
        .filter(|&&v| v >= cutoff && v <= cutoff + h)
        .count();
    Ok(Fitted {
        below,
        above,
        h,
        b,
        n_minus_h,
        n_plus_h,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    estimand: Estimand,
    point: f64,
    bias: f64,
    v: f64,
    v_rbc: f64,
    fitted: &Fitted,
    spec: &EstimationSpec,
) -> RDResult {
    let w = (v_rbc - v).max(0.0);
    let z = spec.critical_value;
    let se_c = v.sqrt();
    let se_r = (v + w).sqrt();
    RDResult {
        estimand,
        point,
        bias_correction: bias,
        variance_conventional: v,
        variance_rbc_extra: w,
        se_conventional: se_c,
        se_robust: se_r,
        ci_conventional: Interval::centered(point, z * se_c),
        ci_rbc: Interval::centered(point - bias, z * se_r),
        p_conventional: z_test_p(point, se_c),
        p_rbc: z_test_p(point - bias, se_r),
        h: fitted.h,
        b: fitted.b,
        n_minus_h: fitted.n_minus_h,
        n_plus_h: fitted.n_plus_h,
        p: spec.p,
        q: spec.q,
        kernel: spec.kernel,
        variance_method: spec.variance,
        critical_value: z,
    }
}

/// Per-response above-minus-below point and bias.
struct ResponseParts {
    point: f64,
    bias: f64,
}

fn response_parts(f: &Fitted, y: &[f64], p: usize) -> ResponseParts {
    ResponseParts {
        point: f.above.intercept(y) - f.below.intercept(y),
        bias: f.above.bias(y, p) - f.below.bias(y, p),
    }
}

/// Sharp RD estimate on explicit slices with fixed bandwidths.
pub(crate) fn sharp_slices(
    x: &[f64],
    y: &[f64],
    design: &RDDesign,
    spec: &EstimationSpec,
    h: f64,
    b: f64,
) -> Result<RDResult> {
    let f = fit_both_sides(x, design.cutoff, spec, h, b)?;
    let parts = response_parts(&f, y, spec.p);
    let mut v = 0.0;
    let mut v_rbc = 0.0;
    for (pieces, side) in [(&f.below, Side::Below), (&f.above, Side::AtOrAbove)] {
        let (conv, rbc) = pieces.residuals(x, &[y], spec, side)?;
        v += quad_form(&pieces.ell, &conv[0]);
        v_rbc += quad_form(&pieces.omega, &rbc[0]);
    }
    Ok(assemble(
        Estimand::SharpOutcome,
        parts.point,
        parts.bias,
        v,
        v_rbc,
        &f,
        spec,
    ))
}

/// Sharp RD effect on the outcome column: `τ = μ₊ - μ₋`, the at-or-above
/// limit minus the below limit. With the treated side below the cutoff this
/// is minus the effect of assignment.
pub fn estimate_sharp(
    data: &RDDataset,
    design: &RDDesign,
    spec: &EstimationSpec,
) -> Result<RDResult> {
    let (h, b) = spec.resolve_bandwidths(data, design)?;
    sharp_slices(data.score(), data.outcome(), design, spec, h, b)
}

/// First stage, intention-to-treat and fuzzy ratio estimates, all at the same bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyResult {
    pub outcome: RDResult,
    pub first_stage: RDResult,
    pub ratio: RDResult,
}

pub(crate) fn fuzzy_slices(
    x: &[f64],
    y: &[f64],
    d: &[f64],
    design: &RDDesign,
    spec: &EstimationSpec,
    h: f64,
    b: f64,
) -> Result<FuzzyResult> {
    let f = fit_both_sides(x, design.cutoff, spec, h, b)?;
    let py = response_parts(&f, y, spec.p);
    let pd = response_parts(&f, d, spec.p);
    if pd.point.abs() < 1e-12 {
        return Err(RdError::ZeroFirstStage(pd.point));
    }
    let tau = py.point / pd.point;
    let tau_bc = (py.point - py.bias) / (pd.point - pd.bias);
    // Delta-method gradient of τ_Y / τ_D at the point estimates.
    let s_y = 1.0 / pd.point;
    let s_d = -py.point / (pd.point * pd.point);

    let (mut vy, mut vy_r, mut vd, mut vd_r, mut vf, mut vf_r) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (pieces, side) in [(&f.below, Side::Below), (&f.above, Side::AtOrAbove)] {
        let (conv, rbc) = pieces.residuals(x, &[y, d], spec, side)?;
        vy += quad_form(&pieces.ell, &conv[0]);
        vd += quad_form(&pieces.ell, &conv[1]);
        vy_r += quad_form(&pieces.omega, &rbc[0]);
        vd_r += quad_form(&pieces.omega, &rbc[1]);
        let comb: Vec<f64> = conv[0]
            .iter()
            .zip(&conv[1])
            .map(|(a, b)| s_y * a + s_d * b)
            .collect();
        let comb_r: Vec<f64> = rbc[0]
            .iter()
            .zip(&rbc[1])
            .map(|(a, b)| s_y * a + s_d * b)
            .collect();
        vf += quad_form(&pieces.ell, &comb);
        vf_r += quad_form(&pieces.omega, &comb_r);
    }
    Ok(FuzzyResult {
        outcome: assemble(
            Estimand::SharpOutcome,
            py.point,
            py.bias,
            vy,
            vy_r,
            &f,
            spec,
        ),
        first_stage: assemble(Estimand::FirstStage, pd.point, pd.bias, vd, vd_r, &f, spec),
        ratio: assemble(Estimand::FuzzyRatio, tau, tau - tau_bc, vf, vf_r, &f, spec),
    })
}

/// Fuzzy RD: `τ_FRD = τ_Y / τ_D` with delta-method inference. The bandwidth
/// is selected on the outcome equation and shared by both equations.
pub fn estimate_fuzzy(
    data: &RDDataset,
    design: &RDDesign,
    spec: &EstimationSpec,
) -> Result<FuzzyResult> {
    let d = data.received().ok_or(RdError::MissingReceived)?;
    let (h, b) = spec.resolve_bandwidths(data, design)?;
    fuzzy_slices(data.score(), data.outcome(), d, design, spec, h, b)
}

/// Exposes the side weights for diagnostics and tests.
#[doc(hidden)]
pub fn side_weights(
    x: &[f64],
    cutoff: f64,
    side: Side,
    spec: &EstimationSpec,
    h: f64,
    b: f64,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let s = SidePieces::new(x, cutoff, side, spec, h, b)?;
    Ok((s.rows, s.ell, s.g, s.omega))
}
