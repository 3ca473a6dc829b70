//! Plug-in MSE-optimal bandwidth for the intercept difference at the cutoff.
//!
//! The leading-order MSE of a local polynomial intercept difference of
//! order `p` with bandwidth `h` is
//!
//! ```text
//! MSE(h) = h^(2p+2) B^2 + V / (n h)
//! B = B_K+ β+ - B_K- β-          β± = m±^(p+1)(c) / (p+1)!
//! V = V_K (σ+^2 + σ-^2) / f(c)
//! ```
//!
//! with equivalent-kernel boundary constants `B_K± = e0' Γ±⁻¹ Λ±` and
//! `V_K = e0' Γ⁻¹ Ψ Γ⁻¹ e0`, where `Γ = ∫ r(u) r(u)' K(u)`, `Λ = ∫ u^(p+1) r(u) K(u)`
//! and `Ψ = ∫ r(u) r(u)' K(u)^2` over the one-sided support (`r(u) = (1, u, ..., u^p)`).
//! Minimizing gives `h = [V / (2(p+1) B^2 n)]^(1/(2p+3))`. Since `B_K- = (-1)^(p+1) B_K+`
//! this is `C(K, p) (V_pilot / B_pilot^2)^(1/(2p+3)) n^(-1/(2p+3))` with
//! `C(K, p) = [V_K / (2(p+1) B_K^2)]^(1/(2p+3))`; for the triangular kernel
//! and `p = 1`, `C · 4^(1/5)` is the familiar 3.4375.
//!
//! Pilot quantities: `β±` and the residual variances come from one global
//! polynomial of order `p+2` per side; `f(c)` is a uniform-kernel count
//! density at the cutoff with a rule-of-thumb pilot width. With mass points
//! the data are collapsed to distinct-value means and `n = K`.

use serde::{Deserialize, Serialize};

use crate::dataset::{profile_of, RDDataset, RDDesign, ScoreProfile, Side, Target};
use crate::error::{RdError, Result};
use crate::kernel::Kernel;
use crate::linalg::{polyfit, solve_dense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthCriterion {
    MseTwoSided,
}

/// How the bias-estimation bandwidth `b` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasBandwidthRule {
    /// `b = h`.
    #[default]
    SameAsMain,
    /// MSE-optimal for the order-(p+1) derivative difference.
    Optimized,
}

/// Pilot estimates entering the plug-in formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotDetail {
    /// `m^(p+1)(c)/(p+1)!` below and at-or-above the cutoff.
    pub curvature_below: f64,
    pub curvature_above: f64,
    /// `m^(p+2)(c)/(p+2)!`, used only for the bias bandwidth.
    pub higher_below: f64,
    pub higher_above: f64,
    pub sigma2_below: f64,
    pub sigma2_above: f64,
    pub density: f64,
    pub pilot_bandwidth: f64,
    pub n_eff: usize,
    pub collapsed_to_mass_points: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub h: f64,
    pub b: f64,
    pub criterion: BandwidthCriterion,
    pub pilot: PilotDetail,
    /// Set when the pilot curvature vanished and `h` fell back to half the score range.
    pub degenerate_curvature: bool,
    /// Set when the formula value was raised to the minimum feasible bandwidth or capped at the range.
    pub clamped: bool,
}

impl BandwidthSelection {
    pub fn rho(&self) -> f64 {
        self.h / self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSizeMode {
    Rows,
    DistinctValues,
}

pub fn effective_sample_size(profile: &ScoreProfile, mode: SampleSizeMode) -> usize {
    match mode {
        SampleSizeMode::Rows => profile.n,
        SampleSizeMode::DistinctValues => profile.k,
    }
}

/// Equivalent-kernel constants for estimating the `nu`-th coefficient of an
/// order-`order` one-sided fit: `(bias constant, variance constant)`.
pub fn boundary_constants(kernel: Kernel, order: usize, nu: usize, side: Side) -> (f64, f64) {
    let k = order + 1;
    let sign = |pow: usize| match side {
        Side::AtOrAbove => 1.0,
        Side::Below => {
            if pow.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        }
    };
    let m = |pow: usize| sign(pow) * kernel.moment(pow);
    let m2 = |pow: usize| sign(pow) * kernel.squared_moment(pow);
    let gamma: Vec<f64> = (0..k * k).map(|ij| m(ij / k + ij % k)).collect();
    let psi: Vec<f64> = (0..k * k).map(|ij| m2(ij / k + ij % k)).collect();
    let lambda: Vec<f64> = (0..k).map(|i| m(i + order + 1)).collect();
    let mut e = vec![0.0; k];
    e[nu] = 1.0;
    let g_inv_lambda =
        solve_dense(&gamma, &lambda).expect("kernel Gram matrix is positive definite");
    let a = solve_dense(&gamma, &e).expect("kernel Gram matrix is positive definite");
    let bias = g_inv_lambda[nu];
    let mut var = 0.0;
    for i in 0..k {
        for j in 0..k {
            var += a[i] * psi[i * k + j] * a[j];
        }
    }
    (bias, var)
}

/// `C(K, p)` in `h = C (V_pilot / B_pilot^2)^(1/(2p+3)) n^(-1/(2p+3))`.
pub fn plug_in_constant(kernel: Kernel, p: usize) -> f64 {
    let (b, v) = boundary_constants(kernel, p, 0, Side::AtOrAbove);
    (v / (2.0 * (p as f64 + 1.0) * b * b)).powf(1.0 / (2.0 * p as f64 + 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectorOptions {
    pub bias_bandwidth: BiasBandwidthRule,
}

/// MSE-optimal symmetric bandwidth for the response `target`.
pub fn select_bandwidth(
    data: &RDDataset,
    design: &RDDesign,
    p: usize,
    kernel: Kernel,
    target: &Target,
) -> Result<BandwidthSelection> {
    select_bandwidth_with(data, design, p, kernel, target, SelectorOptions::default())
}

pub fn select_bandwidth_with(
    data: &RDDataset,
    design: &RDDesign,
    p: usize,
    kernel: Kernel,
    target: &Target,
    options: SelectorOptions,
) -> Result<BandwidthSelection> {
    let d = data.retarget(target)?;
    select_slices(d.score(), d.outcome(), design.cutoff, p, kernel, options)
}

/// Distance from the cutoff to the `rank`-th closest distinct score on `side` (1-based).
fn nth_distinct_distance(distinct: &[f64], cutoff: f64, side: Side, rank: usize) -> Option<f64> {
    let mut d: Vec<f64> = distinct
        .iter()
        .filter(|&&v| Side::of(v, cutoff) == side)
        .map(|v| (v - cutoff).abs())
        .collect();
    d.sort_by(f64::total_cmp);
    d.get(rank - 1).copied()
}

struct SidePilot {
    beta: Vec<f64>,
    sigma2: f64,
}

fn side_pilot(u: &[f64], y: &[f64], p: usize, pilot_h: f64, side: Side) -> Result<SidePilot> {
    let order = p + 2;
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let t: Vec<f64> = u.iter().map(|v| v / scale).collect();
    let coef = polyfit(&t, y, order).ok_or(RdError::SingularDesign { side })?;
    let beta: Vec<f64> = coef
        .iter()
        .enumerate()
        .map(|(j, c)| c / scale.powi(j as i32))
        .collect();
    let resid: Vec<f64> = t
        .iter()
        .zip(y)
        .map(|(&tv, &yv)| yv - crate::linalg::polyval(&coef, tv))
        .collect();
    let near: Vec<f64> = u
        .iter()
        .zip(&resid)
        .filter(|(uv, _)| uv.abs() <= pilot_h)
        .map(|(_, r)| r * r)
        .collect();
    let sigma2 = if near.len() >= 2 {
        near.iter().sum::<f64>() / near.len() as f64
    } else {
        let dof = resid.len().saturating_sub(order + 1).max(1);
        resid.iter().map(|r| r * r).sum::<f64>() / dof as f64
    };
    Ok(SidePilot { beta, sigma2 })
}

pub(crate) fn select_slices(
    x: &[f64],
    y: &[f64],
    cutoff: f64,
    p: usize,
    kernel: Kernel,
    options: SelectorOptions,
) -> Result<BandwidthSelection> {
    let profile = profile_of(x, cutoff);
    let needed = p + 3;
    for (side, have) in [
        (Side::Below, profile.k_minus),
        (Side::AtOrAbove, profile.k_plus),
    ] {
        if have < needed {
            return Err(RdError::InsufficientObservations {
                side,
                needed,
                found: have,
            });
        }
    }

    let collapsed = profile.has_mass_points();
    let (xs, ys) = if collapsed {
        collapse_to_means(x, y)
    } else {
        (x.to_vec(), y.to_vec())
    };
    let n_eff = if collapsed {
        effective_sample_size(&profile, SampleSizeMode::DistinctValues)
    } else {
        effective_sample_size(&profile, SampleSizeMode::Rows)
    };
    let nf = n_eff as f64;

    let mean_x = xs.iter().sum::<f64>() / nf;
    let sd_x = (xs.iter().map(|v| (v - mean_x).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0)).sqrt();
    let mean_y = ys.iter().sum::<f64>() / nf;
    let sd_y = (ys.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0)).sqrt();
    let lo = profile.distinct_values[0];
    let hi = *profile.distinct_values.last().unwrap();
    let range = hi - lo;

    // Rule-of-thumb pilot width for the density, widened until it sees data.
    let mut pilot_h = 1.84 * sd_x * nf.powf(-0.2);
    let mut in_pilot = xs
        .iter()
        .filter(|&&v| (v - cutoff).abs() <= pilot_h)
        .count();
    while in_pilot == 0 {
        pilot_h *= 2.0;
        in_pilot = xs
            .iter()
            .filter(|&&v| (v - cutoff).abs() <= pilot_h)
            .count();
    }
    let density = in_pilot as f64 / (2.0 * nf * pilot_h);

    let split = |side: Side| -> (Vec<f64>, Vec<f64>) {
        xs.iter()
            .zip(&ys)
            .filter(|(&v, _)| Side::of(v, cutoff) == side)
            .map(|(&v, &w)| (v - cutoff, w))
            .unzip()
    };
    let (u_b, y_b) = split(Side::Below);
    let (u_a, y_a) = split(Side::AtOrAbove);
    let below = side_pilot(&u_b, &y_b, p, pilot_h, Side::Below)?;
    let above = side_pilot(&u_a, &y_a, p, pilot_h, Side::AtOrAbove)?;

    let (bk_a, vk) = boundary_constants(kernel, p, 0, Side::AtOrAbove);
    let (bk_b, _) = boundary_constants(kernel, p, 0, Side::Below);
    let bias = bk_a * above.beta[p + 1] - bk_b * below.beta[p + 1];
    let var = vk * (above.sigma2 + below.sigma2) / density;
    let exponent = 1.0 / (2.0 * p as f64 + 3.0);

    let curvature_scale =
        (above.beta[p + 1].abs() + below.beta[p + 1].abs()) * range.powi(p as i32 + 1);
    let degenerate = !(bias.abs() > 0.0) || curvature_scale <= 1e-8 * sd_y || !bias.is_finite();

    let floor = [Side::Below, Side::AtOrAbove]
        .iter()
        .filter_map(|&s| nth_distinct_distance(&profile.distinct_values, cutoff, s, needed))
        .fold(0.0f64, f64::max)
        + 1e-6 * range;

    let raw_h = if degenerate {
        range / 2.0
    } else {
        (var / (2.0 * (p as f64 + 1.0) * bias * bias * nf)).powf(exponent)
    };
    let mut clamped = false;
    let mut h = raw_h;
    if !(h <= range) {
        h = range;
        clamped = true;
    }
    if h < floor {
        h = floor;
        clamped = true;
    }

    let b = match options.bias_bandwidth {
        BiasBandwidthRule::SameAsMain => h,
        BiasBandwidthRule::Optimized => {
            let q = p + 1;
            let nu = p + 1;
            let (bn_a, vn) = boundary_constants(kernel, q, nu, Side::AtOrAbove);
            let (bn_b, _) = boundary_constants(kernel, q, nu, Side::Below);
            let sign = if (p + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
            let bias_b = bn_a * above.beta[p + 2] - sign * bn_b * below.beta[p + 2];
            let var_b = vn * (above.sigma2 + below.sigma2) / density;
            let val = ((2.0 * nu as f64 + 1.0) * var_b
                / (2.0 * (q + 1 - nu) as f64 * bias_b * bias_b * nf))
                .powf(1.0 / (2.0 * q as f64 + 3.0));
            if val.is_finite() {
                val.min(range).max(floor)
            } else {
                range.max(floor)
            }
        }
    };

    Ok(BandwidthSelection {
        h,
        b,
        criterion: BandwidthCriterion::MseTwoSided,
        pilot: PilotDetail {
            curvature_below: below.beta[p + 1],
            curvature_above: above.beta[p + 1],
            higher_below: below.beta[p + 2],
            higher_above: above.beta[p + 2],
            sigma2_below: below.sigma2,
            sigma2_above: above.sigma2,
            density,
            pilot_bandwidth: pilot_h,
            n_eff,
            collapsed_to_mass_points: collapsed,
        },
        degenerate_curvature: degenerate,
        clamped,
    })
}

/// Distinct score values with the mean response at each.
fn collapse_to_means(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let v = x[idx[i]];
        let mut j = i;
        let mut s = 0.0;
        while j < idx.len() && x[idx[j]] == v {
            s += y[idx[j]];
            j += 1;
        }
        xs.push(v);
        ys.push(s / (j - i) as f64);
        i = j;
    }
    (xs, ys)
}
