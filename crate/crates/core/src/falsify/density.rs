//! Manipulation tests on the score: an exact binomial count test near the
//! cutoff, and a binned local-linear comparison of the two density limits.

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::bandwidth::{select_slices, SelectorOptions};
use crate::continuity::Interval;
use crate::dataset::{profile_of, RDDataset, RDDesign, Side};
use crate::error::{RdError, Result};
use crate::kernel::Kernel;
use crate::locrand::Window;
use crate::stats::{binomial_two_sided_p, normal_two_sided_p};
use crate::wls::SideDesign;

/// Minimum distinct score values for the density test.
pub const DENSITY_MIN_SUPPORT: usize = 30;
/// Minimum number of full bins on each side.
pub const MIN_BINS_PER_SIDE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    Binomial,
    LocalLinearDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTestResult {
    pub method: DensityMethod,
    /// Count above the cutoff for the binomial test; robust z statistic otherwise.
    pub statistic: f64,
    pub p_value: f64,
    /// Window of the binomial test.
    pub window: Option<Interval>,
    /// Local-linear bandwidth and bin width of the density test.
    pub bandwidth: Option<f64>,
    pub bin_width: Option<f64>,
    /// Density limits from below and above (density test only).
    pub density_below: Option<f64>,
    pub density_above: Option<f64>,
    pub n_below: usize,
    pub n_above: usize,
}

/// Exact binomial test of the share of window observations at or above the cutoff.
pub fn binomial_density_test(
    data: &RDDataset,
    design: &RDDesign,
    window: &Window,
    q: f64,
) -> Result<DensityTestResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(RdError::InvalidArgument(format!(
            "success probability must be in (0, 1), got {q}"
        )));
    }
    let w = Window::new(data, design, window.lower, window.upper)?;
    if w.total() == 0 {
        return Err(RdError::EmptyWindow);
    }
    let mut r = binomial_counts_test(w.n_minus as u64, w.n_plus as u64, q);
    r.window = Some(Interval {
        lower: w.lower,
        upper: w.upper,
    });
    Ok(r)
}

/// Binomial test from raw side counts.
pub fn binomial_counts_test(n_below: u64, n_above: u64, q: f64) -> DensityTestResult {
    DensityTestResult {
        method: DensityMethod::Binomial,
        statistic: n_above as f64,
        p_value: binomial_two_sided_p(n_above, n_below + n_above, q),
        window: None,
        bandwidth: None,
        bin_width: None,
        density_below: None,
        density_above: None,
        n_below: n_below as usize,
        n_above: n_above as usize,
    }
}

/// Default histogram bin width `2 · IQR · n^(-1/2)`.
pub fn default_bin_width(score: &[f64]) -> f64 {
    let iqr = Data::new(score.to_vec()).interquartile_range();
    2.0 * iqr / (score.len() as f64).sqrt()
}

/// Binned local-linear density test. `bin_width` and `h_density` default to
/// [`default_bin_width`] and the MSE selector applied to the bin heights.
/// The reported limits are local-linear; the z statistic is bias-corrected.
pub fn density_discontinuity_test(
    data: &RDDataset,
    design: &RDDesign,
    bin_width: Option<f64>,
    h_density: Option<f64>,
) -> Result<DensityTestResult> {
    let x = data.score();
    let c = design.cutoff;
    let profile = profile_of(x, c);
    if profile.k < DENSITY_MIN_SUPPORT {
        return Err(RdError::DiscreteScore(profile.k));
    }
    let w = bin_width.unwrap_or_else(|| default_bin_width(x));
    if !(w > 0.0 && w.is_finite()) {
        return Err(RdError::InvalidArgument(format!(
            "bin width must be positive, got {w}"
        )));
    }
    let lo = profile.distinct_values[0];
    let hi = *profile.distinct_values.last().unwrap();
    // Only bins lying entirely inside the observed support.
    let nb = ((c - lo) / w).floor().max(0.0) as usize;
    let na = ((hi - c) / w).floor().max(0.0) as usize;
    if nb.min(na) < MIN_BINS_PER_SIDE {
        return Err(RdError::InsufficientBins(nb.min(na)));
    }

    // Bin j < nb covers [c-(j+1)w, c-jw); bin nb+j covers [c+jw, c+(j+1)w).
    let mut counts = vec![0usize; nb + na];
    for &v in x {
        if v < c {
            let j = ((c - v) / w).ceil() as usize - 1;
            if j < nb {
                counts[j] += 1;
            }
        } else {
            let j = ((v - c) / w).floor() as usize;
            if j < na {
                counts[nb + j] += 1;
            }
        }
    }
    let n = x.len() as f64;
    let mids: Vec<f64> = (0..nb)
        .map(|j| c - (j as f64 + 0.5) * w)
        .chain((0..na).map(|j| c + (j as f64 + 0.5) * w))
        .collect();
    let heights: Vec<f64> = counts.iter().map(|&k| k as f64 / (n * w)).collect();

    let kernel = Kernel::Triangular;
    let h = match h_density {
        Some(h) => h,
        None => select_slices(&mids, &heights, c, 1, kernel, SelectorOptions::default())?.h,
    };
    let below = SideDesign::new(&mids, c, Side::Below, 1, h, kernel)?;
    let above = SideDesign::new(&mids, c, Side::AtOrAbove, 1, h, kernel)?;
    let f_above: f64 = above.coefficients(&heights)[0];
    let f_below: f64 = below.coefficients(&heights)[0];

    // Robust bias correction with b = h: the corrected contrast is the
    // local-quadratic intercept difference, studentized by its own variance.
    let below_q = SideDesign::new(&mids, c, Side::Below, 2, h, kernel)?;
    let above_q = SideDesign::new(&mids, c, Side::AtOrAbove, 2, h, kernel)?;
    let mut v = vec![0.0; mids.len()];
    for (&r, l) in above_q.rows.iter().zip(above_q.functional_weights(0)) {
        v[r] += l;
    }
    for (&r, l) in below_q.rows.iter().zip(below_q.functional_weights(0)) {
        v[r] -= l;
    }
    // Multinomial covariance of bin shares: Var(Σ v_j h_j) = (Σ v²p - (Σ v p)²) / (n w²).
    let share: Vec<f64> = counts.iter().map(|&k| k as f64 / n).collect();
    let s1: f64 = v.iter().zip(&share).map(|(a, p)| a * p).sum();
    let s2: f64 = v.iter().zip(&share).map(|(a, p)| a * a * p).sum();
    let var = ((s2 - s1 * s1) / (n * w * w)).max(0.0);
    let diff = v.iter().zip(&heights).map(|(a, y)| a * y).sum::<f64>();
    let (stat, p) = if var > 0.0 {
        let z = diff / var.sqrt();
        (z, normal_two_sided_p(z))
    } else {
        (0.0, 1.0)
    };
    let n_below = x.iter().filter(|&&v| v < c && c - v <= h).count();
    let n_above = x.iter().filter(|&&v| v >= c && v - c <= h).count();
    Ok(DensityTestResult {
        method: DensityMethod::LocalLinearDensity,
        statistic: stat,
        p_value: p,
        window: None,
        bandwidth: Some(h),
        bin_width: Some(w),
        density_below: Some(f_below),
        density_above: Some(f_above),
        n_below,
        n_above,
    })
}
