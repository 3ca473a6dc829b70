//! One-sided kernel-weighted local polynomial regression at the cutoff.
//!
//! Regressors are `(x - c)^j`, internally rescaled by the bandwidth so the
//! design is well conditioned for any `h`; reported coefficients are on the
//! original `(x - c)^j` scale. Every estimate produced here is a linear
//! functional `Σ l_i y_i` of the responses, and the weights `l_i` are exposed
//! so that bias corrections and sandwich variances can be assembled from them.

use serde::{Deserialize, Serialize};

use crate::dataset::{RDDataset, RDDesign, Side};
use crate::error::{RdError, Result};
use crate::kernel::Kernel;
use crate::linalg::Qr;

/// Residual variance estimator plugged into the sandwich formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    /// Same-side nearest-neighbour residuals (J neighbours, ties included).
    #[default]
    NearestNeighbor,
    /// Squared residuals of the weighted fit itself (HC0).
    PlugInResidual,
}

/// Default number of nearest neighbours for [`VarianceMethod::NearestNeighbor`].
pub const NN_NEIGHBORS: usize = 3;

/// Weighted design restricted to the observations with positive kernel weight on one side.
#[derive(Debug, Clone)]
pub(crate) struct SideDesign {
    pub order: usize,
    pub bandwidth: f64,
    /// Indices into the caller's arrays.
    pub rows: Vec<usize>,
    /// `x_i - c` for each row.
    pub dist: Vec<f64>,
    pub weights: Vec<f64>,
    qr: Qr,
}

impl SideDesign {
    pub(crate) fn new(
        x: &[f64],
        cutoff: f64,
        side: Side,
        order: usize,
        h: f64,
        kernel: Kernel,
    ) -> Result<SideDesign> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(RdError::BandwidthTooSmall(h));
        }
        let mut rows = Vec::new();
        let mut dist = Vec::new();
        let mut weights = Vec::new();
        for (i, &xi) in x.iter().enumerate() {
            if Side::of(xi, cutoff) != side {
                continue;
            }
            let u = xi - cutoff;
            let w = kernel.weight(u / h);
            if w > 0.0 {
                rows.push(i);
                dist.push(u);
                weights.push(w);
            }
        }
        let needed = order + 2;
        if rows.len() < needed {
            return Err(RdError::InsufficientObservations {
                side,
                needed,
                found: rows.len(),
            });
        }
        let mut support = dist.clone();
        support.sort_by(f64::total_cmp);
        support.dedup();
        if support.len() < needed {
            return Err(RdError::SingularDesign { side });
        }

        let n = rows.len();
        let k = order + 1;
        let mut a = Vec::with_capacity(n * k);
        for j in 0..k {
            a.extend(
                dist.iter()
                    .zip(&weights)
                    .map(|(&u, &w)| w.sqrt() * (u / h).powi(j as i32)),
            );
        }
        let qr = Qr::new(a, n, k).ok_or(RdError::SingularDesign { side })?;
        Ok(SideDesign {
            order,
            bandwidth: h,
            rows,
            dist,
            weights,
            qr,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    /// Coefficients of `1, (x-c), ..., (x-c)^p` for the response `y`
    /// (indexed like the caller's arrays).
    pub(crate) fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w.sqrt() * y[i])
            .collect();
        let scaled = self.qr.solve(&rhs);
        scaled
            .iter()
            .enumerate()
            .map(|(j, g)| g / self.bandwidth.powi(j as i32))
            .collect()
    }

    /// Weights `l_i` (aligned with `rows`) such that the `j`-th coefficient equals `Σ l_i y_i`.
    pub(crate) fn functional_weights(&self, j: usize) -> Vec<f64> {
        let k = self.order + 1;
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let a = self.qr.gram_inverse_times(&e);
        let scale = self.bandwidth.powi(j as i32);
        self.dist
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| {
                let t = u / self.bandwidth;
                let mut tp = 1.0;
                let mut s = 0.0;
                for aj in &a {
                    s += aj * tp;
                    tp *= t;
                }
                w * s / scale
            })
            .collect()
    }

    pub(crate) fn residuals(&self, y: &[f64], coef: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.dist)
            .map(|(&i, &u)| y[i] - crate::linalg::polyval(coef, u))
            .collect()
    }
}

/// Result of a one-sided weighted local polynomial regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub side: Side,
    pub order: usize,
    pub kernel: Kernel,
    pub bandwidth: f64,
    /// Intercept first, then the coefficients on `(x - c)^j`.
    pub coefficients: Vec<f64>,
    /// Residuals of the rows listed in `rows`.
    pub residuals: Vec<f64>,
    /// Data-set row indices with positive kernel weight.
    pub rows: Vec<usize>,
    pub effective_n: usize,
}

impl LocalFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }
}

/// Fits `y ~ Σ_j β_j (x - c)^j` on one side of the cutoff with kernel weights `K((x - c)/h)`.
pub fn local_fit(
    data: &RDDataset,
    design: &RDDesign,
    side: Side,
    p: usize,
    h: f64,
    kernel: Kernel,
) -> Result<LocalFit> {
    fit_slices(
        data.score(),
        data.outcome(),
        design.cutoff,
        side,
        p,
        h,
        kernel,
    )
}

pub(crate) fn fit_slices(
    x: &[f64],
    y: &[f64],
    cutoff: f64,
    side: Side,
    p: usize,
    h: f64,
    kernel: Kernel,
) -> Result<LocalFit> {
    let sd = SideDesign::new(x, cutoff, side, p, h, kernel)?;
    let coefficients = sd.coefficients(y);
    let residuals = sd.residuals(y, &coefficients);
    Ok(LocalFit {
        side,
        order: p,
        kernel,
        bandwidth: h,
        coefficients,
        residuals,
        effective_n: sd.len(),
        rows: sd.rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub intercept_variance: f64,
    pub method: VarianceMethod,
}

/// Heteroskedasticity-robust sandwich variance of the intercept of `fit`.
pub fn intercept_variance(
    fit: &LocalFit,
    data: &RDDataset,
    design: &RDDesign,
    method: VarianceMethod,
) -> Result<VarianceEstimate> {
    let sd = SideDesign::new(
        data.score(),
        design.cutoff,
        fit.side,
        fit.order,
        fit.bandwidth,
        fit.kernel,
    )?;
    let l = sd.functional_weights(0);
    let resid = match method {
        VarianceMethod::PlugInResidual => fit.residuals.clone(),
        VarianceMethod::NearestNeighbor => {
            let x: Vec<f64> = sd.rows.iter().map(|&i| data.score()[i]).collect();
            let y: Vec<f64> = sd.rows.iter().map(|&i| data.outcome()[i]).collect();
            nn_residuals(&x, &[&y], NN_NEIGHBORS, fit.side)?.remove(0)
        }
    };
    let v = l.iter().zip(&resid).map(|(a, e)| a * a * e * e).sum();
    Ok(VarianceEstimate {
        intercept_variance: v,
        method,
    })
}

/// Nearest-neighbour residuals `sqrt(J_i/(J_i+1)) (y_i - mean of neighbours)`
/// for each response, where the neighbour set holds the `j` closest other
/// points in `x` plus anything tied with the `j`-th distance. Products of
/// these residuals give the per-observation (co)variance estimates.
pub(crate) fn nn_residuals(
    x: &[f64],
    ys: &[&[f64]],
    j: usize,
    side: Side,
) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    if n < j + 1 {
        return Err(RdError::InsufficientObservations {
            side,
            needed: j + 1,
            found: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut out = vec![vec![0.0; n]; ys.len()];
    let mut sums = vec![0.0; ys.len()];
    for pos in 0..n {
        let xi = xs[pos];
        let (mut lo, mut hi) = (pos, pos + 1);
        let mut count = 0;
        let mut last = 0.0;
        sums.iter_mut().for_each(|s| *s = 0.0);
        let take = |idx: usize, sums: &mut [f64]| {
            for (s, y) in sums.iter_mut().zip(ys) {
                *s += y[order[idx]];
            }
        };
        loop {
            let dl = if lo > 0 { Some(xi - xs[lo - 1]) } else { None };
            let dr = if hi < n { Some(xs[hi] - xi) } else { None };
            let (d, left) = match (dl, dr) {
                (Some(a), Some(b)) => {
                    if a <= b {
                        (a, true)
                    } else {
                        (b, false)
                    }
                }
                (Some(a), None) => (a, true),
                (None, Some(b)) => (b, false),
                (None, None) => break,
            };
            if count >= j && d > last {
                break;
            }
            if left {
                lo -= 1;
                take(lo, &mut sums);
            } else {
                take(hi, &mut sums);
                hi += 1;
            }
            count += 1;
            last = d;
        }
        let c = count as f64;
        let scale = (c / (c + 1.0)).sqrt();
        for (r, (s, y)) in out.iter_mut().zip(sums.iter().zip(ys)) {
            r[order[pos]] = scale * (y[order[pos]] - s / c);
        }
    }
    Ok(out)
}
