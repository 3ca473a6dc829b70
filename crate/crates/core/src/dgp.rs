//! Synthetic RD designs with known ground truth and a Monte Carlo coverage harness.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuity::{estimate_fuzzy, estimate_sharp, EstimationSpec};
use crate::dataset::{RDDataset, RDDesign};
use crate::error::{RdError, Result};
use crate::linalg::polyval;
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDensity {
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// `lower + (upper - lower) * Beta(alpha, beta)`.
    BetaLike {
        alpha: f64,
        beta: f64,
        lower: f64,
        upper: f64,
    },
    /// Uniform, after which each point in `[c - band, c)` is reflected to
    /// `c + (c - x)` with probability `shift_share`.
    WithBunching {
        lower: f64,
        upper: f64,
        shift_share: f64,
        band: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TakeUp {
    pub p_below: f64,
    pub p_above: f64,
}

/// Data-generating process. Regression functions are polynomials in `x - cutoff`;
/// the at-or-above side is the treated side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    #[serde(default)]
    pub cutoff: f64,
    pub mu_below: Vec<f64>,
    pub mu_above: Vec<f64>,
    pub noise_sd: f64,
    pub score: ScoreDensity,
    #[serde(default)]
    pub compliance: Option<TakeUp>,
    /// Number of independent standard normal covariates `z1, z2, ...`.
    #[serde(default)]
    pub covariates: usize,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DgpSpec {
    /// Quintic design with different curvature on each side, score
    /// `2 Beta(2, 4) - 1`, noise sd 0.1295, true effect 0.04.
    pub fn curved(n: usize) -> DgpSpec {
        DgpSpec {
            cutoff: 0.0,
            mu_below: vec![0.48, 1.27, 7.18, 20.21, 21.54, 7.33],
            mu_above: vec![0.52, 0.84, -3.00, 7.99, -9.01, 3.56],
            noise_sd: 0.1295,
            score: ScoreDensity::BetaLike {
                alpha: 2.0,
                beta: 4.0,
                lower: -1.0,
                upper: 1.0,
            },
            compliance: None,
            covariates: 0,
            n,
            seed: 0,
        }
    }

    /// Straight lines with a jump of 0.5 and uniform scores on `[-1, 1]`.
    pub fn linear(n: usize) -> DgpSpec {
        DgpSpec {
            cutoff: 0.0,
            mu_below: vec![0.0, 1.0],
            mu_above: vec![0.5, 1.0],
            noise_sd: 0.3,
            score: ScoreDensity::Uniform {
                lower: -1.0,
                upper: 1.0,
            },
            compliance: None,
            covariates: 0,
            n,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn design(&self) -> RDDesign {
        let d = RDDesign::sharp(self.cutoff);
        if self.compliance.is_some() {
            d.fuzzy()
        } else {
            d
        }
    }

    pub fn truth(&self) -> GroundTruth {
        let at = |c: &[f64]| c.first().copied().unwrap_or(0.0);
        let tau = at(&self.mu_above) - at(&self.mu_below);
        let first_stage = self.compliance.map_or(1.0, |t| t.p_above - t.p_below);
        GroundTruth {
            tau_srd: tau,
            first_stage,
            itt: tau * first_stage,
            complier_effect: self.compliance.map(|_| tau),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RdError::InvalidSpec(m.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be nonnegative");
        }
        if self.mu_below.is_empty() || self.mu_above.is_empty() {
            return bad("regression functions need at least one coefficient");
        }
        let (lo, hi) = match self.score {
            ScoreDensity::Uniform { lower, upper } => (lower, upper),
            ScoreDensity::BetaLike {
                alpha,
                beta,
                lower,
                upper,
            } => {
                if !(alpha > 0.0 && beta > 0.0) {
                    return bad("beta shape parameters must be positive");
                }
                (lower, upper)
            }
            ScoreDensity::WithBunching {
                lower,
                upper,
                shift_share,
                band,
            } => {
                if !(0.0..=1.0).contains(&shift_share) || !(band > 0.0) {
                    return bad("bunching share must be in [0, 1] and band positive");
                }
                (lower, upper)
            }
        };
        if !(lo < self.cutoff && self.cutoff < hi) {
            return bad("cutoff must lie strictly inside the score support");
        }
        if let Some(t) = self.compliance {
            if !(0.0..=1.0).contains(&t.p_below) || !(0.0..=1.0).contains(&t.p_above) {
                return bad("take-up probabilities must be in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Jump in the regression function at the cutoff.
    pub tau_srd: f64,
    /// Jump in take-up probability (1 for sharp designs).
    pub first_stage: f64,
    pub itt: f64,
    pub complier_effect: Option<f64>,
}

/// Draws a sample. Deterministic in `spec.seed`.
pub fn generate(spec: &DgpSpec) -> Result<(RDDataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, 0);
    let c = spec.cutoff;
    let n = spec.n;
    let x: Vec<f64> = match spec.score {
        ScoreDensity::Uniform { lower, upper } => {
            (0..n).map(|_| rng.random_range(lower..upper)).collect()
        }
        ScoreDensity::BetaLike {
            alpha,
            beta,
            lower,
            upper,
        } => {
            let dist = Beta::new(alpha, beta).map_err(|e| RdError::InvalidSpec(e.to_string()))?;
            (0..n)
                .map(|_| lower + (upper - lower) * dist.sample(&mut rng))
                .collect()
        }
        ScoreDensity::WithBunching {
            lower,
            upper,
            shift_share,
            band,
        } => (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(lower..upper);
                let flip: f64 = rng.random();
                if v < c && v >= c - band && flip < shift_share {
                    c + (c - v)
                } else {
                    v
                }
            })
            .collect(),
    };
    let noise = Normal::new(0.0, spec.noise_sd.max(0.0))
        .map_err(|e| RdError::InvalidSpec(e.to_string()))?;
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for &xi in &x {
        let u = xi - c;
        let above = xi >= c;
        let take = match spec.compliance {
            None => above,
            Some(t) => {
                let p = if above { t.p_above } else { t.p_below };
                rng.random::<f64>() < p
            }
        };
        let base = polyval(&spec.mu_below, u);
        let treated = polyval(&spec.mu_above, u);
        let e = if spec.noise_sd > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        y.push(if take { treated } else { base } + e);
        d.push(f64::from(u8::from(take)));
    }
    let mut covs = Vec::new();
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    for j in 0..spec.covariates {
        let z: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut rng)).collect();
        covs.push((format!("z{}", j + 1), z));
    }
    let mut data = RDDataset::new(x, y)?;
    if spec.compliance.is_some() {
        data = data.with_received(d)?;
    }
    for (name, z) in covs {
        data = data.with_covariate(name, z)?;
    }
    Ok((data, spec.truth()))
}

/// Monte Carlo study configuration (the JSON document accepted by `rdd simulate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStudy {
    pub dgp: DgpSpec,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: EstimationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub point: f64,
    pub bias_correction: f64,
    pub h: f64,
    pub conventional_covers: bool,
    pub robust_covers: bool,
    pub conventional_width: f64,
    pub robust_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub replications: usize,
    pub n: usize,
    pub target: f64,
    pub conventional_coverage: f64,
    pub conventional_se: f64,
    pub robust_coverage: f64,
    pub robust_se: f64,
    pub mean_point: f64,
    pub mean_error: f64,
    pub mean_h: f64,
    pub mean_conventional_width: f64,
    pub mean_robust_width: f64,
}

impl CoverageTable {
    pub fn to_csv(&self) -> String {
        let header = "replications,n,target,conventional_coverage,conventional_se,robust_coverage,robust_se,mean_point,mean_error,mean_h,mean_conventional_width,mean_robust_width";
        format!(
            "{header}\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.replications,
            self.n,
            self.target,
            self.conventional_coverage,
            self.conventional_se,
            self.robust_coverage,
            self.robust_se,
            self.mean_point,
            self.mean_error,
            self.mean_h,
            self.mean_conventional_width,
            self.mean_robust_width
        )
    }
}

/// Runs one replication: draw, select the bandwidth, estimate, check coverage of
/// the sharp effect (or the complier effect for fuzzy designs).
pub fn run_replication(study: &CoverageStudy, index: u64) -> Result<ReplicationOutcome> {
    let spec = study
        .dgp
        .clone()
        .with_seed(derive_seed(study.master_seed, index));
    let (data, truth) = generate(&spec)?;
    let design = spec.design();
    let r = if spec.compliance.is_some() {
        estimate_fuzzy(&data, &design, &study.estimator)?.ratio
    } else {
        estimate_sharp(&data, &design, &study.estimator)?
    };
    let target = truth.complier_effect.unwrap_or(truth.tau_srd);
    Ok(ReplicationOutcome {
        point: r.point,
        bias_correction: r.bias_correction,
        h: r.h,
        conventional_covers: covers(&r.ci_conventional, target),
        robust_covers: covers(&r.ci_rbc, target),
        conventional_width: r.ci_conventional.width(),
        robust_width: r.ci_rbc.width(),
    })
}

/// Interval membership with a rounding allowance, so that the degenerate
/// zero-width intervals of noiseless designs count as covering.
fn covers(ci: &crate::continuity::Interval, target: f64) -> bool {
    let eps = 1e-9 * target.abs().max(1.0);
    ci.lower - eps <= target && target <= ci.upper + eps
}

pub fn replicate(study: &CoverageStudy) -> Result<Vec<ReplicationOutcome>> {
    if study.replications < 100 {
        return Err(RdError::InvalidSpec(format!(
            "coverage studies need at least 100 replications, got {}",
            study.replications
        )));
    }
    (0..study.replications as u64)
        .into_par_iter()
        .map(|i| run_replication(study, i))
        .collect()
}

/// Empirical coverage of the conventional and robust intervals.
pub fn coverage_study(study: &CoverageStudy) -> Result<CoverageTable> {
    let reps = replicate(study)?;
    let truth = study.dgp.truth();
    let target = truth.complier_effect.unwrap_or(truth.tau_srd);
    let m = reps.len() as f64;
    let conv = reps.iter().filter(|r| r.conventional_covers).count() as f64 / m;
    let rob = reps.iter().filter(|r| r.robust_covers).count() as f64 / m;
    let mean = |f: &dyn Fn(&ReplicationOutcome) -> f64| reps.iter().map(f).sum::<f64>() / m;
    let mean_point = mean(&|r| r.point);
    Ok(CoverageTable {
        replications: reps.len(),
        n: study.dgp.n,
        target,
        conventional_coverage: conv,
        conventional_se: (conv * (1.0 - conv) / m).sqrt(),
        robust_coverage: rob,
        robust_se: (rob * (1.0 - rob) / m).sqrt(),
        mean_point,
        mean_error: mean_point - target,
        mean_h: mean(&|r| r.h),
        mean_conventional_width: mean(&|r| r.conventional_width),
        mean_robust_width: mean(&|r| r.robust_width),
    })
}
