//! Resolves data bindings (flags over `--config` over defaults) and loads the input.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rdd_core::continuity::{BandwidthChoice, BiasBandwidthChoice};
use rdd_core::locrand::Window;
use rdd_core::{ColumnMap, EstimationSpec, RDDataset, RDDesign, TreatedSide, VarianceMethod};
use serde::Serialize;

use crate::args::{DataArgs, EstimatorArgs, TreatedArg, VarianceArg, WindowArgs};

pub const DEFAULT_SEED: u64 = 50;
pub const DEFAULT_REPS: usize = 1000;

/// Fully resolved data configuration, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedData {
    pub input: PathBuf,
    pub score: String,
    pub outcome: String,
    pub received: Option<String>,
    pub covariates: Vec<String>,
    pub cutoff: f64,
    pub treated: TreatedArg,
    pub fuzzy: bool,
    pub seed: u64,
    pub reps: usize,
}

pub fn resolve(cli: &DataArgs) -> Result<ResolvedData> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<DataArgs>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => DataArgs::default(),
    };
    let input = match cli.input.clone().or(file.input) {
        Some(p) => p,
        None => bail!("no input file: pass --input or set `input` in --config"),
    };
    let fuzzy = cli.fuzzy || file.fuzzy;
    let received = cli.received.clone().or(file.received);
    if fuzzy && received.is_none() {
        bail!("--fuzzy needs the treatment-received column (--received)");
    }
    Ok(ResolvedData {
        input,
        score: cli
            .score
            .clone()
            .or(file.score)
            .unwrap_or_else(|| "x".into()),
        outcome: cli
            .outcome
            .clone()
            .or(file.outcome)
            .unwrap_or_else(|| "y".into()),
        received,
        covariates: cli
            .covariates
            .clone()
            .or(file.covariates)
            .unwrap_or_default(),
        cutoff: cli.cutoff.or(file.cutoff).unwrap_or(0.0),
        treated: cli.treated.or(file.treated).unwrap_or_default(),
        fuzzy,
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        reps: cli.reps.or(file.reps).unwrap_or(DEFAULT_REPS),
    })
}

impl ResolvedData {
    pub fn design(&self) -> RDDesign {
        let side = match self.treated {
            TreatedArg::Above => TreatedSide::AtOrAbove,
            TreatedArg::Below => TreatedSide::Below,
        };
        let d = RDDesign::sharp(self.cutoff).with_treated_side(side);
        if self.fuzzy {
            d.fuzzy()
        } else {
            d
        }
    }

    /// Loads the CSV. A received column without `--fuzzy` is loaded (so it
    /// can be analysed) but the design stays sharp, with a warning.
    pub fn load(&self) -> Result<RDDataset> {
        if self.received.is_some() && !self.fuzzy {
            eprintln!("warning: --received given without --fuzzy; running a sharp analysis");
        }
        let map = ColumnMap {
            score: self.score.clone(),
            outcome: self.outcome.clone(),
            received: self.received.clone(),
            covariates: self.covariates.clone(),
        };
        let data = rdd_core::load_csv(&self.input, &map)?;
        if data.dropped_rows() > 0 {
            eprintln!(
                "note: dropped {} rows with missing score, outcome or take-up",
                data.dropped_rows()
            );
        }
        Ok(data)
    }
}

pub fn estimation_spec(a: &EstimatorArgs) -> Result<EstimationSpec> {
    if !(a.level > 0.0 && a.level < 1.0) {
        bail!("--level must be in (0, 1), got {}", a.level);
    }
    let mut spec = EstimationSpec::default()
        .with_order(a.p)
        .with_kernel(a.kernel)
        .with_level(a.level)
        .with_variance(match a.variance {
            VarianceArg::Nn => VarianceMethod::NearestNeighbor,
            VarianceArg::Hc0 => VarianceMethod::PlugInResidual,
        });
    if let Some(q) = a.q {
        spec.q = q;
    }
    if let Some(h) = a.h {
        spec.h = BandwidthChoice::Manual(h);
    }
    if let Some(b) = a.b {
        spec.b = BiasBandwidthChoice::Manual(b);
    }
    Ok(spec)
}

pub fn window(data: &RDDataset, design: &RDDesign, w: &WindowArgs) -> Result<Option<Window>> {
    let win = match (w.wl, w.wr, w.w) {
        (None, None, None) => return Ok(None),
        (_, _, Some(half)) => Window::symmetric(data, design, half)?,
        (Some(lo), Some(hi), None) => Window::new(data, design, lo, hi)?,
        _ => bail!("give both --wl and --wr, or --w"),
    };
    Ok(Some(win))
}
