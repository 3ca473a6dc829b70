use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rdd_core::Kernel;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "rdd",
    version,
    about = "Regression discontinuity analysis: estimation, local randomization, diagnostics and plots",
    arg_required_else_help = true,
    after_help = "\
Examples:
  rdd estimate --input data.csv --score x --outcome y --cutoff 0
  rdd estimate --input art.csv --score cd4 --outcome visit --received art --fuzzy --cutoff 350 --treated below
  rdd winselect --input data.csv --cutoff 350 --covariates age,female --seed 5023
  rdd randinf --input data.csv --cutoff 350 --wl 346 --wr 354 --seed 5023 --reps 1000
  rdd density --input data.csv --cutoff 350 --wl 349 --wr 350
  rdd falsify --input data.csv --cutoff 350 --covariates age --placebo-cutoffs 300,400 --donut 0,1
  rdd plot --input data.csv --cutoff 350 --out plot.svg
  rdd simulate --dgp curved --n 1000 --reps 500 --seed 1

Exit status: 0 on success, 2 on invalid input or arguments, 1 when an output file cannot be written."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Local polynomial point estimate with conventional and robust inference
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Covariate-balance window selection for local randomization
    Winselect {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        win: WinselectArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fisherian and large-sample inference inside a window
    Randinf {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        rand: RandinfArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Score density tests (binomial in a window, binned local linear)
    Density {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        dens: DensityArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Falsification battery: balance, placebo cutoffs, donut hole, sensitivity
    Falsify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        fals: FalsifyArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Binned-means RD plot or score histogram (JSON, CSV or SVG)
    Plot {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        plot: PlotArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo coverage study on a simulated design
    Simulate {
        #[command(flatten)]
        sim: SimulateArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TreatedArg {
    #[default]
    Above,
    Below,
}

/// Data bindings shared by the data-driven subcommands. Any field left unset
/// is taken from `--config` when given.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataArgs {
    /// JSON file supplying defaults for the options in this group
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input CSV file
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Score (running variable) column
    #[arg(long)]
    pub score: Option<String>,
    /// Outcome column
    #[arg(long)]
    pub outcome: Option<String>,
    /// Treatment-received column (0/1), required with --fuzzy
    #[arg(long)]
    pub received: Option<String>,
    /// Comma-separated covariate columns
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Cutoff value
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: Option<f64>,
    /// Side of the cutoff that is assigned to treatment
    #[arg(long, value_enum)]
    pub treated: Option<TreatedArg>,
    /// Fuzzy design (uses --received)
    #[arg(long)]
    pub fuzzy: bool,
    /// Master seed for randomization procedures
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo draws when exact enumeration is infeasible
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceArg {
    /// Nearest-neighbour residuals
    #[default]
    Nn,
    /// Plug-in residuals
    Hc0,
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    s.parse()
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorArgs {
    /// Kernel: tri, uni or epa
    #[arg(long, default_value = "tri", value_parser = parse_kernel)]
    pub kernel: Kernel,
    /// Local polynomial order
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Bias-correction order (default p + 1)
    #[arg(long)]
    pub q: Option<usize>,
    /// Main bandwidth (default: MSE-optimal)
    #[arg(long)]
    pub h: Option<f64>,
    /// Bias bandwidth (default: equal to h)
    #[arg(long)]
    pub b: Option<f64>,
    /// Confidence level
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Variance estimator
    #[arg(long, value_enum, default_value_t = VarianceArg::Nn)]
    pub variance: VarianceArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct WinselectArgs {
    /// Balance threshold on the minimum p-value
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
    /// Minimum observations per side in the first window
    #[arg(long, default_value_t = 10)]
    pub min_side: usize,
    /// Grow symmetric windows in score steps of this width
    #[arg(long, conflicts_with_all = ["wobs", "masspoints"])]
    pub wstep: Option<f64>,
    /// Grow windows by this many observations per side
    #[arg(long, conflicts_with = "masspoints")]
    pub wobs: Option<usize>,
    /// Grow windows one mass point per side
    #[arg(long)]
    pub masspoints: bool,
    /// Number of candidate windows (0 = all)
    #[arg(long, default_value_t = 10)]
    pub nwindows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticArg {
    Diffmeans,
    Tsls,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct WindowArgs {
    /// Window lower end
    #[arg(long, allow_hyphen_values = true)]
    pub wl: Option<f64>,
    /// Window upper end
    #[arg(long, allow_hyphen_values = true)]
    pub wr: Option<f64>,
    /// Symmetric window half width (alternative to --wl/--wr)
    #[arg(long, conflicts_with_all = ["wl", "wr"])]
    pub w: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RandinfArgs {
    #[command(flatten)]
    pub window: WindowArgs,
    /// Test statistic (default: tsls for fuzzy designs, diffmeans otherwise)
    #[arg(long, value_enum)]
    pub statistic: Option<StatisticArg>,
    /// Effect grid `lower,upper,step` for a constant-effect confidence interval
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ci: Option<Vec<f64>>,
    /// Level of the inverted test
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub window: WindowArgs,
    /// Success probability of the binomial test
    #[arg(long, default_value_t = 0.5)]
    pub prob: f64,
    /// Histogram bin width of the density test
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Local-linear bandwidth of the density test
    #[arg(long)]
    pub h_density: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameworkArg {
    #[default]
    Continuity,
    Locrand,
    Fuzzy,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FalsifyArgs {
    /// Balance-test framework
    #[arg(long, value_enum, default_value_t = FrameworkArg::Continuity)]
    pub framework: FrameworkArg,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Comma-separated placebo cutoffs
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub placebo_cutoffs: Vec<f64>,
    /// Comma-separated donut radii
    #[arg(long, value_delimiter = ',')]
    pub donut: Vec<f64>,
    /// Comma-separated bandwidths for the sensitivity sweep
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Vec<f64>,
    /// Skip the density tests
    #[arg(long)]
    pub no_density: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinningArg {
    #[default]
    Auto,
    Even,
    Quantile,
    Masspoints,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PlotArgs {
    /// Order of the global polynomial overlays
    #[arg(long, default_value_t = 4)]
    pub p_global: usize,
    /// Binning rule
    #[arg(long, value_enum, default_value_t = BinningArg::Auto)]
    pub binning: BinningArg,
    /// Bins per side for even and quantile binning
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Plot a histogram of the score instead of binned means
    #[arg(long)]
    pub histogram: bool,
    /// Histogram bin width
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Histogram score range `lower,upper`
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    pub range: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpArg {
    Curved,
    Linear,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Built-in design
    #[arg(long, value_enum, default_value_t = DgpArg::Curved)]
    pub dgp: DgpArg,
    /// Study specification (JSON); overrides --dgp, --n, --reps and --seed
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Sample size per replication
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Replications
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Master seed
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the first simulated dataset to this CSV file
    #[arg(long)]
    pub data_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OutArgs {
    /// Output file; the format follows the extension (.json, .csv, .md, .svg)
    #[arg(long)]
    pub out: Option<PathBuf>,
}
