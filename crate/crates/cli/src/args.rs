use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "blockmt",
    version,
    about = "Block-wise multiple testing: p-value adjustment, power sweeps and connectivity-matrix comparison"
)]
pub struct Cli {
    /// Worker threads; defaults to BLOCKMT_THREADS, else one per core
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of flag values (keys are flag names); command-line flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adjust p-values (one per line) and report rejections
    #[command(args_override_self = true)]
    Adjust(AdjustArgs),

    /// Monte Carlo power/FWER/FDR sweep, from a figure preset or an explicit grid
    #[command(args_override_self = true)]
    Sweep(SweepArgs),

    /// Worked 8x8 example: region-wise versus block-wise decisions
    #[command(args_override_self = true)]
    Example2(Example2Args),

    /// Compare two groups of connectivity matrices with the four strategies
    #[command(args_override_self = true)]
    Connectome(ConnectomeArgs),

    /// Write a synthetic study (matrices, hierarchy, ground truth) to disk
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    /// Inputs are p-values
    P,
    /// Inputs are z scores, converted to one-sided p = 1 - Phi(z)
    Z,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    /// Input file, one value per line (default: stdin)
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// bonferroni, sidak, holm, hochberg, bh95 or by01
    #[arg(long, default_value = "bonferroni")]
    pub method: String,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value_t = Scale::P)]
    pub scale: Scale,

    /// Also write adjust.csv and manifest.json into this directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Preset: 1a, 1b, 1c, 1d or 2; other flags override its values
    #[arg(long)]
    pub figure: Option<String>,

    /// Total number of small regions M
    #[arg(long)]
    pub m_total: Option<usize>,

    /// Affected regions M1 (fully affected grids)
    #[arg(long)]
    pub affected: Option<usize>,

    /// Comma-separated raw effects
    #[arg(long, visible_alias = "delta")]
    pub deltas: Option<String>,

    /// Comma-separated block sizes; SRW runs on the first
    #[arg(long, visible_alias = "b")]
    pub block_sizes: Option<String>,

    /// Comma-separated affected fractions k/b (partially affected grids), or "none"
    #[arg(long)]
    pub fractions: Option<String>,

    /// Partially affected blocks are m / divisor
    #[arg(long)]
    pub partial_divisor: Option<usize>,

    /// Comma-separated strategy:method pairs, e.g. mean_bwa:bonferroni,srw:bh95
    #[arg(long)]
    pub pairs: Option<String>,

    /// exact or moment
    #[arg(long)]
    pub partial_model: Option<String>,

    #[arg(long)]
    pub mu0: Option<f64>,

    #[arg(long)]
    pub sigma0: Option<f64>,

    #[arg(long)]
    pub sigma1: Option<f64>,

    #[arg(long)]
    pub alpha: Option<f64>,

    /// Replications per grid cell
    #[arg(long)]
    pub nsim: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Example2Args {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Also write example2.json and manifest.json into this directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parameters of a synthetic study; unset values take the library defaults.
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Hierarchy level sizes, finest first, e.g. 60,24,12
    #[arg(long)]
    pub levels: Option<String>,

    #[arg(long)]
    pub n_controls: Option<usize>,

    #[arg(long)]
    pub n_treatments: Option<usize>,

    #[arg(long)]
    pub delta: Option<f64>,

    /// Share of blocks receiving the effect
    #[arg(long)]
    pub affected_share: Option<f64>,

    /// Range of the affected fraction inside an affected block, "lo,hi"
    #[arg(long)]
    pub fraction_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConnectomeArgs {
    /// Directory of control matrices
    #[arg(long)]
    pub controls: Option<PathBuf>,

    /// Directory of treatment matrices; omitted: generated from the controls
    #[arg(long)]
    pub treatments: Option<PathBuf>,

    /// Use synthetic controls and hierarchy instead of files
    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true")]
    pub synthesize: bool,

    /// Hierarchy file (header row, then one record per ROI)
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,

    /// Hierarchy level defining the blocks (default: the coarsest)
    #[arg(long)]
    pub block_level: Option<usize>,

    /// Affected blocks for generated treatments, "P Q fraction" per line
    #[arg(long)]
    pub affected: Option<PathBuf>,

    /// Ground truth JSON written by `generate`, for loaded treatments
    #[arg(long)]
    pub truth: Option<PathBuf>,

    #[command(flatten)]
    pub synth: SynthArgs,

    /// Comma-separated strategies (srw, mean, truncated, bivariate) or "all"
    #[arg(long, default_value = "all")]
    pub strategy: String,

    /// Comma-separated procedures or "all"
    #[arg(long, default_value = "bonferroni,bh95,by01")]
    pub method: String,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Truncation threshold of the truncated mean
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,

    /// standard or printed
    #[arg(long, default_value = "standard")]
    pub f_constant: String,

    /// greater, less or two-sided
    #[arg(long, default_value = "greater")]
    pub alternative: String,

    /// Also analyze within-parcel blocks
    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true")]
    pub include_diagonal: bool,

    /// Histogram bins for the design histograms
    #[arg(long, default_value_t = 10)]
    pub bins: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub synth: SynthArgs,

    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true")]
    pub include_diagonal: bool,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}
