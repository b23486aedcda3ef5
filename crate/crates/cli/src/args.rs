//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mic", version, about = "Simulate, fit and evaluate mixtures of interacting cascades")]
pub struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random network and parameters (or load them) and simulate an event log.
    Simulate(SimulateArgs),
    /// Fit parameters to an event log on a known graph.
    Fit(FitArgs),
    /// Grid search over β and τ by held-out log-likelihood.
    Crossval(CrossvalArgs),
    /// Score fitted parameters on the held-out part of a log.
    Eval(EvalArgs),
    /// Closed-form expected intensities and counts on a time grid.
    Moments(MomentsArgs),
    /// Two-layer layout coordinates for fitted parameters.
    VizExport(VizArgs),
    /// Held-out likelihood ratios of IC and CC against the full model over a β × σ₂₁ grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixingKind {
    Linear,
    Boltzmann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantKind {
    Mic,
    Linmic,
    Ic,
    Cc,
}

/// `--mixing`, `--beta`.
#[derive(Debug, Clone, Args)]
pub struct MixingArgs {
    /// Mark mixing function; defaults to boltzmann when --beta is given, else linear.
    #[arg(long, value_enum)]
    pub mixing: Option<MixingKind>,

    /// Inverse temperature of the boltzmann mixing.
    #[arg(long)]
    pub beta: Option<f64>,
}

/// Event log and graph inputs.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Event log CSV with header `user,cascade,timestamp` (seconds).
    #[arg(long)]
    pub events: PathBuf,

    /// Edge list CSV with header `src,dst[,weight]`.
    #[arg(long)]
    pub graph: Option<PathBuf>,

    /// End of the observation window in seconds (default: last event time).
    #[arg(long, value_parser = parse_duration)]
    pub horizon: Option<f64>,

    /// Number of users (default: largest id seen + 1).
    #[arg(long)]
    pub users: Option<usize>,

    /// Number of cascades (default: largest id seen + 1).
    #[arg(long)]
    pub cascades: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory receiving events.csv, graph.csv and params.json.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Simulate from these parameters instead of drawing a scenario.
    #[arg(long)]
    pub params: Option<PathBuf>,

    #[arg(long, default_value_t = 50)]
    pub users: usize,

    #[arg(long, default_value_t = 3)]
    pub cascades: usize,

    /// Length of the simulated window in seconds.
    #[arg(long = "horizon", visible_alias = "T", default_value = "500", value_parser = parse_duration)]
    pub horizon: f64,

    /// Kernel decay time (seconds, or with a unit: 6min, 2h, 1d).
    #[arg(long, default_value = "3", value_parser = parse_duration)]
    pub tau: f64,

    #[command(flatten)]
    pub mixing: MixingArgs,

    /// `identity` or a JSON file holding a row-stochastic matrix.
    #[arg(long, default_value = "identity")]
    pub sigma: String,

    /// Probability of each directed edge.
    #[arg(long, default_value_t = 0.02)]
    pub edge_prob: f64,

    /// Edge weights are drawn from U(0, w_max).
    #[arg(long, default_value_t = 1.0)]
    pub w_max: f64,

    /// Baselines are drawn from U(0, mu_max).
    #[arg(long, default_value_t = 0.2)]
    pub mu_max: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Output parameter file; the likelihood trajectory goes next to it.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_parser = parse_duration)]
    pub tau: f64,

    #[command(flatten)]
    pub mixing: MixingArgs,

    /// Model family; overrides --mixing and --sigma.
    #[arg(long, value_enum)]
    pub variant: Option<VariantKind>,

    /// `learn`, `identity`, or a JSON file with a fixed matrix.
    #[arg(long, default_value = "learn")]
    pub sigma: String,

    /// Fit only the first fraction of events.
    #[arg(long)]
    pub train_fraction: Option<f64>,

    /// Stop when the log-likelihood gains less than this per outer iteration.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub out: PathBuf,

    /// Comma-separated β grid.
    #[arg(long, value_delimiter = ',', required = true)]
    pub betas: Vec<f64>,

    /// Comma-separated τ grid (durations).
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_duration)]
    pub taus: Vec<f64>,

    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,

    /// `learn` or `identity`.
    #[arg(long, default_value = "learn")]
    pub sigma: String,

    /// Use linear mixing (β is then ignored).
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub params: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,

    #[arg(long, default_value_t = 100)]
    pub bins: usize,

    #[arg(long, default_value_t = 10)]
    pub replications: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 0.75, 1.0])]
    pub context_fractions: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.25])]
    pub top_fractions: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub params: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Explicit comma-separated grid (durations); overrides --t-max/--points.
    #[arg(long, value_delimiter = ',', value_parser = parse_duration)]
    pub times: Vec<f64>,

    #[arg(long, default_value = "100", value_parser = parse_duration)]
    pub t_max: f64,

    #[arg(long, default_value_t = 101)]
    pub points: usize,

    /// Also integrate the per-cascade first-moment system.
    #[arg(long)]
    pub per_cascade_ode: bool,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub params: PathBuf,

    #[arg(long)]
    pub events: PathBuf,

    #[arg(long, value_parser = parse_duration)]
    pub horizon: Option<f64>,

    #[arg(long)]
    pub out: PathBuf,

    /// Percentile of nonzero weights an edge needs to be drawn.
    #[arg(long, default_value_t = 95.0)]
    pub threshold_percentile: f64,

    /// Height of the user layer above the cascade layer.
    #[arg(long, default_value_t = 1.0)]
    pub layer_offset: f64,

    #[arg(long, default_value_t = 500)]
    pub iterations: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Ratio table output.
    #[arg(long)]
    pub out: PathBuf,

    /// Per-job JSON lines; rerunning with the same journal skips finished jobs (default: <out>.jsonl).
    #[arg(long)]
    pub journal: Option<PathBuf>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 1.0, 33.0])]
    pub betas: Vec<f64>,

    /// Reinforcement of the first cascade by the second.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    pub sigmas: Vec<f64>,

    #[arg(long, default_value_t = 10)]
    pub replications: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 20)]
    pub users: usize,

    #[arg(long, default_value_t = 3)]
    pub cascades: usize,

    #[arg(long, default_value_t = 0.05)]
    pub edge_prob: f64,

    #[arg(long = "horizon", visible_alias = "T", default_value = "200", value_parser = parse_duration)]
    pub horizon: f64,

    #[arg(long, default_value = "3", value_parser = parse_duration)]
    pub tau: f64,

    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

/// Seconds from `90`, `1.5s`, `6min`, `2h` or `1d`.
pub fn parse_duration(raw: &str) -> Result<f64, String> {
    let s = raw.trim();
    let split = s
        .rfind(|c: char| !c.is_ascii_alphabetic())
        .map_or(0, |i| i + 1);
    let (number, unit) = s.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("invalid duration {raw:?}"))?;
    let scale = match unit.trim() {
        "" | "s" | "sec" | "secs" => 1.0,
        "m" | "min" | "mins" => 60.0,
        "h" | "hr" | "hour" | "hours" => 3600.0,
        "d" | "day" | "days" => 86400.0,
        other => return Err(format!("unknown time unit {other:?} in {raw:?}")),
    };
    let seconds = value * scale;
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(format!("duration {raw:?} must be finite and nonnegative"));
    }
    Ok(seconds)
}
