use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "psqkd",
    version,
    about = "Post-selection CV-QKD key rates, regions, thresholds and protocol simulation",
    args_override_self = true
)]
pub struct Cli {
    /// File of `key = value` lines supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Post-selected key rate at one channel setting.
    Rate(RateArgs),
    /// Advantage map over announced magnitudes, with overlay lines.
    Region(RegionArgs),
    /// Noise threshold and separability bound over a transmission grid.
    Threshold(ThresholdArgs),
    /// Key rate against excess noise at fixed transmission.
    Sweep(SweepArgs),
    /// Optimised key rate over a transmission by excess-noise grid.
    Contour(ContourArgs),
    /// Monte Carlo run of the full protocol.
    Simulate(SimulateArgs),
    /// Channel estimation (and optionally the key rate) from a dataset file.
    Estimate(EstimateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackArg {
    Individual,
    Collective,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Sifted,
    ChannelUse,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long, value_enum, default_value_t = ConventionArg::Sifted)]
    pub rate_convention: ConventionArg,
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// Channel transmission in (0, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub eta: f64,

    /// Excess noise in shot-noise units, at least 0.
    #[arg(long, allow_negative_numbers = true)]
    pub xi: f64,
}

#[derive(Debug, Clone, Args)]
#[group(multiple = false)]
pub struct VaArgs {
    /// Alice's modulation variance.
    #[arg(long, allow_negative_numbers = true)]
    pub va: Option<f64>,

    /// Choose the variance that maximises the rate.
    #[arg(long)]
    pub optimize_va: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub va: VaArgs,
    #[arg(long, value_enum, default_value_t = AttackArg::Both)]
    pub attack: AttackArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_enum, default_value_t = AttackArg::Both)]
    pub attack: AttackArg,
    /// Largest |S_A| on the grid.
    #[arg(long, default_value_t = 10.0)]
    pub s_max: f64,
    /// Largest |m_B| on the grid.
    #[arg(long, default_value_t = 10.0)]
    pub m_max: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 0.02)]
    pub eta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub xi_min: f64,
    /// Defaults to just past the noise threshold.
    #[arg(long)]
    pub xi_max: Option<f64>,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Fixed modulation variance; with `--optimize-va` the variance is
    /// re-optimised for each attack. Otherwise the individual-attack optimum
    /// is used for every attack.
    #[command(flatten)]
    pub va: VaArgs,
    #[arg(long, value_enum, default_value_t = AttackArg::Both)]
    pub attack: AttackArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ContourArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eta_min: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 9)]
    pub eta_points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 11)]
    pub xi_points: usize,
    #[arg(long, value_enum, default_value_t = AttackArg::Individual)]
    pub attack: AttackArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Defaults to the individual-attack optimum.
    #[command(flatten)]
    pub va: VaArgs,
    #[arg(long, value_enum, default_value_t = AttackArg::Individual)]
    pub attack: AttackArg,
    /// Channel uses.
    #[arg(long, default_value = "2400000", value_parser = parse_count)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving dataset.csv, estimation.csv and metadata.json.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Dataset CSV (`index,quadrature,s_a,m_b,bit_a,bit_b`).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Metadata sidecar; when given, the rate uses its recorded estimates
    /// and attack, reproducing the recorded rate.
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AttackArg::Individual)]
    pub attack: AttackArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Accepts plain integers and scientific notation such as `2.4e6`.
fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if x >= 1.0 && x.fract() == 0.0 && x <= 1e15 {
        Ok(x as usize)
    } else {
        Err(format!("not a positive whole number: {s}"))
    }
}
