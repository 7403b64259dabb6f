use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lkchaos_core::config::{parse_quantity, Dim};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LKCHAOS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "lkchaos", version, about = "Lang-Kobayashi chaos simulation and photon statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the rate equations and write a trace.
    Simulate(SimulateArgs),
    /// Second-order coherence g2(tau) of a trace.
    G2(G2Args),
    /// Normalized autocorrelation and delay-echo height.
    Acf(AcfArgs),
    /// Averaged power spectrum and 80% bandwidth.
    Spectrum(SpectrumArgs),
    /// Photon counts per window and their number distribution.
    Counts(CountsArgs),
    /// Two-detector coincidence g2(tau).
    Hbt(HbtArgs),
    /// Grid of simulations with per-point statistics.
    Sweep(SweepArgs),
    /// Regenerate the dataset behind one figure.
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Parameter file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Validate and print the resolved configuration, then stop.
    #[arg(long)]
    pub dry_run: bool,
    /// Parameter-file assignment applied after the file, e.g. `--set alpha=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Pump level J/J_th.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Feedback rate, e.g. `50ns-1`.
    #[arg(long, value_parser = rate, conflicts_with = "eta")]
    pub kappa: Option<f64>,
    /// Fed-back power fraction, e.g. `12.8%`.
    #[arg(long, value_parser = fraction)]
    pub eta: Option<f64>,
    /// Round-trip phase (rad).
    #[arg(long, value_parser = angle)]
    pub phase: Option<f64>,
    /// External cavity delay, e.g. `99.85ns`.
    #[arg(long, value_parser = time)]
    pub tau_ext: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Integration step, e.g. `2ps`.
    #[arg(long, value_parser = time)]
    pub step: Option<f64>,
    /// Discarded warm-up, e.g. `2us`.
    #[arg(long, value_parser = time)]
    pub transient: Option<f64>,
    /// Recorded duration, e.g. `10us`.
    #[arg(long, value_parser = time)]
    pub record: Option<f64>,
    /// Keep every n-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// `rescue` or `clamp`.
    #[arg(long)]
    pub floor_policy: Option<String>,
    /// `constant` or `dark`.
    #[arg(long)]
    pub history: Option<String>,
}

/// Where a metric command gets its trace from.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Binary trace written by `simulate`; without it a trace is simulated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Also record phase and carriers.
    #[arg(long)]
    pub all_channels: bool,
}

#[derive(Debug, Args)]
pub struct G2Args {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_parser = time, default_value = "5ns")]
    pub max_lag: f64,
    #[arg(long, default_value_t = 1)]
    pub lag_stride: usize,
}

#[derive(Debug, Args)]
pub struct AcfArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    /// Defaults to the delay plus the echo window.
    #[arg(long, value_parser = time)]
    pub max_lag: Option<f64>,
    #[arg(long, value_parser = time, default_value = "2ns")]
    pub half_window: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    /// Target resolution bandwidth, e.g. `3MHz`.
    #[arg(long, value_parser = frequency, default_value = "3MHz")]
    pub rbw: f64,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Counting window, e.g. `4ps`.
    #[arg(long, value_parser = time, default_value = "4ps")]
    pub window: f64,
    /// Calibrate attenuation to this mean count per window.
    #[arg(long, conflicts_with = "atten")]
    pub mean_counts: Option<f64>,
    /// Fixed mean photon number per window before detection efficiency.
    #[arg(long)]
    pub atten: Option<f64>,
    #[arg(long, value_parser = fraction, default_value = "25%")]
    pub quantum_eff: f64,
    #[arg(long, value_parser = time, default_value = "60ps")]
    pub timing_res: f64,
    #[arg(long, value_parser = time)]
    pub dead_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CountsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Args)]
pub struct HbtArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_parser = time, default_value = "2ns")]
    pub max_lag: f64,
    /// Also write the raw timestamp streams to this file.
    #[arg(long)]
    pub timestamps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Pump levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rho: Vec<f64>,
    /// Feedback rates, e.g. `5.5ns-1,7ns-1`.
    #[arg(long, value_delimiter = ',', value_parser = rate, required_unless_present = "eta")]
    pub kappa: Vec<f64>,
    /// Power fractions, e.g. `3.1%,12.5%`.
    #[arg(long, value_delimiter = ',', value_parser = fraction, conflicts_with = "kappa")]
    pub eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = angle)]
    pub phase: Vec<f64>,
    /// Subset of `g2_0,h,bandwidth,pnd`.
    #[arg(long, default_value = "g2_0")]
    pub metrics: String,
    #[arg(long, default_value_t = 1)]
    pub ensemble: usize,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// fig2, fig4, fig5 or fig7.
    pub tag: String,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Add feedback rates beyond the calibrated four (fig5).
    #[arg(long)]
    pub dense: bool,
    #[arg(long, default_value_t = 1)]
    pub ensemble: usize,
    /// Counting window of the mean-count sweep (fig4); defaults to the coherence time.
    #[arg(long, value_parser = time)]
    pub window: Option<f64>,
}

fn quantity(s: &str, dim: Dim) -> Result<f64, String> {
    parse_quantity(s, dim).map_err(|e| e.to_string())
}

pub fn time(s: &str) -> Result<f64, String> {
    quantity(s, Dim::Time)
}

pub fn rate(s: &str) -> Result<f64, String> {
    quantity(s, Dim::Rate)
}

pub fn frequency(s: &str) -> Result<f64, String> {
    quantity(s, Dim::Frequency)
}

pub fn fraction(s: &str) -> Result<f64, String> {
    quantity(s, Dim::Fraction)
}

pub fn angle(s: &str) -> Result<f64, String> {
    quantity(s, Dim::Angle)
}
