use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "dp4d",
    version,
    about = "Effective-SNR prediction and split-step simulation for dual-polarization 4D formats"
)]
pub struct Cli {
    /// Link configuration file (TOML: [fiber], [amplifier], [signal], [link])
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory for CSV, plot scripts and the result cache (stdout when absent)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Number of simulation seeds
    #[arg(long, global = true, value_name = "K")]
    pub seeds: Option<usize>,

    /// Worker threads
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect modulation formats
    Format {
        #[command(subcommand)]
        action: FormatAction,
    },
    /// Closed-form noise budget and effective SNR
    Predict(PredictArgs),
    /// Split-step simulation with noise decomposition
    Simulate(SimulateArgs),
    /// Monte-Carlo GMI / NGMI over the AWGN channel
    Gmi(GmiArgs),
    /// Fit the S-S coefficients from noiseless simulations
    Calibrate(CalibrateArgs),
    /// Batch experiments
    Experiment(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
pub enum FormatAction {
    /// Size, energy and moments of a format
    Info {
        /// Constellation file or `pm-qam:N`
        format: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    pub fn is_on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct PowerArgs {
    /// Launch power in dBm (default: from the config)
    #[arg(long, allow_hyphen_values = true, conflicts_with = "power_sweep")]
    pub power_dbm: Option<f64>,

    /// Inclusive launch-power grid in dBm
    #[arg(long, value_name = "A:B:STEP", allow_hyphen_values = true)]
    pub power_sweep: Option<String>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct CoeffArgs {
    /// One-span S-S coefficient in 1/W²
    #[arg(long)]
    pub eta_ss: Option<f64>,

    /// Coherence factor used with --eta-ss
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,

    /// Coefficient files written by `calibrate`, one per format
    #[arg(long, value_name = "PATH", value_delimiter = ',', conflicts_with = "eta_ss")]
    pub coefficients: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct SsfmArgs {
    /// Symbols per frame
    #[arg(long)]
    pub symbols: Option<usize>,

    /// Samples per symbol
    #[arg(long)]
    pub sps: Option<usize>,

    /// Split-step length in km
    #[arg(long)]
    pub step_km: Option<f64>,

    /// Symbols dropped at each frame edge by the receiver
    #[arg(long)]
    pub guard: Option<usize>,

    /// First seed; K seeds run as seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub coeff: CoeffArgs,

    #[command(flatten)]
    pub power: PowerArgs,

    /// Include the signal-ASE term
    #[arg(long, value_enum, default_value = "on")]
    pub include_sn: OnOff,

    /// Number of spans (default: from the config)
    #[arg(long)]
    pub spans: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Constellation file or `pm-qam:N`
    #[arg(long, default_value = "pm-qam:16")]
    pub format: String,

    /// Span counts (`10,20,40` or `A:B:STEP`); all share one propagation per seed
    #[arg(long)]
    pub spans: Option<String>,

    #[command(flatten)]
    pub power: PowerArgs,

    #[command(flatten)]
    pub ssfm: SsfmArgs,

    /// ASE noise; the bare flag turns it off
    #[arg(long, value_enum, num_args = 0..=1, default_value = "on", default_missing_value = "off")]
    pub toggle_ase: OnOff,

    /// Kerr nonlinearity; the bare flag turns it off
    #[arg(long, value_enum, num_args = 0..=1, default_value = "on", default_missing_value = "off")]
    pub toggle_nl: OnOff,
}

#[derive(Debug, Args)]
pub struct GmiArgs {
    /// Constellation file or `pm-qam:N`
    #[arg(long, default_value = "pm-qam:16")]
    pub format: String,

    #[arg(long, allow_hyphen_values = true, conflicts_with = "snr_sweep")]
    pub snr_db: Option<f64>,

    /// Inclusive SNR grid in dB
    #[arg(long, value_name = "A:B:STEP", allow_hyphen_values = true)]
    pub snr_sweep: Option<String>,

    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Constellation file or `pm-qam:N`
    #[arg(long, default_value = "pm-qam:16")]
    pub format: String,

    /// Span counts of the noiseless runs
    #[arg(long, default_value = "1,2,5,10,20")]
    pub distances: String,

    /// Launch power in dBm (default: from the config)
    #[arg(long, allow_hyphen_values = true)]
    pub power_dbm: Option<f64>,

    #[command(flatten)]
    pub ssfm: SsfmArgs,

    /// Also write the coefficients here (always written to DIR/coefficients.toml with --out)
    #[arg(long, value_name = "PATH")]
    pub coefficients_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExperimentName {
    /// ASE, S-S and S-N power versus distance (closed form)
    NoiseVsDistance,
    /// SNR deviation of both model variants from the split-step result
    NliVsDistance,
    /// Model and simulated NLI power per format at one distance
    NliByFormat,
    /// NGMI at optimal launch power versus distance, and reach
    NgmiVsDistance,
    /// Effective SNR versus launch power
    SnrVsPower,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::NoiseVsDistance => "noise_vs_distance",
            ExperimentName::NliVsDistance => "nli_vs_distance",
            ExperimentName::NliByFormat => "nli_by_format",
            ExperimentName::NgmiVsDistance => "ngmi_vs_distance",
            ExperimentName::SnrVsPower => "snr_vs_power",
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,

    /// Formats (files or `pm-qam:N`)
    #[arg(long, value_delimiter = ',', default_value = "pm-qam:16")]
    pub formats: Vec<String>,

    /// Span grid (`10,20,40` or `A:B:STEP`)
    #[arg(long)]
    pub spans: Option<String>,

    #[command(flatten)]
    pub power: PowerArgs,

    #[command(flatten)]
    pub coeff: CoeffArgs,

    /// Derive the coefficients from split-step runs instead of supplying them
    #[arg(long)]
    pub calibrate: bool,

    /// Span counts used by --calibrate when the experiment has no simulations of its own
    #[arg(long, default_value = "1,2,5,10,20")]
    pub calibration_distances: String,

    #[command(flatten)]
    pub ssfm: SsfmArgs,

    /// Add split-step points (snr_vs_power)
    #[arg(long)]
    pub ssfm_points: bool,

    #[arg(long, default_value_t = 0.8)]
    pub ngmi_threshold: f64,

    #[arg(long, default_value_t = 100_000)]
    pub gmi_samples: usize,

    /// Also write a gnuplot script next to each CSV
    #[arg(long)]
    pub plot: bool,
}
