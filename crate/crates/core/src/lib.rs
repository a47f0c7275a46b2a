//! Effective-SNR prediction for multi-span dual-polarization 4D optical
//! transmission, including both signal-signal and signal-ASE nonlinear
//! interference, and a split-step Manakov simulator used to calibrate and
//! check the prediction.
//!
//! * [`constellation`]: 4D formats, file loading, PM-QAM generation, moments.
//! * [`link`]: fiber/amplifier/signal parameters, span gain, ASE power.
//! * [`nli`]: closed-form noise budget, optimal launch power, reach.
//! * [`ssfm`]: transmitter, split-step fiber, EDFA, receiver DSP, noise
//!   decomposition and coefficient calibration.
//! * [`metrics`]: Monte-Carlo GMI/NGMI and required-SNR solving.

pub mod constellation;
pub mod error;
pub mod link;
pub mod metrics;
pub mod nli;
pub mod ssfm;
pub mod units;

pub use constellation::{generate_pm_qam, load_format, Constellation4D, FormatMoments};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use link::{ase_power_per_span, span_gain_linear, AmplifierParams, FiberParams, LinkConfig, SignalParams};
pub use metrics::{gmi, gmi_2d, ngmi, required_snr, GmiEstimate};
pub use nli::{
    eta_from_accumulated, optimal_launch_power, reach_at_ngmi, sigma2_sn, sigma2_ss, snr_eff, xi,
    CoefficientProvider, CoefficientSource, LaunchOptimum, NliCoefficients, NoiseBudget, PowerSearch, Reach,
    ReachOptions,
};
pub use ssfm::{Calibration, NoiseTerms, SsfmConfig, SsfmResult, WaveformGrid};
