//! Physical link description and derived amplifier quantities.
//!
//! Configuration files are TOML with `[fiber]`, `[amplifier]`, `[signal]` and
//! `[link]` tables. Every key is optional; missing keys take the defaults
//! below (45 GBaud single channel over 80 km SMF spans with 5 dB NF EDFAs).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_lin, dbm_to_w, PLANCK};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberParams {
    pub alpha_db_per_km: f64,
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
    pub span_length_km: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            alpha_db_per_km: 0.2,
            beta2_ps2_per_km: -21.7,
            gamma_per_w_km: 1.3,
            span_length_km: 80.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifierParams {
    pub noise_figure_db: f64,
    pub center_frequency_hz: f64,
}

impl Default for AmplifierParams {
    fn default() -> Self {
        Self {
            noise_figure_db: 5.0,
            center_frequency_hz: 193.41e12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalParams {
    pub symbol_rate_baud: f64,
    pub rrc_rolloff: f64,
    /// Total launch power over both polarizations.
    pub launch_power_dbm: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self {
            symbol_rate_baud: 45e9,
            rrc_rolloff: 0.01,
            launch_power_dbm: 0.5,
        }
    }
}

impl SignalParams {
    pub fn launch_power_w(&self) -> f64 {
        dbm_to_w(self.launch_power_dbm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpanSection {
    pub n_spans: u32,
    /// Bandwidth in which ASE power is reported. Defaults to the symbol
    /// rate, which is the noise bandwidth of the RRC matched filter.
    pub noise_bandwidth_hz: Option<f64>,
}

impl Default for SpanSection {
    fn default() -> Self {
        Self {
            n_spans: 20,
            noise_bandwidth_hz: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub fiber: FiberParams,
    #[serde(rename = "amplifier")]
    pub amp: AmplifierParams,
    pub signal: SignalParams,
    pub link: SpanSection,
}

impl LinkConfig {
    pub fn n_spans(&self) -> u32 {
        self.link.n_spans
    }

    pub fn with_spans(mut self, n: u32) -> Self {
        self.link.n_spans = n;
        self
    }

    pub fn with_launch_power_dbm(mut self, dbm: f64) -> Self {
        self.signal.launch_power_dbm = dbm;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.fiber.gamma_per_w_km = gamma;
        self
    }

    pub fn distance_km(&self) -> f64 {
        self.fiber.span_length_km * self.link.n_spans as f64
    }

    pub fn noise_bandwidth_hz(&self) -> f64 {
        self.link
            .noise_bandwidth_hz
            .unwrap_or(self.signal.symbol_rate_baud)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.fiber;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        };
        check(f.alpha_db_per_km > 0.0, "fiber.alpha_db_per_km must be > 0")?;
        check(f.span_length_km > 0.0, "fiber.span_length_km must be > 0")?;
        check(f.gamma_per_w_km >= 0.0, "fiber.gamma_per_w_km must be >= 0")?;
        check(f.beta2_ps2_per_km.is_finite(), "fiber.beta2_ps2_per_km must be finite")?;
        check(self.amp.noise_figure_db > 0.0, "amplifier.noise_figure_db must be > 0")?;
        check(self.amp.center_frequency_hz > 0.0, "amplifier.center_frequency_hz must be > 0")?;
        check(self.signal.symbol_rate_baud > 0.0, "signal.symbol_rate_baud must be > 0")?;
        check(
            self.signal.rrc_rolloff > 0.0 && self.signal.rrc_rolloff <= 1.0,
            "signal.rrc_rolloff must lie in (0, 1]",
        )?;
        check(self.signal.launch_power_dbm.is_finite(), "signal.launch_power_dbm must be finite")?;
        check(self.link.n_spans >= 1, "link.n_spans must be >= 1")?;
        if let Some(b) = self.link.noise_bandwidth_hz {
            check(b > 0.0, "link.noise_bandwidth_hz must be > 0")?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: LinkConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("link config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("link config serializes")
    }
}

/// Amplifier gain that exactly compensates one span's loss.
pub fn span_gain_linear(link: &LinkConfig) -> f64 {
    db_to_lin(link.fiber.alpha_db_per_km * link.fiber.span_length_km)
}

/// ASE power added by one amplifier, summed over both polarizations and
/// measured in `bandwidth_hz`: `(G - 1) * n_sp * h * nu * B * 2` with
/// `n_sp = NF / 2`.
pub fn ase_power_per_span(link: &LinkConfig, bandwidth_hz: f64) -> f64 {
    let g = span_gain_linear(link);
    let n_sp = db_to_lin(link.amp.noise_figure_db) / 2.0;
    (g - 1.0) * n_sp * PLANCK * link.amp.center_frequency_hz * bandwidth_hz * 2.0
}

/// Power spectral density of one amplifier's ASE over both polarizations, W/Hz.
pub fn ase_psd_per_span(link: &LinkConfig) -> f64 {
    ase_power_per_span(link, 1.0)
}
