//! Command-line driver: closed-form prediction, split-step simulation,
//! GMI, coefficient calibration and batch experiments, all written as CSV.

pub mod args;
mod commands;
pub mod error;
mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use dp4d::{generate_pm_qam, load_format, Constellation4D, LinkConfig, NliCoefficients, SsfmConfig};
use serde::{Deserialize, Serialize};

use args::{Cli, Command, FormatAction, SsfmArgs};
pub use error::{CliError, Result};
use output::Cache;

/// Settings shared by every subcommand.
pub struct Context {
    pub link: LinkConfig,
    pub out: Option<PathBuf>,
    pub seeds: Option<usize>,
    pub cache: Cache,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let link = match &cli.config {
            Some(p) => LinkConfig::load(p)?,
            None => LinkConfig::default(),
        };
        link.validate()?;
        if cli.seeds == Some(0) {
            return Err(CliError::Usage("--seeds must be >= 1".into()));
        }
        Ok(Self {
            link,
            out: cli.out.clone(),
            seeds: cli.seeds,
            cache: Cache::new(cli.out.as_deref()),
        })
    }

    pub fn n_seeds(&self, default: usize) -> usize {
        self.seeds.unwrap_or(default)
    }

    pub fn out_dir(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let ctx = Context::from_cli(&cli)?;
    match cli.command {
        Command::Format { action: FormatAction::Info { format } } => commands::format_info(&ctx, &format),
        Command::Predict(a) => commands::predict(&ctx, &a),
        Command::Simulate(a) => commands::simulate(&ctx, &a),
        Command::Gmi(a) => commands::gmi(&ctx, &a),
        Command::Calibrate(a) => commands::calibrate(&ctx, &a),
        Command::Experiment(a) => experiments::run(&ctx, &a),
    }
}

/// Loads a format from a file path, or generates `pm-qam:N`.
pub fn resolve_format(spec: &str) -> Result<Constellation4D> {
    if let Some(order) = spec.strip_prefix("pm-qam:") {
        let order: usize = order
            .parse()
            .map_err(|_| CliError::Usage(format!("bad PM-QAM order in {spec:?}")))?;
        return Ok(generate_pm_qam(order)?);
    }
    Ok(load_format(spec)?)
}

/// Parses `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("cannot parse grid {spec:?}; use A:B:STEP or a comma list"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let (a, b, step) = (v[0], v[1], v[2]);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| output::grid_value(a + i as f64 * step)).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

/// Span-count grid; every entry must be a positive integer.
pub fn parse_spans(spec: &str) -> Result<Vec<u32>> {
    parse_grid(spec)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(dp4d::Error::Config(format!("span counts must be integers >= 1, got {v}")).into())
            }
        })
        .collect()
}

pub fn ssfm_config(a: &SsfmArgs) -> SsfmConfig {
    let d = SsfmConfig::default();
    SsfmConfig {
        step_km: a.step_km.unwrap_or(d.step_km),
        n_symbols: a.symbols.unwrap_or(d.n_symbols),
        sps: a.sps.unwrap_or(d.sps),
        rng_seed: a.seed,
        guard_symbols: a.guard.unwrap_or(d.guard_symbols),
        ..d
    }
}

/// Coefficient file written by `calibrate` and read by `predict` and the
/// experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsFile {
    pub format: String,
    #[serde(flatten)]
    pub coefficients: NliCoefficients,
    #[serde(default)]
    pub power_dbm: Option<f64>,
    #[serde(default)]
    pub r_squared: Option<f64>,
    #[serde(default)]
    pub spans: Vec<u32>,
}

impl CoefficientsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let f: Self = toml::from_str(&text)
            .map_err(|e| dp4d::Error::Config(format!("{}: {e}", path.display())))?;
        NliCoefficients::new(f.coefficients.eta_ss, f.coefficients.epsilon, f.coefficients.source)?;
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| CliError::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-2:1:1").unwrap(), vec![-2.0, -1.0, 0.0, 1.0]);
        assert_eq!(parse_grid("0:0.3:0.1").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(parse_grid("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("a").is_err());
        assert_eq!(parse_spans("10:30:10").unwrap(), vec![10, 20, 30]);
        assert!(matches!(parse_spans("0,1"), Err(CliError::Core(dp4d::Error::Config(_)))));
        assert!(parse_spans("1.5").is_err());
    }

    #[test]
    fn coefficients_file_round_trip() {
        let f = CoefficientsFile {
            format: "PM-16QAM".into(),
            coefficients: NliCoefficients::user(71.5, 0.12).unwrap(),
            power_dbm: Some(0.5),
            r_squared: Some(0.999),
            spans: vec![1, 2],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        f.save(&p).unwrap();
        assert_eq!(CoefficientsFile::load(&p).unwrap(), f);
    }

    #[test]
    fn formats_resolve() {
        assert_eq!(resolve_format("pm-qam:16").unwrap().len(), 256);
        assert!(resolve_format("pm-qam:x").is_err());
        assert!(matches!(
            resolve_format("/nonexistent/fmt.txt"),
            Err(CliError::Core(dp4d::Error::Io { .. }))
        ));
    }
}
