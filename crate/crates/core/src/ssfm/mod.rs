//! Split-step Fourier simulation of single-channel dual-polarization
//! transmission over a multi-span EDFA link (Manakov equation).
//!
//! The simulation is periodic: transmit and receive filters are applied in
//! the frequency domain on the whole frame, so there are no filter
//! transients. Symbol RNG and ASE RNG are separate streams of the same seed,
//! which lets runs with different toggles share both the data and the noise
//! realization.

mod amplifier;
mod fiber;
mod receiver;
mod waveform;

pub use amplifier::amplify;
pub use fiber::{compensate_dispersion, propagate_span, SplitStep, MANAKOV_FACTOR};
pub use receiver::{receive, Received, LOW_SNR_WARNING_DB};
pub use waveform::{raised_cosine, rrc_response, transmit, FftPair, Transmitted, WaveformGrid};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation4D;
use crate::error::{Error, Result};
use crate::link::LinkConfig;
use crate::nli::{CoefficientSource, NliCoefficients};
use crate::units::lin_to_db;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsfmConfig {
    pub step_km: f64,
    pub n_symbols: usize,
    pub sps: usize,
    pub rng_seed: u64,
    pub ase_on: bool,
    pub nonlinearity_on: bool,
    /// Symbols excluded at each end of the frame when computing metrics.
    pub guard_symbols: usize,
    /// Run the auxiliary propagations that split the noise into ASE, S-S
    /// and S-N. When off, only the total is measured and the split is NaN.
    pub decompose: bool,
}

impl Default for SsfmConfig {
    fn default() -> Self {
        Self {
            step_km: 0.1,
            n_symbols: 1 << 13,
            sps: 4,
            rng_seed: 1,
            ase_on: true,
            nonlinearity_on: true,
            guard_symbols: 32,
            decompose: true,
        }
    }
}

impl SsfmConfig {
    pub fn validate(&self, link: &LinkConfig) -> Result<()> {
        link.validate()?;
        if self.step_km.is_nan() || self.step_km <= 0.0 {
            return Err(Error::Config("step_km must be > 0".into()));
        }
        fiber::steps_per_span(link.fiber.span_length_km, self.step_km)?;
        if (self.sps as f64) < 2.0 * (1.0 + link.signal.rrc_rolloff) {
            return Err(Error::Config(format!(
                "sps = {} undersamples roll-off {}; need sps >= 2(1 + rolloff)",
                self.sps, link.signal.rrc_rolloff
            )));
        }
        if self.n_symbols < 4 * self.guard_symbols.max(16) {
            return Err(Error::Config(format!(
                "{} symbols is too short for a guard of {}",
                self.n_symbols, self.guard_symbols
            )));
        }
        Ok(())
    }
}

/// Which physical effects a single propagation includes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Mode {
    ase: bool,
    nonlinear: bool,
}

/// Propagates one seed over `max(checkpoints)` spans and runs the receiver
/// after each checkpoint span.
fn run_checkpoints(
    link: &LinkConfig,
    c: &Constellation4D,
    cfg: &SsfmConfig,
    mode: Mode,
    seed: u64,
    checkpoints: &[u32],
) -> Result<Vec<Received>> {
    let tx = transmit(c, &link.signal, cfg.n_symbols, cfg.sps, seed);
    let mut w = tx.waveform;
    let run_cfg = SsfmConfig {
        nonlinearity_on: mode.nonlinear,
        ase_on: mode.ase,
        ..*cfg
    };
    let mut prop = SplitStep::new(&link.fiber, &run_cfg, w.len(), w.sample_rate_hz)?;
    let mut ase_rng = ChaCha8Rng::seed_from_u64(seed);
    ase_rng.set_stream(1);
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(checkpoints.len());
    for span in 1..=last {
        prop.propagate(&mut w, span)?;
        amplify(&mut w, link, mode.ase, &mut ase_rng);
        if checkpoints.contains(&span) {
            out.push((span, receive(&w, link, span, c, &tx.symbols, cfg.guard_symbols)));
        }
    }
    // restore caller's checkpoint order
    Ok(checkpoints
        .iter()
        .map(|n| out.iter().find(|(s, _)| s == n).expect("checkpoint visited").1.clone())
        .collect())
}

/// Noise decomposition of one seed at one distance, in W.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedTerms {
    pub seed: u64,
    pub spans: u32,
    /// SNR of the run with the configured toggles.
    pub snr_eff_db: f64,
    pub total_w: f64,
    pub ase_w: f64,
    pub ss_w: f64,
    pub sn_w: f64,
    /// Standard error of `sn_w` from the per-symbol spread of this seed.
    pub sn_within_se: f64,
    pub low_snr_warning: bool,
}

fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        s += v;
        s2 += v * v;
    }
    let mean = s / n;
    let var = if n > 1.0 { ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn seed_terms(link: &LinkConfig, c: &Constellation4D, cfg: &SsfmConfig, seed: u64, checkpoints: &[u32]) -> Result<Vec<(SeedTerms, Vec<[Complex64; 2]>)>> {
    let p = link.signal.launch_power_w();
    let to_w = |r: &Received, e2: f64| p * e2 / r.reference_energy;
    let full = Mode { ase: cfg.ase_on, nonlinear: cfg.nonlinearity_on };
    let main = run_checkpoints(link, c, cfg, full, seed, checkpoints)?;
    let (ss_runs, ase_runs) = if cfg.ase_on && cfg.nonlinearity_on && cfg.decompose {
        (
            Some(run_checkpoints(link, c, cfg, Mode { ase: false, nonlinear: true }, seed, checkpoints)?),
            Some(run_checkpoints(link, c, cfg, Mode { ase: true, nonlinear: false }, seed, checkpoints)?),
        )
    } else {
        (None, None)
    };
    let mut out = Vec::with_capacity(checkpoints.len());
    for (i, (&spans, a)) in checkpoints.iter().zip(&main).enumerate() {
        let total_w = to_w(a, a.mean_error_power());
        let (ase_w, ss_w, sn_w, sn_within_se) = match (&ss_runs, &ase_runs) {
            (Some(bs), Some(cs)) => {
                let (b, cc) = (&bs[i], &cs[i]);
                // |eA|² - |eB + eC|² removes the zero-mean B·C cross term from A - B - C
                let (sn, se) = mean_se(a.errors.iter().zip(&b.errors).zip(&cc.errors).map(|((ea, eb), ec)| {
                    (0..2)
                        .map(|pol| ea[pol].norm_sqr() - (eb[pol] + ec[pol]).norm_sqr())
                        .sum::<f64>()
                }));
                (
                    to_w(cc, cc.mean_error_power()),
                    to_w(b, b.mean_error_power()),
                    to_w(a, sn),
                    to_w(a, se),
                )
            }
            _ if cfg.ase_on && cfg.nonlinearity_on => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            _ if cfg.nonlinearity_on => (0.0, total_w, 0.0, 0.0),
            _ => (total_w, 0.0, 0.0, 0.0),
        };
        out.push((
            SeedTerms {
                seed,
                spans,
                snr_eff_db: a.snr_eff_db,
                total_w,
                ase_w,
                ss_w,
                sn_w,
                sn_within_se,
                low_snr_warning: a.low_snr_warning,
            },
            a.symbols.clone(),
        ));
    }
    Ok(out)
}

/// Result of one simulated seed, with the configuration it ran under.
#[derive(Clone, Debug)]
pub struct SsfmResult {
    pub seed: u64,
    pub snr_eff_db: f64,
    pub received: Vec<[Complex64; 2]>,
    pub terms: SeedTerms,
    pub low_snr_warning: bool,
    pub config: SsfmConfig,
    pub link: LinkConfig,
}

/// Simulates `link.n_spans()` spans with `cfg.rng_seed`. When both ASE and
/// nonlinearity are on, the auxiliary runs needed for the noise
/// decomposition are included.
pub fn simulate(link: &LinkConfig, c: &Constellation4D, cfg: &SsfmConfig) -> Result<SsfmResult> {
    cfg.validate(link)?;
    let (terms, received) = seed_terms(link, c, cfg, cfg.rng_seed, &[link.n_spans()])?
        .pop()
        .expect("one checkpoint");
    Ok(SsfmResult {
        seed: cfg.rng_seed,
        snr_eff_db: terms.snr_eff_db,
        received,
        terms,
        low_snr_warning: terms.low_snr_warning,
        config: *cfg,
        link: *link,
    })
}

/// Seed-averaged noise decomposition at one distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTerms {
    pub spans: u32,
    pub distance_km: f64,
    pub power_w: f64,
    /// `P / total_w`, from the seed-averaged total noise.
    pub snr_eff_db: f64,
    pub total_w: f64,
    pub ase_w: f64,
    pub ss_w: f64,
    pub sn_w: f64,
    pub total_se: f64,
    pub ase_se: f64,
    pub ss_se: f64,
    pub sn_se: f64,
    pub per_seed: Vec<SeedTerms>,
}

/// Seeds used for `n_runs` runs starting at `cfg.rng_seed`.
pub fn seeds(cfg: &SsfmConfig, n_runs: usize) -> Vec<u64> {
    (0..n_runs as u64).map(|i| cfg.rng_seed.wrapping_add(i)).collect()
}

/// Estimates `{ase, ss, sn}` over `n_runs` seeds at each span count in
/// `checkpoints`, sharing one propagation per seed and toggle setting.
///
/// With ASE and nonlinearity both on, every seed runs three times: (A) full,
/// (B) without ASE, (C) without nonlinearity. Then `ss = B`, `ase = C` and
/// `sn = A - B - C`, the last evaluated field-wise as `|eA|² - |eB + eC|²`,
/// which has the same mean but not the zero-mean B·C cross term. With
/// `cfg.decompose` off only (A) runs.
pub fn estimate_noise_terms_at(
    link: &LinkConfig,
    c: &Constellation4D,
    cfg: &SsfmConfig,
    n_runs: usize,
    checkpoints: &[u32],
) -> Result<Vec<NoiseTerms>> {
    cfg.validate(link)?;
    if n_runs < 1 {
        return Err(Error::Config("n_runs must be >= 1".into()));
    }
    if checkpoints.is_empty() || checkpoints.contains(&0) {
        return Err(Error::Config("checkpoints must be non-empty span counts >= 1".into()));
    }
    let per_seed: Vec<Vec<SeedTerms>> = seeds(cfg, n_runs)
        .into_par_iter()
        .map(|s| Ok(seed_terms(link, c, cfg, s, checkpoints)?.into_iter().map(|(t, _)| t).collect()))
        .collect::<Result<_>>()?;
    let p = link.signal.launch_power_w();
    let mut out = Vec::with_capacity(checkpoints.len());
    for (i, &spans) in checkpoints.iter().enumerate() {
        let rows: Vec<SeedTerms> = per_seed.iter().map(|v| v[i]).collect();
        let stat = |f: fn(&SeedTerms) -> f64| mean_se(rows.iter().map(f));
        let (total_w, total_se) = stat(|t| t.total_w);
        let (ase_w, ase_se) = stat(|t| t.ase_w);
        let (ss_w, ss_se) = stat(|t| t.ss_w);
        let (sn_w, mut sn_se) = stat(|t| t.sn_w);
        if rows.len() == 1 {
            sn_se = rows[0].sn_within_se;
        }
        if cfg.ase_on && cfg.nonlinearity_on && cfg.decompose && sn_w < -3.0 * sn_se {
            return Err(Error::Estimator(format!(
                "signal-ASE estimate {sn_w:.3e} W is below -3 standard errors ({sn_se:.3e} W) at {spans} spans"
            )));
        }
        out.push(NoiseTerms {
            spans,
            distance_km: spans as f64 * link.fiber.span_length_km,
            power_w: p,
            snr_eff_db: lin_to_db(p / total_w),
            total_w,
            ase_w,
            ss_w,
            sn_w,
            total_se,
            ase_se,
            ss_se,
            sn_se,
            per_seed: rows,
        });
    }
    Ok(out)
}

/// [`estimate_noise_terms_at`] for `link.n_spans()` only.
pub fn estimate_noise_terms(link: &LinkConfig, c: &Constellation4D, cfg: &SsfmConfig, n_runs: usize) -> Result<NoiseTerms> {
    Ok(estimate_noise_terms_at(link, c, cfg, n_runs, &[link.n_spans()])?
        .pop()
        .expect("one checkpoint"))
}

pub const MIN_CALIBRATION_R2: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub spans: u32,
    pub ss_w: f64,
    pub ss_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub coefficients: NliCoefficients,
    pub power_w: f64,
    pub r_squared: f64,
    /// `ln σ²_ss - fit`, per point.
    pub residuals: Vec<f64>,
    pub points: Vec<CalibrationPoint>,
}

/// Least-squares fit of `ln σ²_ss = ln(η_ss P³) + (1 + ε) ln N_s`.
pub fn fit_power_law(points: &[CalibrationPoint], power_w: f64) -> Result<Calibration> {
    let mut distinct: Vec<u32> = points.iter().map(|p| p.spans).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Calibration("need at least two distinct span counts".into()));
    }
    if let Some(p) = points.iter().find(|p| p.ss_w.is_nan() || p.ss_w <= 0.0 || p.spans == 0) {
        return Err(Error::Calibration(format!(
            "non-positive S-S power {:.3e} W at {} spans",
            p.ss_w, p.spans
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.spans as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ss_w.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    if r_squared < MIN_CALIBRATION_R2 {
        return Err(Error::Calibration(format!(
            "power-law fit R² = {r_squared:.4} below {MIN_CALIBRATION_R2}"
        )));
    }
    let epsilon = slope - 1.0;
    if epsilon < 0.0 {
        return Err(Error::Calibration(format!(
            "fitted span exponent {slope:.4} implies a negative coherence factor"
        )));
    }
    let eta_ss = intercept.exp() / power_w.powi(3);
    Ok(Calibration {
        coefficients: NliCoefficients::new(eta_ss, epsilon, CoefficientSource::SsfmCalibrated)?,
        power_w,
        r_squared,
        residuals,
        points: points.to_vec(),
    })
}

/// Fits `{η_ss, ε}` from noiseless runs at `distances` (span counts) at the
/// link's launch power, averaging `n_runs` seeds per distance.
pub fn calibrate_eta(
    link: &LinkConfig,
    c: &Constellation4D,
    distances: &[u32],
    cfg: &SsfmConfig,
    n_runs: usize,
) -> Result<Calibration> {
    let mut d = distances.to_vec();
    d.sort_unstable();
    d.dedup();
    if d.len() < 2 {
        return Err(Error::Calibration("need at least two distinct distances".into()));
    }
    let noiseless = SsfmConfig {
        ase_on: false,
        nonlinearity_on: true,
        ..*cfg
    };
    let terms = estimate_noise_terms_at(link, c, &noiseless, n_runs, &d)?;
    let points: Vec<CalibrationPoint> = terms
        .iter()
        .map(|t| CalibrationPoint {
            spans: t.spans,
            ss_w: t.ss_w,
            ss_se: t.ss_se,
        })
        .collect();
    fit_power_law(&points, link.signal.launch_power_w())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::generate_pm_qam;

    fn short_cfg() -> SsfmConfig {
        SsfmConfig {
            n_symbols: 1 << 10,
            step_km: 2.0,
            ..Default::default()
        }
    }

    #[test]
    fn synthetic_power_law_recovered() {
        let (eta, eps, p) = (1834.2, 0.083, 1.1e-3);
        let points: Vec<CalibrationPoint> = [1u32, 3, 7, 20, 55]
            .iter()
            .map(|&n| CalibrationPoint {
                spans: n,
                ss_w: eta * (n as f64).powf(1.0 + eps) * p * p * p,
                ss_se: 0.0,
            })
            .collect();
        let cal = fit_power_law(&points, p).unwrap();
        assert!((cal.coefficients.eta_ss / eta - 1.0).abs() < 1e-6);
        assert!((cal.coefficients.epsilon / eps - 1.0).abs() < 1e-6);
        assert!((cal.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(cal.coefficients.source, CoefficientSource::SsfmCalibrated);
    }

    #[test]
    fn poor_fit_rejected() {
        let points: Vec<CalibrationPoint> = [(1, 1e-6), (2, 3e-8), (4, 5e-6), (8, 1e-7)]
            .iter()
            .map(|&(spans, ss_w)| CalibrationPoint { spans, ss_w, ss_se: 0.0 })
            .collect();
        assert!(matches!(fit_power_law(&points, 1e-3), Err(Error::Calibration(_))));
        assert!(matches!(fit_power_law(&points[..1], 1e-3), Err(Error::Calibration(_))));
    }

    #[test]
    fn linear_link_has_no_nli() {
        let link = LinkConfig::default().with_gamma(0.0).with_spans(3);
        let c = generate_pm_qam(16).unwrap();
        let t = estimate_noise_terms(&link, &c, &short_cfg(), 2).unwrap();
        assert!(t.ss_w.abs() < 1e-6 * t.ase_w, "{t:?}");
        assert!(t.sn_w.abs() <= 3.0 * t.sn_se + 1e-6 * t.ase_w, "{t:?}");
        assert!((t.total_w / t.ase_w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_has_no_ase_terms() {
        let link = LinkConfig::default().with_spans(2);
        let c = generate_pm_qam(16).unwrap();
        let cfg = SsfmConfig { ase_on: false, ..short_cfg() };
        let t = estimate_noise_terms(&link, &c, &cfg, 1).unwrap();
        assert_eq!(t.ase_w, 0.0);
        assert_eq!(t.sn_w, 0.0);
        assert!(t.ss_w > 0.0);
    }

    #[test]
    fn simulate_is_deterministic() {
        let link = LinkConfig::default().with_spans(2);
        let c = generate_pm_qam(4).unwrap();
        let a = simulate(&link, &c, &short_cfg()).unwrap();
        let b = simulate(&link, &c, &short_cfg()).unwrap();
        assert_eq!(a.terms, b.terms);
        assert_eq!(a.received, b.received);
        let d = simulate(&link, &c, &SsfmConfig { rng_seed: 2, ..short_cfg() }).unwrap();
        assert_ne!(a.terms.snr_eff_db, d.terms.snr_eff_db);
    }

    #[test]
    fn checkpoints_match_separate_runs() {
        let link = LinkConfig::default();
        let c = generate_pm_qam(16).unwrap();
        let cfg = short_cfg();
        let both = estimate_noise_terms_at(&link, &c, &cfg, 1, &[3, 1]).unwrap();
        let one = estimate_noise_terms(&link.with_spans(1), &c, &cfg, 1).unwrap();
        assert_eq!(both[1].spans, 1);
        assert_eq!(both[1].per_seed, one.per_seed);
    }

    #[test]
    fn total_only_run_matches_decomposed_total() {
        let link = LinkConfig::default().with_spans(2);
        let c = generate_pm_qam(16).unwrap();
        let full = estimate_noise_terms(&link, &c, &short_cfg(), 1).unwrap();
        let cfg = SsfmConfig { decompose: false, ..short_cfg() };
        let only = estimate_noise_terms(&link, &c, &cfg, 1).unwrap();
        assert_eq!(full.total_w, only.total_w);
        assert!(only.ss_w.is_nan() && only.sn_w.is_nan() && only.ase_w.is_nan());
    }

    #[test]
    fn config_validation() {
        let link = LinkConfig::default();
        assert!(SsfmConfig::default().validate(&link).is_ok());
        assert!(SsfmConfig { sps: 2, ..Default::default() }.validate(&link).is_err());
        assert!(SsfmConfig { step_km: 0.3, ..Default::default() }.validate(&link).is_err());
        assert!(SsfmConfig { n_symbols: 64, ..Default::default() }.validate(&link).is_err());
    }
}
