use num_complex::Complex64;

use super::fiber::compensate_dispersion;
use super::waveform::{rrc_response, FftPair, WaveformGrid};
use crate::constellation::Constellation4D;
use crate::link::LinkConfig;
use crate::units::lin_to_db;

/// Below this effective SNR the DSP chain has most likely failed.
pub const LOW_SNR_WARNING_DB: f64 = -10.0;

/// Receiver DSP output for one waveform.
#[derive(Clone, Debug)]
pub struct Received {
    /// Gain- and phase-corrected symbols `[X, Y]`, on the constellation's scale.
    pub symbols: Vec<[Complex64; 2]>,
    /// `received - transmitted`, over the symbols kept after the guard.
    pub errors: Vec<[Complex64; 2]>,
    /// Mean `|x|²` of the reference symbols kept after the guard.
    pub reference_energy: f64,
    pub snr_eff_db: f64,
    pub sampling_phase: usize,
    pub low_snr_warning: bool,
}

impl Received {
    pub fn mean_error_power(&self) -> f64 {
        self.errors
            .iter()
            .map(|e| e[0].norm_sqr() + e[1].norm_sqr())
            .sum::<f64>()
            / self.errors.len() as f64
    }
}

/// Full-link CDC over `n_spans` spans, matched RRC filter, downsampling at
/// the best phase, then one data-aided complex gain per polarization
/// (`h = E[y x*] / E[|x|²]`, removing a constant phase and scale).
/// `guard` symbols at each end are excluded from the statistics.
pub fn receive(
    w: &WaveformGrid,
    link: &LinkConfig,
    n_spans: u32,
    c: &Constellation4D,
    sent: &[usize],
    guard: usize,
) -> Received {
    let mut w = w.clone();
    compensate_dispersion(
        &mut w,
        link.fiber.beta2_ps2_per_km,
        n_spans as f64 * link.fiber.span_length_km,
    );
    let h: Vec<Complex64> = rrc_response(w.len(), w.sample_rate_hz, link.signal.symbol_rate_baud, link.signal.rrc_rolloff)
        .into_iter()
        .map(|r| Complex64::new(r, 0.0))
        .collect();
    let mut fft = FftPair::new(w.len());
    fft.filter(&mut w.samples_x, &h);
    fft.filter(&mut w.samples_y, &h);

    let sps = w.sps;
    let kept = guard..w.n_symbols.saturating_sub(guard).max(guard);
    let reference: Vec<(Complex64, Complex64)> = sent.iter().map(|&s| c.polarizations(s)).collect();

    let correlation = |phase: usize| -> f64 {
        let (mut cxy, mut py) = (Complex64::default(), 0.0);
        for k in kept.clone() {
            let (u, v) = reference[k];
            let (a, b) = (w.samples_x[k * sps + phase], w.samples_y[k * sps + phase]);
            cxy += a * u.conj() + b * v.conj();
            py += a.norm_sqr() + b.norm_sqr();
        }
        cxy.norm_sqr() / py
    };
    let sampling_phase = (0..sps)
        .map(|p| (p, correlation(p)))
        .fold((0, f64::NEG_INFINITY), |acc, (p, v)| if v > acc.1 { (p, v) } else { acc })
        .0;

    let raw: Vec<[Complex64; 2]> = (0..w.n_symbols)
        .map(|k| [w.samples_x[k * sps + sampling_phase], w.samples_y[k * sps + sampling_phase]])
        .collect();
    let mut gain = [Complex64::default(); 2];
    for (pol, g) in gain.iter_mut().enumerate() {
        let (mut num, mut den) = (Complex64::default(), 0.0);
        for k in kept.clone() {
            let x = if pol == 0 { reference[k].0 } else { reference[k].1 };
            num += raw[k][pol] * x.conj();
            den += x.norm_sqr();
        }
        *g = if den > 0.0 { num / den } else { Complex64::new(1.0, 0.0) };
    }
    let symbols: Vec<[Complex64; 2]> = raw.iter().map(|r| [r[0] / gain[0], r[1] / gain[1]]).collect();
    let errors: Vec<[Complex64; 2]> = kept
        .clone()
        .map(|k| [symbols[k][0] - reference[k].0, symbols[k][1] - reference[k].1])
        .collect();
    let reference_energy = kept
        .clone()
        .map(|k| reference[k].0.norm_sqr() + reference[k].1.norm_sqr())
        .sum::<f64>()
        / errors.len() as f64;
    let err = errors
        .iter()
        .map(|e| e[0].norm_sqr() + e[1].norm_sqr())
        .sum::<f64>()
        / errors.len() as f64;
    let snr_eff_db = lin_to_db(reference_energy / err);
    Received {
        symbols,
        errors,
        reference_energy,
        snr_eff_db,
        sampling_phase,
        low_snr_warning: snr_eff_db < LOW_SNR_WARNING_DB,
    }
}
