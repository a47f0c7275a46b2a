use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::constellation::Constellation4D;
use crate::link::SignalParams;

/// Sampled dual-polarization field envelope in √W.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveformGrid {
    pub samples_x: Vec<Complex64>,
    pub samples_y: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub n_symbols: usize,
    pub sps: usize,
}

impl WaveformGrid {
    pub fn len(&self) -> usize {
        self.samples_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_x.is_empty()
    }

    /// Mean total power over both polarizations.
    pub fn mean_power(&self) -> f64 {
        let s: f64 = self
            .samples_x
            .iter()
            .chain(&self.samples_y)
            .map(|z| z.norm_sqr())
            .sum();
        s / self.len() as f64
    }

    pub fn is_sane(&self) -> bool {
        self.samples_x.len() == self.n_symbols * self.sps
            && self.samples_y.len() == self.samples_x.len()
            && self.sample_rate_hz > 0.0
    }

    /// Angular frequency of each FFT bin, in rad/s, in FFT order.
    pub fn angular_frequencies(&self) -> Vec<f64> {
        angular_frequencies(self.len(), self.sample_rate_hz)
    }
}

pub(crate) fn angular_frequencies(n: usize, fs: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            2.0 * PI * k * fs / n as f64
        })
        .collect()
}

/// Raised-cosine spectrum (peak 1) for symbol rate `rate` and roll-off `beta`.
pub fn raised_cosine(f_hz: f64, rate: f64, beta: f64) -> f64 {
    let f = f_hz.abs();
    let f1 = 0.5 * (1.0 - beta) * rate;
    let f2 = 0.5 * (1.0 + beta) * rate;
    if f <= f1 {
        1.0
    } else if f > f2 {
        0.0
    } else {
        0.5 * (1.0 + (PI / (beta * rate) * (f - f1)).cos())
    }
}

/// Root-raised-cosine amplitude response on the FFT bins of an `n`-sample
/// grid at `fs`.
pub fn rrc_response(n: usize, fs: f64, rate: f64, beta: f64) -> Vec<f64> {
    angular_frequencies(n, fs)
        .into_iter()
        .map(|w| raised_cosine(w / (2.0 * PI), rate, beta).sqrt())
        .collect()
}

/// Forward/inverse FFT pair of one size. The inverse is unnormalized.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::default(); len],
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }

    /// `buf <- IFFT(FFT(buf) * h) / n`
    pub fn filter(&mut self, buf: &mut [Complex64], h: &[Complex64]) {
        let scale = 1.0 / buf.len() as f64;
        self.forward(buf);
        for (z, hk) in buf.iter_mut().zip(h) {
            *z *= hk * scale;
        }
        self.inverse(buf);
    }
}

/// Transmitter output: the launched waveform and the symbol indices drawn.
#[derive(Clone, Debug)]
pub struct Transmitted {
    pub waveform: WaveformGrid,
    pub symbols: Vec<usize>,
}

/// Draws `n_symbols` i.i.d. uniform symbols from `c` (seeded), maps
/// `x1 + j x2` to polarization X and `x3 + j x4` to Y, shapes with a
/// circular RRC filter and scales to mean total power equal to the launch
/// power.
pub fn transmit(
    c: &Constellation4D,
    signal: &SignalParams,
    n_symbols: usize,
    sps: usize,
    seed: u64,
) -> Transmitted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<usize> = (0..n_symbols).map(|_| rng.random_range(0..c.len())).collect();
    let n = n_symbols * sps;
    let fs = signal.symbol_rate_baud * sps as f64;
    let amp = signal.launch_power_w().sqrt();
    let mut x = vec![Complex64::default(); n];
    let mut y = vec![Complex64::default(); n];
    for (k, &s) in symbols.iter().enumerate() {
        let (u, v) = c.polarizations(s);
        x[k * sps] = u * amp;
        y[k * sps] = v * amp;
    }
    // sps * sqrt(RC) keeps the mean sample power equal to the symbol energy
    let h: Vec<Complex64> = rrc_response(n, fs, signal.symbol_rate_baud, signal.rrc_rolloff)
        .into_iter()
        .map(|r| Complex64::new(r * sps as f64, 0.0))
        .collect();
    let mut fft = FftPair::new(n);
    fft.filter(&mut x, &h);
    fft.filter(&mut y, &h);
    Transmitted {
        waveform: WaveformGrid {
            samples_x: x,
            samples_y: y,
            sample_rate_hz: fs,
            n_symbols,
            sps,
        },
        symbols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::generate_pm_qam;
    use crate::units::lin_to_db;

    #[test]
    fn rc_edges() {
        assert_eq!(raised_cosine(0.0, 1.0, 0.1), 1.0);
        assert!((raised_cosine(0.5, 1.0, 0.1) - 0.5).abs() < 1e-12);
        assert_eq!(raised_cosine(0.56, 1.0, 0.1), 0.0);
        // vestigial symmetry
        for f in [0.46, 0.48, 0.5, 0.53] {
            let s = raised_cosine(f, 1.0, 0.1) + raised_cosine(f - 1.0, 1.0, 0.1);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn launch_power_matches() {
        let c = generate_pm_qam(16).unwrap();
        let sig = SignalParams { launch_power_dbm: 2.0, ..Default::default() };
        let t = transmit(&c, &sig, 1 << 14, 4, 11);
        let err_db = (lin_to_db(t.waveform.mean_power()) - lin_to_db(sig.launch_power_w())).abs();
        assert!(err_db < 0.05, "{err_db}");
        assert!(t.waveform.is_sane());
    }

    #[test]
    fn spectrum_is_band_limited() {
        let c = generate_pm_qam(4).unwrap();
        let sig = SignalParams { rrc_rolloff: 0.1, ..Default::default() };
        let t = transmit(&c, &sig, 1 << 12, 4, 5);
        let mut fft = FftPair::new(t.waveform.len());
        let mut x = t.waveform.samples_x.clone();
        fft.forward(&mut x);
        let edge = 0.5 * (1.0 + sig.rrc_rolloff) * sig.symbol_rate_baud;
        let (mut inb, mut outb) = (0.0, 0.0);
        for (z, w) in x.iter().zip(t.waveform.angular_frequencies()) {
            if (w / (2.0 * PI)).abs() <= edge {
                inb += z.norm_sqr();
            } else {
                outb += z.norm_sqr();
            }
        }
        assert!(outb <= 1e-4 * inb, "{}", lin_to_db(outb / inb));
    }

    #[test]
    fn same_seed_same_waveform() {
        let c = generate_pm_qam(16).unwrap();
        let sig = SignalParams::default();
        let a = transmit(&c, &sig, 512, 4, 9);
        let b = transmit(&c, &sig, 512, 4, 9);
        assert_eq!(a.waveform, b.waveform);
        assert_eq!(a.symbols, b.symbols);
        let d = transmit(&c, &sig, 512, 4, 10);
        assert_ne!(a.symbols, d.symbols);
    }
}
