use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::waveform::WaveformGrid;
use crate::link::{ase_psd_per_span, span_gain_linear, LinkConfig};

/// Lumped EDFA: restores the span loss and, when `ase_on`, adds circular
/// white Gaussian noise whose PSD matches one amplifier's ASE, half per
/// polarization, across the whole simulation bandwidth.
pub fn amplify<R: Rng + ?Sized>(w: &mut WaveformGrid, link: &LinkConfig, ase_on: bool, rng: &mut R) {
    let g = span_gain_linear(link).sqrt();
    let std = if ase_on {
        // per-polarization, per real quadrature
        (ase_psd_per_span(link) * w.sample_rate_hz / 4.0).sqrt()
    } else {
        0.0
    };
    for z in w.samples_x.iter_mut().chain(w.samples_y.iter_mut()) {
        *z *= g;
        if ase_on {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z += Complex64::new(re, im) * std;
        }
    }
}
