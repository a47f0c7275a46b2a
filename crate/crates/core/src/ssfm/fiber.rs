use num_complex::Complex64;

use super::waveform::{FftPair, WaveformGrid};
use super::SsfmConfig;
use crate::error::{Error, Result};
use crate::link::FiberParams;
use crate::units::alpha_db_to_neper;

/// Manakov nonlinear coefficient relative to the scalar Kerr term.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

/// Symmetrized split-step propagator for one span of fiber.
///
/// Each step is half a dispersion step, an exact loss + Kerr step over the
/// full step length, and another half dispersion step. Loss and the Kerr
/// phase are both pointwise in time, so the middle sub-step is solved
/// exactly: the field decays by `exp(-α dz / 2)` and rotates by
/// `γ 8/9 (|Ex|² + |Ey|²) L_eff` with `L_eff = (1 - exp(-α dz)) / α`.
/// Adjacent half dispersion steps are merged.
pub struct SplitStep {
    fft: FftPair,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    steps: usize,
    /// `γ 8/9 L_eff`, rad/W
    phase_per_watt: f64,
    /// `exp(-α dz / 2)`
    field_loss: f64,
    linear: bool,
}

fn dispersion(omega: &[f64], beta2_s2_per_km: f64, dz_km: f64, scale: f64, field_loss: f64) -> Vec<Complex64> {
    omega
        .iter()
        .map(|w| Complex64::from_polar(scale * field_loss, 0.5 * beta2_s2_per_km * w * w * dz_km))
        .collect()
}

pub(crate) fn steps_per_span(span_km: f64, step_km: f64) -> Result<usize> {
    let k = (span_km / step_km).round();
    if k < 1.0 || (k * step_km - span_km).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "step {step_km} km does not divide the {span_km} km span"
        )));
    }
    Ok(k as usize)
}

impl SplitStep {
    pub fn new(fiber: &FiberParams, cfg: &SsfmConfig, n: usize, sample_rate_hz: f64) -> Result<Self> {
        let alpha = alpha_db_to_neper(fiber.alpha_db_per_km);
        let beta2 = fiber.beta2_ps2_per_km * 1e-24;
        let omega = super::waveform::angular_frequencies(n, sample_rate_hz);
        let scale = 1.0 / n as f64;
        let linear = !cfg.nonlinearity_on || fiber.gamma_per_w_km == 0.0;
        if linear {
            let span = fiber.span_length_km;
            let full = dispersion(&omega, beta2, span, scale, (-0.5 * alpha * span).exp());
            return Ok(Self {
                fft: FftPair::new(n),
                half: Vec::new(),
                full,
                steps: 1,
                phase_per_watt: 0.0,
                field_loss: 1.0,
                linear,
            });
        }
        let steps = steps_per_span(fiber.span_length_km, cfg.step_km)?;
        let dz = fiber.span_length_km / steps as f64;
        let l_eff = if alpha > 0.0 {
            -(-alpha * dz).exp_m1() / alpha
        } else {
            dz
        };
        Ok(Self {
            fft: FftPair::new(n),
            half: dispersion(&omega, beta2, 0.5 * dz, scale, 1.0),
            full: dispersion(&omega, beta2, dz, scale, 1.0),
            steps,
            phase_per_watt: fiber.gamma_per_w_km * MANAKOV_FACTOR * l_eff,
            field_loss: (-0.5 * alpha * dz).exp(),
            linear,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn apply(&mut self, buf: &mut [Complex64], h_is_half: bool) {
        let h = if h_is_half { &self.half } else { &self.full };
        self.fft.forward(buf);
        for (z, hk) in buf.iter_mut().zip(h) {
            *z *= hk;
        }
        self.fft.inverse(buf);
    }

    /// Propagates `w` over one span in place. `span` only labels errors.
    pub fn propagate(&mut self, w: &mut WaveformGrid, span: u32) -> Result<()> {
        if self.linear {
            self.apply(&mut w.samples_x, false);
            self.apply(&mut w.samples_y, false);
            return check_finite(w, span, 0);
        }
        self.apply(&mut w.samples_x, true);
        self.apply(&mut w.samples_y, true);
        for step in 0..self.steps {
            let mut finite = true;
            for (x, y) in w.samples_x.iter_mut().zip(w.samples_y.iter_mut()) {
                let p = x.norm_sqr() + y.norm_sqr();
                finite &= p.is_finite();
                let rot = cis(self.phase_per_watt * p) * self.field_loss;
                *x *= rot;
                *y *= rot;
            }
            if !finite {
                return Err(Error::Numerical { span, step });
            }
            let last = step + 1 == self.steps;
            self.apply(&mut w.samples_x, last);
            self.apply(&mut w.samples_y, last);
        }
        check_finite(w, span, self.steps)
    }
}

/// `exp(j phi)`; a truncated series below 0.02 rad, where its remainder is
/// under 1e-20.
#[inline]
fn cis(phi: f64) -> Complex64 {
    if phi.abs() < 0.02 {
        let p2 = phi * phi;
        let c = 1.0 - p2 * (0.5 - p2 * (1.0 / 24.0 - p2 / 720.0));
        let s = phi * (1.0 - p2 * (1.0 / 6.0 - p2 * (1.0 / 120.0 - p2 / 5040.0)));
        Complex64::new(c, s)
    } else {
        Complex64::from_polar(1.0, phi)
    }
}

fn check_finite(w: &WaveformGrid, span: u32, step: usize) -> Result<()> {
    if w.samples_x.iter().chain(&w.samples_y).all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical { span, step })
    }
}

/// One-off span propagation. Reuse a [`SplitStep`] when propagating many spans.
pub fn propagate_span(w: &WaveformGrid, fiber: &FiberParams, cfg: &SsfmConfig) -> Result<WaveformGrid> {
    let mut out = w.clone();
    SplitStep::new(fiber, cfg, w.len(), w.sample_rate_hz)?.propagate(&mut out, 1)?;
    Ok(out)
}

/// Applies `exp(-j β2/2 ω² L)` for accumulated length `length_km`, undoing
/// the dispersion of that length.
pub fn compensate_dispersion(w: &mut WaveformGrid, beta2_ps2_per_km: f64, length_km: f64) {
    let omega = w.angular_frequencies();
    let h = dispersion(&omega, -beta2_ps2_per_km * 1e-24, length_km, 1.0 / w.len() as f64, 1.0);
    let mut fft = FftPair::new(w.len());
    fft.forward(&mut w.samples_x);
    fft.forward(&mut w.samples_y);
    for ((x, y), hk) in w.samples_x.iter_mut().zip(w.samples_y.iter_mut()).zip(&h) {
        *x *= hk;
        *y *= hk;
    }
    fft.inverse(&mut w.samples_x);
    fft.inverse(&mut w.samples_y);
}
