//! GMI and NGMI of a format over the AWGN channel.
//!
//! SNR is total symbol energy over total noise energy, so a `D`-dimensional
//! real constellation with mean energy `E_s` sees noise of variance
//! `E_s / (D · SNR)` per real dimension. For a unit-energy 4D format this
//! equals the per-polarization SNR.
//!
//! Bit LLRs are exact (log-sum-exp over the whole constellation). Symbols
//! are visited round-robin and the Gaussian noise is drawn once per seed, so
//! repeated evaluations at different SNRs share their random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation4D;
use crate::error::{Error, Result};
use crate::units::db_to_lin;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmiEstimate {
    /// Bits per symbol of the evaluated constellation (per 4D symbol for
    /// [`gmi`]).
    pub gmi_bits_per_4d: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub snr_db: f64,
}

pub const MIN_SAMPLES: usize = 10_000;

const CHUNK: usize = 1024;

/// Monte-Carlo GMI with pre-drawn noise, reusable across SNR values.
pub struct GmiEvaluator<const D: usize> {
    points: Vec<[f64; D]>,
    labels: Vec<u32>,
    bits: u32,
    energy: f64,
    noise: Vec<[f64; D]>,
}

impl<const D: usize> GmiEvaluator<D> {
    pub fn new(points: Vec<[f64; D]>, labels: Vec<u32>, n_samples: usize, seed: u64) -> Result<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() || labels.len() != m {
            return Err(Error::Format(format!(
                "GMI needs a power-of-two point set with one label per point, got {m} points and {} labels",
                labels.len()
            )));
        }
        if n_samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "GMI needs at least {MIN_SAMPLES} samples, got {n_samples}"
            )));
        }
        let energy = points
            .iter()
            .map(|p| p.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            / m as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = (0..n_samples)
            .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
            .collect();
        Ok(Self {
            points,
            labels,
            bits: m.trailing_zeros(),
            energy,
            noise,
        })
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn evaluate(&self, snr_db: f64) -> GmiEstimate {
        let sigma2 = self.energy / (D as f64 * db_to_lin(snr_db));
        let sigma = sigma2.sqrt();
        let inv_2s2 = 0.5 / sigma2;
        let m = self.points.len();
        let bits = self.bits as usize;

        // fixed chunking keeps the reduction order independent of thread count
        let partial: Vec<(f64, f64)> = self
            .noise
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut metric = vec![0.0; m];
                let mut ones = vec![0.0; bits];
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for (k, z) in chunk.iter().enumerate() {
                    let tx = (ci * CHUNK + k) % m;
                    let x = &self.points[tx];
                    let y: [f64; D] = std::array::from_fn(|d| x[d] + sigma * z[d]);
                    let mut best = f64::NEG_INFINITY;
                    for (mj, p) in metric.iter_mut().zip(&self.points) {
                        let d2: f64 = (0..D).map(|d| (y[d] - p[d]) * (y[d] - p[d])).sum();
                        *mj = -d2 * inv_2s2;
                        best = best.max(*mj);
                    }
                    ones.iter_mut().for_each(|o| *o = 0.0);
                    let mut total = 0.0;
                    for (mj, &l) in metric.iter().zip(&self.labels) {
                        let w = (mj - best).exp();
                        total += w;
                        for (b, o) in ones.iter_mut().enumerate() {
                            if (l >> b) & 1 == 1 {
                                *o += w;
                            }
                        }
                    }
                    let tx_label = self.labels[tx];
                    let mut loss = 0.0;
                    for (b, &o) in ones.iter().enumerate() {
                        let same = if (tx_label >> b) & 1 == 1 { o } else { total - o };
                        loss += (total / same).log2();
                    }
                    let g = bits as f64 - loss;
                    sum += g;
                    sum_sq += g * g;
                }
                (sum, sum_sq)
            })
            .collect();
        let (sum, sum_sq) = partial
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let n = self.noise.len() as f64;
        let mean = sum / n;
        let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
        GmiEstimate {
            gmi_bits_per_4d: mean.clamp(0.0, bits as f64),
            std_error: (var / n).sqrt(),
            n_samples: self.noise.len(),
            snr_db,
        }
    }

    /// Smallest SNR (dB) with GMI >= `target_gmi`, by bisection on
    /// `[lo_db, hi_db]` until the bracket is narrower than `tol_db`.
    pub fn required_snr(&self, target_gmi: f64, tol_db: f64, lo_db: f64, hi_db: f64) -> Result<f64> {
        let m = self.bits as f64;
        if !(target_gmi > 0.0 && target_gmi < m) {
            return Err(Error::Solver(format!(
                "target GMI {target_gmi} outside (0, {m})"
            )));
        }
        let (mut lo, mut hi) = (lo_db, hi_db);
        let g_lo = self.evaluate(lo).gmi_bits_per_4d;
        let g_hi = self.evaluate(hi).gmi_bits_per_4d;
        if !(g_lo < target_gmi && g_hi >= target_gmi) {
            return Err(Error::Solver(format!(
                "target GMI {target_gmi} not bracketed: GMI({lo} dB) = {g_lo:.4}, GMI({hi} dB) = {g_hi:.4}"
            )));
        }
        while hi - lo > tol_db {
            let mid = 0.5 * (lo + hi);
            if self.evaluate(mid).gmi_bits_per_4d >= target_gmi {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn evaluator_4d(c: &Constellation4D, n_samples: usize, seed: u64) -> Result<GmiEvaluator<4>> {
    GmiEvaluator::new(c.points().to_vec(), c.labels().to_vec(), n_samples, seed)
}

/// Monte-Carlo GMI in bits per 4D symbol.
pub fn gmi(c: &Constellation4D, snr_db: f64, n_samples: usize, seed: u64) -> Result<GmiEstimate> {
    Ok(evaluator_4d(c, n_samples, seed)?.evaluate(snr_db))
}

/// GMI of a 2D constellation (bits per 2D symbol) under the same SNR
/// convention.
pub fn gmi_2d(
    points: &[[f64; 2]],
    labels: &[u32],
    snr_db: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GmiEstimate> {
    Ok(GmiEvaluator::new(points.to_vec(), labels.to_vec(), n_samples, seed)?.evaluate(snr_db))
}

/// `1 - (m - GMI) / m`.
pub fn ngmi(g: &GmiEstimate, m: u32) -> f64 {
    let m = m as f64;
    1.0 - (m - g.gmi_bits_per_4d) / m
}

pub const SNR_BRACKET_DB: (f64, f64) = (-20.0, 50.0);

/// SNR at which the format's GMI reaches `target_gmi`.
pub fn required_snr(
    c: &Constellation4D,
    target_gmi: f64,
    tol_db: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    evaluator_4d(c, n_samples, seed)?.required_snr(target_gmi, tol_db, SNR_BRACKET_DB.0, SNR_BRACKET_DB.1)
}
