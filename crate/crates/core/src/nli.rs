//! Closed-form effective SNR with signal-signal (S-S) and signal-ASE (S-N)
//! nonlinear interference.
//!
//! ```text
//! SNR_eff = P / (N_s σ²_ASE + σ²_ss + σ²_sn)
//! σ²_ss   = η_ss N_s^(1+ε) P³
//! σ²_sn   = 3 ξ η_ss σ²_ASE P²,   ξ = N_s^(2+ε)/(2+ε) + N_s^(1+ε)/2
//! ```

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation4D;
use crate::error::{Error, Result};
use crate::link::{ase_power_per_span, LinkConfig};
use crate::metrics;
use crate::units::{dbm_to_w, lin_to_db, w_to_dbm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    UserSupplied,
    SsfmCalibrated,
}

/// `{η_ss, ε}` for one (format, link) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NliCoefficients {
    /// One-span S-S coefficient, 1/W².
    pub eta_ss: f64,
    /// Coherence factor.
    pub epsilon: f64,
    pub source: CoefficientSource,
}

impl NliCoefficients {
    /// `eta_ss = 0` is accepted to describe a linear link.
    pub fn new(eta_ss: f64, epsilon: f64, source: CoefficientSource) -> Result<Self> {
        if !(eta_ss.is_finite() && eta_ss >= 0.0) {
            return Err(Error::Config(format!("eta_ss must be finite and >= 0, got {eta_ss}")));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self {
            eta_ss,
            epsilon,
            source,
        })
    }

    pub fn user(eta_ss: f64, epsilon: f64) -> Result<Self> {
        Self::new(eta_ss, epsilon, CoefficientSource::UserSupplied)
    }

    /// `η_ss^(N_s) = η_ss N_s^(1+ε)`.
    pub fn accumulated(&self, n_spans: u32) -> f64 {
        self.eta_ss * (n_spans as f64).powf(1.0 + self.epsilon)
    }
}

/// The three noise powers at one operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub power_w: f64,
    /// `N_s σ²_ASE`
    pub ase_total_w: f64,
    pub ss_w: f64,
    pub sn_w: f64,
    pub snr_eff_db: f64,
}

impl NoiseBudget {
    pub fn from_terms(power_w: f64, ase_total_w: f64, ss_w: f64, sn_w: f64) -> Self {
        let snr = power_w / (ase_total_w + ss_w + sn_w);
        Self {
            power_w,
            ase_total_w,
            ss_w,
            sn_w,
            snr_eff_db: lin_to_db(snr),
        }
    }

    pub fn total_noise_w(&self) -> f64 {
        self.ase_total_w + self.ss_w + self.sn_w
    }

    pub fn nli_w(&self) -> f64 {
        self.ss_w + self.sn_w
    }

    pub fn snr_linear(&self) -> f64 {
        self.power_w / self.total_noise_w()
    }

    pub fn power_dbm(&self) -> f64 {
        w_to_dbm(self.power_w)
    }

    /// The stored SNR agrees with the stored powers.
    pub fn is_consistent(&self, rel_tol: f64) -> bool {
        let from_terms = self.snr_linear();
        let stored = 10f64.powf(self.snr_eff_db / 10.0);
        self.ase_total_w >= 0.0
            && self.ss_w >= 0.0
            && self.sn_w >= 0.0
            && ((stored - from_terms) / from_terms).abs() <= rel_tol
    }
}

/// S-N accumulation coefficient, exactly as the closed form.
pub fn xi(n_spans: u32, epsilon: f64) -> f64 {
    xi_continuous(n_spans as f64, epsilon)
}

/// [`xi`] for a real-valued span count.
pub fn xi_continuous(n: f64, epsilon: f64) -> f64 {
    n.powf(2.0 + epsilon) / (2.0 + epsilon) + n.powf(1.0 + epsilon) / 2.0
}

pub fn sigma2_ss(p_w: f64, n_spans: u32, coeff: &NliCoefficients) -> f64 {
    ss_continuous(p_w, n_spans as f64, coeff)
}

fn ss_continuous(p_w: f64, n: f64, coeff: &NliCoefficients) -> f64 {
    coeff.eta_ss * n.powf(1.0 + coeff.epsilon) * p_w.powi(3)
}

/// `η_sn = 3 η_ss`.
pub fn sigma2_sn(p_w: f64, n_spans: u32, coeff: &NliCoefficients, sigma2_ase_w: f64) -> f64 {
    sn_continuous(p_w, n_spans as f64, coeff, sigma2_ase_w)
}

fn sn_continuous(p_w: f64, n: f64, coeff: &NliCoefficients, sigma2_ase_w: f64) -> f64 {
    3.0 * xi_continuous(n, coeff.epsilon) * coeff.eta_ss * sigma2_ase_w * p_w * p_w
}

/// One-span coefficient from the accumulated one.
pub fn eta_from_accumulated(eta_ss_acc: f64, n_spans: u32, epsilon: f64) -> f64 {
    eta_ss_acc / (n_spans as f64).powf(1.0 + epsilon)
}

fn budget_continuous(
    p_w: f64,
    n: f64,
    link: &LinkConfig,
    coeff: &NliCoefficients,
    include_sn: bool,
) -> NoiseBudget {
    let ase = ase_power_per_span(link, link.noise_bandwidth_hz());
    let (ss, sn) = if link.fiber.gamma_per_w_km == 0.0 {
        (0.0, 0.0)
    } else {
        let sn = if include_sn {
            sn_continuous(p_w, n, coeff, ase)
        } else {
            0.0
        };
        (ss_continuous(p_w, n, coeff), sn)
    };
    NoiseBudget::from_terms(p_w, n * ase, ss, sn)
}

/// Noise budget at launch power `p_w` over `link.n_spans()` spans. With
/// `include_sn` off the S-N term is zero (S-S-only model). A link with
/// zero nonlinear coefficient has no NLI regardless of `coeff`.
pub fn snr_eff(p_w: f64, link: &LinkConfig, coeff: &NliCoefficients, include_sn: bool) -> NoiseBudget {
    budget_continuous(p_w, link.n_spans() as f64, link, coeff, include_sn)
}

/// Launch-power grid for the optimum search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSearch {
    pub min_dbm: f64,
    pub max_dbm: f64,
    pub step_db: f64,
    /// Final bracket width of the golden-section refinement.
    pub tol_db: f64,
}

impl Default for PowerSearch {
    fn default() -> Self {
        Self {
            min_dbm: -4.0,
            max_dbm: 4.0,
            step_db: 0.1,
            tol_db: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchOptimum {
    pub power_dbm: f64,
    pub snr_eff_db: f64,
    /// The maximum sits on a grid edge; the true optimum may lie outside.
    pub at_bound: bool,
}

fn optimum_continuous(
    n: f64,
    link: &LinkConfig,
    coeff: &NliCoefficients,
    include_sn: bool,
    search: &PowerSearch,
) -> LaunchOptimum {
    let snr = |dbm: f64| budget_continuous(dbm_to_w(dbm), n, link, coeff, include_sn).snr_eff_db;
    let steps = ((search.max_dbm - search.min_dbm) / search.step_db).round().max(0.0) as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| search.min_dbm + i as f64 * search.step_db)
        .collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &p)| (i, snr(p)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    if best == 0 || best == steps {
        let p = grid[best];
        return LaunchOptimum {
            power_dbm: p,
            snr_eff_db: snr(p),
            at_bound: true,
        };
    }
    // golden-section on the bracket around the grid maximum
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (snr(c), snr(d));
    while b - a > search.tol_db {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = snr(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = snr(d);
        }
    }
    let p = 0.5 * (a + b);
    LaunchOptimum {
        power_dbm: p,
        snr_eff_db: snr(p),
        at_bound: false,
    }
}

/// Launch power maximizing the effective SNR over `search`.
pub fn optimal_launch_power(
    link: &LinkConfig,
    coeff: &NliCoefficients,
    include_sn: bool,
    search: &PowerSearch,
) -> LaunchOptimum {
    optimum_continuous(link.n_spans() as f64, link, coeff, include_sn, search)
}

/// Source of NLI coefficients per span count.
pub trait CoefficientProvider {
    fn coefficients(&self, n_spans: u32) -> Result<NliCoefficients>;
}

impl CoefficientProvider for NliCoefficients {
    fn coefficients(&self, _n_spans: u32) -> Result<NliCoefficients> {
        Ok(*self)
    }
}

impl<F> CoefficientProvider for F
where
    F: Fn(u32) -> Result<NliCoefficients>,
{
    fn coefficients(&self, n_spans: u32) -> Result<NliCoefficients> {
        self(n_spans)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachOptions {
    pub ngmi_threshold: f64,
    pub include_sn: bool,
    pub max_spans: u32,
    pub power_search: PowerSearch,
    pub gmi_samples: usize,
    pub seed: u64,
    /// Bracket width of the required-SNR bisection.
    pub snr_tol_db: f64,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self {
            ngmi_threshold: 0.8,
            include_sn: true,
            max_spans: 400,
            power_search: PowerSearch::default(),
            gmi_samples: 100_000,
            seed: 1,
            snr_tol_db: 0.005,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reach {
    /// Largest span count meeting the threshold.
    pub spans: u32,
    pub distance_km: f64,
    /// Span count at which the optimum SNR crosses the required SNR,
    /// interpolated with the closed forms evaluated at real-valued `N_s`.
    /// Equals `spans` when the search stopped at `max_spans`.
    pub spans_fractional: f64,
    /// SNR at which the format reaches the NGMI threshold (NaN for threshold 0).
    pub required_snr_db: f64,
    pub snr_at_reach_db: f64,
    pub launch_power_dbm: f64,
}

/// Largest `N_s` whose effective SNR at optimal launch power gives an NGMI
/// of at least `opts.ngmi_threshold` for format `c`.
///
/// NGMI is monotone in SNR, so the threshold is converted once into a
/// required SNR with [`metrics::required_snr`] and compared per span count.
pub fn reach_at_ngmi(
    link_template: &LinkConfig,
    provider: &impl CoefficientProvider,
    c: &Constellation4D,
    opts: &ReachOptions,
) -> Result<Reach> {
    if opts.max_spans < 1 {
        return Err(Error::Config("max_spans must be >= 1".into()));
    }
    let span_km = link_template.fiber.span_length_km;
    let at = |n: u32| -> Result<LaunchOptimum> {
        let coeff = provider.coefficients(n)?;
        Ok(optimal_launch_power(
            &link_template.with_spans(n),
            &coeff,
            opts.include_sn,
            &opts.power_search,
        ))
    };
    if opts.ngmi_threshold <= 0.0 {
        let n = opts.max_spans;
        let o = at(n)?;
        return Ok(Reach {
            spans: n,
            distance_km: n as f64 * span_km,
            spans_fractional: n as f64,
            required_snr_db: f64::NAN,
            snr_at_reach_db: o.snr_eff_db,
            launch_power_dbm: o.power_dbm,
        });
    }
    if opts.ngmi_threshold >= 1.0 {
        return Err(Error::Reach(format!(
            "NGMI threshold {} is not reachable at finite SNR",
            opts.ngmi_threshold
        )));
    }
    let m = c.bits_per_symbol() as f64;
    let required = metrics::required_snr(
        c,
        opts.ngmi_threshold * m,
        opts.snr_tol_db,
        opts.gmi_samples,
        opts.seed,
    )?;
    let mut reach: Option<(u32, LaunchOptimum)> = None;
    for n in 1..=opts.max_spans {
        let o = at(n)?;
        if o.snr_eff_db >= required {
            reach = Some((n, o));
        }
    }
    let (n, o) = reach.ok_or_else(|| {
        Error::Reach(format!(
            "{} needs {required:.2} dB for NGMI {} but one span only gives {:.2} dB",
            c.name(),
            opts.ngmi_threshold,
            at(1).map(|o| o.snr_eff_db).unwrap_or(f64::NAN)
        ))
    })?;
    let spans_fractional = if n == opts.max_spans {
        n as f64
    } else {
        let coeff = provider.coefficients(n)?;
        let f = |x: f64| {
            optimum_continuous(x, link_template, &coeff, opts.include_sn, &opts.power_search).snr_eff_db
                - required
        };
        let (mut lo, mut hi) = (n as f64, n as f64 + 1.0);
        if f(hi) >= 0.0 {
            hi
        } else {
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if f(mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };
    Ok(Reach {
        spans: n,
        distance_km: n as f64 * span_km,
        spans_fractional,
        required_snr_db: required,
        snr_at_reach_db: o.snr_eff_db,
        launch_power_dbm: o.power_dbm,
    })
}
