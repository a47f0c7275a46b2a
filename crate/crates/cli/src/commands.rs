use dp4d::metrics::GmiEvaluator;
use dp4d::ssfm::{estimate_noise_terms_at, fit_power_law, seeds, CalibrationPoint};
use dp4d::units::w_to_dbm;
use dp4d::{
    ngmi, optimal_launch_power, snr_eff, Constellation4D, LinkConfig, NliCoefficients, NoiseTerms, PowerSearch,
    SsfmConfig,
};
use serde_json::json;

use crate::args::{CalibrateArgs, CoeffArgs, GmiArgs, PowerArgs, PredictArgs, SimulateArgs};
use crate::error::{CliError, Result};
use crate::output::{config_hash, num, Plot, Report, Table};
use crate::{parse_grid, parse_spans, resolve_format, ssfm_config, CoefficientsFile, Context};

pub(crate) fn missing_coefficients() -> CliError {
    dp4d::Error::Config("no NLI coefficients: pass --eta-ss, --coefficients or --calibrate".into()).into()
}

/// Coefficients given on the command line, one per format, or `None`.
pub(crate) fn supplied_coefficients(a: &CoeffArgs, n_formats: usize) -> Result<Option<Vec<NliCoefficients>>> {
    if let Some(eta) = a.eta_ss {
        return Ok(Some(vec![NliCoefficients::user(eta, a.epsilon)?; n_formats]));
    }
    if a.coefficients.is_empty() {
        return Ok(None);
    }
    let files = a
        .coefficients
        .iter()
        .map(|p| CoefficientsFile::load(p).map(|f| f.coefficients))
        .collect::<Result<Vec<_>>>()?;
    match files.len() {
        1 => Ok(Some(vec![files[0]; n_formats])),
        n if n == n_formats => Ok(Some(files)),
        n => Err(CliError::Usage(format!("{n} coefficient files for {n_formats} formats"))),
    }
}

pub(crate) fn powers(a: &PowerArgs, link: &LinkConfig) -> Result<Vec<f64>> {
    match (&a.power_sweep, a.power_dbm) {
        (Some(s), _) => parse_grid(s),
        (None, Some(p)) => Ok(vec![p]),
        (None, None) => Ok(vec![link.signal.launch_power_dbm]),
    }
}

pub fn format_info(ctx: &Context, spec: &str) -> Result<()> {
    let c = resolve_format(spec)?;
    let m = c.moments();
    let mut t = Table::new(
        "format_info",
        &[
            "name",
            "points",
            "bits_per_symbol",
            "energy",
            "mu2_x",
            "mu2_y",
            "mu4_x",
            "mu4_y",
            "cross_corr",
            "kurtosis_x",
            "kurtosis_y",
            "kurtosis_excess",
            "orthant_symmetric",
        ],
    );
    t.push(vec![
        c.name().to_string(),
        c.len().to_string(),
        c.bits_per_symbol().to_string(),
        num(c.energy()),
        num(m.mu2_x),
        num(m.mu2_y),
        num(m.mu4_x),
        num(m.mu4_y),
        num(m.cross_corr),
        num(m.kurtosis_x),
        num(m.kurtosis_y),
        num(m.kurtosis_excess),
        c.is_orthant_symmetric(1e-9).to_string(),
    ]);
    let hash = config_hash(&json!({"command": "format info", "points": c.points(), "labels": c.labels()}));
    let mut r = Report::new("format info", hash, Vec::new());
    r.tables.push(t);
    r.write(ctx.out_dir(), false)?;
    Ok(())
}

pub fn predict(ctx: &Context, a: &PredictArgs) -> Result<()> {
    let coeff = supplied_coefficients(&a.coeff, 1)?.ok_or_else(missing_coefficients)?[0];
    let link = a.spans.map_or(ctx.link, |n| ctx.link.with_spans(n));
    link.validate()?;
    let include_sn = a.include_sn.is_on();
    let grid = powers(&a.power, &link)?;
    let mut t = Table::new("predict", &["power_dbm", "ase_w", "ss_w", "sn_w", "snr_eff_db"]).with_plot(Plot {
        x: "power_dbm",
        ys: vec!["snr_eff_db"],
        logy: false,
        group: None,
    });
    for &p in &grid {
        let b = snr_eff(dp4d::units::dbm_to_w(p), &link, &coeff, include_sn);
        t.push(vec![num(p), num(b.ase_total_w), num(b.ss_w), num(b.sn_w), num(b.snr_eff_db)]);
    }
    let opt = optimal_launch_power(&link, &coeff, include_sn, &PowerSearch::default());
    let hash = config_hash(&json!({
        "command": "predict", "link": link, "coefficients": coeff, "include_sn": include_sn, "powers": grid,
    }));
    let mut r = Report::new("predict", hash, Vec::new());
    r.meta("spans", link.n_spans());
    r.meta("distance_km", num(link.distance_km()));
    r.meta("eta_ss", num(coeff.eta_ss));
    r.meta("epsilon", num(coeff.epsilon));
    r.meta("include_sn", include_sn);
    r.meta("optimal_power_dbm", format!("{:.2}", opt.power_dbm));
    r.meta("optimal_snr_eff_db", format!("{:.3}", opt.snr_eff_db));
    if opt.at_bound {
        r.meta("optimum_at_search_bound", true);
    }
    r.tables.push(t);
    r.write(ctx.out_dir(), false)?;
    Ok(())
}

/// Simulated noise terms for one power, cached by their full input set.
pub(crate) fn simulate_terms(
    ctx: &Context,
    link: &LinkConfig,
    c: &Constellation4D,
    cfg: &SsfmConfig,
    n_seeds: usize,
    spans: &[u32],
) -> Result<Vec<NoiseTerms>> {
    let key = json!({
        "link": link, "points": c.points(), "labels": c.labels(), "cfg": cfg, "seeds": n_seeds, "spans": spans,
    });
    ctx.cache
        .get_or_compute("ssfm", &key, || Ok(estimate_noise_terms_at(link, c, cfg, n_seeds, spans)?))
}

fn opt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        num(x)
    }
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let c = resolve_format(&a.format)?;
    let spans = match &a.spans {
        Some(s) => parse_spans(s)?,
        None => vec![ctx.link.n_spans()],
    };
    let grid = powers(&a.power, &ctx.link)?;
    let cfg = SsfmConfig {
        ase_on: a.toggle_ase.is_on(),
        nonlinearity_on: a.toggle_nl.is_on(),
        ..ssfm_config(&a.ssfm)
    };
    let n_seeds = ctx.n_seeds(1);
    let mut t = Table::new(
        "simulate",
        &[
            "power_dbm",
            "spans",
            "distance_km",
            "seed",
            "snr_eff_db",
            "total_w",
            "ase_w",
            "ss_w",
            "sn_w",
            "total_se",
            "ase_se",
            "ss_se",
            "sn_se",
            "low_snr_warning",
        ],
    );
    let mut warned = false;
    for &p in &grid {
        let link = ctx.link.with_launch_power_dbm(p);
        for nt in simulate_terms(ctx, &link, &c, &cfg, n_seeds, &spans)? {
            for s in &nt.per_seed {
                warned |= s.low_snr_warning;
                t.push(vec![
                    num(p),
                    nt.spans.to_string(),
                    num(nt.distance_km),
                    s.seed.to_string(),
                    num(s.snr_eff_db),
                    num(s.total_w),
                    opt_num(s.ase_w),
                    opt_num(s.ss_w),
                    opt_num(s.sn_w),
                    String::new(),
                    String::new(),
                    String::new(),
                    if cfg.ase_on && cfg.nonlinearity_on { opt_num(s.sn_within_se) } else { String::new() },
                    s.low_snr_warning.to_string(),
                ]);
            }
            t.push(vec![
                num(p),
                nt.spans.to_string(),
                num(nt.distance_km),
                "mean".into(),
                num(nt.snr_eff_db),
                num(nt.total_w),
                opt_num(nt.ase_w),
                opt_num(nt.ss_w),
                opt_num(nt.sn_w),
                num(nt.total_se),
                opt_num(nt.ase_se),
                opt_num(nt.ss_se),
                opt_num(nt.sn_se),
                nt.per_seed.iter().any(|s| s.low_snr_warning).to_string(),
            ]);
        }
    }
    if warned {
        eprintln!("warning: effective SNR below {} dB in at least one run", dp4d::ssfm::LOW_SNR_WARNING_DB);
    }
    let run_seeds = seeds(&cfg, n_seeds);
    let hash = config_hash(&json!({
        "command": "simulate", "link": ctx.link, "points": c.points(), "labels": c.labels(), "cfg": cfg,
        "seeds": run_seeds, "spans": spans, "powers": grid,
    }));
    let mut r = Report::new("simulate", hash, run_seeds);
    r.meta("format", c.name());
    r.meta("symbols", cfg.n_symbols);
    r.meta("sps", cfg.sps);
    r.meta("step_km", num(cfg.step_km));
    r.meta("ase", cfg.ase_on);
    r.meta("nonlinearity", cfg.nonlinearity_on);
    r.tables.push(t);
    r.write(ctx.out_dir(), false)?;
    Ok(())
}

pub fn gmi(ctx: &Context, a: &GmiArgs) -> Result<()> {
    let c = resolve_format(&a.format)?;
    let grid = match (&a.snr_sweep, a.snr_db) {
        (Some(s), _) => parse_grid(s)?,
        (None, Some(x)) => vec![x],
        (None, None) => return Err(CliError::Usage("pass --snr-db or --snr-sweep".into())),
    };
    let ev = GmiEvaluator::new(c.points().to_vec(), c.labels().to_vec(), a.samples, a.seed)?;
    let m = c.bits_per_symbol();
    let mut t = Table::new("gmi", &["snr_db", "gmi", "ngmi", "std_error"]).with_plot(Plot {
        x: "snr_db",
        ys: vec!["ngmi"],
        logy: false,
        group: None,
    });
    for &s in &grid {
        let g = ev.evaluate(s);
        t.push(vec![num(s), num(g.gmi_bits_per_4d), num(ngmi(&g, m)), num(g.std_error)]);
    }
    let hash = config_hash(&json!({
        "command": "gmi", "points": c.points(), "labels": c.labels(), "samples": a.samples, "snr": grid,
    }));
    let mut r = Report::new("gmi", hash, vec![a.seed]);
    r.meta("format", c.name());
    r.meta("bits_per_symbol", m);
    r.meta("samples", a.samples);
    r.tables.push(t);
    r.write(ctx.out_dir(), false)?;
    Ok(())
}

/// Noiseless runs at `spans` and the power-law fit through them.
pub(crate) fn calibrate_format(
    ctx: &Context,
    link: &LinkConfig,
    c: &Constellation4D,
    cfg: &SsfmConfig,
    n_seeds: usize,
    spans: &[u32],
) -> Result<dp4d::Calibration> {
    let noiseless = SsfmConfig {
        ase_on: false,
        nonlinearity_on: true,
        ..*cfg
    };
    let mut d = spans.to_vec();
    d.sort_unstable();
    d.dedup();
    let terms = simulate_terms(ctx, link, c, &noiseless, n_seeds, &d)?;
    let points: Vec<CalibrationPoint> = terms
        .iter()
        .map(|t| CalibrationPoint {
            spans: t.spans,
            ss_w: t.ss_w,
            ss_se: t.ss_se,
        })
        .collect();
    Ok(fit_power_law(&points, link.signal.launch_power_w())?)
}

pub fn calibrate(ctx: &Context, a: &CalibrateArgs) -> Result<()> {
    let c = resolve_format(&a.format)?;
    let spans = parse_spans(&a.distances)?;
    let link = a.power_dbm.map_or(ctx.link, |p| ctx.link.with_launch_power_dbm(p));
    let cfg = ssfm_config(&a.ssfm);
    let n_seeds = ctx.n_seeds(1);
    let cal = calibrate_format(ctx, &link, &c, &cfg, n_seeds, &spans)?;
    let k = cal.coefficients;
    let p3 = cal.power_w.powi(3);
    let mut t = Table::new("calibrate", &["spans", "distance_km", "ss_w", "ss_se", "fit_w", "residual"]).with_plot(Plot {
        x: "distance_km",
        ys: vec!["ss_w", "fit_w"],
        logy: true,
        group: None,
    });
    for (pt, res) in cal.points.iter().zip(&cal.residuals) {
        t.push(vec![
            pt.spans.to_string(),
            num(pt.spans as f64 * link.fiber.span_length_km),
            num(pt.ss_w),
            num(pt.ss_se),
            num(k.accumulated(pt.spans) * p3),
            num(*res),
        ]);
    }
    let run_seeds = seeds(&cfg, n_seeds);
    let hash = config_hash(&json!({
        "command": "calibrate", "link": link, "points": c.points(), "labels": c.labels(), "cfg": cfg,
        "seeds": run_seeds, "spans": spans,
    }));
    let mut r = Report::new("calibrate", hash, run_seeds);
    r.meta("format", c.name());
    r.meta("power_dbm", num(w_to_dbm(cal.power_w)));
    r.meta("eta_ss", num(k.eta_ss));
    r.meta("epsilon", num(k.epsilon));
    r.meta("r_squared", num(cal.r_squared));
    r.tables.push(t);
    r.write(ctx.out_dir(), false)?;
    let file = CoefficientsFile {
        format: c.name().to_string(),
        coefficients: k,
        power_dbm: Some(link.signal.launch_power_dbm),
        r_squared: Some(cal.r_squared),
        spans: cal.points.iter().map(|p| p.spans).collect(),
    };
    if let Some(dir) = ctx.out_dir() {
        file.save(&dir.join("coefficients.toml"))?;
    }
    if let Some(p) = &a.coefficients_out {
        file.save(p)?;
    }
    Ok(())
}
