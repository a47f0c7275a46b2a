//! Batch experiments. Grids are walked in order and every table is written
//! in grid order, so reruns give identical files.

use dp4d::metrics::GmiEvaluator;
use dp4d::nli::optimal_launch_power;
use dp4d::ssfm::{fit_power_law, seeds, CalibrationPoint};
use dp4d::units::{dbm_to_w, lin_to_db};
use dp4d::{
    ngmi, reach_at_ngmi, snr_eff, Constellation4D, LinkConfig, NliCoefficients, NoiseTerms, PowerSearch,
    ReachOptions, SsfmConfig,
};
use serde_json::json;

use crate::args::{ExperimentArgs, ExperimentName};
use crate::commands::{calibrate_format, missing_coefficients, powers, simulate_terms, supplied_coefficients};
use crate::error::Result;
use crate::output::{config_hash, num, Plot, Report, Table};
use crate::{parse_spans, resolve_format, ssfm_config, Context};

const VARIANTS: [(&str, bool); 2] = [("ss_only", false), ("ss_plus_sn", true)];

struct Setup {
    formats: Vec<Constellation4D>,
    cfg: SsfmConfig,
    n_seeds: usize,
}

pub fn run(ctx: &Context, a: &ExperimentArgs) -> Result<()> {
    let setup = Setup {
        formats: a.formats.iter().map(|f| resolve_format(f)).collect::<Result<_>>()?,
        cfg: ssfm_config(&a.ssfm),
        n_seeds: ctx.n_seeds(2),
    };
    let (mut report, used_seeds) = match a.name {
        ExperimentName::NoiseVsDistance => noise_vs_distance(ctx, a, &setup)?,
        ExperimentName::NliVsDistance => nli_vs_distance(ctx, a, &setup)?,
        ExperimentName::NliByFormat => nli_by_format(ctx, a, &setup)?,
        ExperimentName::NgmiVsDistance => ngmi_vs_distance(ctx, a, &setup)?,
        ExperimentName::SnrVsPower => snr_vs_power(ctx, a, &setup)?,
    };
    let names: Vec<&str> = setup.formats.iter().map(|c| c.name()).collect();
    let points: Vec<_> = setup.formats.iter().map(|c| (c.points(), c.labels())).collect();
    report.config_hash = config_hash(&json!({
        "command": format!("experiment {}", a.name.as_str()), "link": ctx.link, "formats": points,
        "cfg": setup.cfg, "seeds": used_seeds, "spans": a.spans, "power_dbm": a.power.power_dbm,
        "power_sweep": a.power.power_sweep, "eta_ss": a.coeff.eta_ss, "epsilon": a.coeff.epsilon,
        "coefficients": a.coeff.coefficients, "calibrate": a.calibrate,
        "calibration_distances": a.calibration_distances, "ngmi_threshold": a.ngmi_threshold,
        "gmi_samples": a.gmi_samples, "ssfm_points": a.ssfm_points,
    }));
    report.seeds = used_seeds;
    report.meta.insert(0, ("formats".into(), names.join(",")));
    report.write(ctx.out_dir(), a.plot)?;
    Ok(())
}

fn new_report(a: &ExperimentArgs) -> Report {
    Report::new(format!("experiment {}", a.name.as_str()), String::new(), Vec::new())
}

fn describe(r: &mut Report, c: &Constellation4D, k: &NliCoefficients) {
    r.meta(
        format!("coefficients[{}]", c.name()),
        format!("eta_ss={} epsilon={} source={:?}", num(k.eta_ss), num(k.epsilon), k.source),
    );
}

/// Coefficients for the closed-form experiments: supplied, or fitted from
/// noiseless runs at the calibration distances.
fn model_coefficients(ctx: &Context, a: &ExperimentArgs, s: &Setup) -> Result<(Vec<NliCoefficients>, Vec<u64>)> {
    if let Some(k) = supplied_coefficients(&a.coeff, s.formats.len())? {
        return Ok((k, Vec::new()));
    }
    if !a.calibrate {
        return Err(missing_coefficients());
    }
    let d = parse_spans(&a.calibration_distances)?;
    let n = ctx.n_seeds(1);
    let k = s
        .formats
        .iter()
        .map(|c| Ok(calibrate_format(ctx, &ctx.link, c, &s.cfg, n, &d)?.coefficients))
        .collect::<Result<Vec<_>>>()?;
    Ok((k, seeds(&s.cfg, n)))
}

fn noise_vs_distance(ctx: &Context, a: &ExperimentArgs, s: &Setup) -> Result<(Report, Vec<u64>)> {
    let spans = parse_spans(a.spans.as_deref().unwrap_or("1:100:1"))?;
    let grid = powers(&a.power, &ctx.link)?;
    let (coeffs, used) = model_coefficients(ctx, a, s)?;
    let mut t = Table::new(
        "noise_vs_distance",
        &["format", "power_dbm", "spans", "distance_km", "ase_w", "ss_w", "sn_w", "ss_sn_gap_db"],
    )
    .with_plot(Plot {
        x: "distance_km",
        ys: vec!["ase_w", "ss_w", "sn_w"],
        logy: true,
        group: Some("format"),
    });
    let mut r = new_report(a);
    for (c, k) in s.formats.iter().zip(&coeffs) {
        describe(&mut r, c, k);
        for &p in &grid {
            for &n in &spans {
                let link = ctx.link.with_spans(n);
                let b = snr_eff(dbm_to_w(p), &link, k, true);
                t.push(vec![
                    c.name().into(),
                    num(p),
                    n.to_string(),
                    num(link.distance_km()),
                    num(b.ase_total_w),
                    num(b.ss_w),
                    num(b.sn_w),
                    num(lin_to_db(b.ss_w / b.sn_w)),
                ]);
            }
        }
    }
    r.tables.push(t);
    Ok((r, used))
}

/// Split-step runs at `spans` for one format and power, plus the
/// coefficients to compare against: supplied, or fitted to the S-S power of
/// the same runs.
fn simulated_with_coefficients(
    ctx: &Context,
    a: &ExperimentArgs,
    s: &Setup,
    supplied: Option<NliCoefficients>,
    c: &Constellation4D,
    link: &LinkConfig,
    spans: &[u32],
) -> Result<(Vec<NoiseTerms>, NliCoefficients)> {
    let mut run_spans = spans.to_vec();
    if supplied.is_none() && a.calibrate {
        // a fit needs two distances; add shorter checkpoints when given one
        let far = *spans.iter().max().expect("non-empty grid");
        run_spans.extend([far / 4, far / 2].into_iter().filter(|&n| n >= 1));
    }
    run_spans.sort_unstable();
    run_spans.dedup();
    let cfg = SsfmConfig { decompose: true, ..s.cfg };
    let terms = simulate_terms(ctx, link, c, &cfg, s.n_seeds, &run_spans)?;
    let k = match supplied {
        Some(k) => k,
        None if a.calibrate => {
            let points: Vec<CalibrationPoint> = terms
                .iter()
                .map(|t| CalibrationPoint {
                    spans: t.spans,
                    ss_w: t.ss_w,
                    ss_se: t.ss_se,
                })
                .collect();
            fit_power_law(&points, link.signal.launch_power_w())?.coefficients
        }
        None => return Err(missing_coefficients()),
    };
    let wanted = terms.into_iter().filter(|t| spans.contains(&t.spans)).collect();
    Ok((wanted, k))
}

fn snr_se_db(t: &NoiseTerms) -> f64 {
    10.0 / std::f64::consts::LN_10 * t.total_se / t.total_w
}

fn nli_vs_distance(ctx: &Context, a: &ExperimentArgs, s: &Setup) -> Result<(Report, Vec<u64>)> {
    let spans = parse_spans(a.spans.as_deref().unwrap_or("25,50,75,100"))?;
    let grid = powers(&a.power, &ctx.link)?;
    let supplied = supplied_coefficients(&a.coeff, s.formats.len())?;
    let mut t = Table::new(
        "nli_vs_distance",
        &[
            "format",
            "power_dbm",
            "spans",
            "distance_km",
            "model_variant",
            "snr_model_db",
            "snr_ssfm_db",
            "snr_ssfm_se_db",
            "delta_snr_db",
            "ss_model_w",
            "sn_model_w",
            "ss_ssfm_w",
            "sn_ssfm_w",
            "sn_ssfm_se_w",
        ],
    )
    .with_plot(Plot {
        x: "distance_km",
        ys: vec!["delta_snr_db"],
        logy: false,
        group: Some("model_variant"),
    });
    let mut r = new_report(a);
    for (i, c) in s.formats.iter().enumerate() {
        for &p in &grid {
            let link = ctx.link.with_launch_power_dbm(p);
            let (terms, k) =
                simulated_with_coefficients(ctx, a, s, supplied.as_ref().map(|v| v[i]), c, &link, &spans)?;
            describe(&mut r, c, &k);
            for nt in &terms {
                let l = link.with_spans(nt.spans);
                for (variant, sn) in VARIANTS {
                    let b = snr_eff(link.signal.launch_power_w(), &l, &k, sn);
                    t.push(vec![
                        c.name().into(),
                        num(p),
                        nt.spans.to_string(),
                        num(nt.distance_km),
                        variant.into(),
                        num(b.snr_eff_db),
                        num(nt.snr_eff_db),
                        num(snr_se_db(nt)),
                        num(b.snr_eff_db - nt.snr_eff_db),
                        num(b.ss_w),
                        num(b.sn_w),
                        num(nt.ss_w),
                        num(nt.sn_w),
                        num(nt.sn_se),
                    ]);
                }
            }
        }
    }
    r.tables.push(t);
    Ok((r, seeds(&s.cfg, s.n_seeds)))
}

fn nli_by_format(ctx: &Context, a: &ExperimentArgs, s: &Setup) -> Result<(Report, Vec<u64>)> {
    let spans = parse_spans(a.spans.as_deref().unwrap_or("100"))?;
    let supplied = supplied_coefficients(&a.coeff, s.formats.len())?;
    let link = ctx.link.with_launch_power_dbm(powers(&a.power, &ctx.link)?[0]);
    let mut t = Table::new(
        "nli_by_format",
        &["format", "kurtosis_excess", "spans", "distance_km", "source", "ss_w", "sn_w", "nli_w", "nli_se_w"],
    );
    let mut r = new_report(a);
    r.meta("power_dbm", num(link.signal.launch_power_dbm));
    for (i, c) in s.formats.iter().enumerate() {
        let (terms, k) = simulated_with_coefficients(ctx, a, s, supplied.as_ref().map(|v| v[i]), c, &link, &spans)?;
        describe(&mut r, c, &k);
        let kurt = num(c.moments().kurtosis_excess);
        for nt in &terms {
            let l = link.with_spans(nt.spans);
            for (variant, sn) in VARIANTS {
                let b = snr_eff(link.signal.launch_power_w(), &l, &k, sn);
                t.push(vec![
                    c.name().into(),
                    kurt.clone(),
                    nt.spans.to_string(),
                    num(nt.distance_km),
                    format!("model_{variant}"),
                    num(b.ss_w),
                    num(b.sn_w),
                    num(b.nli_w()),
                    String::new(),
                ]);
            }
            let nli_se = (nt.ss_se * nt.ss_se + nt.sn_se * nt.sn_se).sqrt();
            t.push(vec![
                c.name().into(),
                kurt.clone(),
                nt.spans.to_string(),
                num(nt.distance_km),
                "ssfm".into(),
                num(nt.ss_w),
                num(nt.sn_w),
                num(nt.ss_w + nt.sn_w),
                num(nli_se),
            ]);
        }
    }
    r.tables.push(t);
    Ok((r, seeds(&s.cfg, s.n_seeds)))
}

fn ngmi_vs_distance(ctx: &Context, a: &ExperimentArgs, s: &Setup) -> Result<(Report, Vec<u64>)> {
    let spans = parse_spans(a.spans.as_deref().unwrap_or("5:200:5"))?;
    let (coeffs, mut used) = model_coefficients(ctx, a, s)?;
    let search = PowerSearch::default();
    let gmi_seed = a.ssfm.seed;
    let mut curve = Table::new(
        "ngmi_vs_distance",
        &["format", "model_variant", "spans", "distance_km", "launch_power_dbm", "snr_eff_db", "ngmi"],
    )
    .with_plot(Plot {
        x: "distance_km",
        ys: vec!["ngmi"],
        logy: false,
        group: Some("model_variant"),
    });
    let mut reach = Table::new(
        "reach",
        &[
            "format",
            "model_variant",
            "ngmi_threshold",
            "required_snr_db",
            "reach_spans",
            "reach_km",
            "spans_fractional",
            "launch_power_dbm",
            "reach_reduction_vs_ss_only",
        ],
    );
    let mut r = new_report(a);
    r.meta("gmi_samples", a.gmi_samples);
    for (c, k) in s.formats.iter().zip(&coeffs) {
        describe(&mut r, c, k);
        let ev = GmiEvaluator::new(c.points().to_vec(), c.labels().to_vec(), a.gmi_samples, gmi_seed)?;
        let m = c.bits_per_symbol();
        let mut ss_only_reach = None;
        for (variant, sn) in VARIANTS {
            for &n in &spans {
                let link = ctx.link.with_spans(n);
                let o = optimal_launch_power(&link, k, sn, &search);
                let g = ev.evaluate(o.snr_eff_db);
                curve.push(vec![
                    c.name().into(),
                    variant.into(),
                    n.to_string(),
                    num(link.distance_km()),
                    num(o.power_dbm),
                    num(o.snr_eff_db),
                    num(ngmi(&g, m)),
                ]);
            }
            let opts = ReachOptions {
                ngmi_threshold: a.ngmi_threshold,
                include_sn: sn,
                gmi_samples: a.gmi_samples,
                seed: gmi_seed,
                ..Default::default()
            };
            let rc = reach_at_ngmi(&ctx.link, k, c, &opts)?;
            let base = *ss_only_reach.get_or_insert(rc.spans_fractional);
            reach.push(vec![
                c.name().into(),
                variant.into(),
                num(a.ngmi_threshold),
                num(rc.required_snr_db),
                rc.spans.to_string(),
                num(rc.distance_km),
                num(rc.spans_fractional),
                num(rc.launch_power_dbm),
                num((base - rc.spans_fractional) / base),
            ]);
        }
    }
    used.push(gmi_seed);
    used.dedup();
    r.tables.push(curve);
    r.tables.push(reach);
    Ok((r, used))
}

fn snr_vs_power(ctx: &Context, a: &ExperimentArgs, s: &Setup) -> Result<(Report, Vec<u64>)> {
    let spans = match &a.spans {
        Some(x) => parse_spans(x)?,
        None => vec![ctx.link.n_spans()],
    };
    let grid = match (&a.power.power_sweep, a.power.power_dbm) {
        (None, None) => crate::parse_grid("-4:4:0.5")?,
        _ => powers(&a.power, &ctx.link)?,
    };
    let (coeffs, mut used) = model_coefficients(ctx, a, s)?;
    let mut t = Table::new(
        "snr_vs_power",
        &["format", "spans", "distance_km", "power_dbm", "source", "snr_eff_db", "snr_se_db"],
    )
    .with_plot(Plot {
        x: "power_dbm",
        ys: vec!["snr_eff_db"],
        logy: false,
        group: Some("source"),
    });
    let mut r = new_report(a);
    let total_only = SsfmConfig { decompose: false, ..s.cfg };
    for (c, k) in s.formats.iter().zip(&coeffs) {
        describe(&mut r, c, k);
        let simulated: Vec<Vec<NoiseTerms>> = if a.ssfm_points {
            grid.iter()
                .map(|&p| simulate_terms(ctx, &ctx.link.with_launch_power_dbm(p), c, &total_only, s.n_seeds, &spans))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        for (si, &n) in spans.iter().enumerate() {
            let link = ctx.link.with_spans(n);
            for (pi, &p) in grid.iter().enumerate() {
                for (variant, sn) in VARIANTS {
                    let b = snr_eff(dbm_to_w(p), &link, k, sn);
                    t.push(vec![
                        c.name().into(),
                        n.to_string(),
                        num(link.distance_km()),
                        num(p),
                        variant.into(),
                        num(b.snr_eff_db),
                        String::new(),
                    ]);
                }
                if let Some(runs) = simulated.get(pi) {
                    let nt = &runs[si];
                    t.push(vec![
                        c.name().into(),
                        n.to_string(),
                        num(link.distance_km()),
                        num(p),
                        "ssfm".into(),
                        num(nt.snr_eff_db),
                        num(snr_se_db(nt)),
                    ]);
                }
            }
        }
    }
    if a.ssfm_points {
        used.extend(seeds(&s.cfg, s.n_seeds));
        used.sort_unstable();
        used.dedup();
    }
    r.tables.push(t);
    Ok((r, used))
}
