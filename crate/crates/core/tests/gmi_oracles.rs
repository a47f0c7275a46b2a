use dp4d::constellation::gray_square_qam;
use dp4d::metrics::{gmi_2d, GmiEvaluator, SNR_BRACKET_DB};
use dp4d::{generate_pm_qam, gmi, required_snr};

/// Gauss–Hermite nodes and weights for `∫ e^{-t²} f(t) dt`, by Newton
/// iteration on the Hermite recurrence.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-0.16667),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0,
            3 => 1.91 * z - 0.91 * out[1].0,
            _ => 2.0 * z - out[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        out[i] = (z, w);
        out[n - 1 - i] = (-z, w);
    }
    out
}

/// GMI (bits per 2D symbol) of a 2D labeled constellation with Gaussian
/// noise of variance `sigma2` per real dimension, by tensor-product
/// Gauss–Hermite quadrature over the noise.
fn gmi_2d_quadrature(points: &[[f64; 2]], labels: &[u32], sigma2: f64, nodes: usize) -> f64 {
    let gh = gauss_hermite(nodes);
    let bits = points.len().trailing_zeros() as usize;
    let s = (2.0 * sigma2).sqrt();
    let mut loss = 0.0;
    for (x, &lx) in points.iter().zip(labels) {
        for &(t1, w1) in &gh {
            for &(t2, w2) in &gh {
                let y = [x[0] + s * t1, x[1] + s * t2];
                let metric: Vec<f64> = points
                    .iter()
                    .map(|p| -((y[0] - p[0]).powi(2) + (y[1] - p[1]).powi(2)) / (2.0 * sigma2))
                    .collect();
                let best = metric.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = metric.iter().map(|m| (m - best).exp()).sum();
                for b in 0..bits {
                    let same: f64 = metric
                        .iter()
                        .zip(labels)
                        .filter(|(_, &l)| (l >> b) & 1 == (lx >> b) & 1)
                        .map(|(m, _)| (m - best).exp())
                        .sum();
                    loss += w1 * w2 / std::f64::consts::PI * (total / same).log2();
                }
            }
        }
    }
    bits as f64 - loss / points.len() as f64
}

#[test]
fn gauss_hermite_integrates_polynomials() {
    let gh = gauss_hermite(20);
    let pi = std::f64::consts::PI;
    let m0: f64 = gh.iter().map(|(_, w)| w).sum();
    let m2: f64 = gh.iter().map(|(t, w)| w * t * t).sum();
    let m4: f64 = gh.iter().map(|(t, w)| w * t.powi(4)).sum();
    assert!((m0 - pi.sqrt()).abs() < 1e-12);
    assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
    assert!((m4 - 3.0 * pi.sqrt() / 4.0).abs() < 1e-12);
}

#[test]
fn pm16qam_matches_quadrature_oracle() {
    let c = generate_pm_qam(16).unwrap();
    let (pts, labels) = gray_square_qam(16).unwrap();
    let e2: f64 = pts.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / pts.len() as f64;
    for snr_db in [6.0, 10.0, 14.0] {
        let est = gmi(&c, snr_db, 200_000, 21).unwrap();
        // total 4D energy 2·e2 over 4 noise dimensions
        let sigma2 = 2.0 * e2 / (4.0 * 10f64.powf(snr_db / 10.0));
        let oracle = 2.0 * gmi_2d_quadrature(&pts, &labels, sigma2, 40);
        let z = (est.gmi_bits_per_4d - oracle) / est.std_error;
        assert!(z.abs() < 3.0, "{snr_db} dB: MC {} ± {} vs oracle {oracle}", est.gmi_bits_per_4d, est.std_error);
    }
}

#[test]
fn product_format_factorizes() {
    let c = generate_pm_qam(16).unwrap();
    let (pts, labels) = gray_square_qam(16).unwrap();
    for snr_db in [4.0, 9.0, 13.0] {
        let g4 = gmi(&c, snr_db, 100_000, 5).unwrap();
        let g2 = gmi_2d(&pts, &labels, snr_db, 100_000, 6).unwrap();
        let se = (g4.std_error.powi(2) + 4.0 * g2.std_error.powi(2)).sqrt();
        assert!(
            (g4.gmi_bits_per_4d - 2.0 * g2.gmi_bits_per_4d).abs() < 3.0 * se,
            "{snr_db} dB: {} vs 2 x {}",
            g4.gmi_bits_per_4d,
            g2.gmi_bits_per_4d
        );
    }
}

#[test]
fn required_snr_matches_dense_sweep() {
    let c = generate_pm_qam(4).unwrap();
    let (n, seed, tol) = (50_000, 4, 0.01);
    let target = 0.8 * 4.0;
    let solved = required_snr(&c, target, tol, n, seed).unwrap();
    let ev = GmiEvaluator::new(c.points().to_vec(), c.labels().to_vec(), n, seed).unwrap();
    let crossing = (0..)
        .map(|i| SNR_BRACKET_DB.0 + 0.005 * i as f64)
        .find(|&s| ev.evaluate(s).gmi_bits_per_4d >= target)
        .unwrap();
    assert!((solved - crossing).abs() <= tol, "{solved} vs {crossing}");
}

#[test]
fn gmi_is_monotone_in_snr() {
    let c = generate_pm_qam(64).unwrap();
    let ev = GmiEvaluator::new(c.points().to_vec(), c.labels().to_vec(), 10_000, 2).unwrap();
    let mut last = ev.evaluate(-5.0);
    for k in 0..10 {
        let g = ev.evaluate(-2.0 + 3.0 * k as f64);
        assert!(g.gmi_bits_per_4d >= last.gmi_bits_per_4d - 3.0 * g.std_error.max(last.std_error));
        last = g;
    }
}
