//! Dual-polarization 4D modulation formats.
//!
//! A format is a set of `M = 2^m` points in four real dimensions, each with a
//! unique `m`-bit label. Coordinates `(x1, x2)` are the in-phase/quadrature
//! pair of the X polarization and `(x3, x4)` those of the Y polarization.
//!
//! The on-disk format is plain text, one symbol per line: four
//! whitespace-separated decimal coordinates followed by the binary label.
//! Lines starting with `#` and blank lines are ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Constellation4D {
    name: String,
    points: Vec<[f64; 4]>,
    labels: Vec<u32>,
    bits: u32,
    /// `by_label[l]` is the index of the point carrying label `l`.
    by_label: Vec<usize>,
}

/// Moments of a format under uniform symbol probabilities.
///
/// Per-polarization quantities use the complex amplitudes `u = x1 + j x2`
/// and `v = x3 + j x4`. Kurtosis is `E[|u|^4] / E[|u|^2]^2`; the excess is
/// that ratio minus 2 (zero for a circular Gaussian).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormatMoments {
    pub mu2_x: f64,
    pub mu2_y: f64,
    pub mu4_x: f64,
    pub mu4_y: f64,
    /// `E[|u|^2 |v|^2]`
    pub cross_corr: f64,
    pub kurtosis_x: f64,
    pub kurtosis_y: f64,
    /// Mean of the two per-polarization excess kurtoses.
    pub kurtosis_excess: f64,
}

impl Constellation4D {
    /// Builds a format from raw points and integer labels.
    ///
    /// The points are taken as given; call [`Constellation4D::normalized`]
    /// to scale to unit mean 4D energy.
    pub fn new(name: impl Into<String>, points: Vec<[f64; 4]>, labels: Vec<u32>) -> Result<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::Format(format!(
                "number of points must be a power of two >= 2, got {m}"
            )));
        }
        if labels.len() != m {
            return Err(Error::Labeling(format!(
                "{} labels for {m} points",
                labels.len()
            )));
        }
        if let Some((i, _)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Format(format!("non-finite coordinate in point {i}")));
        }
        let bits = m.trailing_zeros();
        let mut by_label = vec![usize::MAX; m];
        for (i, &l) in labels.iter().enumerate() {
            let slot = by_label.get_mut(l as usize).ok_or_else(|| {
                Error::Labeling(format!("label {l} of point {i} needs more than {bits} bits"))
            })?;
            if *slot != usize::MAX {
                return Err(Error::Labeling(format!(
                    "duplicate label {:0width$b} at points {} and {i}",
                    l,
                    *slot,
                    width = bits as usize
                )));
            }
            *slot = i;
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
            bits,
            by_label,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of points `M`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bits per 4D symbol, `m = log2(M)`.
    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    /// Index of the point carrying `label`.
    pub fn index_of_label(&self, label: u32) -> Option<usize> {
        self.by_label.get(label as usize).copied()
    }

    pub fn label_string(&self, index: usize) -> String {
        format!("{:0width$b}", self.labels[index], width = self.bits as usize)
    }

    /// Mean 4D symbol energy under uniform probabilities.
    pub fn energy(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            / self.len() as f64
    }

    /// Scales to unit mean 4D energy. Applying it twice gives the same bits.
    pub fn normalized(&self) -> Self {
        let e = self.energy();
        if (e - 1.0).abs() <= 4.0 * f64::EPSILON {
            return self.clone();
        }
        let s = e.sqrt().recip();
        let mut out = self.clone();
        for p in &mut out.points {
            for x in p.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    /// Complex amplitudes of point `i` on the (X, Y) polarizations.
    #[inline]
    pub fn polarizations(&self, i: usize) -> (Complex64, Complex64) {
        let p = &self.points[i];
        (Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3]))
    }

    pub fn moments(&self) -> FormatMoments {
        let n = self.len() as f64;
        let (mut mu2_x, mut mu2_y, mut mu4_x, mut mu4_y, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &self.points {
            let px = p[0] * p[0] + p[1] * p[1];
            let py = p[2] * p[2] + p[3] * p[3];
            mu2_x += px;
            mu2_y += py;
            mu4_x += px * px;
            mu4_y += py * py;
            cross += px * py;
        }
        mu2_x /= n;
        mu2_y /= n;
        mu4_x /= n;
        mu4_y /= n;
        cross /= n;
        let kurtosis_x = mu4_x / (mu2_x * mu2_x);
        let kurtosis_y = mu4_y / (mu2_y * mu2_y);
        FormatMoments {
            mu2_x,
            mu2_y,
            mu4_x,
            mu4_y,
            cross_corr: cross,
            kurtosis_x,
            kurtosis_y,
            kurtosis_excess: 0.5 * ((kurtosis_x - 2.0) + (kurtosis_y - 2.0)),
        }
    }

    /// Diagnostic: true when negating any single coordinate maps the point
    /// set onto itself (coordinates compared on a grid of pitch `tol`).
    pub fn is_orthant_symmetric(&self, tol: f64) -> bool {
        let key = |p: &[f64; 4]| -> [i64; 4] { p.map(|x| (x / tol).round() as i64) };
        let set: BTreeSet<[i64; 4]> = self.points.iter().map(key).collect();
        (0..4).all(|d| {
            self.points.iter().all(|p| {
                let mut q = *p;
                q[d] = -q[d];
                set.contains(&key(&q))
            })
        })
    }
}

impl fmt::Display for Constellation4D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.name)?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                f,
                "{:.17e} {:.17e} {:.17e} {:.17e} {}",
                p[0],
                p[1],
                p[2],
                p[3],
                self.label_string(i)
            )?;
        }
        Ok(())
    }
}

/// Parses the text format described in the module docs. Not normalized.
pub fn parse_format(name: &str, text: &str) -> Result<Constellation4D> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(Error::Format(format!(
                "line {}: expected 4 coordinates and a label, found {} fields",
                lineno + 1,
                tokens.len()
            )));
        }
        let mut p = [0.0; 4];
        for (d, tok) in tokens[..4].iter().enumerate() {
            p[d] = tok.parse::<f64>().map_err(|e| {
                Error::Format(format!("line {}: bad coordinate {tok:?}: {e}", lineno + 1))
            })?;
            if !p[d].is_finite() {
                return Err(Error::Format(format!(
                    "line {}: non-finite coordinate {tok:?}",
                    lineno + 1
                )));
            }
        }
        let label = tokens[4];
        if label.is_empty() || label.len() > 31 || !label.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::Labeling(format!(
                "line {}: label {label:?} is not a binary string",
                lineno + 1
            )));
        }
        match width {
            None => width = Some(label.len()),
            Some(w) if w != label.len() => {
                return Err(Error::Labeling(format!(
                    "line {}: label {label:?} has {} bits, earlier labels have {w}",
                    lineno + 1,
                    label.len()
                )))
            }
            _ => {}
        }
        points.push(p);
        labels.push(u32::from_str_radix(label, 2).expect("validated binary label"));
    }
    let m = points.len();
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::Format(format!(
            "number of points must be a power of two >= 2, got {m}"
        )));
    }
    let w = width.unwrap_or(0);
    if w != m.trailing_zeros() as usize {
        return Err(Error::Labeling(format!(
            "labels have {w} bits but {m} points need exactly {}",
            m.trailing_zeros()
        )));
    }
    Constellation4D::new(name, points, labels)
}

/// Loads a format file and scales it to unit mean 4D energy.
pub fn load_format(path: impl AsRef<Path>) -> Result<Constellation4D> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "format".to_string());
    Ok(parse_format(&name, &text)?.normalized())
}

/// Gray-labeled square QAM on one polarization: points and labels.
pub fn gray_square_qam(order: usize) -> Result<(Vec<[f64; 2]>, Vec<u32>)> {
    if !matches!(order, 4 | 16 | 64 | 256) {
        return Err(Error::Format(format!(
            "unsupported square QAM order {order} (expected 4, 16, 64 or 256)"
        )));
    }
    let side = (order as f64).sqrt().round() as usize;
    let k = side.trailing_zeros();
    let gray = |i: usize| (i ^ (i >> 1)) as u32;
    let mut points = Vec::with_capacity(order);
    let mut labels = Vec::with_capacity(order);
    for i in 0..side {
        for q in 0..side {
            points.push([
                2.0 * i as f64 - (side - 1) as f64,
                2.0 * q as f64 - (side - 1) as f64,
            ]);
            labels.push((gray(i) << k) | gray(q));
        }
    }
    Ok((points, labels))
}

/// Polarization-multiplexed square QAM: the Cartesian product of two
/// identical Gray-labeled QAM constellations, normalized to unit 4D energy.
/// X-polarization bits are the most significant half of each label.
pub fn generate_pm_qam(order_2d: usize) -> Result<Constellation4D> {
    let (pts, labs) = gray_square_qam(order_2d)?;
    let half = order_2d.trailing_zeros();
    let mut points = Vec::with_capacity(order_2d * order_2d);
    let mut labels = Vec::with_capacity(order_2d * order_2d);
    for (px, lx) in pts.iter().zip(&labs) {
        for (py, ly) in pts.iter().zip(&labs) {
            points.push([px[0], px[1], py[0], py[1]]);
            labels.push((lx << half) | ly);
        }
    }
    let name = if order_2d == 4 {
        "PM-QPSK".to_string()
    } else {
        format!("PM-{order_2d}QAM")
    };
    Ok(Constellation4D::new(name, points, labels)?.normalized())
}
