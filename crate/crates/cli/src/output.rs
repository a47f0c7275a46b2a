//! CSV reports with a metadata comment block, gnuplot scripts and the
//! on-disk result cache.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Formats a float for CSV. The output is the shortest string that parses
/// back to the same value, so equal inputs always print the same way.
pub fn num(x: f64) -> String {
    if x == 0.0 || x.is_nan() || x.is_infinite() || (1e-3..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Rounds a grid value so that `0.1 + 0.2` style drift does not show up in
/// the CSV.
pub fn grid_value(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// SHA-256 of the JSON encoding of `value`, hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Clone, Debug)]
pub struct Plot {
    pub x: &'static str,
    pub ys: Vec<&'static str>,
    pub logy: bool,
    /// Column splitting the rows into separate curves.
    pub group: Option<&'static str>,
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub plot: Option<Plot>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn with_plot(mut self, plot: Plot) -> Self {
        self.plot = Some(plot);
        self
    }

    fn body(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Cache(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn gnuplot(&self, csv_name: &str) -> Option<String> {
        let plot = self.plot.as_ref()?;
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str(&format!("set xlabel '{}'\n", plot.x));
        if plot.logy {
            s.push_str("set logscale y\n");
        }
        let groups: Vec<String> = match plot.group.and_then(|g| self.header.iter().position(|h| *h == g)) {
            Some(i) => {
                let mut g: Vec<String> = Vec::new();
                for r in &self.rows {
                    if !g.contains(&r[i]) {
                        g.push(r[i].clone());
                    }
                }
                g
            }
            None => vec![String::new()],
        };
        let mut clauses = Vec::new();
        for y in &plot.ys {
            for g in &groups {
                let (using, title) = match plot.group {
                    Some(col) if !g.is_empty() => (
                        format!("'{x}':(strcol('{col}') eq '{g}' ? column('{y}') : NaN)", x = plot.x),
                        format!("{y} {g}"),
                    ),
                    _ => (format!("'{}':'{}'", plot.x, y), y.to_string()),
                };
                clauses.push(format!("'{csv_name}' using {using} with linespoints title '{title}'"));
            }
        }
        s.push_str("plot ");
        s.push_str(&clauses.join(", \\\n     "));
        s.push('\n');
        Some(s)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub meta: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: impl Into<String>, config_hash: String, seeds: Vec<u64>) -> Self {
        Self {
            command: command.into(),
            config_hash,
            seeds,
            meta: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    fn header_block(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut s = format!(
            "# dp4d {}\n# command: {}\n# config_hash: {}\n# seeds: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_hash,
            if seeds.is_empty() { "none".to_string() } else { seeds.join(",") }
        );
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s
    }

    /// Renders every table, each preceded by the metadata block.
    pub fn render(&self) -> Result<String> {
        let head = self.header_block();
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&head);
            out.push_str(&format!("# table: {}\n", t.name));
            out.push_str(&t.body()?);
        }
        Ok(out)
    }

    /// Writes `DIR/<table>.csv` (and `.gp` with `plot`) for every table, or
    /// everything to stdout when `dir` is `None`. Returns the files written.
    pub fn write(&self, dir: Option<&Path>, plot: bool) -> Result<Vec<PathBuf>> {
        let Some(dir) = dir else {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(self.render()?.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
            return Ok(Vec::new());
        };
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let head = self.header_block();
        let mut written = Vec::new();
        for t in &self.tables {
            let csv_name = format!("{}.csv", t.name);
            let path = dir.join(&csv_name);
            let text = format!("{head}{}", t.body()?);
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
            if plot {
                if let Some(gp) = t.gnuplot(&csv_name) {
                    let path = dir.join(format!("{}.gp", t.name));
                    fs::write(&path, gp).map_err(|e| CliError::io(&path, e))?;
                    written.push(path);
                }
            }
        }
        Ok(written)
    }
}

/// Strips `#` comment lines, leaving the CSV bodies.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// JSON cache under `DIR/cache`, keyed by a hash of the inputs.
#[derive(Clone, Debug)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(out: Option<&Path>) -> Self {
        Self {
            dir: out.map(|d| d.join("cache")),
        }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    /// Returns the cached value for `key`, or computes and stores it.
    pub fn get_or_compute<K, T, F>(&self, kind: &str, key: &K, compute: F) -> Result<T>
    where
        K: Serialize,
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let Some(dir) = &self.dir else {
            return compute();
        };
        let path = dir.join(format!("{kind}-{}.json", &config_hash(key)[..32]));
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str(&text) {
                return Ok(v);
            }
        }
        let v = compute()?;
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let text = serde_json::to_string(&v).map_err(|e| CliError::Cache(e.to_string()))?;
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 0.5, -3.0, 7.077813826484616e-7, 1.0 / 3.0, 123456.7, 2.5e9, -1e-12] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(7.5e-7), "7.5e-7");
    }

    #[test]
    fn grid_values_are_clean() {
        let v = -2.0 + 3.0 * 0.1;
        assert_eq!(num(grid_value(v)), "-1.7");
        assert_eq!(num(grid_value(-1e-12)), "0");
    }

    #[test]
    fn report_renders_meta_and_body() {
        let mut r = Report::new("predict", "ab".into(), vec![1, 2]);
        r.meta("format", "PM-16QAM");
        let mut t = Table::new("predict", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        r.tables.push(t);
        let s = r.render().unwrap();
        assert!(s.starts_with("# dp4d "));
        assert!(s.contains("# seeds: 1,2\n# format: PM-16QAM\n"));
        assert_eq!(csv_body(&s), "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn gnuplot_script_per_group() {
        let mut t = Table::new("n", &["d", "fmt", "y"]).with_plot(Plot {
            x: "d",
            ys: vec!["y"],
            logy: true,
            group: Some("fmt"),
        });
        t.push(vec!["1".into(), "A".into(), "2".into()]);
        t.push(vec!["1".into(), "B".into(), "3".into()]);
        let gp = t.gnuplot("n.csv").unwrap();
        assert!(gp.contains("strcol('fmt') eq 'A'"));
        assert!(gp.contains("strcol('fmt') eq 'B'"));
        assert!(gp.contains("set logscale y"));
    }

    #[test]
    fn cache_round_trips_floats_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(Some(dir.path()));
        let v = vec![0.1 + 0.2, 7.077813826484616e-7, 1.0 / 3.0];
        let a: Vec<f64> = cache.get_or_compute("t", &"k", || Ok(v.clone())).unwrap();
        let b: Vec<f64> = cache
            .get_or_compute("t", &"k", || -> Result<Vec<f64>> { panic!("not cached") })
            .unwrap();
        assert_eq!(a, v);
        assert_eq!(b, v);
    }
}
