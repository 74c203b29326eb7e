//! Tables, run records and plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::weighted_norms::MeshSpec;

/// Rectangular numeric table written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            // shortest round-trip formatting keeps reruns bitwise identical
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A mesh used by an experiment, tagged with its refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshTag {
    pub label: &'static str,
    pub level: u32,
    pub mesh: MeshSpec,
}

/// Result of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub passed: bool,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub meshes: Vec<MeshTag>,
    pub table: Table,
}

impl Outcome {
    pub fn new(experiment: &str, table: Table) -> Self {
        Outcome {
            experiment: experiment.to_string(),
            passed: true,
            summary: String::new(),
            metrics: BTreeMap::new(),
            meshes: Vec::new(),
            table,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    /// Record a threshold check; any failing check fails the outcome.
    pub fn check(&mut self, name: &str, value: f64, ok: bool) {
        self.metric(name, value);
        if !ok {
            self.passed = false;
            if !self.summary.is_empty() {
                self.summary.push_str("; ");
            }
            let _ = write!(self.summary, "{name} = {value:e} breaches its threshold");
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }
}

/// Persisted summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub passed: bool,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub meshes: Vec<MeshTag>,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
}

/// Hex SHA-256 of the experiment name and its resolved configuration.
pub fn config_hash(experiment: &str, config: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(experiment.as_bytes());
    h.update([0u8]);
    h.update(config.to_string().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `<name>-<hash12>.csv`, `.json` and optionally `.svg` under `dir`.
pub fn persist(
    dir: &Path,
    outcome: &Outcome,
    config: serde_json::Value,
    wall_clock_seconds: f64,
    plot: Option<(&str, &str)>,
) -> Result<RunRecord> {
    fs::create_dir_all(dir)?;
    let hash = config_hash(&outcome.experiment, &config);
    let stem = format!("{}-{}", outcome.experiment, &hash[..12]);
    let csv_path = dir.join(format!("{stem}.csv"));
    outcome.table.write_csv(&csv_path)?;
    let mut files = vec![file_name(&csv_path)];
    if let Some((x, y)) = plot {
        if let (Some(xs), Some(ys)) = (outcome.table.column(x), outcome.table.column(y)) {
            let svg_path = dir.join(format!("{stem}.svg"));
            fs::write(&svg_path, svg_plot(&outcome.experiment, x, y, &xs, &ys))?;
            files.push(file_name(&svg_path));
        }
    }
    let json_path = dir.join(format!("{stem}.json"));
    files.push(file_name(&json_path));
    let record = RunRecord {
        experiment: outcome.experiment.clone(),
        config_hash: hash,
        config,
        passed: outcome.passed,
        summary: outcome.summary.clone(),
        metrics: outcome.metrics.clone(),
        meshes: outcome.meshes.clone(),
        wall_clock_seconds,
        files,
    };
    fs::write(&json_path, serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Scatter-and-line plot of `ys` against `xs` as a standalone SVG.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let (w, h, m) = (480.0, 320.0, 48.0);
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(a, b)| (*a, *b)).collect();
    let range = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
    };
    let (x0, x1) = range(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = range(&mut pts.iter().map(|p| p.1));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{y_label}</text>"#, h / 2.0, h / 2.0);
    for (v, x, y, anchor) in [(x0, sx(x0), h - m + 16.0, "start"), (x1, sx(x1), h - m + 16.0, "end")] {
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#, m - 4.0, y + 4.0);
    }
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#, path.join(" "));
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(*x), sy(*y));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config() {
        let a = serde_json::json!({"kappa": 1.5, "p": 2.0});
        let b = serde_json::json!({"kappa": 1.5, "p": 3.0});
        assert_eq!(config_hash("x", &a), config_hash("x", &a));
        assert_ne!(config_hash("x", &a), config_hash("x", &b));
        assert_ne!(config_hash("x", &a), config_hash("y", &a));
        assert_eq!(config_hash("x", &a).len(), 64);
    }

    #[test]
    fn persisted_files_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["level", "ratio"]);
        t.push(vec![0.0, 1.0 / 3.0]);
        t.push(vec![1.0, 0.1 + 0.2]);
        let o = Outcome::new("demo", t);
        let cfg = serde_json::json!({"a": 1});
        let r1 = persist(dir.path(), &o, cfg.clone(), 0.1, Some(("level", "ratio"))).unwrap();
        let first = fs::read(dir.path().join(&r1.files[0])).unwrap();
        let r2 = persist(dir.path(), &o, cfg, 0.2, None).unwrap();
        assert_eq!(r1.files[0], r2.files[0]);
        assert_eq!(first, fs::read(dir.path().join(&r2.files[0])).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("0.3333333333333333") && text.contains("0.30000000000000004"));
        assert!(fs::read_to_string(dir.path().join(&r1.files[1])).unwrap().starts_with("<svg"));
    }

    #[test]
    fn failing_checks_fail_the_outcome() {
        let mut o = Outcome::new("x", Table::new(&["a"]));
        o.check("good", 0.1, true);
        assert!(o.passed);
        o.check("bad", 2.0, false);
        assert!(!o.passed && o.summary.contains("bad"));
        assert_eq!(o.get("good"), 0.1);
    }
}
