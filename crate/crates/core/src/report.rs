//! Result tables, JSON summaries, run manifests and plot series.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// One CSV line. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub experiment_id: String,
    pub command: String,
    pub term: usize,
    pub parameter: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub truth_re: Option<f64>,
    pub truth_im: Option<f64>,
    pub error: Option<f64>,
    pub variance: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
}

impl ResultRow {
    pub fn new(experiment_id: &str, command: &str, term: usize, parameter: f64, value: Complex64, seed: u64) -> Self {
        ResultRow {
            schema_version: SCHEMA_VERSION,
            experiment_id: experiment_id.to_string(),
            command: command.to_string(),
            term,
            parameter,
            value_re: value.re,
            value_im: value.im,
            truth_re: None,
            truth_im: None,
            error: None,
            variance: None,
            ci_half_width: None,
            seed,
            wall_time_s: None,
        }
    }

    pub fn truth(mut self, truth: Complex64) -> Self {
        self.truth_re = Some(truth.re);
        self.truth_im = Some(truth.im);
        self
    }

    pub fn error(mut self, e: f64) -> Self {
        self.error = Some(e);
        self
    }

    pub fn variance(mut self, v: f64) -> Self {
        self.variance = Some(v);
        self
    }

    pub fn ci(mut self, h: f64) -> Self {
        self.ci_half_width = Some(h);
        self
    }
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "schema_version",
            "experiment_id",
            "command",
            "term",
            "parameter",
            "value_re",
            "value_im",
            "truth_re",
            "truth_im",
            "error",
            "variance",
            "ci_half_width",
            "seed",
            "wall_time_s",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment_id: String,
    pub command: String,
    pub config_sha256: String,
    pub config: String,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    pub code_version: String,
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

/// A whitespace-separated series file with `#` header lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub header: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotSeries {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        PlotSeries {
            name: name.to_string(),
            header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn note(mut self, line: impl Into<String>) -> Self {
        self.header.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for h in &self.header {
            s.push_str(&format!("# {h}\n"));
        }
        s.push_str(&format!("# {}\n", self.columns.join(" ")));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Writes each non-empty series as `plot_<name>.dat`; empty ones become warnings.
pub fn emit_plot_data(dir: &Path, series: &[PlotSeries]) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for s in series {
        if s.rows.is_empty() {
            warnings.push(format!("{} series is empty; plot_{}.dat not written", s.name, s.name));
            continue;
        }
        let path = dir.join(format!("plot_{}.dat", s.name));
        let mut f = fs::File::create(&path)?;
        f.write_all(s.render().as_bytes())?;
        files.push(path);
    }
    Ok((files, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let row = ResultRow::new("abc", "recover", 1, 48.0, Complex64::new(1.5, -0.25), 9)
            .truth(Complex64::new(1.0, 0.0))
            .error(0.5);
        write_csv(&p, &[row]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "schema_version,experiment_id,command,term,parameter,value_re,value_im,truth_re,truth_im,error,variance,ci_half_width,seed,wall_time_s"
        );
        assert_eq!(lines.next().unwrap(), "1,abc,recover,1,48.0,1.5,-0.25,1.0,0.0,0.5,,,9,");
        write_csv(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 1);
    }

    #[test]
    fn empty_series_is_skipped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let mut dev = PlotSeries::new("deviation", &["T", "p", "half_width"]);
        dev.push(vec![8.0, 0.5, 0.01]);
        let empty = PlotSeries::new("trajectory", &["N", "error", "tube"]);
        let (files, warnings) = emit_plot_data(dir.path(), &[dev, empty]).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(!dir.path().join("plot_trajectory.dat").exists());
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().last().unwrap().split(' ').count(), 3);
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
