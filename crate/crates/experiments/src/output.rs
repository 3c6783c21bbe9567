//! CSV artifacts written by the pipeline.
//!
//! Floats are written in shortest round-trip exponent form so reruns produce
//! byte-identical files.

use std::fs::File;
use std::path::Path;

use bifi_core::{BiFiBasis, StatField};

use crate::error::{io_err, ExpError, ExpResult};

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn writer(path: &Path) -> ExpResult<csv::Writer<File>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn reader(path: &Path) -> ExpResult<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::Reader::from_reader(file))
}

fn parse(path: &Path, s: &str) -> ExpResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| ExpError::Config(format!("{}: bad number '{s}'", path.display())))
}

fn field_header(labels: &[&str]) -> Vec<String> {
    let mut h = Vec::new();
    for l in labels {
        h.push(format!("mean_{l}"));
        h.push(format!("std_{l}"));
    }
    h
}

fn field_row(stat: &StatField, n_cells: usize, i: usize, nc: usize) -> Vec<String> {
    (0..nc)
        .flat_map(|c| {
            let k = c * n_cells + i;
            [num(stat.mean[k]), num(stat.std[k])]
        })
        .collect()
}

/// Writes mean and standard deviation per compartment, one row per cell.
pub fn write_fields(path: &Path, xs: &[f64], labels: &[&str], stat: &StatField) -> ExpResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["x".to_string()];
    header.extend(field_header(labels));
    w.write_record(&header)?;
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![num(x)];
        row.extend(field_row(stat, xs.len(), i, labels.len()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a file from [`write_fields`] back into a compartment-major field.
pub fn read_fields(path: &Path, labels: &[&str]) -> ExpResult<StatField> {
    let rows = read_rows(path, 1 + 2 * labels.len())?;
    Ok(unpack(&rows, 1, labels.len()))
}

fn read_rows(path: &Path, width: usize) -> ExpResult<Vec<Vec<f64>>> {
    let mut r = reader(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(ExpError::Config(format!(
                "{}: expected {width} columns, found {}",
                path.display(),
                rec.len()
            )));
        }
        rows.push(rec.iter().map(|s| parse(path, s)).collect::<ExpResult<Vec<_>>>()?);
    }
    Ok(rows)
}

fn unpack(rows: &[Vec<f64>], skip: usize, nc: usize) -> StatField {
    let n = rows.len();
    let mut mean = vec![0.0; nc * n];
    let mut std = vec![0.0; nc * n];
    for (i, row) in rows.iter().enumerate() {
        for c in 0..nc {
            mean[c * n + i] = row[skip + 2 * c];
            std[c * n + i] = row[skip + 2 * c + 1];
        }
    }
    StatField { mean, std }
}

/// Bi-fidelity fields for every basis size, long format with a leading `n`.
pub fn write_bf_decay(path: &Path, xs: &[f64], labels: &[&str], stats: &[StatField]) -> ExpResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["n".to_string(), "x".to_string()];
    header.extend(field_header(labels));
    w.write_record(&header)?;
    for (k, stat) in stats.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let mut row = vec![(k + 1).to_string(), num(x)];
            row.extend(field_row(stat, xs.len(), i, labels.len()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_bf_decay(path: &Path, labels: &[&str]) -> ExpResult<Vec<StatField>> {
    let rows = read_rows(path, 2 + 2 * labels.len())?;
    let mut out: Vec<Vec<Vec<f64>>> = Vec::new();
    for row in rows {
        let k = row[0] as usize;
        if k == 0 || k > out.len() + 1 {
            return Err(ExpError::Config(format!("{}: basis sizes out of order", path.display())));
        }
        if k > out.len() {
            out.push(Vec::new());
        }
        out[k - 1].push(row);
    }
    Ok(out.iter().map(|rows| unpack(rows, 2, labels.len())).collect())
}

/// Selected parameter points in greedy order.
pub fn write_selected(path: &Path, basis: &BiFiBasis) -> ExpResult<()> {
    let mut w = writer(path)?;
    let dim = basis.samples.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string(), "index".to_string()];
    header.extend((1..=dim).map(|d| format!("z{d}")));
    header.push("distance".into());
    w.write_record(&header)?;
    for k in 0..basis.n() {
        let mut row = vec![k.to_string(), basis.selected_indices[k].to_string()];
        row.extend(basis.samples[k].iter().map(|v| num(*v)));
        row.push(num(basis.selection_distances[k]));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Relative L2 errors against the high-fidelity reference for one basis
/// size. Entries are per compartment followed by the concatenated state.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub bf_mean: Option<Vec<f64>>,
    pub bf_std: Option<Vec<f64>>,
    pub lf_mean: Vec<f64>,
    pub lf_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    /// Compartment labels plus `all`.
    pub labels: Vec<String>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn write_csv(&self, path: &Path) -> ExpResult<()> {
        let mut w = writer(path)?;
        let with_bf = self.rows.iter().any(|r| r.bf_mean.is_some());
        let mut header = vec!["n".to_string()];
        let groups: &[&str] = if with_bf {
            &["bf_mean", "bf_std", "lf_mean", "lf_std"]
        } else {
            &["lf_mean", "lf_std"]
        };
        for g in groups {
            header.extend(self.labels.iter().map(|l| format!("{g}_{l}")));
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut row = vec![r.n.to_string()];
            if with_bf {
                let blank = vec![f64::NAN; self.labels.len()];
                row.extend(r.bf_mean.as_ref().unwrap_or(&blank).iter().map(|v| num(*v)));
                row.extend(r.bf_std.as_ref().unwrap_or(&blank).iter().map(|v| num(*v)));
            }
            row.extend(r.lf_mean.iter().map(|v| num(*v)));
            row.extend(r.lf_std.iter().map(|v| num(*v)));
            w.write_record(&row)?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }

    /// Human-readable summary using the concatenated-state errors.
    pub fn summary(&self) -> String {
        let last = self.labels.len() - 1;
        let mut s = format!("{:>4} {:>12} {:>12} {:>12} {:>12}\n", "n", "bf_mean", "bf_std", "lf_mean", "lf_std");
        for r in &self.rows {
            let bf = |v: &Option<Vec<f64>>| v.as_ref().map_or("-".to_string(), |v| format!("{:.3e}", v[last]));
            s += &format!(
                "{:>4} {:>12} {:>12} {:>12.3e} {:>12.3e}\n",
                r.n,
                bf(&r.bf_mean),
                bf(&r.bf_std),
                r.lf_mean[last],
                r.lf_std[last]
            );
        }
        s
    }
}

/// Wall-clock time of one pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
    pub runs: usize,
}

/// Stage timings followed by per-run costs and their high/low ratio when
/// both are available.
pub fn write_timing(path: &Path, timings: &[Timing]) -> ExpResult<()> {
    let mut w = writer(path)?;
    w.write_record(["stage", "seconds", "runs"])?;
    for t in timings {
        w.write_record([t.stage.clone(), num(t.seconds), t.runs.to_string()])?;
    }
    if let Some(r) = cost_ratio(timings) {
        w.write_record(["hf_over_lf_per_run".to_string(), num(r), String::new()])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Mean seconds per run over all stages whose name starts with `prefix`.
pub fn per_run(timings: &[Timing], prefix: &str) -> Option<f64> {
    let (s, n) = timings
        .iter()
        .filter(|t| t.stage.starts_with(prefix) && t.runs > 0)
        .fold((0.0, 0), |(s, n), t| (s + t.seconds, n + t.runs));
    (n > 0).then(|| s / n as f64)
}

pub fn cost_ratio(timings: &[Timing]) -> Option<f64> {
    Some(per_run(timings, "hf_")? / per_run(timings, "lf_")?)
}
