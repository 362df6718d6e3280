//! CSV tables (RFC 4180, round-trip doubles) and JSON reports.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::format_f64;
use crate::error::{Error, Result};

use super::experiment::{Aggregate, PowerRow, QqRow, Record};
use super::graph::GraphEstimate;
use super::subsample::{PairVariance, SubsampleSummary};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// CSV output shared by every table: one header, one row per item.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn write_csv<W: Write, T: CsvRow>(w: W, rows: &[T]) -> Result<()> {
    write_csv_with(w, &[], rows)
}

/// Like [`write_csv`] with constant leading columns.
pub fn write_csv_with<W: Write, T: CsvRow>(w: W, lead: &[(&str, String)], rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = lead.iter().map(|(k, _)| *k).chain(T::HEADER.iter().copied()).collect();
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let fields: Vec<String> = lead.iter().map(|(_, v)| v.clone()).chain(r.fields()).collect();
        out.write_record(&fields).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string<T: CsvRow>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_csv_file<T: CsvRow>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value).map_err(|e| Error::Io(e.to_string()))
}

fn f(v: f64) -> String {
    format_f64(v)
}

impl CsvRow for Record {
    const HEADER: &'static [&'static str] = &[
        "replication", "seed", "estimator", "edge", "a", "b", "truth", "omega_hat", "s_ab", "z",
        "p_value", "ci_lo", "ci_hi", "width", "covered", "rejected", "warnings", "error",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.replication.to_string(),
            self.seed.to_string(),
            self.estimator.to_string(),
            self.edge.clone(),
            self.a.to_string(),
            self.b.to_string(),
            f(self.truth),
            f(self.omega_hat),
            f(self.s_ab),
            f(self.z),
            f(self.p_value),
            f(self.ci_lo),
            f(self.ci_hi),
            f(self.width),
            self.covered.to_string(),
            self.rejected.to_string(),
            self.warnings.labels(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// A power-run record tagged with its `rho`.
pub struct PowerRecord<'a> {
    pub rho: f64,
    pub record: &'a Record,
}

impl CsvRow for PowerRecord<'_> {
    const HEADER: &'static [&'static str] = &[
        "rho", "replication", "seed", "estimator", "edge", "a", "b", "truth", "omega_hat", "s_ab",
        "z", "p_value", "ci_lo", "ci_hi", "width", "covered", "rejected", "warnings", "error",
    ];
    fn fields(&self) -> Vec<String> {
        let mut v = vec![f(self.rho)];
        v.extend(self.record.fields());
        v
    }
}

impl CsvRow for Aggregate {
    const HEADER: &'static [&'static str] = &[
        "estimator", "edge", "a", "b", "truth", "replications", "used", "excluded", "covered",
        "coverage", "mean_width", "rejections", "rejection_rate", "mean_studentized",
        "var_studentized",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.estimator.to_string(),
            self.edge.clone(),
            self.a.to_string(),
            self.b.to_string(),
            f(self.truth),
            self.replications.to_string(),
            self.used.to_string(),
            self.excluded.to_string(),
            self.covered.to_string(),
            f(self.coverage),
            f(self.mean_width),
            self.rejections.to_string(),
            f(self.rejection_rate),
            f(self.mean_studentized),
            f(self.var_studentized),
        ]
    }
}

impl CsvRow for QqRow {
    const HEADER: &'static [&'static str] =
        &["estimator", "edge", "rank", "studentized", "normal_quantile"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.estimator.to_string(),
            self.edge.clone(),
            self.rank.to_string(),
            f(self.studentized),
            f(self.normal_quantile),
        ]
    }
}

impl CsvRow for PowerRow {
    const HEADER: &'static [&'static str] =
        &["rho", "estimator", "truth", "replications", "used", "rejections", "power"];
    fn fields(&self) -> Vec<String> {
        vec![
            f(self.rho),
            self.estimator.to_string(),
            f(self.truth),
            self.replications.to_string(),
            self.used.to_string(),
            self.rejections.to_string(),
            f(self.power),
        ]
    }
}

impl CsvRow for PairVariance {
    const HEADER: &'static [&'static str] =
        &["estimator", "a", "b", "used", "mean_z", "sample_var", "band_proportion"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.estimator.to_string(),
            self.a.to_string(),
            self.b.to_string(),
            self.used.to_string(),
            f(self.mean_z),
            f(self.sample_var),
            f(self.band_proportion),
        ]
    }
}

impl CsvRow for SubsampleSummary {
    const HEADER: &'static [&'static str] = &[
        "estimator", "pairs", "pairs_used", "mean_sample_var", "mean_band_proportion",
        "failed_fits",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.estimator.to_string(),
            self.pairs.to_string(),
            self.pairs_used.to_string(),
            f(self.mean_sample_var),
            f(self.mean_band_proportion),
            self.failed_fits.to_string(),
        ]
    }
}

impl CsvRow for super::graph::PairResult {
    const HEADER: &'static [&'static str] =
        &["a", "b", "omega_hat", "s_ab", "z", "p_value", "warnings", "error"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.a.to_string(),
            self.b.to_string(),
            f(self.omega_hat),
            f(self.s_ab),
            f(self.z),
            f(self.p_value),
            self.warnings.labels(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Thresholded edge list: one row per (threshold, edge).
pub fn write_edge_list<W: Write>(w: W, g: &GraphEstimate) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["threshold", "a", "b"]).map_err(csv_err)?;
    for (t, edges) in g.thresholds.iter().zip(&g.edges) {
        for (a, b) in edges {
            out.write_record([f(*t), a.to_string(), b.to_string()]).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}
