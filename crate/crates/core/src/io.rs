//! Result files: CSV for tables, JSON for structured results.
//!
//! Every CSV carries a header row whose numeric columns end in a unit suffix
//! (`_GHz`, `_ns`, `_rad`) or are dimensionless probabilities and counts.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cz::ScanResult;
use crate::xeb::XebRecord;
use crate::Result;

/// Creates `dir` (and parents) and opens `dir/name` for buffered writing.
pub fn create_in(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(input)?)
}

/// `delta_GHz, best_error, iterations_used, collision_flag`, one row per Δ.
pub fn write_scan_csv<W: Write>(scan: &ScanResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta_GHz", "best_error", "iterations_used", "collision_flag"])?;
    for p in &scan.points {
        w.write_record([
            p.delta.to_string(),
            p.best_error.to_string(),
            p.iterations.to_string(),
            u8::from(p.collision).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Best-so-far CZ error per Nelder–Mead iteration.
pub fn write_iteration_csv<W: Write>(trace: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "best_error"])?;
    for (i, e) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the XEB summary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XebSummaryRow {
    pub cycles: usize,
    pub alpha: f64,
    pub sqrt_purity: f64,
    /// Mean leak metric, present when three-level readout was recorded.
    pub leak: Option<f64>,
}

/// `m_cycles, alpha, sqrt_purity, leak`; `leak` is empty when unavailable.
pub fn write_xeb_csv<W: Write>(rows: &[XebSummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m_cycles", "alpha", "sqrt_purity", "leak"])?;
    for r in rows {
        w.write_record([
            r.cycles.to_string(),
            r.alpha.to_string(),
            r.sqrt_purity.to_string(),
            r.leak.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records<W: Write>(records: &[XebRecord], out: W) -> Result<()> {
    write_json(&records, out)
}

pub fn read_records(path: &Path) -> Result<Vec<XebRecord>> {
    read_json(std::io::BufReader::new(File::open(path)?))
}

/// Probability vector as `outcome, probability` rows.
pub fn write_distribution_csv<W: Write>(labels: &[String], p: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outcome", "probability"])?;
    for (l, v) in labels.iter().zip(p) {
        w.write_record([l.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
