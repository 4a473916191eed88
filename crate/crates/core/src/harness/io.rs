//! Metrics JSONL, summary JSON and sample CSV files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::Trajectory;
use crate::ensemble::{ParticleEnsemble, PointSet};
use crate::error::{Error, Result};
use crate::harness::fit::LevelStats;

/// One `(N, replicate)` row of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub metric_name: String,
    /// `None` when the run blew up.
    pub value: Option<f64>,
    pub wall_time_s: f64,
    pub blowup: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    #[serde(rename = "N")]
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
}

/// Whole-ensemble draws made by restricted initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionStats {
    pub attempts: usize,
    pub accepted: usize,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub config_hash: String,
    /// Git blob id of the metrics file.
    pub content_version: String,
    pub fit: Option<FitSummary>,
    pub fit_error: Option<String>,
    pub per_n: Vec<LevelStats>,
    pub pass: bool,
    pub criterion: String,
    pub failures: usize,
    pub quota_exceeded: bool,
    pub seeds: Vec<SeedEntry>,
    /// Measured `sup C*` (`null` when unbounded or not applicable).
    pub c_star: Option<f64>,
    pub c_star_status: String,
    pub restricted_init: Option<RejectionStats>,
}

/// Serializes records as one JSON object per line.
pub fn metrics_jsonl(records: &[MetricRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn read_metrics_jsonl(path: &Path) -> Result<Vec<MetricRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Git-style content id with SHA-256: hash of `blob <len>\0<bytes>`.
pub fn content_version(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(summary)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Serialize)]
struct SnapshotLine {
    index: usize,
    time: f64,
    mean_potential: f64,
    second_moment: f64,
    ksd2: Option<f64>,
}

/// One JSON object per snapshot: index, time, mean potential, second moment, KSD².
pub fn trajectory_jsonl(trajectory: &Trajectory) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in &trajectory.snapshots {
        serde_json::to_writer(
            &mut out,
            &SnapshotLine {
                index: s.index,
                time: s.time,
                mean_potential: s.mean_potential,
                second_moment: s.second_moment,
                ksd2: s.ksd2,
            },
        )?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Header `x0,...,x{d-1}`, one particle per row, shortest round-trip decimals.
pub fn write_samples_csv(path: &Path, points: &PointSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..points.dim()).map(|l| format!("x{l}")))?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

pub fn read_samples_csv(path: &Path) -> Result<PointSet> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len();
    let mut data = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rec.len(),
            });
        }
        for field in rec.iter() {
            data.push(field.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("{}: bad number `{field}`", path.display()))
            })?);
        }
        n += 1;
    }
    ParticleEnsemble::new(n, dim, data)
}
