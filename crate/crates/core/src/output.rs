//! CSV and JSON artifacts: sweep fields, density-of-states histograms,
//! trajectory snapshots and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::lattice::{DoSHistogram, SweepPoint};
use crate::optimize::Snapshot;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header line followed by one line per row.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn sweep_csv(field: &[SweepPoint]) -> String {
    let rows: Vec<Vec<String>> = field.iter().map(|p| vec![fmt_f64(p.a), fmt_f64(p.b), fmt_f64(p.value)]).collect();
    csv_string(&["a", "b", "value"], &rows)
}

pub fn dos_csv(hist: &DoSHistogram) -> String {
    let rows: Vec<Vec<String>> = hist.centers().iter().zip(hist.mass()).map(|(c, m)| vec![fmt_f64(*c), fmt_f64(m)]).collect();
    csv_string(&["bin_center", "mass"], &rows)
}

pub fn emit_contour(path: &Path, field: &[SweepPoint]) -> Result<()> {
    Ok(fs::write(path, sweep_csv(field))?)
}

pub fn emit_dos(path: &Path, hist: &DoSHistogram) -> Result<()> {
    Ok(fs::write(path, dos_csv(hist))?)
}

/// Writes `run{run}_iter{k}.json` for every snapshot into `dir`.
pub fn emit_traj(dir: &Path, run: usize, snapshots: &[Snapshot]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    snapshots
        .iter()
        .map(|s| {
            let path = dir.join(format!("run{run}_iter{}.json", s.iteration));
            fs::write(&path, s.config.to_json())?;
            Ok(path)
        })
        .collect()
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub status: String,
    pub exit_code: i32,
    pub failure_stage: Option<String>,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

/// Renders `key = value` lines for a flat JSON object.
pub fn summary_lines(summary: &serde_json::Value) -> String {
    let mut s = String::new();
    if let Some(map) = summary.as_object() {
        for (k, v) in map {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    s
}
