//! Result tables and run manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::run::OutagePoint;
use crate::bmas::atlas::{checksum, write_atomic};
use crate::bmas::CandidateTable;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "scheme,snr_db,p_out,ci_lo,ci_hi,frames,backhaul_bits,degraded_count";
pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn results_to_csv(results: &[OutagePoint]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let backhaul = r.backhaul_bits.map_or("unlimited".to_string(), |b| b.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scheme, r.snr_db, r.p_out, r.ci_lo, r.ci_hi, r.frames, backhaul, r.degraded_count
        ));
    }
    s
}

pub fn parse_results_csv(text: &str) -> Result<Vec<OutagePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Parse("results file lacks the expected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", i + 1));
            if f.len() != 8 {
                return Err(bad("column count"));
            }
            let frames: u64 = f[5].parse().map_err(|_| bad("frames"))?;
            let p_out: f64 = f[2].parse().map_err(|_| bad("p_out"))?;
            Ok(OutagePoint {
                scheme: f[0].parse().map_err(|_| bad("scheme"))?,
                snr_db: f[1].parse().map_err(|_| bad("snr_db"))?,
                p_out,
                ci_lo: f[3].parse().map_err(|_| bad("ci_lo"))?,
                ci_hi: f[4].parse().map_err(|_| bad("ci_hi"))?,
                frames,
                outages: (p_out * frames as f64).round() as u64,
                backhaul_bits: match f[6] {
                    "unlimited" => None,
                    b => Some(b.parse().map_err(|_| bad("backhaul_bits"))?),
                },
                degraded_count: f[7].parse().map_err(|_| bad("degraded_count"))?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasRecord {
    pub header: String,
    pub checksum: String,
}

/// Everything needed to replay a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: SimConfig,
    pub atlases: Vec<AtlasRecord>,
}

impl Manifest {
    pub fn new(config: &SimConfig, tables: &[CandidateTable]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.run.seed,
            config: config.clone(),
            atlases: tables
                .iter()
                .map(|t| AtlasRecord {
                    header: t.header().to_string(),
                    checksum: checksum(&t.to_atlas_string()),
                })
                .collect(),
        }
    }
}

/// Writes the results table and manifest into `dir`, each atomically.
pub fn emit_results(
    results: &[OutagePoint],
    config: &SimConfig,
    tables: &[CandidateTable],
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(RESULTS_FILE);
    let manifest = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&Manifest::new(config, tables))
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_atomic(&manifest, format!("{json}\n").as_bytes())?;
    write_atomic(&csv, results_to_csv(results).as_bytes())?;
    Ok((csv, manifest))
}
