//! CSV emission and the run manifest written next to it.

use std::io::Write;
use std::path::{Path, PathBuf};

use fri_core::estimators::{ResultRow, CSV_COLUMNS};
use serde::Serialize;

use crate::config::{config_hash, ExperimentConfig};

pub const SEEDING_RULE: &str =
    "trial i of stream key k draws from ChaCha8 seeded with splitmix64(seed ^ splitmix64(k)), stream i; shard s covers trials [s*ceil(n/shards), (s+1)*ceil(n/shards))";

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ShardRange {
    pub shard: usize,
    pub first_trial: u64,
    pub end_trial: u64,
    pub complete: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub status: String,
    pub rows: usize,
    pub seeding: String,
    pub shards: Vec<ShardRange>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, wall_clock_seconds: f64, status: &str, rows: usize) -> Self {
        let per = cfg.trials.div_ceil(cfg.shards.max(1) as u64);
        let complete = status == "complete";
        let shards = (0..cfg.shards)
            .map(|s| ShardRange {
                shard: s,
                first_trial: (s as u64 * per).min(cfg.trials),
                end_trial: ((s as u64 + 1) * per).min(cfg.trials),
                complete,
            })
            .collect();
        RunManifest {
            config_hash: config_hash(cfg),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds,
            status: status.to_string(),
            rows,
            seeding: SEEDING_RULE.to_string(),
            shards,
            config: cfg.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

/// Checks a results CSV against the schema: header, column count, numeric
/// fields, probability bounds and `key=value` extras.
pub fn lint_csv(text: &str) -> Result<usize, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(format!("header {header:?} differs from the schema"));
    }
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("row {i}: {e}"))?;
        let row: ResultRow = rec.deserialize(Some(&header)).map_err(|e| format!("row {i}: {e}"))?;
        if row.experiment.is_empty() {
            return Err(format!("row {i}: empty experiment"));
        }
        if row.successes > row.trials {
            return Err(format!("row {i}: successes exceed trials"));
        }
        let probs = [row.p_hat, row.ci_low, row.ci_high];
        if row.trials > 0 && probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(format!("row {i}: probability outside [0, 1]"));
        }
        if row.trials > 0 && !(row.ci_low <= row.p_hat && row.p_hat <= row.ci_high) {
            return Err(format!("row {i}: p_hat outside its interval"));
        }
        if !row.extra.is_empty() && row.extra.split(';').any(|kv| kv.split_once('=').is_none_or(|(k, _)| k.is_empty())) {
            return Err(format!("row {i}: malformed extra {:?}", row.extra));
        }
        n += 1;
    }
    Ok(n)
}
