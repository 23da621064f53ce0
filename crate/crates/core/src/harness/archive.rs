//! On-disk results archive: `records.jsonl`, `meta.json`, `spec.toml` and
//! `run.log` in one directory.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::run::{CellFailure, RunOutput};
use super::spec::RunSpec;
use crate::metrics::EvalRecord;
use crate::{Error, Result};

pub const RECORDS: &str = "records.jsonl";
pub const META: &str = "meta.json";
pub const SPEC: &str = "spec.toml";
pub const LOG: &str = "run.log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub tool: String,
    pub version: String,
    pub spec_hash: String,
    pub seed: u64,
    pub calibration_seed: u64,
    pub records: usize,
    pub failures: Vec<CellFailure>,
    pub created_unix: u64,
}

/// Writes a run into `dir`, creating it. Existing archive files are
/// replaced.
pub fn write_archive(dir: &Path, spec: &RunSpec, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(RECORDS))?);
    for r in &out.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    fs::write(dir.join(SPEC), spec.to_toml()?)?;
    let meta = ArchiveMeta {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec_hash: spec.hash()?,
        seed: spec.seed,
        calibration_seed: spec.calibration.seed,
        records: out.records.len(),
        failures: out.failures.clone(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    fs::write(dir.join(META), serde_json::to_string_pretty(&meta)?)?;
    fs::write(dir.join(LOG), out.log.join("\n") + "\n")?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

/// A loaded archive. The stored spec is re-hashed and checked against the
/// metadata.
#[derive(Debug, Clone)]
pub struct Archive {
    pub dir: PathBuf,
    pub meta: ArchiveMeta,
    pub spec: RunSpec,
    pub records: Vec<EvalRecord>,
}

pub fn read_archive(dir: &Path) -> Result<Archive> {
    let meta: ArchiveMeta = serde_json::from_str(&fs::read_to_string(dir.join(META))?)?;
    let spec = RunSpec::load(&dir.join(SPEC))?;
    if spec.hash()? != meta.spec_hash {
        return Err(Error::Format {
            path: dir.join(SPEC),
            reason: "spec hash does not match meta.json".into(),
        });
    }
    let records = read_records(&dir.join(RECORDS))?;
    if records.len() != meta.records {
        return Err(Error::Format {
            path: dir.join(RECORDS),
            reason: format!("{} records, meta.json says {}", records.len(), meta.records),
        });
    }
    Ok(Archive {
        dir: dir.to_path_buf(),
        meta,
        spec,
        records,
    })
}
