use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::archive::read_archive;
use crate::metrics::{build_report, Agreement, EvalRecord, MetricReport};
use crate::{Error, Result};

pub const REPORT: &str = "report.json";
pub const RATIOS: &str = "ratios.csv";
pub const PARETO: &str = "pareto.csv";

/// One (model, method, budget) point of the TTFT-speedup versus OP plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub model: String,
    pub method: String,
    pub budget: Option<f64>,
    pub ttft_speedup: f64,
    pub speedup: f64,
    pub op: f64,
}

pub fn pareto_points(records: &[EvalRecord], report: &MetricReport) -> Vec<ParetoPoint> {
    let mut out = Vec::new();
    for e in &report.op {
        let Some(r) = records.iter().find(|r| r.model == e.model && r.method_key() == e.method) else {
            continue;
        };
        let per_model: Vec<EvalRecord> = records
            .iter()
            .filter(|x| x.model == e.model && x.method_key() == e.method)
            .cloned()
            .collect();
        let Ok(eff) = crate::metrics::efficiency(&per_model) else {
            continue;
        };
        out.push(ParetoPoint {
            model: e.model.clone(),
            method: r.method.clone(),
            budget: r.budget,
            ttft_speedup: eff.ttft,
            speedup: eff.oe,
            op: e.op,
        });
    }
    out
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Computes every metric for the archive in `dir` and writes
/// `report.json`, `ratios.csv` and `pareto.csv` next to it.
pub fn report_archive(dir: &Path, agreement: Agreement) -> Result<MetricReport> {
    let archive = read_archive(dir)?;
    let report = build_report(&archive.records, agreement)?;
    fs::write(dir.join(REPORT), serde_json::to_string_pretty(&report)?)?;
    write_csv(&dir.join(RATIOS), &report.ratios)?;
    write_csv(&dir.join(PARETO), &pareto_points(&archive.records, &report))?;
    Ok(report)
}
