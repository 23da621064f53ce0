//! Overall performance (OP), generalization (OG), loyalty (OL) and
//! efficiency (OE) over per-(method, model, benchmark) results.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Method id of uncompressed baseline rows.
pub const BASELINE: &str = "original";

/// The uncompressed model's result on the same cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub score: f64,
    pub predictions: Vec<String>,
    pub time: f64,
    pub ttft: f64,
    pub decode: f64,
}

/// One (method, model, benchmark) result. Timings are in any consistent
/// unit; the harness uses attention multiply-accumulate counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub model: String,
    pub benchmark: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub score: f64,
    pub predictions: Vec<String>,
    pub time: f64,
    pub ttft: f64,
    pub decode: f64,
    pub baseline: Option<Baseline>,
}

impl EvalRecord {
    /// Method id including the budget, e.g. `snapkv@0.05`.
    pub fn method_key(&self) -> String {
        match self.budget {
            Some(b) => format!("{}@{}", self.method, b),
            None => self.method.clone(),
        }
    }

    pub fn baseline(&self) -> Result<&Baseline> {
        self.baseline.as_ref().ok_or_else(|| Error::MissingBaseline {
            model: self.model.clone(),
            benchmark: self.benchmark.clone(),
        })
    }

    /// EM / EM_base.
    pub fn ratio(&self) -> Result<f64> {
        let base = self.baseline()?;
        if !(base.score > 0.0) {
            return Err(Error::ZeroBaseline {
                model: self.model.clone(),
                benchmark: self.benchmark.clone(),
            });
        }
        Ok(self.score / base.score)
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    s / n as f64
}

/// Mean ratio per benchmark.
fn benchmark_ratios<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        acc.entry(r.benchmark.clone()).or_default().push(r.ratio()?);
    }
    Ok(acc.into_iter().map(|(b, v)| (b, mean(v))).collect())
}

/// sqrt(mean of squared ratios).
pub fn op_from_ratios(ratios: &[f64]) -> f64 {
    (ratios.iter().map(|r| r * r).sum::<f64>() / ratios.len() as f64).sqrt()
}

/// OP of one (model, method) pair; `records` must all share both.
pub fn overall_performance(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Config("no records for overall performance".into()));
    }
    let per: Vec<f64> = benchmark_ratios(records)?.into_values().collect();
    Ok(op_from_ratios(&per))
}

/// Coefficient of variation across benchmarks of the per-benchmark mean
/// ratio (averaged over models first), using the population standard
/// deviation. Lower is more consistent.
pub fn generalization(records: &[EvalRecord]) -> Result<f64> {
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.benchmark.clone(), r.model.clone()))
            .or_default()
            .push(r.ratio()?);
    }
    let mut per_bench: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ((b, _), v) in &cells {
        per_bench.entry(b.as_str()).or_default().push(mean(v.iter().copied()));
    }
    if per_bench.len() < 2 {
        return Err(Error::TooFewBenchmarks(per_bench.len()));
    }
    let grand = mean(cells.values().map(|v| mean(v.iter().copied())));
    if grand == 0.0 {
        return Err(Error::ZeroMean);
    }
    let means: Vec<f64> = per_bench.values().map(|v| mean(v.iter().copied())).collect();
    let mu = mean(means.iter().copied());
    let sigma = mean(means.iter().map(|m| (m - mu).powi(2))).sqrt();
    Ok(sigma / grand)
}

/// Agreement between a compressed and a baseline prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Agreement {
    #[default]
    ExactMatch,
    /// Whitespace-token F1 at or above `threshold`.
    TokenF1 { threshold: f64 },
}

impl Agreement {
    pub fn token_f1() -> Self {
        Agreement::TokenF1 { threshold: 0.5 }
    }

    pub fn agrees(&self, a: &str, b: &str) -> bool {
        match *self {
            Agreement::ExactMatch => a == b,
            Agreement::TokenF1 { threshold } => token_f1(a, b) >= threshold,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Agreement::ExactMatch => "exact_match".into(),
            Agreement::TokenF1 { threshold } => format!("token_f1>={threshold}"),
        }
    }
}

/// F1 of the whitespace-token multisets; two empty strings score 1.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let mut ta: BTreeMap<&str, usize> = BTreeMap::new();
    for t in a.split_whitespace() {
        *ta.entry(t).or_default() += 1;
    }
    let (na, mut nb, mut common) = (a.split_whitespace().count(), 0usize, 0usize);
    for t in b.split_whitespace() {
        nb += 1;
        if let Some(c) = ta.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if na == 0 && nb == 0 {
        return 1.0;
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / nb as f64;
    let r = common as f64 / na as f64;
    2.0 * p * r / (p + r)
}

/// Fraction of paired predictions that agree, pooled over every
/// (benchmark, model, sample).
pub fn loyalty(records: &[EvalRecord], agreement: Agreement) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for r in records {
        let base = r.baseline()?;
        if base.predictions.len() != r.predictions.len() {
            return Err(Error::LengthMismatch(format!(
                "{} on {}/{}: {} predictions vs {} baseline",
                r.method_key(),
                r.model,
                r.benchmark,
                r.predictions.len(),
                base.predictions.len()
            )));
        }
        total += r.predictions.len();
        hits += r
            .predictions
            .iter()
            .zip(&base.predictions)
            .filter(|(p, q)| agreement.agrees(p, q))
            .count();
    }
    if total == 0 {
        return Err(Error::Config("no predictions for loyalty".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Mean speedups over (benchmark, model) cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    /// End-to-end speedup T_base / T.
    pub oe: f64,
    pub ttft: f64,
    pub decode: f64,
}

pub fn efficiency(records: &[EvalRecord]) -> Result<Efficiency> {
    let mut cells: BTreeMap<(String, String), Vec<[f64; 3]>> = BTreeMap::new();
    for r in records {
        let base = r.baseline()?;
        let pairs = [(base.time, r.time), (base.ttft, r.ttft), (base.decode, r.decode)];
        if pairs.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
            return Err(Error::NonPositiveTiming(format!("{} on {}/{}", r.method_key(), r.model, r.benchmark)));
        }
        cells
            .entry((r.benchmark.clone(), r.model.clone()))
            .or_default()
            .push(pairs.map(|(a, b)| a / b));
    }
    if cells.is_empty() {
        return Err(Error::Config("no records for efficiency".into()));
    }
    let cell_means: Vec<[f64; 3]> = cells
        .values()
        .map(|v| [0, 1, 2].map(|k| mean(v.iter().map(|x| x[k]))))
        .collect();
    let [oe, ttft, decode] = [0, 1, 2].map(|k| mean(cell_means.iter().map(|x| x[k])));
    Ok(Efficiency { oe, ttft, decode })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpEntry {
    pub model: String,
    pub method: String,
    pub op: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub budget: Option<f64>,
    /// `None` when fewer than two benchmarks were run or every ratio is 0.
    pub og: Option<f64>,
    pub ol: f64,
    pub oe: f64,
    pub ttft_speedup: f64,
    pub decode_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub model: String,
    pub method: String,
    pub budget: Option<f64>,
    pub benchmark: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub sigma: String,
    pub agreement: String,
    pub timing_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub meta: ReportMeta,
    pub op: Vec<OpEntry>,
    pub methods: Vec<MethodSummary>,
    pub ratios: Vec<RatioRow>,
}

impl MetricReport {
    pub fn op_of(&self, model: &str, method: &str) -> Option<f64> {
        self.op
            .iter()
            .find(|e| e.model == model && e.method == method)
            .map(|e| e.op)
    }

    pub fn method(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Every metric for every method key. Each (model, method) must cover every
/// benchmark its model's baseline covers.
pub fn build_report(records: &[EvalRecord], agreement: Agreement) -> Result<MetricReport> {
    let mut by_method: BTreeMap<String, Vec<EvalRecord>> = BTreeMap::new();
    let mut benchmarks: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method_key()).or_default().push(r.clone());
        benchmarks.entry(r.model.clone()).or_default().insert(r.benchmark.clone());
    }
    let mut op = Vec::new();
    let mut methods = Vec::new();
    let mut ratios = Vec::new();
    for (key, recs) in &by_method {
        let mut by_model: BTreeMap<&str, Vec<EvalRecord>> = BTreeMap::new();
        for r in recs {
            by_model.entry(r.model.as_str()).or_default().push(r.clone());
        }
        for (model, mrecs) in &by_model {
            let per = benchmark_ratios(mrecs.iter())?;
            if let Some(b) = benchmarks[*model].iter().find(|b| !per.contains_key(*b)) {
                return Err(Error::MissingCell {
                    method: key.clone(),
                    model: model.to_string(),
                    benchmark: b.clone(),
                });
            }
            for (b, ratio) in &per {
                ratios.push(RatioRow {
                    model: model.to_string(),
                    method: mrecs[0].method.clone(),
                    budget: mrecs[0].budget,
                    benchmark: b.clone(),
                    ratio: *ratio,
                });
            }
            op.push(OpEntry {
                model: model.to_string(),
                method: key.clone(),
                op: overall_performance(mrecs)?,
            });
        }
        let og = match generalization(recs) {
            Ok(v) => Some(v),
            Err(Error::TooFewBenchmarks(_) | Error::ZeroMean) => None,
            Err(e) => return Err(e),
        };
        let eff = efficiency(recs)?;
        methods.push(MethodSummary {
            method: key.clone(),
            budget: recs[0].budget,
            og,
            ol: loyalty(recs, agreement)?,
            oe: eff.oe,
            ttft_speedup: eff.ttft,
            decode_speedup: eff.decode,
        });
    }
    Ok(MetricReport {
        meta: ReportMeta {
            sigma: "population".into(),
            agreement: agreement.label(),
            timing_unit: "attention_macs".into(),
        },
        op,
        methods,
        ratios,
    })
}
