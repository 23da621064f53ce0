use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{GridPoint, RunSpec, Timing};
use crate::kv::KvPolicy;
use crate::metrics::{Baseline, EvalRecord, BASELINE};
use crate::param::{capture, compress_model};
use crate::rng;
use crate::sim::{make_task, GenerationResult, KVCacheState, Model, Prefill, Task, TaskKind, TaskParams};
use crate::{Error, Result};

/// A grid cell that produced no record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub model: String,
    pub benchmark: String,
    pub method: String,
    pub budget: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<CellFailure>,
    pub log: Vec<String>,
}

/// Seed of sample `index` of benchmark `kind`.
pub fn task_seed(master: u64, kind: TaskKind, index: usize) -> u64 {
    rng::derive(rng::derive(master, kind as u64 + 1), index as u64)
}

pub fn task_params(spec: &RunSpec, model: &Model) -> TaskParams {
    TaskParams {
        visual_len: spec.suite.visual_len,
        text_len: spec.suite.text_len,
        hidden: model.config().hidden(),
        vocab_size: model.config().vocab_size,
        span_len: spec.suite.span_len,
        marks: spec.suite.marks,
    }
}

pub fn render(output: &[u32]) -> String {
    output.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
struct Sample {
    score: f64,
    prediction: String,
    gen: GenerationResult,
    /// Seconds to first token and seconds of decoding.
    wall: [f64; 2],
}

impl Sample {
    fn new(task: &Task, (gen, wall): (GenerationResult, [f64; 2])) -> Self {
        Self {
            score: task.answer.score(&gen.output),
            prediction: render(&gen.output),
            gen,
            wall,
        }
    }
}

fn timed_decode(model: &Model, cache: &mut KVCacheState, steps: usize, start: Instant) -> Result<(GenerationResult, [f64; 2])> {
    let ttft = start.elapsed().as_secs_f64();
    let t = Instant::now();
    let gen = model.decode(cache, steps)?;
    Ok((gen, [ttft, t.elapsed().as_secs_f64()]))
}

/// Model-side state prepared once per model.
enum Prepared {
    TokenPrune(crate::token_prune::TokenPruneSpec),
    Kv(KvPolicy),
    Param(Model),
    Failed(String),
}

fn prepare(model: &Model, spec: &RunSpec, grid: &[GridPoint], log: &mut Vec<String>) -> Vec<Prepared> {
    let needs_calib = grid
        .iter()
        .any(|p| matches!(p, GridPoint::Param(s) if s.needs_calibration()));
    let calib = if needs_calib {
        Some(capture(model, &spec.calibration).map_err(|e| e.to_string()))
    } else {
        None
    };
    grid.iter()
        .map(|p| match p {
            GridPoint::TokenPrune(s) => Prepared::TokenPrune(s.clone()),
            GridPoint::Kv(s) => match KvPolicy::from_spec(s) {
                Ok(pol) => Prepared::Kv(pol),
                Err(e) => Prepared::Failed(e.to_string()),
            },
            GridPoint::Param(s) => {
                let cal = match &calib {
                    Some(Ok(c)) => Some(c),
                    Some(Err(e)) if s.needs_calibration() => return Prepared::Failed(format!("calibration: {e}")),
                    _ => None,
                };
                match compress_model(model, s, cal).and_then(|c| {
                    log.push(format!("compressed {} (density {:.4})", c.method, c.density()));
                    c.apply_to(model)
                }) {
                    Ok(m) => Prepared::Param(m),
                    Err(e) => Prepared::Failed(e.to_string()),
                }
            }
        })
        .collect()
}

/// `base_secs` is the wall time of the shared uncompressed prefill, which KV
/// policies reuse.
fn run_point(
    model: &Model,
    point: &Prepared,
    task: &Task,
    base: &Prefill,
    base_secs: f64,
    steps: usize,
) -> Result<(GenerationResult, [f64; 2])> {
    let start = Instant::now();
    match point {
        Prepared::TokenPrune(s) => {
            let (mut pf, _) = s.run(model, &task.sequence)?;
            timed_decode(model, &mut pf.cache, steps, start)
        }
        Prepared::Kv(pol) => {
            let mut cache = base.cache.clone();
            pol.compress(&base.trace, &mut cache)?;
            let (gen, [ttft, decode]) = timed_decode(model, &mut cache, steps, start)?;
            Ok((gen, [ttft + base_secs, decode]))
        }
        Prepared::Param(m) => {
            let mut pf = m.prefill(&task.sequence)?;
            timed_decode(m, &mut pf.cache, steps, start)
        }
        Prepared::Failed(e) => Err(Error::Config(e.clone())),
    }
}

type SampleRow = (Sample, Vec<std::result::Result<Sample, String>>);

fn eval_sample(
    model: &Model,
    prepared: &[Prepared],
    spec: &RunSpec,
    kind: TaskKind,
    params: &TaskParams,
    index: usize,
) -> Result<SampleRow> {
    let task = make_task(kind, params, task_seed(spec.seed, kind, index))?;
    let start = Instant::now();
    let base = model.prefill(&task.sequence)?;
    let mut cache = base.cache.clone();
    let base_gen = timed_decode(model, &mut cache, spec.decode_steps, start)?;
    let base_secs = base_gen.1[0];
    let rows = prepared
        .iter()
        .map(|p| {
            run_point(model, p, &task, &base, base_secs, spec.decode_steps)
                .map(|g| Sample::new(&task, g))
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok((Sample::new(&task, base_gen), rows))
}

struct Totals {
    score: f64,
    predictions: Vec<String>,
    time: f64,
    ttft: f64,
    decode: f64,
}

fn totals<'a>(samples: impl Iterator<Item = &'a Sample>, timing: Timing) -> Totals {
    let mut t = Totals {
        score: 0.0,
        predictions: Vec::new(),
        time: 0.0,
        ttft: 0.0,
        decode: 0.0,
    };
    let mut n = 0usize;
    for s in samples {
        n += 1;
        t.score += s.score;
        t.predictions.push(s.prediction.clone());
        let [ttft, decode] = match timing {
            Timing::Counters => [s.gen.ttft_ops() as f64, s.gen.decode_ops() as f64],
            Timing::WallClock => s.wall,
        };
        t.time += ttft + decode;
        t.ttft += ttft;
        t.decode += decode;
    }
    t.score /= n as f64;
    t
}

fn record(method: String, model: &str, benchmark: &str, budget: Option<f64>, t: Totals, base: &Baseline) -> EvalRecord {
    EvalRecord {
        method,
        model: model.into(),
        benchmark: benchmark.into(),
        budget,
        score: t.score,
        predictions: t.predictions,
        time: t.time,
        ttft: t.ttft,
        decode: t.decode,
        baseline: Some(base.clone()),
    }
}

/// Executes the full grid. Samples run in parallel; records come out in a
/// fixed order (model, benchmark, baseline then grid order), so the stream
/// does not depend on the thread count.
pub fn run(spec: &RunSpec) -> Result<RunOutput> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_inner(spec))
}

fn run_inner(spec: &RunSpec) -> Result<RunOutput> {
    let grid = spec.grid();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut log = Vec::new();
    for entry in &spec.models {
        let model = Model::build(entry.config.clone())?;
        log.push(format!("model {} weights {:016x}", entry.name, model.weight_checksum()));
        let prepared = prepare(&model, spec, &grid, &mut log);
        let params = task_params(spec, &model);
        for &kind in &spec.suite.kinds {
            let bench = kind.to_string();
            let rows: Vec<Result<SampleRow>> = (0..spec.suite.samples)
                .into_par_iter()
                .map(|i| eval_sample(&model, &prepared, spec, kind, &params, i))
                .collect();
            let rows = match rows.into_iter().collect::<Result<Vec<_>>>() {
                Ok(r) => r,
                Err(e) => {
                    log.push(format!("{} / {bench}: baseline failed: {e}", entry.name));
                    for p in std::iter::once(None).chain(grid.iter().map(Some)) {
                        failures.push(CellFailure {
                            model: entry.name.clone(),
                            benchmark: bench.clone(),
                            method: p.map_or_else(|| BASELINE.to_string(), GridPoint::label),
                            budget: p.and_then(GridPoint::budget),
                            error: e.to_string(),
                        });
                    }
                    continue;
                }
            };
            let bt = totals(rows.iter().map(|(b, _)| b), spec.timing);
            let base = Baseline {
                score: bt.score,
                predictions: bt.predictions.clone(),
                time: bt.time,
                ttft: bt.ttft,
                decode: bt.decode,
            };
            records.push(record(BASELINE.into(), &entry.name, &bench, None, bt, &base));
            log.push(format!("{} / {bench} / {BASELINE}: score {:.4}", entry.name, base.score));
            for (pi, point) in grid.iter().enumerate() {
                let first_err = rows
                    .iter()
                    .enumerate()
                    .find_map(|(i, (_, r))| r[pi].as_ref().err().map(|e| (i, e)));
                if let Some((i, e)) = first_err {
                    log.push(format!("{} / {bench} / {}: FAILED at sample {i}: {e}", entry.name, point.label()));
                    failures.push(CellFailure {
                        model: entry.name.clone(),
                        benchmark: bench.clone(),
                        method: point.label(),
                        budget: point.budget(),
                        error: e.clone(),
                    });
                    continue;
                }
                let t = totals(rows.iter().map(|(_, r)| r[pi].as_ref().expect("checked")), spec.timing);
                log.push(format!(
                    "{} / {bench} / {}{}: score {:.4}",
                    entry.name,
                    point.label(),
                    point.budget().map(|b| format!("@{b}")).unwrap_or_default(),
                    t.score
                ));
                records.push(record(point.label(), &entry.name, &bench, point.budget(), t, &base));
            }
        }
    }
    Ok(RunOutput { records, failures, log })
}
