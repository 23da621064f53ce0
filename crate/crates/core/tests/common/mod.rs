#![allow(dead_code)]

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlcbench::metrics::{Baseline, EvalRecord};
use vlcbench::param::{CalibrationSet, WeightTensor};
use vlcbench::sim::{AttentionMatrix, AttentionTrace, LayerTrace, ModelConfig, Spans};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Benchmarks of the LLaVA-OneVision-7B reference block, in column order.
pub const REFERENCE_BENCHMARKS: [&str; 15] = [
    "DocVQA", "ChartQA", "TextVQA", "OCRBench", "AI2D", "GQA", "MMMU", "MME", "RealworldQA", "MMStar",
    "MathVista", "LLaVA-Wilder", "MMBench", "MMVet", "ImageDC",
];

pub const REFERENCE_ORIGINAL: [f64; 15] = [
    87.0, 80.00, 74.79, 595.0, 89.96, 61.92, 45.44, 1974.1, 65.88, 58.75, 58.20, 71.40, 83.12, 55.00, 87.25,
];

/// (method, budget, published OP, raw values).
pub const REFERENCE_ROWS: [(&str, f64, f64, [f64; 15]); 9] = [
    ("FastV", 0.01, 0.48, [8.0, 14.00, 9.18, 27.0, 66.35, 35.04, 40.89, 697.7, 36.86, 28.97, 36.40, 49.10, 27.69, 12.30, 20.95]),
    ("VisionZip", 0.01, 0.75, [35.0, 35.16, 44.48, 194.0, 72.11, 53.69, 42.56, 1704.2, 53.86, 41.30, 39.30, 71.20, 74.10, 28.60, 87.50]),
    ("PruMerge+", 0.01, 0.74, [27.0, 34.88, 44.66, 121.0, 71.08, 54.18, 43.44, 1639.2, 58.16, 42.81, 39.20, 63.60, 73.09, 34.50, 76.60]),
    ("FastV", 0.10, 0.76, [48.0, 43.16, 52.37, 190.0, 72.57, 49.63, 45.33, 1669.4, 53.86, 44.63, 40.30, 66.90, 70.12, 31.30, 77.75]),
    ("VisionZip", 0.10, 0.84, [56.0, 49.88, 57.26, 352.0, 77.97, 58.57, 44.11, 1915.0, 59.87, 45.45, 45.00, 71.80, 78.86, 36.60, 87.50]),
    ("PruMerge+", 0.10, 0.81, [37.0, 40.96, 55.59, 203.0, 74.77, 58.54, 44.44, 1872.7, 61.17, 47.56, 43.50, 65.90, 78.47, 37.00, 85.35]),
    ("FastV", 0.40, 0.94, [80.0, 69.20, 72.48, 488.0, 86.23, 60.56, 46.33, 1937.2, 62.75, 53.91, 50.50, 70.50, 81.22, 47.70, 86.35]),
    ("VisionZip", 0.40, 0.93, [72.0, 67.04, 68.21, 500.0, 83.84, 61.23, 46.11, 1956.8, 63.01, 51.17, 52.60, 71.60, 80.43, 48.30, 87.55]),
    ("PruMerge+", 0.40, 0.88, [49.0, 51.40, 67.79, 382.0, 79.82, 61.78, 45.55, 1924.0, 64.70, 53.38, 48.00, 68.10, 80.88, 46.50, 85.55]),
];

pub fn reference_records(method: &str, budget: f64, values: &[f64; 15]) -> Vec<EvalRecord> {
    REFERENCE_BENCHMARKS
        .iter()
        .zip(values.iter().zip(&REFERENCE_ORIGINAL))
        .map(|(b, (&v, &base))| record(method, "llava-ov-7b", b, Some(budget), v, base, vec![], vec![], 1.0, 1.0))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn record(
    method: &str,
    model: &str,
    benchmark: &str,
    budget: Option<f64>,
    score: f64,
    base_score: f64,
    predictions: Vec<String>,
    base_predictions: Vec<String>,
    time: f64,
    base_time: f64,
) -> EvalRecord {
    EvalRecord {
        method: method.into(),
        model: model.into(),
        benchmark: benchmark.into(),
        budget,
        score,
        predictions,
        time,
        ttft: time * 0.5,
        decode: time * 0.5,
        baseline: Some(Baseline {
            score: base_score,
            predictions: base_predictions,
            time: base_time,
            ttft: base_time * 0.25,
            decode: base_time * 0.75,
        }),
    }
}

/// Row-stochastic causal matrix with random logits; `sharp` scales them.
pub fn random_causal(rng: &mut Rng, n: usize, sharp: f64) -> AttentionMatrix {
    let mut a = AttentionMatrix::zeros(n);
    for i in 0..n {
        let logits: Vec<f64> = (0..=i).map(|_| sharp * rng.random::<f64>()).collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for (j, v) in e.iter().enumerate() {
            a.set(i, j, (v / z) as f32);
        }
    }
    a
}

/// Random unpruned trace; each layer gets its own sharpness so densities differ.
pub fn random_trace(rng: &mut Rng, layers: usize, heads: usize, spans: Spans) -> AttentionTrace {
    let n = spans.len();
    let layers = (0..layers)
        .map(|_| {
            let sharp = rng.random_range(0.5..12.0);
            LayerTrace {
                positions: (0..n).collect(),
                spans,
                heads: (0..heads).map(|_| random_causal(rng, n, sharp)).collect(),
            }
        })
        .collect();
    AttentionTrace {
        spans,
        layers,
        cls_attention: None,
    }
}

pub fn small_config(rng: &mut Rng) -> ModelConfig {
    ModelConfig::new(
        rng.random_range(2..=4),
        rng.random_range(2..=4),
        8,
        rng.random(),
    )
}

/// A 16x64 weight matrix with 256 correlated calibration inputs whose
/// per-feature scales are log-normal, the regime where activation-aware
/// methods matter.
pub fn quality_case(seed: u64) -> (WeightTensor, CalibrationSet) {
    use vlcbench::rng::{normal_f64, normal_vec, stream};
    let mut r = stream(seed, 1);
    let (m, n, s) = (16, 64, 256);
    let w = WeightTensor::new("w", m, n, normal_vec(&mut r, m * n, 1.0)).unwrap();
    let mix = normal_vec(&mut r, n * n, 1.0);
    let scale: Vec<f32> = (0..n).map(|_| normal_f64(&mut r).exp() as f32).collect();
    let samples: Vec<Vec<f32>> = (0..s)
        .map(|_| {
            let z = normal_vec(&mut r, n, 1.0);
            (0..n)
                .map(|i| {
                    let shared: f32 = (0..n).map(|k| mix[i * n + k] * z[k]).sum();
                    scale[i] * (z[i] + 0.5 * shared / (n as f32).sqrt())
                })
                .collect()
        })
        .collect();
    (w, CalibrationSet::new(n, samples).unwrap())
}

/// Lower/upper 95% Wilson interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let d = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / d;
    let h = z * ((p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()) / d;
    ((c - h).max(0.0), (c + h).min(1.0))
}

pub mod oracle {
    //! Brute-force metric aggregations written independently of the library.

    use rand::Rng as _;
    use vlcbench::metrics::{Baseline, EvalRecord};

    use super::Rng;

    fn names(records: &[EvalRecord], f: impl Fn(&EvalRecord) -> &str) -> Vec<String> {
        let mut v: Vec<String> = records.iter().map(|r| f(r).to_string()).collect();
        v.sort();
        v.dedup();
        v
    }

    fn cell_mean(records: &[EvalRecord], m: &str, b: &str, f: impl Fn(&EvalRecord) -> f64) -> Option<f64> {
        let (mut s, mut n) = (0.0, 0.0);
        for r in records {
            if r.model == m && r.benchmark == b {
                s += f(r);
                n += 1.0;
            }
        }
        (n > 0.0).then(|| s / n)
    }

    fn ratio(r: &EvalRecord) -> f64 {
        r.score / r.baseline.as_ref().unwrap().score
    }

    pub fn op(records: &[EvalRecord], model: &str) -> f64 {
        let benches = names(records, |r| &r.benchmark);
        let mut sq = 0.0;
        let mut count = 0.0;
        for b in &benches {
            if let Some(x) = cell_mean(records, model, b, ratio) {
                sq += x * x;
                count += 1.0;
            }
        }
        (sq / count).sqrt()
    }

    pub fn og(records: &[EvalRecord]) -> f64 {
        let benches = names(records, |r| &r.benchmark);
        let models = names(records, |r| &r.model);
        let mut bench_means = Vec::new();
        let mut all_cells = Vec::new();
        for b in &benches {
            let cells: Vec<f64> = models.iter().filter_map(|m| cell_mean(records, m, b, ratio)).collect();
            bench_means.push(cells.iter().sum::<f64>() / cells.len() as f64);
            all_cells.extend(cells);
        }
        let k = bench_means.len() as f64;
        let mu = bench_means.iter().sum::<f64>() / k;
        let var = bench_means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / k;
        let grand = all_cells.iter().sum::<f64>() / all_cells.len() as f64;
        var.sqrt() / grand
    }

    pub fn token_f1(a: &str, b: &str) -> f64 {
        let mut x: Vec<&str> = a.split_whitespace().collect();
        let mut y: Vec<&str> = b.split_whitespace().collect();
        if x.is_empty() && y.is_empty() {
            return 1.0;
        }
        x.sort();
        y.sort();
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        if common == 0 {
            return 0.0;
        }
        2.0 * common as f64 / (x.len() + y.len()) as f64
    }

    pub fn ol(records: &[EvalRecord], f1_threshold: Option<f64>) -> f64 {
        let (mut hit, mut n) = (0.0, 0.0);
        for r in records {
            let base = &r.baseline.as_ref().unwrap().predictions;
            for (p, q) in r.predictions.iter().zip(base) {
                let ok = match f1_threshold {
                    None => p == q,
                    Some(t) => token_f1(p, q) >= t,
                };
                hit += f64::from(u8::from(ok));
                n += 1.0;
            }
        }
        hit / n
    }

    /// (end-to-end, ttft, decode) speedups.
    pub fn oe(records: &[EvalRecord]) -> [f64; 3] {
        let benches = names(records, |r| &r.benchmark);
        let models = names(records, |r| &r.model);
        let mut out = [0.0; 3];
        let mut cells = 0.0;
        for b in &benches {
            for m in &models {
                let get = [
                    |r: &EvalRecord| r.baseline.as_ref().unwrap().time / r.time,
                    |r: &EvalRecord| r.baseline.as_ref().unwrap().ttft / r.ttft,
                    |r: &EvalRecord| r.baseline.as_ref().unwrap().decode / r.decode,
                ];
                if cell_mean(records, m, b, get[0]).is_none() {
                    continue;
                }
                cells += 1.0;
                for k in 0..3 {
                    out[k] += cell_mean(records, m, b, get[k]).unwrap();
                }
            }
        }
        out.map(|x| x / cells)
    }

    fn prediction(rng: &mut Rng) -> String {
        let n = rng.random_range(0..4);
        (0..n)
            .map(|_| ["a", "b", "c", "d"][rng.random_range(0..4)])
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Records of one method over random models, benchmarks and repeat runs.
    pub fn random_records(rng: &mut Rng, method: &str) -> Vec<EvalRecord> {
        let models = rng.random_range(1..=3);
        let benches = rng.random_range(2..=5);
        let mut out = Vec::new();
        for m in 0..models {
            for b in 0..benches {
                let samples = rng.random_range(1..=6);
                let base = Baseline {
                    score: rng.random_range(0.05..100.0),
                    predictions: (0..samples).map(|_| prediction(rng)).collect(),
                    time: rng.random_range(1.0..1e6),
                    ttft: rng.random_range(1.0..1e6),
                    decode: rng.random_range(1.0..1e6),
                };
                for _ in 0..rng.random_range(1..=2) {
                    out.push(EvalRecord {
                        method: method.into(),
                        model: format!("m{m}"),
                        benchmark: format!("b{b}"),
                        budget: Some(0.1),
                        score: rng.random_range(0.0..100.0),
                        predictions: (0..samples).map(|_| prediction(rng)).collect(),
                        time: rng.random_range(1.0..1e6),
                        ttft: rng.random_range(1.0..1e6),
                        decode: rng.random_range(1.0..1e6),
                        baseline: Some(base.clone()),
                    });
                }
            }
        }
        out
    }

    pub fn rel_err(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }
}
