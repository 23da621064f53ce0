mod common;

use proptest::prelude::*;
use rand::Rng as _;
use vlcbench::param::ecoflap::{ecoflap_layer_scores, layer_keep_counts, loss_data, zeroth_order_importance};
use vlcbench::param::quant::awq_quantize_with_grid;
use vlcbench::param::sparsegpt::damped_inverse;
use vlcbench::param::*;
use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};
use vlcbench::Error;

/// ‖(W − Ŵ) X‖_F² by direct summation over samples.
fn error_oracle(w: &WeightTensor, w_hat: &WeightTensor, c: &CalibrationSet) -> f64 {
    let mut total = 0.0;
    for x in &c.samples {
        for r in 0..w.rows {
            let y: f64 = (0..w.cols)
                .map(|j| (f64::from(w.get(r, j)) - f64::from(w_hat.get(r, j))) * f64::from(x[j]))
                .sum();
            total += y * y;
        }
    }
    total
}

#[test]
fn reconstruction_error_matches_direct_sum() {
    for seed in 0..5 {
        let (w, c) = common::quality_case(seed);
        let q = rtn_quantize(&w, &QuantSpec::new(3, 16).unwrap()).unwrap().dequantize();
        let (a, b) = (reconstruction_error(&w, &q, &c).unwrap(), error_oracle(&w, &q, &c));
        assert!((a - b).abs() <= 1e-6 * b);
    }
}

#[test]
fn wanda_examples() {
    let w = WeightTensor::new("w", 2, 2, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
    let c = CalibrationSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(wanda_scores(&w, &c).unwrap(), vec![1.0, 4.0, 3.0, 8.0]);
    let zero = WeightTensor::new("w", 2, 2, vec![0.0; 4]).unwrap();
    assert_eq!(wanda_scores(&zero, &c).unwrap(), vec![0.0; 4]);
}

#[test]
fn sparsegpt_scores_match_explicit_inverse() {
    let mut rng = common::rng(31);
    for _ in 0..50 {
        let samples: Vec<Vec<f32>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let c = CalibrationSet::new(3, samples.clone()).unwrap();
        let w = WeightTensor::new("w", 2, 3, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let lambda = 0.05;
        let mut h = [[0.0f64; 3]; 3];
        for x in &samples {
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += f64::from(x[i]) * f64::from(x[j]);
                }
            }
        }
        (0..3).for_each(|i| h[i][i] += lambda);
        // adjugate over determinant
        let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
        let diag = [
            (h[1][1] * h[2][2] - h[1][2] * h[2][1]) / det,
            (h[0][0] * h[2][2] - h[0][2] * h[2][0]) / det,
            (h[0][0] * h[1][1] - h[0][1] * h[1][0]) / det,
        ];
        let got = sparsegpt_scores(&w, &c, Some(lambda)).unwrap();
        for (i, s) in got.iter().enumerate() {
            let v = f64::from(w.data[i]);
            let want = v * v / diag[i % 3];
            assert!((s - want).abs() <= 1e-9 * want.max(1e-12), "{s} vs {want}");
        }
    }
    let gram = CalibrationSet::new(1, vec![vec![1.0]]).unwrap().gram();
    assert!(matches!(damped_inverse(&gram, 0.0), Err(Error::Numerical(_))));
}

#[test]
fn sparsegpt_ranking_limits_are_magnitude() {
    let mut rng = common::rng(32);
    let w = WeightTensor::new("w", 4, 8, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let pattern = SparsityPattern::Unstructured { density: 0.5 };
    let mag = magnitude_mask(&w, &pattern, MaskGroup::PerRow).unwrap();
    let identity: Vec<Vec<f32>> = (0..8).map(|i| (0..8).map(|j| f32::from(u8::from(i == j))).collect()).collect();
    let c = CalibrationSet::new(8, identity).unwrap();
    let s = sparsegpt_scores(&w, &c, Some(1e-9)).unwrap();
    assert_eq!(mask_from_scores(&s, 4, 8, &pattern, MaskGroup::PerRow).unwrap(), mag);
    let (_, c) = common::quality_case(3);
    let w64 = WeightTensor::new("w", 4, 64, (0..256).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let s = sparsegpt_scores(&w64, &c, Some(1e12)).unwrap();
    assert_eq!(
        mask_from_scores(&s, 4, 64, &pattern, MaskGroup::PerRow).unwrap(),
        magnitude_mask(&w64, &pattern, MaskGroup::PerRow).unwrap()
    );
}

#[test]
fn sparsegpt_examples() {
    let (w, c) = common::quality_case(4);
    let (full, mask) = sparsegpt_prune(&w, &c, &SparsityPattern::Unstructured { density: 1.0 }, None).unwrap();
    assert_eq!((full, mask.count()), (w.clone(), w.len()));
    let (p24, m24) = sparsegpt_prune(&w, &c, &SparsityPattern::Semi24, None).unwrap();
    assert!(m24.satisfies_24());
    for r in 0..w.rows {
        for g in 0..w.cols / 4 {
            let zeros = (0..4).filter(|k| p24.get(r, g * 4 + k) == 0.0).count();
            assert_eq!(zeros, 2);
        }
    }
}

#[test]
fn small_sparsegpt_beats_magnitude() {
    let mut rng = common::rng(33);
    let pattern = SparsityPattern::Unstructured { density: 0.5 };
    let (mut wins, mut total_s, mut total_m) = (0usize, 0.0, 0.0);
    for _ in 0..100 {
        let w = WeightTensor::new("w", 4, 4, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let samples: Vec<Vec<f32>> = (0..32)
            .map(|_| {
                let z: f32 = rng.random_range(-1.0..1.0);
                (0..4).map(|_| z + 0.3 * rng.random_range(-1.0..1.0f32)).collect()
            })
            .collect();
        let c = CalibrationSet::new(4, samples).unwrap();
        let mag = magnitude_mask(&w, &pattern, MaskGroup::PerRow).unwrap().apply(&w);
        let (sg, _) = sparsegpt_prune(&w, &c, &pattern, None).unwrap();
        let (es, em) = (reconstruction_error(&w, &sg, &c).unwrap(), reconstruction_error(&w, &mag, &c).unwrap());
        wins += usize::from(es <= em * (1.0 + 1e-9));
        total_s += es;
        total_m += em;
    }
    eprintln!("sparsegpt wins {wins}/100, totals {total_s} vs {total_m}");
    assert!(wins >= 90 && total_s < total_m);
}

#[test]
fn quality_orderings_hold() {
    let spec = QuantSpec::new(4, 32).unwrap();
    let pattern = SparsityPattern::Unstructured { density: 0.5 };
    for seed in 0..20 {
        let (w, c) = common::quality_case(seed);
        let e = |q: &QuantizedTensor| reconstruction_error(&w, &q.dequantize(), &c).unwrap();
        let rtn = e(&rtn_quantize(&w, &spec).unwrap());
        assert!(e(&awq_quantize(&w, &c, &spec).unwrap()) <= rtn);
        assert!(e(&gptq_quantize(&w, &c, &spec, None).unwrap()) <= rtn);
        let mag = reconstruction_error(&w, &magnitude_mask(&w, &pattern, MaskGroup::PerRow).unwrap().apply(&w), &c).unwrap();
        let (sg, m) = sparsegpt_prune(&w, &c, &pattern, None).unwrap();
        assert!(reconstruction_error(&w, &sg, &c).unwrap() <= mag);
        assert_eq!(m.count(), w.len() / 2);
    }
}

#[test]
fn rtn_error_is_at_most_half_a_step() {
    let mut rng = common::rng(34);
    for _ in 0..50 {
        let spec = QuantSpec::new(rng.random_range(2..=8), 16).unwrap();
        let w = WeightTensor::new("w", 3, 48, (0..144).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let q = rtn_quantize(&w, &spec).unwrap();
        let d = q.dequantize_f64();
        for r in 0..3 {
            for c in 0..48 {
                let s = f64::from(q.grid(r, c).scale);
                assert!((f64::from(w.get(r, c)) - d[r * 48 + c]).abs() <= s / 2.0 * (1.0 + 1e-5) + 1e-6);
            }
        }
    }
    let flat = WeightTensor::new("w", 2, 8, vec![0.7; 16]).unwrap();
    assert_eq!(rtn_quantize(&flat, &QuantSpec::new(4, 8).unwrap()).unwrap().dequantize(), flat);
    assert!(QuantSpec::new(1, 8).is_err());
}

#[test]
fn awq_without_activation_signal_is_rtn() {
    let mut rng = common::rng(35);
    let spec = QuantSpec::new(3, 16).unwrap();
    for _ in 0..10 {
        let w = WeightTensor::new("w", 4, 32, (0..128).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let samples: Vec<Vec<f32>> = (0..40)
            .map(|_| (0..32).map(|_| if rng.random() { 1.5 } else { -1.5 }).collect())
            .collect();
        let c = CalibrationSet::new(32, samples).unwrap();
        let awq = awq_quantize(&w, &c, &spec).unwrap();
        let rtn = rtn_quantize(&w, &spec).unwrap();
        assert_eq!(awq.dequantize(), rtn.dequantize());
    }
}

/// RTN of W·diag(t) divided back by t, written out from the grid formula.
fn scaled_rtn_oracle(w: &WeightTensor, t: &[f64], bits: u32) -> WeightTensor {
    let max = f64::from((1u32 << bits) - 1);
    let mut out = Vec::with_capacity(w.len());
    for r in 0..w.rows {
        let row: Vec<f64> = (0..w.cols).map(|j| f64::from(w.get(r, j)) * f64::from(t[j] as f32)).collect();
        let lo = row.iter().cloned().fold(f64::MAX, f64::min);
        let hi = row.iter().cloned().fold(f64::MIN, f64::max);
        let s = f64::from(((hi - lo) / max) as f32);
        let z = f64::from((-lo / s) as f32);
        for (j, v) in row.iter().enumerate() {
            let q = (v / s + z).round().clamp(0.0, max);
            out.push((s * (q - z) / f64::from(t[j] as f32)) as f32);
        }
    }
    w.with_data(out)
}

#[test]
fn awq_matches_exhaustive_grid() {
    for seed in 0..10 {
        let (w, c) = common::quality_case(seed);
        let spec = QuantSpec::new(3, 64).unwrap();
        let act = c.mean_abs();
        let peak = act.iter().cloned().fold(0.0, f64::max);
        let err_at = |alpha: f64| {
            let t: Vec<f64> = act.iter().map(|a| (a / peak).powf(alpha).max(1e-4)).collect();
            error_oracle(&w, &scaled_rtn_oracle(&w, &t, 3), &c)
        };
        let grid: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let best = grid.iter().map(|&a| err_at(a)).fold(f64::MAX, f64::min);
        let got = error_oracle(&w, &awq_quantize_with_grid(&w, &c, &spec, &grid).unwrap().dequantize(), &c);
        assert!((got - best).abs() <= 1e-6 * best, "{got} vs {best}");
        let fine = (0..=400).map(|i| err_at(i as f64 / 400.0)).fold(f64::MAX, f64::min);
        assert!(fine <= got * (1.0 + 1e-9));
    }
}

#[test]
fn gptq_degenerate_cases_equal_rtn() {
    let mut rng = common::rng(36);
    let spec = QuantSpec::new(3, 8).unwrap();
    let w = WeightTensor::new("w", 3, 8, (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let samples: Vec<Vec<f32>> = (0..8)
        .map(|i| (0..8).map(|j| if i == j { 1.0 + i as f32 } else { 0.0 }).collect())
        .collect();
    let c = CalibrationSet::new(8, samples).unwrap();
    assert_eq!(gptq_quantize(&w, &c, &spec, None).unwrap().codes, rtn_quantize(&w, &spec).unwrap().codes);
    let one = WeightTensor::new("w", 1, 1, vec![0.3]).unwrap();
    let c1 = CalibrationSet::new(1, vec![vec![2.0]]).unwrap();
    let s1 = QuantSpec::new(4, 1).unwrap();
    assert_eq!(gptq_quantize(&one, &c1, &s1, None).unwrap(), rtn_quantize(&one, &s1).unwrap());
}

#[test]
fn zeroth_order_quadratic_oracle() {
    let mut rng = vlcbench::rng::stream(37, 0);
    let w: Vec<f32> = (0..10).map(|i| 0.1 * i as f32 - 0.3).collect();
    let norm = w.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let loss = |p: &[f32]| p.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>();
    let est = zeroth_order_importance(&w, 1e-2, 10_000, &mut rng, loss).unwrap();
    let want = 2.0 * norm * (2.0 / std::f64::consts::PI).sqrt();
    assert!((est - want).abs() <= 0.05 * want, "{est} vs {want}");

    let var = |trials: usize, rng: &mut vlcbench::rng::Rng| {
        let xs: Vec<f64> = (0..400).map(|_| zeroth_order_importance(&w, 1e-2, trials, rng, loss).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    let ratio = var(20, &mut rng) / var(40, &mut rng);
    assert!((1.6..2.5).contains(&ratio), "variance ratio {ratio}");
    assert!(zeroth_order_importance(&w, 1e-9, 4, &mut rng, loss).is_err());
}

fn toy() -> Model {
    Model::build(ModelConfig::new(3, 2, 8, 5)).unwrap()
}

fn small_eco() -> vlcbench::param::EcoFlapConfig {
    vlcbench::param::EcoFlapConfig {
        trials: 4,
        loss_samples: 2,
        loss_visual_len: 16,
        ..Default::default()
    }
}

#[test]
fn ablated_layer_has_no_importance() {
    let mut model = toy();
    model.set_layer_gain(1, 0.0);
    let cfg = small_eco();
    let data = loss_data(&model, &cfg).unwrap();
    let s = ecoflap_layer_scores(&model, &data, &cfg).unwrap();
    assert!(s[1] <= 1e-6 * s[0].max(s[2]), "{s:?}");
}

#[test]
fn ecoflap_allocation_accounting() {
    let sizes = [300usize, 500, 200];
    let k = layer_keep_counts(&[1.0, 2.0, 0.5], &sizes, 0.4, 1.0).unwrap();
    assert_eq!(k.iter().sum::<usize>(), 400);
    assert!(k[1] as f64 / 500.0 > k[0] as f64 / 300.0 && k[0] as f64 / 300.0 > k[2] as f64 / 200.0);
    let spec = ParamSpec::pruning(ParamMethod::EcoFlap, SparsityPattern::Semi24);
    assert!(spec.validate().is_err());
}

fn calib_cfg() -> CalibrationConfig {
    CalibrationConfig {
        samples: 8,
        visual_len: 24,
        text_len: 6,
        ..CalibrationConfig::default()
    }
}

#[test]
fn lossless_settings_keep_outputs() {
    let model = toy();
    let cal = capture(&model, &calib_cfg()).unwrap();
    let mut specs: Vec<ParamSpec> = [ParamMethod::Magnitude, ParamMethod::Wanda, ParamMethod::SparseGpt]
        .into_iter()
        .map(|m| ParamSpec::pruning(m, SparsityPattern::Unstructured { density: 1.0 }))
        .collect();
    let mut eco = ParamSpec::pruning(ParamMethod::EcoFlap, SparsityPattern::Unstructured { density: 1.0 });
    eco.ecoflap = small_eco();
    specs.push(eco);
    for m in [ParamMethod::Rtn, ParamMethod::Awq, ParamMethod::Gptq] {
        specs.push(ParamSpec::quantization(m, QuantSpec::new(16, 128).unwrap()));
    }
    let params = TaskParams {
        visual_len: 24,
        text_len: 6,
        hidden: 16,
        ..TaskParams::default()
    };
    for spec in &specs {
        let cm = compress_model(&model, spec, Some(&cal)).unwrap();
        let compressed = cm.apply_to(&model).unwrap();
        for seed in 0..5 {
            let task = make_task(TaskKind::NeedleRetrieval, &params, seed).unwrap();
            assert_eq!(
                compressed.generate_uncached(&task.sequence, 3),
                model.generate_uncached(&task.sequence, 3),
                "{}",
                spec.label()
            );
        }
    }
}

#[test]
fn compressed_model_files_round_trip() {
    let model = toy();
    let cal = capture(&model, &calib_cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for spec in [
        ParamSpec::pruning(ParamMethod::Wanda, SparsityPattern::Semi24),
        ParamSpec::pruning(ParamMethod::SparseGpt, SparsityPattern::Unstructured { density: 0.3 }),
        ParamSpec::quantization(ParamMethod::Awq, QuantSpec::new(3, 8).unwrap()),
        ParamSpec::quantization(ParamMethod::Gptq, QuantSpec::new(5, 16).unwrap()),
    ] {
        let cm = compress_model(&model, &spec, Some(&cal)).unwrap();
        let path = dir.path().join(format!("{}.vlcp", spec.method.name()));
        write_model(&cm, &path).unwrap();
        assert_eq!(read_model(&path).unwrap(), cm);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_model(&path).is_err());
    }
    let rtn = compress_model(&model, &ParamSpec::quantization(ParamMethod::Awq, QuantSpec::default()), None);
    assert!(rtn.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mask_cardinality(rows in 1usize..6, groups in 1usize..5, density in 0.01f64..1.0, seed: u64) {
        let mut rng = common::rng(seed);
        let cols = groups * 4;
        let w = WeightTensor::new("w", rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let p = SparsityPattern::Unstructured { density };
        for group in [MaskGroup::PerRow, MaskGroup::Global] {
            let m = magnitude_mask(&w, &p, group).unwrap();
            prop_assert_eq!(m.count(), (density * (rows * cols) as f64).round() as usize);
        }
        let m = magnitude_mask(&w, &SparsityPattern::Semi24, MaskGroup::PerRow).unwrap();
        for r in 0..rows {
            for g in 0..groups {
                prop_assert_eq!((0..4).filter(|k| m.is_kept(r, g * 4 + k)).count(), 2);
            }
        }
    }

    #[test]
    fn wanda_mask_is_scale_invariant(seed: u64, k in 0.1f64..10.0) {
        let mut rng = common::rng(seed);
        let w = WeightTensor::new("w", 3, 8, (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let xs: Vec<Vec<f32>> = (0..5).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let c = CalibrationSet::new(8, xs.clone()).unwrap();
        let cs = CalibrationSet::new(8, xs.iter().map(|x| x.iter().map(|v| v * k as f32).collect()).collect()).unwrap();
        let rowscale: Vec<f32> = (0..3).map(|_| rng.random_range(0.1..10.0)).collect();
        let ws = w.with_data(w.data.iter().enumerate().map(|(i, v)| v * rowscale[i / 8]).collect());
        let p = SparsityPattern::Unstructured { density: 0.5 };
        let base = mask_from_scores(&wanda_scores(&w, &c).unwrap(), 3, 8, &p, MaskGroup::PerRow).unwrap();
        prop_assert_eq!(&mask_from_scores(&wanda_scores(&w, &cs).unwrap(), 3, 8, &p, MaskGroup::PerRow).unwrap(), &base);
        prop_assert_eq!(&mask_from_scores(&wanda_scores(&ws, &c).unwrap(), 3, 8, &p, MaskGroup::PerRow).unwrap(), &base);
    }

    #[test]
    fn quantization_is_deterministic(seed: u64, bits in 2u32..9) {
        let (w, c) = common::quality_case(seed % 1000);
        let spec = QuantSpec::new(bits, 32).unwrap();
        prop_assert_eq!(gptq_quantize(&w, &c, &spec, None).unwrap(), gptq_quantize(&w, &c, &spec, None).unwrap());
    }
}
