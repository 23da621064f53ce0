mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;
use vlcbench::kmeans::kmeans;
use vlcbench::sim::{make_task, AttentionMatrix, LayerTrace, Model, Spans, TaskKind, TaskParams};
use vlcbench::token_prune::*;

fn layer(spans: Spans, heads: Vec<AttentionMatrix>) -> LayerTrace {
    LayerTrace {
        positions: (0..spans.len()).collect(),
        spans,
        heads,
    }
}

#[test]
fn fastv_score_examples() {
    let spans = Spans::new(4, 2);
    let mut uniform = AttentionMatrix::zeros(6);
    for i in 0..6 {
        (0..=i).for_each(|j| uniform.set(i, j, 1.0 / (i + 1) as f32));
    }
    let s = fastv_layer_score(&layer(spans, vec![uniform])).unwrap();
    assert!(s.windows(2).all(|w| w[0] == w[1]));

    let mut one = AttentionMatrix::zeros(6);
    one.set(5, 3, 1.0);
    let s = fastv_layer_score(&layer(spans, vec![one])).unwrap();
    assert_eq!(vlcbench::budget::top_k(&s, 1), vec![3]);

    let mut rng = common::rng(21);
    for _ in 0..20 {
        let heads: Vec<AttentionMatrix> = (0..3).map(|_| common::random_causal(&mut rng, 6, 4.0)).collect();
        let got = fastv_layer_score(&layer(spans, heads.clone())).unwrap();
        for j in 0..4 {
            let mut want = 0.0;
            for h in &heads {
                for i in 4..6 {
                    want += f64::from(h.get(i, j));
                }
            }
            assert!((got[j] - want / 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn threshold_examples() {
    let b = PruneBudget::new(0.5).unwrap();
    assert_eq!(threshold_mask(&[0.4, 0.1, 0.3, 0.2], b), vec![true, false, true, false]);
    let b = PruneBudget::new(0.25).unwrap();
    assert_eq!(threshold_mask(&[1.0; 4], b), vec![true, false, false, false]);
    assert_eq!(PruneBudget::new(0.01).unwrap().quota(100), 1);
    assert_eq!(PruneBudget::new(0.01).unwrap().quota(50), 1);
    assert!(PruneBudget::new(0.0).is_err());
}

#[test]
fn sink_variants() {
    let mut rng = common::rng(22);
    for _ in 0..100 {
        let lv = rng.random_range(2..80);
        let scores: Vec<f64> = (0..lv).map(|_| rng.random()).collect();
        let cls: Vec<f32> = (0..lv).map(|_| rng.random()).collect();
        let b = PruneBudget::new(rng.random_range(0.01..1.0)).unwrap();
        let quota = b.quota(lv);
        let sinks = sink_set(&cls, 0.1);
        let cfg = |variant| FastVConfig { variant, ..FastVConfig::default() };
        let a1 = fastv_select(&scores, Some(&cls), b, &cfg(FastVVariant::A1ExcludeSinks)).unwrap();
        let a2 = fastv_select(&scores, Some(&cls), b, &cfg(FastVVariant::A2ForceSinks)).unwrap();
        assert_eq!((a1.len(), a2.len()), (quota, quota));
        if quota <= lv - sinks.len() {
            assert!(a1.iter().all(|k| !sinks.contains(k)));
        }
        let in_a2 = a2.iter().filter(|k| sinks.contains(k)).count();
        assert_eq!(in_a2, quota.min(sinks.len()));
    }
}

#[test]
fn visionzip_centroid_count() {
    let b = PruneBudget::new(0.064).unwrap();
    assert_eq!(visionzip_centroids(b, 1000, &VisionZipConfig::default()), 10);
    assert_eq!(visionzip_centroids(PruneBudget::new(1.0).unwrap(), 100, &VisionZipConfig::default()), 0);
}

/// Lloyd's algorithm to convergence from the same farthest-point seeds.
fn kmeans_oracle(pts: &[[f64; 2]], k: usize) -> Vec<[f64; 2]> {
    let d = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut seeds = vec![0usize];
    while seeds.len() < k {
        let far = (0..pts.len())
            .max_by(|&a, &b| {
                let da = seeds.iter().map(|&s| d(&pts[a], &pts[s])).fold(f64::MAX, f64::min);
                let db = seeds.iter().map(|&s| d(&pts[b], &pts[s])).fold(f64::MAX, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        seeds.push(far);
    }
    let mut c: Vec<[f64; 2]> = seeds.iter().map(|&s| pts[s]).collect();
    loop {
        let assign: Vec<usize> = pts
            .iter()
            .map(|p| (0..k).min_by(|&a, &b| d(p, &c[a]).total_cmp(&d(p, &c[b]))).unwrap())
            .collect();
        let mut next = c.clone();
        for (ci, cen) in next.iter_mut().enumerate() {
            let members: Vec<&[f64; 2]> = pts.iter().zip(&assign).filter(|(_, &a)| a == ci).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let n = members.len() as f64;
                *cen = [members.iter().map(|p| p[0]).sum::<f64>() / n, members.iter().map(|p| p[1]).sum::<f64>() / n];
            }
        }
        if next == c {
            return c;
        }
        c = next;
    }
}

#[test]
fn kmeans_matches_reference() {
    let mut rng = common::rng(23);
    for _ in 0..20 {
        let pts: Vec<[f64; 2]> = (0..12)
            .map(|i| {
                let off = if i % 2 == 0 { 0.0 } else { 5.0 };
                [off + rng.random_range(-1.0..1.0f32) as f64, rng.random_range(-1.0..1.0f32) as f64]
            })
            .collect();
        let f32pts: Vec<Vec<f32>> = pts.iter().map(|p| vec![p[0] as f32, p[1] as f32]).collect();
        let km = kmeans(&f32pts, 2, 100);
        for (got, want) in km.centroids.iter().zip(kmeans_oracle(&pts, 2)) {
            assert!((f64::from(got[0]) - want[0]).abs() < 1e-5 && (f64::from(got[1]) - want[1]).abs() < 1e-5);
        }
    }
}

#[test]
fn prumerge_examples() {
    let mut scores = vec![0.1; 10];
    scores[7] = 5.0;
    assert_eq!(prumerge_select(&scores, 1), vec![7]);
    assert_eq!(prumerge_select(&[1.0; 16], 4), vec![0, 4, 8, 12]);
    assert!(iqr_outliers(&[1.0; 16]).is_empty());
}

#[test]
fn prumerge_weighted_merge_by_hand() {
    use vlcbench::sim::TokenSequence;
    // tokens 0..5 visual plus one text token; 0 is the outlier and the
    // quota is 1, so every other visual token merges into it
    let emb = vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![1.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 1.0, 0.0],
        vec![2.0, 0.0, 0.0, 1.0],
        vec![3.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ];
    let seq = TokenSequence::new(vec![0; 6], emb.clone(), Spans::new(5, 1)).unwrap();
    let scores = [10.0, 1.0, 2.0, 3.0, 4.0];
    let (pruned, out) = prumerge_prune(&seq, &scores, PruneBudget::new(0.2).unwrap()).unwrap();
    assert_eq!(out.retained, vec![0]);
    let total: f64 = scores.iter().sum();
    let want: Vec<f32> = (0..4)
        .map(|d| ((0..5).map(|i| scores[i] * f64::from(emb[i][d])).sum::<f64>() / total) as f32)
        .collect();
    assert_eq!(pruned.embeddings()[0], want);
    assert_eq!(pruned.embeddings()[1], emb[5]);
    assert_eq!(out.merged.unwrap()[0].members, vec![0, 1, 2, 3, 4]);
}

fn variants(b: f64, layers: usize) -> Vec<TokenPruneSpec> {
    let mut out = Vec::new();
    for v in [FastVVariant::Origin, FastVVariant::A1ExcludeSinks, FastVVariant::A2ForceSinks] {
        let mut s = TokenPruneSpec::new(TokenPruneMethod::FastV, b);
        s.variant = v;
        s.layer = 2.min(layers - 1);
        out.push(s);
    }
    out.push(TokenPruneSpec::new(TokenPruneMethod::VisionZip, b));
    out.push(TokenPruneSpec::new(TokenPruneMethod::PruMergePlus, b));
    out
}

#[test]
fn budgets_are_exact() {
    let mut rng = common::rng(24);
    for _ in 0..20 {
        let cfg = common::small_config(&mut rng);
        let model = Model::build(cfg.clone()).unwrap();
        let (lv, lt) = (rng.random_range(1..160), rng.random_range(1..12));
        let params = TaskParams {
            visual_len: lv,
            text_len: lt,
            hidden: cfg.hidden(),
            vocab_size: cfg.vocab_size,
            ..TaskParams::default()
        };
        let task = make_task(TaskKind::NeedleRetrieval, &params, rng.random()).unwrap();
        for pct in [1usize, 5, 10, 20, 40] {
            let quota = (pct * lv / 100).max(1);
            let k = (pct * lv / 640).min(lv - quota);
            for spec in variants(pct as f64 / 100.0, cfg.num_layers) {
                let (pf, out) = spec.run(&model, &task.sequence).unwrap();
                assert_eq!(out.retained.len(), quota, "{}", spec.label());
                assert_eq!(out.mask.iter().filter(|&&m| m).count(), quota);
                let last = pf.trace.layers.last().unwrap();
                assert_eq!(last.spans.text, lt);
                let expect = if spec.method == TokenPruneMethod::VisionZip { quota + k } else { quota };
                assert_eq!(last.spans.visual, expect, "{}", spec.label());
                assert_eq!(out.visual_len(), expect);
            }
        }
    }
}

#[test]
fn full_budget_is_identity() {
    let mut rng = common::rng(25);
    for _ in 0..5 {
        let cfg = common::small_config(&mut rng);
        let model = Model::build(cfg.clone()).unwrap();
        let params = TaskParams {
            visual_len: rng.random_range(4..64),
            text_len: 6,
            hidden: cfg.hidden(),
            vocab_size: cfg.vocab_size,
            ..TaskParams::default()
        };
        let task = make_task(TaskKind::NeedleRetrieval, &params, rng.random()).unwrap();
        let base = model.prefill(&task.sequence).unwrap();
        for spec in variants(1.0, cfg.num_layers) {
            let (pf, _) = spec.run(&model, &task.sequence).unwrap();
            assert_eq!(pf.logits, base.logits, "{}", spec.label());
        }
    }
}

#[test]
fn fastv_rejects_bad_layer() {
    let model = Model::build(vlcbench::sim::ModelConfig::new(2, 2, 4, 0)).unwrap();
    let params = TaskParams {
        visual_len: 8,
        text_len: 2,
        hidden: 8,
        ..TaskParams::default()
    };
    let task = make_task(TaskKind::NeedleRetrieval, &params, 0).unwrap();
    let mut s = TokenPruneSpec::new(TokenPruneMethod::FastV, 0.5);
    s.layer = 2;
    assert!(s.run(&model, &task.sequence).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_is_permutation_equivariant(seed: u64, lv in 2usize..60, b in 0.01f64..1.0) {
        let mut rng = common::rng(seed);
        let scores: Vec<f64> = (0..lv).map(|_| rng.random()).collect();
        let cls: Vec<f32> = (0..lv).map(|_| rng.random()).collect();
        let mut perm: Vec<usize> = (0..lv).collect();
        perm.shuffle(&mut rng);
        let ps: Vec<f64> = perm.iter().map(|&p| scores[p]).collect();
        let pc: Vec<f32> = perm.iter().map(|&p| cls[p]).collect();
        let budget = PruneBudget::new(b).unwrap();
        for variant in [FastVVariant::Origin, FastVVariant::A1ExcludeSinks, FastVVariant::A2ForceSinks] {
            let cfg = FastVConfig { variant, ..FastVConfig::default() };
            let mut a: Vec<usize> = fastv_select(&scores, Some(&cls), budget, &cfg).unwrap();
            let mut bb: Vec<usize> = fastv_select(&ps, Some(&pc), budget, &cfg).unwrap().iter().map(|&i| perm[i]).collect();
            a.sort_unstable();
            bb.sort_unstable();
            prop_assert_eq!(a, bb);
        }
    }

    #[test]
    fn prumerge_quota_exact(scores in prop::collection::vec(0.0f64..1.0, 1..80), b in 0.01f64..1.0) {
        let q = PruneBudget::new(b).unwrap().quota(scores.len());
        let keep = prumerge_select(&scores, q);
        prop_assert_eq!(keep.len(), q);
        prop_assert!(keep.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn quota_matches_integer_floor(pct in 1usize..=100, lv in 1usize..5000) {
        let q = PruneBudget::new(pct as f64 / 100.0).unwrap().quota(lv);
        prop_assert_eq!(q, (pct * lv / 100).max(1));
    }
}
