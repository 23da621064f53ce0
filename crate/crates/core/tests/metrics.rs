mod common;

use common::oracle;
use proptest::prelude::*;
use vlcbench::metrics::*;
use vlcbench::Error;

fn simple(score: f64, base: f64, bench: &str) -> EvalRecord {
    common::record("c", "m", bench, None, score, base, vec!["x".into()], vec!["x".into()], 1.0, 1.0)
}

#[test]
fn reference_op_matches_published_column() {
    for (method, budget, printed, values) in common::REFERENCE_ROWS {
        let op = overall_performance(&common::reference_records(method, budget, &values)).unwrap();
        assert!((op - printed).abs() <= 0.02, "{method}@{budget}: {op} vs {printed}");
    }
}

#[test]
fn random_record_sets_match_oracles() {
    let mut rng = common::rng(7);
    for _ in 0..300 {
        let recs = oracle::random_records(&mut rng, "c");
        let models: std::collections::BTreeSet<_> = recs.iter().map(|r| r.model.clone()).collect();
        for m in &models {
            let mine: Vec<EvalRecord> = recs.iter().filter(|r| &r.model == m).cloned().collect();
            assert!(oracle::rel_err(overall_performance(&mine).unwrap(), oracle::op(&recs, m)) <= 1e-9);
        }
        assert!(oracle::rel_err(generalization(&recs).unwrap(), oracle::og(&recs)) <= 1e-9);
        assert!(oracle::rel_err(loyalty(&recs, Agreement::ExactMatch).unwrap(), oracle::ol(&recs, None)) <= 1e-9);
        assert!(oracle::rel_err(loyalty(&recs, Agreement::token_f1()).unwrap(), oracle::ol(&recs, Some(0.5))) <= 1e-9);
        let e = efficiency(&recs).unwrap();
        let o = oracle::oe(&recs);
        for (a, b) in [e.oe, e.ttft, e.decode].into_iter().zip(o) {
            assert!(oracle::rel_err(a, b) <= 1e-9);
        }
    }
}

#[test]
fn og_examples() {
    let same = vec![simple(0.7, 1.0, "a"), simple(0.7, 1.0, "b"), simple(0.7, 1.0, "c")];
    assert!(generalization(&same).unwrap().abs() < 1e-15);
    let two = vec![simple(0.5, 1.0, "a"), simple(1.0, 1.0, "b")];
    assert!((generalization(&two).unwrap() - 0.25 / 0.75).abs() < 1e-12);
    let zero = vec![simple(0.0, 1.0, "a"), simple(0.0, 1.0, "b")];
    assert!(matches!(generalization(&zero), Err(Error::ZeroMean)));
}

#[test]
fn efficiency_examples() {
    let mut a = simple(1.0, 1.0, "a");
    let mut b = simple(1.0, 1.0, "b");
    a.time = 0.5;
    b.time = 0.25;
    let e = efficiency(&[a.clone(), b]).unwrap();
    assert!((e.oe - 3.0).abs() < 1e-12);
    a.time = 0.0;
    assert!(matches!(efficiency(&[a]), Err(Error::NonPositiveTiming(_))));
}

#[test]
fn loyalty_examples() {
    let mut r = simple(1.0, 1.0, "a");
    r.predictions = vec!["p".into(), "q".into()];
    r.baseline.as_mut().unwrap().predictions = vec!["r".into(), "s".into()];
    assert_eq!(loyalty(&[r.clone()], Agreement::ExactMatch).unwrap(), 0.0);
    r.predictions = r.baseline.as_ref().unwrap().predictions.clone();
    assert_eq!(loyalty(&[r], Agreement::ExactMatch).unwrap(), 1.0);
}

#[test]
fn missing_baseline_is_an_error() {
    let mut r = simple(1.0, 1.0, "a");
    r.baseline = None;
    assert!(matches!(overall_performance(&[r]), Err(Error::MissingBaseline { .. })));
}

#[test]
fn report_fails_on_missing_cell() {
    let mut recs = vec![simple(0.5, 1.0, "a"), simple(0.5, 1.0, "b")];
    recs.push(common::record("d", "m", "a", None, 1.0, 1.0, vec!["x".into()], vec!["x".into()], 1.0, 1.0));
    assert!(matches!(build_report(&recs, Agreement::ExactMatch), Err(Error::MissingCell { .. })));
}

#[test]
fn report_on_baseline_only_gives_unit_op() {
    let recs = vec![
        common::record(BASELINE, "m", "a", None, 0.4, 0.4, vec!["1".into()], vec!["1".into()], 2.0, 2.0),
        common::record(BASELINE, "m", "b", None, 0.9, 0.9, vec!["2".into()], vec!["2".into()], 3.0, 3.0),
    ];
    let rep = build_report(&recs, Agreement::ExactMatch).unwrap();
    assert_eq!(rep.op_of("m", BASELINE), Some(1.0));
    let s = rep.method(BASELINE).unwrap();
    assert_eq!((s.ol, s.og), (1.0, Some(0.0)));
}

proptest! {
    #[test]
    fn op_is_monotone(ratios in prop::collection::vec(0.0f64..2.0, 1..8), i in 0usize..8, bump in 1e-3f64..1.0) {
        let i = i % ratios.len();
        let mut up = ratios.clone();
        up[i] += bump;
        prop_assert!(op_from_ratios(&up) > op_from_ratios(&ratios));
    }

    #[test]
    fn og_is_scale_invariant(scores in prop::collection::vec(0.01f64..1.0, 2..6), k in 0.1f64..10.0) {
        let recs: Vec<EvalRecord> = scores.iter().enumerate().map(|(i, &s)| simple(s, 1.0, &format!("b{i}"))).collect();
        let scaled: Vec<EvalRecord> = recs.iter().map(|r| EvalRecord { score: r.score * k, ..r.clone() }).collect();
        let (a, b) = (generalization(&recs).unwrap(), generalization(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
    }

    #[test]
    fn ol_is_permutation_invariant(pairs in prop::collection::vec((0u8..3, 0u8..3), 1..12), rot in 0usize..12) {
        let mut r = simple(1.0, 1.0, "a");
        r.predictions = pairs.iter().map(|p| p.0.to_string()).collect();
        r.baseline.as_mut().unwrap().predictions = pairs.iter().map(|p| p.1.to_string()).collect();
        let before = loyalty(&[r.clone()], Agreement::ExactMatch).unwrap();
        let k = rot % pairs.len();
        r.predictions.rotate_left(k);
        r.baseline.as_mut().unwrap().predictions.rotate_left(k);
        prop_assert_eq!(before, loyalty(&[r], Agreement::ExactMatch).unwrap());
    }

    #[test]
    fn oe_is_unit_invariant(times in prop::collection::vec((1.0f64..100.0, 1.0f64..100.0), 1..6), unit in 1e-3f64..1e3) {
        let recs: Vec<EvalRecord> = times.iter().enumerate().map(|(i, &(t, tb))| common::record("c", "m", &format!("b{i}"), None, 1.0, 1.0, vec![], vec![], t, tb)).collect();
        let scaled: Vec<EvalRecord> = times.iter().enumerate().map(|(i, &(t, tb))| common::record("c", "m", &format!("b{i}"), None, 1.0, 1.0, vec![], vec![], t * unit, tb * unit)).collect();
        let (a, b) = (efficiency(&recs).unwrap(), efficiency(&scaled).unwrap());
        prop_assert!((a.oe - b.oe).abs() <= 1e-9 * a.oe);
    }

    #[test]
    fn token_f1_matches_oracle(a in "[abc ]{0,12}", b in "[abc ]{0,12}") {
        prop_assert!((token_f1(&a, &b) - oracle::token_f1(&a, &b)).abs() < 1e-12);
    }
}
