//! OP, OG, OL and OE from hand-written evaluation records.

use vlcbench::metrics::*;

fn rec(method: &str, bench: &str, score: f64, base: f64, preds: &[&str], base_preds: &[&str], time: f64) -> EvalRecord {
    EvalRecord {
        method: method.into(),
        model: "toy".into(),
        benchmark: bench.into(),
        budget: Some(0.1),
        score,
        predictions: preds.iter().map(|s| s.to_string()).collect(),
        time,
        ttft: time * 0.4,
        decode: time * 0.6,
        baseline: Some(Baseline {
            score: base,
            predictions: base_preds.iter().map(|s| s.to_string()).collect(),
            time: 10.0,
            ttft: 6.0,
            decode: 4.0,
        }),
    }
}

fn main() -> vlcbench::Result<()> {
    let records = vec![
        rec("pruned", "docs", 0.60, 0.80, &["a b", "c", "d"], &["a b", "c", "e"], 4.0),
        rec("pruned", "charts", 0.70, 0.70, &["x", "y z", "w"], &["x", "y", "w"], 5.0),
        rec("pruned", "scenes", 0.30, 0.60, &["p", "q", "r"], &["s", "q", "t"], 2.5),
    ];
    println!("OP  {:.4}", overall_performance(&records)?);
    println!("OG  {:.4}", generalization(&records)?);
    println!("OL  {:.4} (exact match)", loyalty(&records, Agreement::ExactMatch)?);
    println!("OL  {:.4} (token F1 >= 0.5)", loyalty(&records, Agreement::token_f1())?);
    let e = efficiency(&records)?;
    println!("OE  {:.3}  (ttft {:.3}, decode {:.3})", e.oe, e.ttft, e.decode);
    Ok(())
}
