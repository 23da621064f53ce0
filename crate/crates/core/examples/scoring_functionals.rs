//! The four attention scoring functionals on a small causal matrix.

use vlcbench::kv::{score, ScoringFunctional};
use vlcbench::sim::{AttentionMatrix, Spans};

fn main() -> vlcbench::Result<()> {
    // 3 visual tokens then 2 text tokens
    let spans = Spans::new(3, 2);
    #[rustfmt::skip]
    let a = AttentionMatrix::from_rows(5, vec![
        1.0, 0.0, 0.0, 0.0, 0.0,
        0.6, 0.4, 0.0, 0.0, 0.0,
        0.5, 0.2, 0.3, 0.0, 0.0,
        0.4, 0.1, 0.3, 0.2, 0.0,
        0.5, 0.0, 0.1, 0.1, 0.3,
    ]);
    for f in [
        ScoringFunctional::Acc,
        ScoringFunctional::Norm,
        ScoringFunctional::SlidingWindow { window: 2 },
        ScoringFunctional::PostVision,
    ] {
        let s = score(f, &a, spans)?;
        let shown: Vec<String> = s.iter().map(|x| format!("{x:.3}")).collect();
        println!("{:<36} [{}]", format!("{f:?}"), shown.join(", "));
    }
    Ok(())
}
