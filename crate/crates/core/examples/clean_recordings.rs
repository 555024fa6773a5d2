//! Sliding-window cleaning with a pluggable scorer.
//!
//! The scorer here is a toy energy detector; swap in `ModelScorer` or
//! `SubprocessScorer` for real use.

use kwskit::audio::{AudioClip, SAMPLE_RATE};
use kwskit::cleaner::{clean_clip, CleanerConfig, TargetClass};

fn energy_scorer(window: &AudioClip) -> kwskit::Result<Vec<f64>> {
    let e = window.energy();
    let p = e / (e + 20.0);
    let mut probs = vec![(1.0 - p) / 19.0; 20];
    probs[0] = p;
    Ok(probs)
}

fn main() -> kwskit::Result<()> {
    let cfg = CleanerConfig::default();
    for (name, burst_at, amp) in [("loud", 30_000, 0.9f32), ("quiet", 10_000, 0.2)] {
        let mut v = vec![0.0f32; 64_000];
        for (i, s) in v[burst_at..burst_at + 8_000].iter_mut().enumerate() {
            *s = amp * (i as f32 * 0.1).sin();
        }
        let clip = AudioClip::new(v, SAMPLE_RATE)?;
        let out = clean_clip(&clip, &mut energy_scorer, TargetClass::Index(0), &cfg)?;
        println!(
            "{name}: best window at {} of {} scored, p = {:.4}, {}",
            out.best.offset,
            out.best.evaluated,
            out.best.prob,
            if out.accepted { "accepted" } else { "rejected" }
        );
    }
    Ok(())
}
