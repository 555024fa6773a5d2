//! Compound scaling grid, predicted sizes and the stage-table probe.

use kwskit::model::{build_a0, build_b0, count_params, REFERENCE_PARAMS};
use kwskit::scaling::{apply_scaling, consistency_probe, enumerate_candidates, SearchSpec};

fn main() -> kwskit::Result<()> {
    let spec = SearchSpec::default();
    let cands = enumerate_candidates(&spec)?;
    let (lo, hi) = (spec.target.to_f64() - spec.tol.to_f64(), spec.target.to_f64() + spec.tol.to_f64());
    println!("{} candidates with alpha*beta^2 in [{lo:.3}, {hi:.3}]", cands.len());

    let b0 = build_b0();
    let mut sized: Vec<_> = cands.iter().map(|c| (c, count_params(&apply_scaling(&b0, c)))).collect();
    sized.sort_by_key(|(_, p)| p.abs_diff(REFERENCE_PARAMS));
    println!("closest to {REFERENCE_PARAMS} parameters:");
    for (c, p) in sized.iter().take(5) {
        println!("  alpha {} beta {} -> {p}", c.alpha, c.beta);
    }

    let probes = consistency_probe(&b0, &build_a0(), &cands);
    for p in probes.iter().filter(|p| p.within_one_step()) {
        println!(
            "alpha {} beta {} matches the compact stage table within 8 channels (skips stages {:?})",
            p.candidate.alpha, p.candidate.beta, p.dropped_stages
        );
    }
    Ok(())
}
