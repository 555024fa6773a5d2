//! Inverse-frequency class weights and the weighted cross-entropy loss.

use kwskit::dataset::{ClassId, Split};
use kwskit::model::{class_weights_from_counts, weighted_xent, xent_grad};

fn main() -> kwskit::Result<()> {
    // silence and unknown have no train counts; use their test-split size
    let counts: Vec<u64> = ClassId::all()
        .map(|c| u64::from(c.info().train.unwrap_or(Split::Test.reference_count(c))))
        .collect();
    let weights = class_weights_from_counts(&counts)?;
    for (c, w) in ClassId::all().zip(weights.as_slice()).take(6) {
        println!("{:<12} {w:.4}", c.to_string());
    }
    let logits: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
    let label = 5;
    println!("loss {:.6}", weighted_xent(&logits, label, &weights)?);
    let grad = xent_grad(&logits, label, &weights)?;
    println!("grad[{label}] {:.6}, sum {:.1e}", grad[label], grad.iter().sum::<f64>());
    Ok(())
}
