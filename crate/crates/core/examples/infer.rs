//! Class distribution for one clip with seeded random weights.
//!
//!     cargo run --example infer -- [clip.wav [weights.bin]]

use kwskit::audio::{load_wav, AudioClip, SAMPLE_RATE};
use kwskit::dataset::ClassId;
use kwskit::frontend::{FrontendConfig, Mfcc};
use kwskit::model::{build_a0, forward, WeightSet};

fn main() -> kwskit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let clip = match args.first() {
        Some(p) => load_wav(p)?,
        None => AudioClip::new((0..32_000).map(|t| 0.3 * (t as f32 * 0.03).sin()).collect(), SAMPLE_RATE)?,
    };
    let arch = build_a0();
    let weights = match args.get(1) {
        Some(p) => WeightSet::load(p)?,
        None => WeightSet::init_seeded(&arch, 42),
    };
    let features = Mfcc::new(FrontendConfig::default())?.compute(&clip)?;
    let probs = forward(&arch, &weights, &features)?;
    let mut ranked: Vec<(usize, f64)> = probs.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (i, p) in ranked.iter().take(5) {
        println!("{:<12} {p:.4}", ClassId::new(*i)?.to_string());
    }
    Ok(())
}
