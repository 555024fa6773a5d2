//! SpecAugment masks on a feature map and additive noise on a waveform.

use kwskit::audio::{AudioClip, SAMPLE_RATE};
use kwskit::augment::{mix_noise, spec_augment, MaskPolicy};
use kwskit::frontend::{FrontendConfig, Mfcc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kwskit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let speech = AudioClip::new((0..32_000).map(|t| 0.4 * (t as f32 * 0.05).sin()).collect(), SAMPLE_RATE)?;
    let noise = AudioClip::new((0..80_000).map(|_| rng.gen_range(-0.5..0.5)).collect(), SAMPLE_RATE)?;

    let (noisy, draw) = mix_noise(&speech, &noise, 0.12, &mut rng)?;
    println!("noise slice at {}, gain {:.4}", draw.offset, draw.gain);

    let fm = Mfcc::new(FrontendConfig::default())?.compute(&noisy)?;
    let policy = MaskPolicy::default();
    for i in 0..5 {
        let (masked, draw) = spec_augment(&fm, &policy, &mut rng)?;
        let zeros = masked.values().iter().filter(|&&v| v == 0.0).count();
        println!("draw {i}: freq {:?}, time {:?}, {zeros} cells zeroed", draw.freq, draw.time);
    }
    Ok(())
}
