//! Embeds a keyword into a continuous background and writes the result.
//!
//!     cargo run --example synthesize_continuous -- [keyword.wav background.wav out.wav]

use kwskit::audio::{load_wav, save_wav, AudioClip, SAMPLE_RATE};
use kwskit::cssm::{prepare_keyword, slice_background, synthesize, CssmParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kwskit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (keyword, background, out) = if args.len() == 3 {
        (load_wav(&args[0])?, load_wav(&args[1])?, args[2].clone())
    } else {
        let kw: Vec<f32> = (0..20_000)
            .map(|t| 0.5 * (t as f32 * 0.06).sin() * (std::f32::consts::PI * t as f32 / 20_000.0).sin())
            .collect();
        let bg: Vec<f32> = (0..48_000).map(|_| rng.gen_range(-0.1..0.1)).collect();
        (
            AudioClip::new(kw, SAMPLE_RATE)?,
            AudioClip::new(bg, SAMPLE_RATE)?,
            "continuous.wav".to_string(),
        )
    };

    let params = CssmParams::default();
    let (kw, kw_offset) = prepare_keyword(&keyword, params.kw_len)?;
    let (bg, bg_offset) = slice_background(&background, &mut rng, params.out_len)?;
    let k = params.sample_k(&mut rng);
    let synth = synthesize(&kw, &bg, k, &params)?;

    println!("keyword crop at {kw_offset}, background slice at {bg_offset}");
    println!(
        "keyword region [{}, {}), carve region [{k}, {})",
        k + params.pad,
        k + params.pad + params.kw_len,
        k + params.carve_len()
    );
    println!("clamped samples: {}", synth.clamped_samples);
    save_wav(&synth.clip, &out)?;
    println!("wrote {out}");
    Ok(())
}
