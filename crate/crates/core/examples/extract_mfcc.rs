//! MFCC feature map of a WAV file (or a synthetic chirp).
//!
//!     cargo run --example extract_mfcc -- [clip.wav]

use kwskit::audio::{load_wav, AudioClip, SAMPLE_RATE};
use kwskit::frontend::{FrontendConfig, Mfcc};

fn main() -> kwskit::Result<()> {
    let clip = match std::env::args().nth(1) {
        Some(p) => load_wav(p)?,
        None => {
            let v = (0..32_000)
                .map(|t| {
                    let s = t as f64 / f64::from(SAMPLE_RATE);
                    (0.3 * (2.0 * std::f64::consts::PI * (200.0 + 800.0 * s) * s).sin()) as f32
                })
                .collect();
            AudioClip::new(v, SAMPLE_RATE)?
        }
    };
    let mfcc = Mfcc::new(FrontendConfig::default())?;
    let fm = mfcc.compute(&clip)?;
    println!("{:.2} s -> {} frames x {} coefficients", clip.duration_secs(), fm.n_frames(), fm.n_coeffs());
    let first: Vec<String> = fm.row(0)[..6].iter().map(|v| format!("{v:.3}")).collect();
    println!("frame 0, c0..c5: {}", first.join(" "));
    fm.save("features.feat")?;
    println!("wrote features.feat");
    Ok(())
}
