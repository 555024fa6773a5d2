//! Continuous speech synthesis.
//!
//! An isolated keyword recording is embedded into a two-second slice of
//! continuous background speech. Two windows built on the zeroth-order
//! modified Bessel function shape the insertion:
//!
//! * the keyword window `I0(b·√(1 − 4j²/(M−1)²)) / I0(b)` tapers the keyword,
//! * the background window `offset − keyword_window` (with its own shape
//!   parameter) carves a dip into the background, flanked by zero pads.
//!
//! Layout of one output sample of `out_len` samples:
//!
//! ```text
//! 0        k       k+pad              k+pad+kw_len      k+kw_len+2·pad   out_len
//! |--------|--pad--|------keyword------|------pad--------|----------------|
//!           \____________ background × bg_window _______/
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{max_energy_crop, pad_center, AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Zeroth-order modified Bessel function of the first kind.
///
/// Power series `Σ ((x/2)^k / k!)²`, summed until a term drops below 1e-16
/// of the running total.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let ratio = half / k;
        term *= ratio * ratio;
        sum += term;
        if term < sum * 1e-16 {
            return sum;
        }
        k += 1.0;
    }
}

/// Value of the keyword window of length `len` at offset `j` from its centre
/// (`j ∈ [−(len−1)/2, (len−1)/2]`).
///
/// For even lengths the centre falls between two samples; `j = 0` is still
/// well defined and evaluates to exactly 1.
pub fn kw_window_at(j: f64, len: usize, beta: f64) -> f64 {
    let half = (len as f64 - 1.0) / 2.0;
    let r = j / half;
    let arg = (1.0 - r * r).max(0.0).sqrt();
    bessel_i0(beta * arg) / bessel_i0(beta)
}

/// Sampled keyword window. Index `i` sits at `j = i − (len−1)/2`.
pub fn kw_window(len: usize, beta: f64) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::Config(format!("window length {len} < 2")));
    }
    if !(beta > 0.0) {
        return Err(Error::Config(format!("window shape {beta} must be positive")));
    }
    let half = (len as f64 - 1.0) / 2.0;
    let norm = bessel_i0(beta);
    Ok((0..len)
        .map(|i| {
            let r = (i as f64 - half) / half;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect())
}

/// How the flanks of the background window are filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    /// Pads are exactly zero.
    #[default]
    Literal,
    /// Pads ramp linearly from 1 at the outer edge to the core edge value.
    Ramp,
}

/// Background window: `pad` flank samples, then `offset − kw_window(core_len)`,
/// then `pad` flank samples.
pub fn bg_window(core_len: usize, pad: usize, beta: f64, offset: f64, mode: PadMode) -> Result<Vec<f64>> {
    let core = kw_window(core_len, beta)?;
    let edge = offset - core[0];
    let mut w = Vec::with_capacity(core_len + 2 * pad);
    let ramp = |i: usize| match mode {
        PadMode::Literal => 0.0,
        // i counts from the outer edge: 0 → 1.0, pad → edge value.
        PadMode::Ramp => 1.0 + (edge - 1.0) * (i as f64 / pad as f64),
    };
    let flank: Vec<f64> = (0..pad).map(ramp).collect();
    w.extend_from_slice(&flank);
    w.extend(core.iter().map(|c| offset - c));
    w.extend(flank.iter().rev());
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CssmParams {
    /// Output length in samples.
    pub out_len: usize,
    /// Keyword region length.
    pub kw_len: usize,
    /// Background-window flank on each side of the keyword region.
    pub pad: usize,
    pub beta_kw: f64,
    pub beta_bg: f64,
    pub bg_gain_offset: f64,
    /// Minimum distance between the carve region and either end of the output.
    pub bound: usize,
    #[serde(default)]
    pub pad_mode: PadMode,
}

impl Default for CssmParams {
    fn default() -> Self {
        Self {
            out_len: 32_000,
            kw_len: 16_000,
            pad: 2_000,
            beta_kw: 1.5,
            beta_bg: 2.5,
            bg_gain_offset: 1.05,
            bound: 2_000,
            pad_mode: PadMode::Literal,
        }
    }
}

impl CssmParams {
    /// Length of the carved background region, `kw_len + 2·pad`.
    pub fn carve_len(&self) -> usize {
        self.kw_len + 2 * self.pad
    }

    /// Inclusive range of valid insertion offsets.
    pub fn k_range(&self) -> (usize, usize) {
        (self.bound, self.out_len - (self.bound + self.carve_len()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.kw_len < 2 {
            return Err(Error::Config("kw_len must be at least 2".into()));
        }
        if self.carve_len() + 2 * self.bound > self.out_len {
            return Err(Error::Config(format!(
                "kw_len + 2·pad = {} does not fit in out_len − 2·bound = {}",
                self.carve_len(),
                self.out_len as i64 - 2 * self.bound as i64
            )));
        }
        if !(self.beta_kw > 0.0 && self.beta_bg > 0.0) {
            return Err(Error::Config("window shapes must be positive".into()));
        }
        Ok(())
    }

    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let (lo, hi) = self.k_range();
        rng.gen_range(lo..=hi)
    }
}

/// Full provenance of one synthesized sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRecipe {
    pub keyword_id: String,
    pub background_id: String,
    /// Offset of the background slice inside its source file.
    pub background_offset: usize,
    /// Offset of the max-energy crop inside the keyword file.
    pub keyword_offset: usize,
    pub k: usize,
    pub seed: u64,
    pub params: CssmParams,
    pub clamped_samples: usize,
}

/// Output of [`synthesize`].
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub clip: AudioClip,
    /// Number of samples that left `[-1, 1]` before saturation.
    pub clamped_samples: usize,
}

impl Synthesis {
    pub fn clamped(&self) -> bool {
        self.clamped_samples > 0
    }
}

/// Precomputed windows for one parameter set.
#[derive(Clone, Debug)]
pub struct Windows {
    pub keyword: Vec<f64>,
    pub background: Vec<f64>,
}

impl Windows {
    pub fn new(params: &CssmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            keyword: kw_window(params.kw_len, params.beta_kw)?,
            background: bg_window(
                params.kw_len,
                params.pad,
                params.beta_bg,
                params.bg_gain_offset,
                params.pad_mode,
            )?,
        })
    }
}

fn check_inputs(keyword: &AudioClip, background: &AudioClip, k: usize, params: &CssmParams) -> Result<()> {
    params.validate()?;
    keyword.require_rate(SAMPLE_RATE)?;
    background.require_rate(SAMPLE_RATE)?;
    if background.len() != params.out_len {
        return Err(Error::Length {
            what: "background slice",
            expected: params.out_len,
            found: background.len(),
        });
    }
    if keyword.len() != params.kw_len {
        return Err(Error::Length {
            what: "keyword",
            expected: params.kw_len,
            found: keyword.len(),
        });
    }
    let (lo, hi) = params.k_range();
    if !(lo..=hi).contains(&k) {
        return Err(Error::OffsetOutOfRange { offset: k, lo, hi });
    }
    Ok(())
}

/// Unclamped mix: background carved by the background window over
/// `[k, k + carve_len)`, plus the windowed keyword over
/// `[k + pad, k + pad + kw_len)`.
pub fn compose(
    keyword: &AudioClip,
    background: &AudioClip,
    k: usize,
    params: &CssmParams,
    windows: &Windows,
) -> Result<Vec<f64>> {
    check_inputs(keyword, background, k, params)?;
    let mut out: Vec<f64> = background.samples().iter().map(|&s| f64::from(s)).collect();
    for (o, w) in out[k..k + params.carve_len()].iter_mut().zip(&windows.background) {
        *o *= w;
    }
    let start = k + params.pad;
    for ((o, &s), w) in out[start..start + params.kw_len]
        .iter_mut()
        .zip(keyword.samples())
        .zip(&windows.keyword)
    {
        *o += f64::from(s) * w;
    }
    Ok(out)
}

/// Embeds `keyword` into `background` at offset `k` and saturates the result.
pub fn synthesize(keyword: &AudioClip, background: &AudioClip, k: usize, params: &CssmParams) -> Result<Synthesis> {
    let windows = Windows::new(params)?;
    synthesize_with(keyword, background, k, params, &windows)
}

/// Same as [`synthesize`] with windows computed once by the caller.
pub fn synthesize_with(
    keyword: &AudioClip,
    background: &AudioClip,
    k: usize,
    params: &CssmParams,
    windows: &Windows,
) -> Result<Synthesis> {
    let mixed = compose(keyword, background, k, params, windows)?;
    let (clip, clamped_samples) = AudioClip::saturating(mixed, SAMPLE_RATE)?;
    Ok(Synthesis { clip, clamped_samples })
}

/// Fits a raw keyword recording to `kw_len`: longer clips keep their
/// max-energy window, shorter ones are centre-padded. Returns the clip and the
/// crop offset (0 when padded).
pub fn prepare_keyword(raw: &AudioClip, kw_len: usize) -> Result<(AudioClip, usize)> {
    if raw.is_empty() {
        return Err(Error::EmptyClip);
    }
    if raw.len() >= kw_len {
        max_energy_crop(raw, kw_len)
    } else {
        Ok((pad_center(raw, kw_len)?, 0))
    }
}

/// Picks a uniformly random `out_len` slice of `source`.
pub fn slice_background<R: Rng + ?Sized>(source: &AudioClip, rng: &mut R, out_len: usize) -> Result<(AudioClip, usize)> {
    if source.len() < out_len {
        return Err(Error::TooShort {
            what: "background source",
            needed: out_len,
            found: source.len(),
        });
    }
    let n = rng.gen_range(0..=source.len() - out_len);
    Ok((source.slice(n, out_len)?, n))
}

/// Silence sample: a random two-second slice of a noise recording.
pub fn make_silence<R: Rng + ?Sized>(noise: &AudioClip, rng: &mut R) -> Result<AudioClip> {
    slice_background(noise, rng, CssmParams::default().out_len).map(|(c, _)| c)
}

/// Unknown sample: a random two-second background slice with noise mixed in
/// at gain `N·u`, `u ~ Uniform[0, 1)`.
pub fn make_unknown<R: Rng + ?Sized>(
    background: &AudioClip,
    noise: &AudioClip,
    noise_gain: f64,
    rng: &mut R,
) -> Result<AudioClip> {
    let out_len = CssmParams::default().out_len;
    if noise.len() < out_len {
        return Err(Error::TooShort {
            what: "noise source",
            needed: out_len,
            found: noise.len(),
        });
    }
    let (slice, _) = slice_background(background, rng, out_len)?;
    crate::augment::mix_noise(&slice, noise, noise_gain, rng).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // I0 via the integral (1/π)∫₀^π exp(x cos θ) dθ, trapezoid rule on a
    // periodic integrand.
    fn i0_quadrature(x: f64) -> f64 {
        let n = 4096;
        let h = std::f64::consts::PI / n as f64;
        let mut s = 0.5 * (x.exp() + (-x).exp());
        for i in 1..n {
            s += (x * (i as f64 * h).cos()).exp();
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn i0_matches_quadrature_and_reference() {
        for &x in &[0.0, 0.3, 1.0, 1.5, 2.5, 5.0, 10.0] {
            let q = i0_quadrature(x);
            assert!((bessel_i0(x) - q).abs() <= 1e-13 * q, "x = {x}");
        }
        assert!((bessel_i0(1.5) - 1.646_723_189_772_890_8).abs() < 1e-14);
        assert!((bessel_i0(2.5) - 3.289_839_144_050_123).abs() < 1e-14);
    }

    #[test]
    fn kw_window_shape() {
        let w = kw_window(16_000, 1.5).unwrap();
        assert_eq!(kw_window_at(0.0, 16_000, 1.5), 1.0);
        assert!((w[0] - 0.607_266_604_497_089_6).abs() < 1e-12);
        for i in 0..w.len() {
            assert!((w[i] - w[w.len() - 1 - i]).abs() <= 1e-12);
        }
        let odd = kw_window(101, 1.5).unwrap();
        assert_eq!(odd[50], 1.0);
        assert!(kw_window(1, 1.5).is_err());
    }

    #[test]
    fn bg_window_literal() {
        let w = bg_window(16_000, 2_000, 2.5, 1.05, PadMode::Literal).unwrap();
        assert_eq!(w.len(), 20_000);
        assert!(w[..2000].iter().chain(&w[18_000..]).all(|&v| v == 0.0));
        assert!((w[2000] - 0.746_033_770_584_631_3).abs() < 1e-12);
        assert!((w[19_999 - 2000] - w[2000]).abs() < 1e-15);
        let min = w[2000..18_000].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 0.05).abs() < 1e-8);
    }

    #[test]
    fn bg_window_ramp_is_symmetric_and_bounded() {
        let w = bg_window(100, 10, 2.5, 1.05, PadMode::Ramp).unwrap();
        assert_eq!(w.len(), 120);
        assert_eq!(w[0], 1.0);
        assert_eq!(w[119], 1.0);
        for i in 0..120 {
            assert_eq!(w[i], w[119 - i]);
        }
        assert!(w[..10].windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn synthesize_rejects_bad_offsets() {
        let p = CssmParams::default();
        let kw = AudioClip::zeros(p.kw_len, SAMPLE_RATE);
        let bg = AudioClip::zeros(p.out_len, SAMPLE_RATE);
        assert!(synthesize(&kw, &bg, 1999, &p).is_err());
        assert!(synthesize(&kw, &bg, 10_001, &p).is_err());
        assert!(synthesize(&kw, &bg, 10_000, &p).is_ok());
        let short = AudioClip::zeros(p.kw_len - 1, SAMPLE_RATE);
        assert!(matches!(synthesize(&short, &bg, 5000, &p), Err(Error::Length { .. })));
    }

    #[test]
    fn carve_center_scales_background() {
        let p = CssmParams::default();
        let kw = AudioClip::zeros(p.kw_len, SAMPLE_RATE);
        let bg = AudioClip::new(vec![0.5; p.out_len], SAMPLE_RATE).unwrap();
        let k = 4000;
        let out = synthesize(&kw, &bg, k, &p).unwrap();
        assert_eq!(out.clip.len(), 32_000);
        assert_eq!(out.clip.samples()[k - 1], 0.5);
        let centre = k + p.pad + p.kw_len / 2;
        assert!((f64::from(out.clip.samples()[centre]) - 0.05 * 0.5).abs() < 1e-6);
        assert!(!out.clamped());
    }

    #[test]
    fn clamping_is_reported() {
        let p = CssmParams::default();
        let kw = AudioClip::new(vec![1.0; p.kw_len], SAMPLE_RATE).unwrap();
        let bg = AudioClip::new(vec![1.0; p.out_len], SAMPLE_RATE).unwrap();
        let out = synthesize(&kw, &bg, 2000, &p).unwrap();
        assert!(out.clamped());
        assert!(out.clip.samples().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn slice_background_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let exact = AudioClip::zeros(32_000, SAMPLE_RATE);
        assert_eq!(slice_background(&exact, &mut rng, 32_000).unwrap().1, 0);
        let long = AudioClip::zeros(160_000, SAMPLE_RATE);
        for _ in 0..100 {
            let (s, n) = slice_background(&long, &mut rng, 32_000).unwrap();
            assert!(n <= 128_000);
            assert_eq!(s.len(), 32_000);
        }
        let a = slice_background(&long, &mut ChaCha8Rng::seed_from_u64(9), 32_000).unwrap().1;
        let b = slice_background(&long, &mut ChaCha8Rng::seed_from_u64(9), 32_000).unwrap().1;
        assert_eq!(a, b);
        assert!(slice_background(&AudioClip::zeros(100, SAMPLE_RATE), &mut rng, 32_000).is_err());
    }

    #[test]
    fn silence_is_verbatim_slice() {
        let src: Vec<f32> = (0..50_000).map(|i| ((i % 200) as f32 - 100.0) / 200.0).collect();
        let noise = AudioClip::new(src, SAMPLE_RATE).unwrap();
        let s = make_silence(&noise, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.len(), 32_000);
        let found = (0..=noise.len() - 32_000).any(|n| &noise.samples()[n..n + 32_000] == s.samples());
        assert!(found);
        let again = make_silence(&noise, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_with_zero_gain_is_background() {
        let bg = AudioClip::new((0..40_000).map(|i| (i as f32 * 1e-5).sin() * 0.3).collect(), SAMPLE_RATE).unwrap();
        let noise = AudioClip::new(vec![0.9; 40_000], SAMPLE_RATE).unwrap();
        let u = make_unknown(&bg, &noise, 0.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let (slice, _) = slice_background(&bg, &mut ChaCha8Rng::seed_from_u64(2), 32_000).unwrap();
        assert_eq!(u, slice);
    }

    #[test]
    fn prepare_keyword_crops_or_pads() {
        let mut v = vec![0.0f32; 20_000];
        v[19_000] = 0.9;
        let raw = AudioClip::new(v, SAMPLE_RATE).unwrap();
        let (kw, off) = prepare_keyword(&raw, 16_000).unwrap();
        assert_eq!(kw.len(), 16_000);
        assert!(off <= 19_000 && 19_000 < off + 16_000);
        let short = AudioClip::new(vec![0.5; 12_000], SAMPLE_RATE).unwrap();
        let (kw, off) = prepare_keyword(&short, 16_000).unwrap();
        assert_eq!((kw.len(), off), (16_000, 0));
        assert_eq!(kw.samples()[1_999], 0.0);
        assert_eq!(kw.samples()[2_000], 0.5);
    }
}
