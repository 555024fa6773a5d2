//! Training-time augmentation: SpecAugment-style band masking on feature maps
//! and additive noise on waveforms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::frontend::FeatureMap;

/// What masked cells are filled with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskFill {
    #[default]
    Zero,
    /// Mean of the whole input map.
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    /// Maximum frequency-mask width in coefficient bins.
    pub max_freq_width: usize,
    /// Maximum time-mask width in frames.
    pub max_time_width: usize,
    pub p_freq: f64,
    pub p_time: f64,
    pub fill: MaskFill,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        Self {
            max_freq_width: 5,
            max_time_width: 8,
            p_freq: 0.5,
            p_time: 0.5,
            fill: MaskFill::Zero,
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self, n_coeffs: usize) -> Result<()> {
        if self.max_freq_width > n_coeffs {
            return Err(Error::Config(format!(
                "frequency mask width {} exceeds {} coefficients",
                self.max_freq_width, n_coeffs
            )));
        }
        for p in [self.p_freq, self.p_time] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A contiguous band `[start, start + width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub start: usize,
    pub width: usize,
}

/// Masks drawn for one sample. `None` means the axis was not masked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskDraw {
    pub freq: Option<Band>,
    pub time: Option<Band>,
}

impl MaskDraw {
    /// Number of distinct cells covered by the drawn bands.
    pub fn covered_cells(&self, n_frames: usize, n_coeffs: usize) -> usize {
        let f = self.freq.map_or(0, |b| b.width);
        let t = self.time.map_or(0, |b| b.width);
        f * n_frames + t * n_coeffs - f * t
    }
}

fn draw_band<R: Rng + ?Sized>(rng: &mut R, max_width: usize, extent: usize) -> Band {
    let width = rng.gen_range(0..=max_width.min(extent));
    let start = rng.gen_range(0..=extent - width);
    Band { start, width }
}

/// Draws one frequency band and one time band according to `policy`.
///
/// Each axis is masked independently with its own probability; widths are
/// uniform on `0..=max` and starts uniform over valid positions.
pub fn draw_masks<R: Rng + ?Sized>(policy: &MaskPolicy, n_frames: usize, n_coeffs: usize, rng: &mut R) -> MaskDraw {
    let freq = rng
        .gen_bool(policy.p_freq)
        .then(|| draw_band(rng, policy.max_freq_width, n_coeffs));
    let time = rng
        .gen_bool(policy.p_time)
        .then(|| draw_band(rng, policy.max_time_width, n_frames));
    MaskDraw { freq, time }
}

/// Applies already-drawn masks.
pub fn apply_masks(features: &FeatureMap, draw: &MaskDraw, fill: MaskFill) -> FeatureMap {
    let value = match fill {
        MaskFill::Zero => 0.0,
        MaskFill::Mean => features.mean() as f32,
    };
    let mut out = features.clone();
    let n_coeffs = out.n_coeffs();
    if let Some(b) = draw.freq {
        for row in 0..out.n_frames() {
            out.row_mut(row)[b.start..b.start + b.width].fill(value);
        }
    }
    if let Some(b) = draw.time {
        for row in b.start..b.start + b.width {
            out.row_mut(row)[..n_coeffs].fill(value);
        }
    }
    out
}

/// SpecAugment with one frequency mask and one time mask per sample.
pub fn spec_augment<R: Rng + ?Sized>(
    features: &FeatureMap,
    policy: &MaskPolicy,
    rng: &mut R,
) -> Result<(FeatureMap, MaskDraw)> {
    if features.n_frames() == 0 || features.n_coeffs() == 0 {
        return Err(Error::Shape("empty feature map".into()));
    }
    policy.validate(features.n_coeffs())?;
    let draw = draw_masks(policy, features.n_frames(), features.n_coeffs(), rng);
    Ok((apply_masks(features, &draw, policy.fill), draw))
}

/// Random parameters of one noise mix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    /// Start of the noise slice.
    pub offset: usize,
    /// Applied gain `s = N·u`.
    pub gain: f64,
}

/// `clip[i] + gain·noise[offset + i]`, before saturation.
pub fn mix_noise_raw(clip: &AudioClip, noise: &AudioClip, draw: NoiseDraw) -> Result<Vec<f64>> {
    if draw.offset + clip.len() > noise.len() {
        return Err(Error::TooShort {
            what: "noise",
            needed: draw.offset + clip.len(),
            found: noise.len(),
        });
    }
    Ok(clip
        .samples()
        .iter()
        .zip(&noise.samples()[draw.offset..])
        .map(|(&c, &n)| f64::from(c) + draw.gain * f64::from(n))
        .collect())
}

/// Adds a random slice of `noise` scaled by `N·u`, `u ~ Uniform[0, 1)`, and
/// saturates to `[-1, 1]`.
pub fn mix_noise<R: Rng + ?Sized>(
    clip: &AudioClip,
    noise: &AudioClip,
    noise_gain: f64,
    rng: &mut R,
) -> Result<(AudioClip, NoiseDraw)> {
    if noise.len() < clip.len() {
        return Err(Error::TooShort {
            what: "noise",
            needed: clip.len(),
            found: noise.len(),
        });
    }
    let offset = rng.gen_range(0..=noise.len() - clip.len());
    let gain = noise_gain * rng.gen::<f64>();
    let draw = NoiseDraw { offset, gain };
    if gain == 0.0 {
        return Ok((clip.clone(), draw));
    }
    let mixed = mix_noise_raw(clip, noise, draw)?;
    let (out, _) = AudioClip::saturating(mixed, clip.sample_rate())?;
    Ok((out, draw))
}
