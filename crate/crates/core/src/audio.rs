//! Mono PCM clips and the time-domain primitives shared by the cleaning and
//! synthesis paths.
//!
//! Samples are stored as `f32` amplitudes in `[-1, 1]`. The interchange
//! format on disk is RIFF/WAVE, PCM16 little-endian, mono, 16 kHz.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sample rate every pipeline operation expects.
pub const SAMPLE_RATE: u32 = 16_000;

const PCM16_SCALE: f32 = 32_768.0;

/// Immutable mono clip. Cloning is cheap; the sample buffer is shared.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Arc<[f32]>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting non-finite samples or amplitudes above 1.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(Error::BadSample { index, value });
        }
        Ok(Self {
            samples: samples.into(),
            sample_rate,
        })
    }

    /// Builds a clip after saturating every sample into `[-1, 1]`.
    ///
    /// Returns the clip and the number of samples that had to be clamped.
    /// Non-finite values are still rejected.
    pub fn saturating(samples: impl IntoIterator<Item = f64>, sample_rate: u32) -> Result<(Self, usize)> {
        let mut clamped = 0;
        let mut out = Vec::new();
        for (index, v) in samples.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadSample {
                    index,
                    value: v as f32,
                });
            }
            if v.abs() > 1.0 {
                clamped += 1;
            }
            out.push(v.clamp(-1.0, 1.0) as f32);
        }
        Ok((Self::new(out, sample_rate)?, clamped))
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len].into(),
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum()
    }

    /// Copies `[start, start + len)` into a new clip.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start.checked_add(len).filter(|&e| e <= self.len()).ok_or(
            Error::TooShort {
                what: "clip",
                needed: start.saturating_add(len),
                found: self.len(),
            },
        )?;
        Ok(Self {
            samples: self.samples[start..end].into(),
            sample_rate: self.sample_rate,
        })
    }

    pub(crate) fn require_rate(&self, expected: u32) -> Result<()> {
        if self.sample_rate != expected {
            return Err(Error::SampleRate {
                expected,
                found: self.sample_rate,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Linearly resample inputs that are not at [`SAMPLE_RATE`] instead of
    /// rejecting them.
    pub resample: bool,
}

/// Loads a PCM16 WAV file as a mono 16 kHz clip.
///
/// Integer samples are divided by 32768; multi-channel frames are averaged.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    load_wav_with(path, LoadOptions::default())
}

pub fn load_wav_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<AudioClip> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("{:?} {}-bit", spec.sample_format, spec.bits_per_sample),
        });
    }
    let channels = usize::from(spec.channels.max(1));
    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wav_err)?;
    let mono: Vec<f32> = raw
        .chunks(channels)
        .map(|frame| {
            let sum: f32 = frame.iter().map(|&s| f32::from(s) / PCM16_SCALE).sum();
            sum / frame.len() as f32
        })
        .collect();

    let clip = AudioClip::new(mono, spec.sample_rate)?;
    if clip.sample_rate() == SAMPLE_RATE {
        Ok(clip)
    } else if opts.resample {
        Ok(resample_linear(&clip, SAMPLE_RATE))
    } else {
        Err(Error::SampleRate {
            expected: SAMPLE_RATE,
            found: clip.sample_rate(),
        })
    }
}

/// Writes a PCM16 mono WAV. Amplitudes are rounded to the nearest step and
/// saturate at the integer range.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if clip.is_empty() {
        return Err(Error::EmptyClip);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in clip.samples() {
        writer.write_sample(quantize(s)).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

pub(crate) fn quantize(s: f32) -> i16 {
    (s * PCM16_SCALE)
        .round()
        .clamp(f32::from(i16::MIN), f32::from(i16::MAX)) as i16
}

/// Linear-interpolation resampler; only used behind [`LoadOptions::resample`].
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> AudioClip {
    if clip.sample_rate() == target_rate || clip.is_empty() {
        return AudioClip {
            samples: clip.samples.clone(),
            sample_rate: target_rate,
        };
    }
    let src = clip.samples();
    let ratio = f64::from(clip.sample_rate()) / f64::from(target_rate);
    let out_len = ((src.len() as f64) / ratio).round().max(1.0) as usize;
    let out = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = (pos.floor() as usize).min(src.len() - 1);
            let hi = (lo + 1).min(src.len() - 1);
            let frac = pos - lo as f64;
            (f64::from(src[lo]) * (1.0 - frac) + f64::from(src[hi]) * frac) as f32
        })
        .collect::<Vec<_>>();
    AudioClip {
        samples: out.into(),
        sample_rate: target_rate,
    }
}

/// Zero-pads a clip to `target_len`, splitting the padding equally; an odd
/// remainder goes to the end.
pub fn pad_center(clip: &AudioClip, target_len: usize) -> Result<AudioClip> {
    if clip.len() > target_len {
        return Err(Error::Length {
            what: "pad_center input (longer than target)",
            expected: target_len,
            found: clip.len(),
        });
    }
    if clip.len() == target_len {
        return Ok(clip.clone());
    }
    let total = target_len - clip.len();
    let front = total / 2;
    let mut out = vec![0.0f32; target_len];
    out[front..front + clip.len()].copy_from_slice(clip.samples());
    Ok(AudioClip {
        samples: out.into(),
        sample_rate: clip.sample_rate(),
    })
}

/// Finds the `crop_len` window with the largest sum of squares.
///
/// Scans every offset with a running sum; ties go to the smallest offset.
pub fn max_energy_crop(clip: &AudioClip, crop_len: usize) -> Result<(AudioClip, usize)> {
    if crop_len == 0 {
        return Err(Error::Config("crop length must be positive".into()));
    }
    let offset = max_energy_offset(clip.samples(), crop_len).ok_or(Error::TooShort {
        what: "clip",
        needed: crop_len,
        found: clip.len(),
    })?;
    Ok((clip.slice(offset, crop_len)?, offset))
}

fn max_energy_offset(samples: &[f32], len: usize) -> Option<usize> {
    if samples.len() < len {
        return None;
    }
    let sq = |s: f32| f64::from(s) * f64::from(s);
    let mut prefix = Vec::with_capacity(samples.len() + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0;
    for &s in samples {
        acc += sq(s);
        prefix.push(acc);
    }
    // Window sums carry rounding on the order of ulp(total); a later window
    // must beat the incumbent by more than that to count as larger.
    let tie_tol = acc * 1e-12;
    let mut best = 0;
    let mut best_energy = prefix[len] - prefix[0];
    for start in 1..=samples.len() - len {
        let e = prefix[start + len] - prefix[start];
        if e > best_energy + tie_tol {
            best_energy = e;
            best = start;
        }
    }
    Some(best)
}
