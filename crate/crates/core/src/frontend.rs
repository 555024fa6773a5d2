//! MFCC frontend.
//!
//! Per 30 ms frame (10 ms hop): periodic Hann taper, zero-padded 512-point
//! power spectrum, 40 triangular mel filters between 20 Hz and 4 kHz,
//! natural log with a floor, orthonormal DCT-II, first 40 coefficients.
//! The band limit lives in the filterbank edges; there is no time-domain
//! filter.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    /// Frame length in samples.
    pub frame_len: usize,
    /// Hop in samples.
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            frame_len: 480,
            hop: 160,
            n_fft: 512,
            n_mels: 40,
            n_mfcc: 40,
            fmin: 20.0,
            fmax: 4000.0,
            log_floor: 1e-10,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return Err(Error::Config(format!("fmin {} must be below fmax {}", self.fmin, self.fmax)));
        }
        if self.fmax > nyquist {
            return Err(Error::Config(format!("fmax {} above Nyquist {}", self.fmax, nyquist)));
        }
        if self.n_mfcc > self.n_mels || self.n_mfcc == 0 {
            return Err(Error::Config(format!(
                "n_mfcc {} must be in 1..={}",
                self.n_mfcc, self.n_mels
            )));
        }
        if self.frame_len == 0 || self.hop == 0 {
            return Err(Error::Config("frame length and hop must be positive".into()));
        }
        if self.n_fft < self.frame_len.next_power_of_two() {
            return Err(Error::Config(format!(
                "n_fft {} below {}",
                self.n_fft,
                self.frame_len.next_power_of_two()
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log floor must be positive".into()));
        }
        Ok(())
    }

    /// `1 + ⌊(n − frame_len) / hop⌋`, or 0 when the clip is shorter than a frame.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.frame_len {
            0
        } else {
            1 + (n_samples - self.frame_len) / self.hop
        }
    }
}

/// Row-major `frames × coefficients` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    values: Vec<f32>,
    n_frames: usize,
    n_coeffs: usize,
}

impl FeatureMap {
    pub fn new(values: Vec<f32>, n_frames: usize, n_coeffs: usize) -> Result<Self> {
        if values.len() != n_frames * n_coeffs {
            return Err(Error::Shape(format!(
                "{} values for a {}×{} map",
                values.len(),
                n_frames,
                n_coeffs
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("feature map contains non-finite values".into()));
        }
        Ok(Self {
            values,
            n_frames,
            n_coeffs,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.values[frame * self.n_coeffs..(frame + 1) * self.n_coeffs]
    }

    pub(crate) fn row_mut(&mut self, frame: usize) -> &mut [f32] {
        &mut self.values[frame * self.n_coeffs..(frame + 1) * self.n_coeffs]
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|&v| f64::from(v)).sum::<f64>() / self.values.len() as f64
    }

    /// Binary layout: frames and coefficients as `u32` little-endian, then
    /// the values as row-major `f32` little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.n_frames as u32).to_le_bytes())?;
        w.write_all(&(self.n_coeffs as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Format(format!("feature file: {e}")))?;
        if bytes.len() < 8 {
            return Err(Error::Format("feature file shorter than its header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (frames, coeffs) = (word(0), word(4));
        let body = &bytes[8..];
        if body.len() != frames * coeffs * 4 {
            return Err(Error::Format(format!(
                "feature file body is {} bytes, header says {}×{}",
                body.len(),
                frames,
                coeffs
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(values, frames, coeffs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// One line per frame, comma-separated coefficients.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for f in 0..self.n_frames {
            let row: Vec<String> = self.row(f).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters, `n_mels × (n_fft/2 + 1)` row-major.
///
/// Filter `m` rises from edge `m` to peak `m+1` and falls to edge `m+2`,
/// where the `n_mels + 2` edges are uniform in mel between `fmin` and `fmax`.
/// Weights are evaluated at each bin's centre frequency; peak weight is 1.
pub fn mel_filterbank(config: &FrontendConfig, n_fft: usize) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if n_fft < config.frame_len.next_power_of_two() {
        return Err(Error::Config(format!("n_fft {n_fft} too small for frame")));
    }
    let n_bins = n_fft / 2 + 1;
    let sr = f64::from(config.sample_rate);
    let (lo, hi) = (hz_to_mel(config.fmin), hz_to_mel(config.fmax));
    let edges: Vec<f64> = (0..config.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (config.n_mels + 1) as f64))
        .collect();
    let bin_hz = |b: usize| b as f64 * sr / n_fft as f64;

    let mut bank = Vec::with_capacity(config.n_mels);
    for m in 0..config.n_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = (0..n_bins)
            .map(|b| {
                let f = bin_hz(b);
                let up = (f - left) / (centre - left);
                let down = (right - f) / (right - centre);
                up.min(down).max(0.0)
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(Error::Config(format!(
                "mel filter {m} ({left:.1}–{right:.1} Hz) covers no FFT bin"
            )));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Periodic Hann window of length `n`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Orthonormal DCT-II basis, `n_out × n_in`.
fn dct_basis(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_in)
                .map(|i| scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                .collect()
        })
        .collect()
}

/// Reusable MFCC extractor: filterbank, window, DCT basis and FFT plan are
/// built once.
pub struct Mfcc {
    config: FrontendConfig,
    window: Vec<f64>,
    filterbank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl Mfcc {
    pub fn new(config: FrontendConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = mel_filterbank(&config, config.n_fft)?;
        Ok(Self {
            window: hann_periodic(config.frame_len),
            dct: dct_basis(config.n_mels, config.n_mfcc),
            fft: FftPlanner::new().plan_fft_forward(config.n_fft),
            filterbank,
            config,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.config
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<FeatureMap> {
        let cfg = &self.config;
        clip.require_rate(cfg.sample_rate)?;
        let n_frames = cfg.n_frames(clip.len());
        if n_frames == 0 {
            return Err(Error::TooShort {
                what: "clip",
                needed: cfg.frame_len,
                found: clip.len(),
            });
        }
        let n_bins = cfg.n_fft / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
        let mut power = vec![0.0; n_bins];
        let mut log_mel = vec![0.0; cfg.n_mels];
        let mut values = Vec::with_capacity(n_frames * cfg.n_mfcc);
        let samples = clip.samples();

        for f in 0..n_frames {
            let frame = &samples[f * cfg.hop..f * cfg.hop + cfg.frame_len];
            for (i, c) in buf.iter_mut().enumerate() {
                let v = if i < cfg.frame_len {
                    f64::from(frame[i]) * self.window[i]
                } else {
                    0.0
                };
                *c = Complex::new(v, 0.0);
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (l, filt) in log_mel.iter_mut().zip(&self.filterbank) {
                let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                *l = e.max(cfg.log_floor).ln();
            }
            for basis in &self.dct {
                let c: f64 = basis.iter().zip(&log_mel).map(|(b, l)| b * l).sum();
                values.push(c as f32);
            }
        }
        FeatureMap::new(values, n_frames, cfg.n_mfcc)
    }
}

/// One-shot MFCC extraction.
pub fn mfcc(clip: &AudioClip, config: &FrontendConfig) -> Result<FeatureMap> {
    Mfcc::new(*config)?.compute(clip)
}
