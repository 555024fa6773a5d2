//! Sliding-window cleaning of raw keyword recordings.
//!
//! A fixed-length window moves over the recording in `stride` steps; every
//! window is scored and the most confident one is kept if its probability
//! is strictly above the threshold.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::audio::{pad_center, quantize, AudioClip};
use crate::error::{Error, Result};
use crate::frontend::Mfcc;
use crate::model::{forward, Architecture, WeightSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanerConfig {
    pub win_len: usize,
    pub stride: usize,
    pub threshold: f64,
}

impl Default for CleanerConfig {
    fn default() -> Self {
        Self {
            win_len: 20_000,
            stride: 1_600,
            threshold: 0.97,
        }
    }
}

impl CleanerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.win_len {
            return Err(Error::Config(format!(
                "stride {} must be in 1..={}",
                self.stride, self.win_len
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        Ok(())
    }

    /// Offsets visited for a clip of `len` samples (after padding).
    pub fn offsets(&self, len: usize) -> impl Iterator<Item = usize> {
        let n = if len < self.win_len {
            0
        } else {
            1 + (len - self.win_len) / self.stride
        };
        let stride = self.stride;
        (0..n).map(move |i| i * stride)
    }
}

/// Which entry of a class-probability vector counts as "the keyword".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetClass {
    Index(usize),
    /// Largest probability among the first `n` classes.
    MaxOfFirst(usize),
}

impl TargetClass {
    pub fn select(&self, probs: &[f64]) -> Result<f64> {
        let p = match *self {
            TargetClass::Index(i) => probs.get(i).copied(),
            TargetClass::MaxOfFirst(n) => probs.iter().take(n).copied().reduce(f64::max),
        };
        let p = p.ok_or_else(|| Error::Scorer(format!("{} probabilities, target {self:?}", probs.len())))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Scorer(format!("probability {p} outside [0, 1]")));
        }
        Ok(p)
    }
}

/// Scores one window. Implementations may keep state between calls.
pub trait ClipScorer {
    /// Per-class probabilities for `window`.
    fn score(&mut self, window: &AudioClip) -> Result<Vec<f64>>;
}

impl<F> ClipScorer for F
where
    F: FnMut(&AudioClip) -> Result<Vec<f64>>,
{
    fn score(&mut self, window: &AudioClip) -> Result<Vec<f64>> {
        self(window)
    }
}

#[derive(Clone, Debug)]
pub struct BestWindow {
    pub window: AudioClip,
    pub offset: usize,
    pub prob: f64,
    pub evaluated: usize,
}

fn padded(clip: &AudioClip, cfg: &CleanerConfig) -> Result<AudioClip> {
    if clip.len() < cfg.win_len {
        pad_center(clip, cfg.win_len)
    } else {
        Ok(clip.clone())
    }
}

/// Scores every window and returns the most probable one; ties go to the
/// earliest offset. Clips shorter than a window are centre-padded first.
pub fn slide_best(
    clip: &AudioClip,
    scorer: &mut dyn ClipScorer,
    target: TargetClass,
    cfg: &CleanerConfig,
) -> Result<BestWindow> {
    cfg.validate()?;
    if clip.is_empty() {
        return Err(Error::EmptyClip);
    }
    let clip = padded(clip, cfg)?;
    let mut best: Option<BestWindow> = None;
    let mut evaluated = 0;
    for offset in cfg.offsets(clip.len()) {
        let window = clip.slice(offset, cfg.win_len)?;
        let prob = target.select(&scorer.score(&window)?)?;
        evaluated += 1;
        if best.as_ref().map_or(true, |b| prob > b.prob) {
            best = Some(BestWindow {
                window,
                offset,
                prob,
                evaluated: 0,
            });
        }
    }
    let mut best = best.expect("padded clip has at least one window");
    best.evaluated = evaluated;
    Ok(best)
}

/// Outcome of cleaning one recording.
#[derive(Clone, Debug)]
pub struct CleanOutcome {
    pub best: BestWindow,
    pub accepted: bool,
}

impl CleanOutcome {
    pub fn accepted_window(&self) -> Option<&AudioClip> {
        self.accepted.then_some(&self.best.window)
    }
}

/// Runs [`slide_best`] and accepts the window only when its probability is
/// strictly above the threshold.
pub fn clean_clip(
    clip: &AudioClip,
    scorer: &mut dyn ClipScorer,
    target: TargetClass,
    cfg: &CleanerConfig,
) -> Result<CleanOutcome> {
    let best = slide_best(clip, scorer, target, cfg)?;
    let accepted = best.prob > cfg.threshold;
    Ok(CleanOutcome { best, accepted })
}

/// Scores windows with the keyword model on their MFCC features.
pub struct ModelScorer<'a> {
    pub arch: &'a Architecture,
    pub weights: &'a WeightSet,
    pub frontend: &'a Mfcc,
}

impl ClipScorer for ModelScorer<'_> {
    fn score(&mut self, window: &AudioClip) -> Result<Vec<f64>> {
        let features = self.frontend.compute(window)?;
        forward(self.arch, self.weights, &features)
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    sample_rate: u32,
    pcm: &'a str,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScoreResponse {
    Bare(Vec<f64>),
    Wrapped { probs: Vec<f64> },
}

/// Delegates scoring to an external process over newline-delimited JSON.
///
/// Each request is `{"sample_rate": 16000, "pcm": "<base64 PCM16 LE>"}`;
/// the process answers with one line holding either a JSON array of class
/// probabilities or `{"probs": [...]}`.
pub struct SubprocessScorer {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl SubprocessScorer {
    /// Spawns `program args…` with piped stdio.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Scorer(format!("spawning {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { child, stdin, stdout })
    }

    pub fn encode_window(window: &AudioClip) -> String {
        let mut bytes = Vec::with_capacity(window.len() * 2);
        for &s in window.samples() {
            bytes.extend_from_slice(&quantize(s).to_le_bytes());
        }
        base64::engine::general_purpose::STANDARD.encode(bytes)
    }
}

impl ClipScorer for SubprocessScorer {
    fn score(&mut self, window: &AudioClip) -> Result<Vec<f64>> {
        let pcm = Self::encode_window(window);
        let mut line = serde_json::to_string(&ScoreRequest {
            sample_rate: window.sample_rate(),
            pcm: &pcm,
        })?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Scorer(format!("writing request: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::Scorer(format!("reading response: {e}")))?;
        if n == 0 {
            return Err(Error::Scorer("scorer process closed its output".into()));
        }
        let parsed: ScoreResponse = serde_json::from_str(reply.trim())
            .map_err(|e| Error::Scorer(format!("bad response {:?}: {e}", reply.trim())))?;
        Ok(match parsed {
            ScoreResponse::Bare(p) | ScoreResponse::Wrapped { probs: p } => p,
        })
    }
}

impl Drop for SubprocessScorer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
