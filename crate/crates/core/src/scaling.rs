//! Compound scaling-down search.
//!
//! Depth and width multipliers `(α, β)` are swept over an exact decimal grid
//! and kept when `α·β²·γ²` lies within `target ± tol` (inclusive). Grid
//! values are fixed-point integers, so no pair flips in or out of the band
//! through binary rounding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Architecture, Operator};

/// Fixed-point decimal with four fractional digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(i64);

impl Decimal {
    pub const SCALE: i64 = 10_000;
    pub const ONE: Decimal = Decimal(Self::SCALE);

    pub const fn from_units(units: i64) -> Self {
        Self(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl FromStr for Decimal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("'{s}' is not a decimal with at most 4 fractional digits"));
        let t = s.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if (int.is_empty() && frac.is_empty())
            || frac.len() > 4
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_units: i64 = format!("{frac:0<4}").parse().map_err(|_| bad())?;
        let v = int.checked_mul(Self::SCALE).and_then(|v| v.checked_add(frac_units)).ok_or_else(bad)?;
        Ok(Self(if neg { -v } else { v }))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        let int = a / Self::SCALE as u64;
        let frac = format!("{:04}", a % Self::SCALE as u64);
        let frac = frac.trim_end_matches('0');
        let frac = if frac.len() < 2 { format!("{frac:0<2}") } else { frac.to_string() };
        write!(f, "{sign}{int}.{frac}")
    }
}

impl Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub range_lo: Decimal,
    pub range_hi: Decimal,
    pub step: Decimal,
    pub target: Decimal,
    pub tol: Decimal,
    pub gamma: Decimal,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            range_lo: Decimal(2_500),
            range_hi: Decimal(6_000),
            step: Decimal(100),
            target: Decimal(500),
            tol: Decimal(30),
            gamma: Decimal::ONE,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.range_lo >= self.range_hi {
            return Err(Error::Config(format!("range {}..{} is empty", self.range_lo, self.range_hi)));
        }
        if self.step.0 <= 0 || self.tol.0 < 0 || self.range_lo.0 <= 0 || self.gamma.0 <= 0 {
            return Err(Error::Config("step, range and gamma must be positive; tol non-negative".into()));
        }
        Ok(())
    }

    /// `lo, lo + step, …` up to and including `hi`.
    pub fn grid(&self) -> Vec<Decimal> {
        (0..)
            .map(|i| Decimal(self.range_lo.0 + i * self.step.0))
            .take_while(|v| *v <= self.range_hi)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleCandidate {
    pub alpha: Decimal,
    pub beta: Decimal,
    pub gamma: Decimal,
}

impl ScaleCandidate {
    pub fn new(alpha: Decimal, beta: Decimal) -> Self {
        Self {
            alpha,
            beta,
            gamma: Decimal::ONE,
        }
    }

    /// `α·β²·γ²` scaled by `10^20` (five four-digit factors).
    pub fn product_units(&self) -> i128 {
        let (a, b, g) = (self.alpha.0 as i128, self.beta.0 as i128, self.gamma.0 as i128);
        a * b * b * g * g
    }

    pub fn product(&self) -> f64 {
        self.product_units() as f64 / 1e20
    }
}

fn band_units(spec: &SearchSpec) -> (i128, i128) {
    let scale = (Decimal::SCALE as i128).pow(4);
    let lo = (spec.target.0 - spec.tol.0) as i128 * scale;
    let hi = (spec.target.0 + spec.tol.0) as i128 * scale;
    (lo, hi)
}

/// All grid pairs inside the band, ordered by `(β, α)`.
pub fn enumerate_candidates(spec: &SearchSpec) -> Result<Vec<ScaleCandidate>> {
    spec.validate()?;
    let grid = spec.grid();
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let (lo, hi) = band_units(spec);
    let mut out = Vec::new();
    for &beta in &grid {
        for &alpha in &grid {
            let c = ScaleCandidate {
                alpha,
                beta,
                gamma: spec.gamma,
            };
            if (lo..=hi).contains(&c.product_units()) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn round_half_up_div(num: i64, den: i64) -> i64 {
    (2 * num + den).div_euclid(2 * den)
}

/// Scales stage depths by `α` and widths by `β`.
///
/// Repeats become `max(1, round(α·r))` (half up) for inverted-bottleneck
/// stages; stem and head keep one layer. Channels become the nearest
/// multiple of 8 to `β·c` (half up), floored at 8. Kernels, strides,
/// operators and input resolution are untouched.
pub fn apply_scaling(base: &Architecture, cand: &ScaleCandidate) -> Architecture {
    let mut out = base.clone();
    for s in &mut out.stages {
        if !matches!(s.operator, Operator::Conv | Operator::Head) {
            s.repeats = round_half_up_div(cand.alpha.0 * s.repeats as i64, Decimal::SCALE).max(1) as usize;
        }
        let eighths = round_half_up_div(cand.beta.0 * s.channels as i64, 8 * Decimal::SCALE);
        s.channels = (8 * eighths).max(8) as usize;
    }
    out
}

/// How closely a scaled base reproduces a reference stage table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyProbe {
    pub candidate: ScaleCandidate,
    /// Largest channel deviation over matched stages.
    pub max_channel_dev: usize,
    /// Base stage indices (0-based) left unmatched.
    pub dropped_stages: Vec<usize>,
}

impl ConsistencyProbe {
    /// All matched stages within one multiple-of-8 rounding step.
    pub fn within_one_step(&self) -> bool {
        self.max_channel_dev <= 8
    }
}

fn best_alignment(scaled: &[usize], reference: &[usize]) -> (usize, Vec<usize>) {
    // Order-preserving match of every reference stage to a distinct scaled
    // stage, minimizing the largest deviation.
    fn go(s: &[usize], r: &[usize], si: usize, ri: usize, dropped: &mut Vec<usize>) -> Option<(usize, Vec<usize>)> {
        if ri == r.len() {
            let mut d = dropped.clone();
            d.extend(si..s.len());
            return Some((0, d));
        }
        if s.len() - si < r.len() - ri {
            return None;
        }
        let here = s[si].abs_diff(r[ri]);
        let take = go(s, r, si + 1, ri + 1, dropped).map(|(m, d)| (m.max(here), d));
        dropped.push(si);
        let skip = go(s, r, si + 1, ri, dropped);
        dropped.pop();
        match (take, skip) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        }
    }
    go(scaled, reference, 0, 0, &mut Vec::new()).unwrap_or((usize::MAX, Vec::new()))
}

/// For every candidate, compares the scaled base's channel sequence with a
/// reference architecture. Stage counts may differ; extra base stages are
/// skipped.
pub fn consistency_probe(base: &Architecture, reference: &Architecture, candidates: &[ScaleCandidate]) -> Vec<ConsistencyProbe> {
    let refs: Vec<usize> = reference.stages.iter().map(|s| s.channels).collect();
    candidates
        .iter()
        .map(|c| {
            let scaled: Vec<usize> = apply_scaling(base, c).stages.iter().map(|s| s.channels).collect();
            let (max_channel_dev, dropped_stages) = best_alignment(&scaled, &refs);
            ConsistencyProbe {
                candidate: *c,
                max_channel_dev,
                dropped_stages,
            }
        })
        .collect()
}
