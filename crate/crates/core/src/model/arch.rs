use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    Conv,
    MBConv1,
    MBConv6,
    /// 1×1 conv, global average pool, fully-connected classifier.
    Head,
}

impl Operator {
    /// Expansion ratio of an inverted-bottleneck block.
    pub fn expansion(self) -> Option<usize> {
        match self {
            Operator::MBConv1 => Some(1),
            Operator::MBConv6 => Some(6),
            _ => None,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Conv => "Conv",
            Operator::MBConv1 => "MBConv1",
            Operator::MBConv6 => "MBConv6",
            Operator::Head => "Conv, Pooling, FC",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub operator: Operator,
    /// Square kernel side.
    pub kernel: usize,
    /// Output channels.
    pub channels: usize,
    pub repeats: usize,
    /// Stride of the first layer in the stage; later repeats use 1.
    pub stride: usize,
}

impl StageSpec {
    pub const fn new(operator: Operator, kernel: usize, channels: usize, repeats: usize, stride: usize) -> Self {
        Self {
            operator,
            kernel,
            channels,
            repeats,
            stride,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    pub stages: Vec<StageSpec>,
    pub num_classes: usize,
    /// Input channels (one feature plane).
    pub in_channels: usize,
    /// Coefficients per frame; the time axis is free.
    pub in_coeffs: usize,
    /// Squeeze-excitation width as a fraction of the block's input channels.
    pub se_ratio: f64,
    /// Dropout before the classifier; identity at inference.
    pub dropout: f64,
}

pub const NUM_CLASSES: usize = 20;

/// The compact keyword model: eight stages, 20 output classes.
///
/// | stage | operator | kernel | channels | layers | stride |
/// |-------|----------|--------|----------|--------|--------|
/// | 1 | Conv | 3×3 | 16 | 1 | 2 |
/// | 2 | MBConv1 | 3×3 | 8 | 1 | 1 |
/// | 3 | MBConv6 | 5×5 | 16 | 2 | 2 |
/// | 4 | MBConv6 | 3×3 | 24 | 1 | 2 |
/// | 5 | MBConv6 | 3×3 | 32 | 2 | 2 |
/// | 6 | MBConv6 | 5×5 | 56 | 2 | 1 |
/// | 7 | MBConv6 | 3×3 | 96 | 2 | 2 |
/// | 8 | Conv, Pooling, FC | 1×1 | 384 | 1 | 1 |
pub fn build_a0() -> Architecture {
    use Operator::*;
    Architecture {
        name: "a0".into(),
        stages: vec![
            StageSpec::new(Conv, 3, 16, 1, 2),
            StageSpec::new(MBConv1, 3, 8, 1, 1),
            StageSpec::new(MBConv6, 5, 16, 2, 2),
            StageSpec::new(MBConv6, 3, 24, 1, 2),
            StageSpec::new(MBConv6, 3, 32, 2, 2),
            StageSpec::new(MBConv6, 5, 56, 2, 1),
            StageSpec::new(MBConv6, 3, 96, 2, 2),
            StageSpec::new(Head, 1, 384, 1, 1),
        ],
        num_classes: NUM_CLASSES,
        in_channels: 1,
        in_coeffs: 40,
        se_ratio: 0.25,
        dropout: 0.2,
    }
}

/// The unscaled B0 layout the scaling search starts from, with a 20-class
/// classifier on a single-plane input.
pub fn build_b0() -> Architecture {
    use Operator::*;
    Architecture {
        name: "b0".into(),
        stages: vec![
            StageSpec::new(Conv, 3, 32, 1, 2),
            StageSpec::new(MBConv1, 3, 16, 1, 1),
            StageSpec::new(MBConv6, 3, 24, 2, 2),
            StageSpec::new(MBConv6, 5, 40, 2, 2),
            StageSpec::new(MBConv6, 3, 80, 3, 2),
            StageSpec::new(MBConv6, 5, 112, 3, 1),
            StageSpec::new(MBConv6, 5, 192, 4, 2),
            StageSpec::new(MBConv6, 3, 320, 1, 1),
            StageSpec::new(Head, 1, 1280, 1, 1),
        ],
        num_classes: NUM_CLASSES,
        in_channels: 1,
        in_coeffs: 40,
        se_ratio: 0.25,
        dropout: 0.2,
    }
}

/// `a0`, `b0`, or a path to an architecture JSON file.
pub fn resolve_arch(name: &str) -> Result<Architecture> {
    match name {
        "a0" => Ok(build_a0()),
        "b0" => Ok(build_b0()),
        path => Architecture::load_json(path),
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("architecture {}: {msg}", self.name)));
        let (Some(first), Some(last)) = (self.stages.first(), self.stages.last()) else {
            return bad("no stages".into());
        };
        if first.operator != Operator::Conv {
            return bad("first stage must be a plain convolution".into());
        }
        if last.operator != Operator::Head {
            return bad("last stage must be the conv/pool/classifier head".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !matches!(s.kernel, 1 | 3 | 5) {
                return bad(format!("stage {} kernel {} not in {{1, 3, 5}}", i + 1, s.kernel));
            }
            if s.channels == 0 || s.repeats == 0 {
                return bad(format!("stage {} has zero channels or layers", i + 1));
            }
            if !matches!(s.stride, 1 | 2) {
                return bad(format!("stage {} stride {} not in {{1, 2}}", i + 1, s.stride));
            }
            if s.operator == Operator::Head && i + 1 != self.stages.len() {
                return bad(format!("head at stage {} is not last", i + 1));
            }
            if matches!(s.operator, Operator::Conv | Operator::Head) && s.repeats != 1 {
                return bad(format!("stage {} ({}) must have one layer", i + 1, s.operator));
            }
        }
        if self.num_classes == 0 || self.in_channels == 0 || self.in_coeffs == 0 {
            return bad("classes, input channels and coefficients must be positive".into());
        }
        if !(self.se_ratio > 0.0 && self.se_ratio <= 1.0) {
            return bad(format!("se_ratio {} outside (0, 1]", self.se_ratio));
        }
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let arch: Self = serde_json::from_str(&text)?;
        arch.validate()?;
        Ok(arch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("architecture serializes")
    }

    /// Squeeze width for a block whose input has `channels` channels.
    pub fn se_channels(&self, channels: usize) -> usize {
        ((channels as f64 * self.se_ratio).floor() as usize).max(1)
    }

    pub fn head_channels(&self) -> usize {
        self.stages.last().map_or(0, |s| s.channels)
    }
}
