//! Concrete layer plan: stage specs expanded into blocks with resolved
//! channel counts and strides.

use super::arch::{Architecture, Operator};

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Stem {
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
    },
    MBConv {
        cin: usize,
        cout: usize,
        expansion: usize,
        kernel: usize,
        stride: usize,
    },
    Head {
        cin: usize,
        cout: usize,
        classes: usize,
    },
}

impl Block {
    pub fn residual(&self) -> bool {
        matches!(self, Block::MBConv { cin, cout, stride: 1, .. } if cin == cout)
    }

    pub fn stride(&self) -> usize {
        match *self {
            Block::Stem { stride, .. } | Block::MBConv { stride, .. } => stride,
            Block::Head { .. } => 1,
        }
    }
}

/// One planned block with its 1-based stage number, layer index within the
/// stage and canonical weight-path prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedBlock {
    pub stage: usize,
    pub layer: usize,
    pub prefix: String,
    pub block: Block,
}

pub fn plan(arch: &Architecture) -> Vec<PlannedBlock> {
    let mut out = Vec::new();
    let mut cin = arch.in_channels;
    for (i, s) in arch.stages.iter().enumerate() {
        let stage = i + 1;
        match s.operator {
            Operator::Conv => {
                out.push(PlannedBlock {
                    stage,
                    layer: 0,
                    prefix: format!("stage{stage}"),
                    block: Block::Stem {
                        cin,
                        cout: s.channels,
                        kernel: s.kernel,
                        stride: s.stride,
                    },
                });
                cin = s.channels;
            }
            Operator::MBConv1 | Operator::MBConv6 => {
                for layer in 0..s.repeats {
                    out.push(PlannedBlock {
                        stage,
                        layer,
                        prefix: format!("stage{stage}.{layer}"),
                        block: Block::MBConv {
                            cin,
                            cout: s.channels,
                            expansion: s.operator.expansion().unwrap(),
                            kernel: s.kernel,
                            stride: if layer == 0 { s.stride } else { 1 },
                        },
                    });
                    cin = s.channels;
                }
            }
            Operator::Head => {
                out.push(PlannedBlock {
                    stage,
                    layer: 0,
                    prefix: format!("stage{stage}"),
                    block: Block::Head {
                        cin,
                        cout: s.channels,
                        classes: arch.num_classes,
                    },
                });
                cin = s.channels;
            }
        }
    }
    out
}

/// Output extent of a same-padded convolution.
pub fn same_out(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}
