//! Parameter and multiply-accumulate accounting.
//!
//! Default conventions: convolutions carry no bias, every batch-norm layer
//! contributes a scale and a shift per channel (running statistics are
//! buffers, not parameters), squeeze-excitation convs carry biases and are
//! sized from the block's pre-expansion channels, and the classifier has a
//! bias.

use serde::Serialize;

use super::arch::Architecture;
use super::plan::{plan, same_out, Block};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TensorKind {
    Param,
    /// Inference-only state such as batch-norm running statistics.
    Buffer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TensorSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub kind: TensorKind,
    pub stage: usize,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamConventions {
    /// 2 (scale, shift) or 4 (plus running mean and variance).
    pub bn_per_channel: usize,
    pub conv_bias: bool,
    pub se_on_expanded: bool,
    pub fc_bias: bool,
}

impl Default for ParamConventions {
    fn default() -> Self {
        Self {
            bn_per_channel: 2,
            conv_bias: false,
            se_on_expanded: false,
            fc_bias: true,
        }
    }
}

struct SpecBuilder<'a> {
    conv: &'a ParamConventions,
    specs: Vec<TensorSpec>,
    stage: usize,
}

impl SpecBuilder<'_> {
    fn push(&mut self, path: String, shape: Vec<usize>, kind: TensorKind) {
        self.specs.push(TensorSpec {
            path,
            shape,
            kind,
            stage: self.stage,
        });
    }

    fn conv_bn(&mut self, prefix: &str, cout: usize, cin_per_group: usize, k: usize) {
        self.push(format!("{prefix}.conv.weight"), vec![cout, cin_per_group, k, k], TensorKind::Param);
        if self.conv.conv_bias {
            self.push(format!("{prefix}.conv.bias"), vec![cout], TensorKind::Param);
        }
        self.push(format!("{prefix}.bn.weight"), vec![cout], TensorKind::Param);
        self.push(format!("{prefix}.bn.bias"), vec![cout], TensorKind::Param);
        let stats = if self.conv.bn_per_channel >= 4 {
            TensorKind::Param
        } else {
            TensorKind::Buffer
        };
        self.push(format!("{prefix}.bn.running_mean"), vec![cout], stats);
        self.push(format!("{prefix}.bn.running_var"), vec![cout], stats);
    }
}

/// Every tensor the architecture needs, in canonical order.
pub fn tensor_specs(arch: &Architecture, conventions: &ParamConventions) -> Vec<TensorSpec> {
    let mut b = SpecBuilder {
        conv: conventions,
        specs: Vec::new(),
        stage: 0,
    };
    for pb in plan(arch) {
        b.stage = pb.stage;
        let p = &pb.prefix;
        match pb.block {
            Block::Stem { cin, cout, kernel, .. } => b.conv_bn(p, cout, cin, kernel),
            Block::MBConv {
                cin,
                cout,
                expansion,
                kernel,
                ..
            } => {
                let mid = cin * expansion;
                if expansion != 1 {
                    b.conv_bn(&format!("{p}.expand"), mid, cin, 1);
                }
                b.conv_bn(&format!("{p}.dw"), mid, 1, kernel);
                let sq = arch.se_channels(if conventions.se_on_expanded { mid } else { cin });
                b.push(format!("{p}.se.reduce.weight"), vec![sq, mid], TensorKind::Param);
                b.push(format!("{p}.se.reduce.bias"), vec![sq], TensorKind::Param);
                b.push(format!("{p}.se.expand.weight"), vec![mid, sq], TensorKind::Param);
                b.push(format!("{p}.se.expand.bias"), vec![mid], TensorKind::Param);
                b.conv_bn(&format!("{p}.project"), cout, mid, 1);
            }
            Block::Head { cin, cout, classes } => {
                b.conv_bn(p, cout, cin, 1);
                b.push("classifier.weight".into(), vec![classes, cout], TensorKind::Param);
                if conventions.fc_bias {
                    b.push("classifier.bias".into(), vec![classes], TensorKind::Param);
                }
            }
        }
    }
    b.specs
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageCount {
    pub stage: usize,
    pub label: String,
    pub params: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamReport {
    pub conventions: ParamConventions,
    pub total: u64,
    pub stages: Vec<StageCount>,
}

pub fn param_report(arch: &Architecture, conventions: &ParamConventions) -> ParamReport {
    let specs = tensor_specs(arch, conventions);
    let stages = arch
        .stages
        .iter()
        .enumerate()
        .map(|(i, s)| StageCount {
            stage: i + 1,
            label: format!("{} {}x{} /{} x{}", s.operator, s.kernel, s.kernel, s.channels, s.repeats),
            params: specs
                .iter()
                .filter(|t| t.stage == i + 1 && t.kind == TensorKind::Param)
                .map(|t| t.numel() as u64)
                .sum(),
        })
        .collect::<Vec<_>>();
    ParamReport {
        conventions: *conventions,
        total: stages.iter().map(|s| s.params).sum(),
        stages,
    }
}

/// Trainable parameter total under the default conventions.
pub fn count_params(arch: &Architecture) -> u64 {
    param_report(arch, &ParamConventions::default()).total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToggleRow {
    pub label: String,
    pub total: u64,
    pub delta: i64,
}

/// Totals under every combination of the counting conventions, plus the
/// effect of dropping one layer from each multi-layer stage. Used to localize
/// a mismatch against a reference total.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToggleReport {
    pub reference: u64,
    pub conventions: Vec<ToggleRow>,
    pub one_layer_fewer: Vec<ToggleRow>,
}

pub fn toggle_report(arch: &Architecture, reference: u64) -> ToggleReport {
    let delta = |t: u64| t as i64 - reference as i64;
    let mut conventions = Vec::new();
    for bn in [2, 4] {
        for conv_bias in [false, true] {
            for se_on_expanded in [false, true] {
                for fc_bias in [true, false] {
                    let c = ParamConventions {
                        bn_per_channel: bn,
                        conv_bias,
                        se_on_expanded,
                        fc_bias,
                    };
                    let total = param_report(arch, &c).total;
                    conventions.push(ToggleRow {
                        label: format!(
                            "bn={bn} conv_bias={conv_bias} se={} fc_bias={fc_bias}",
                            if se_on_expanded { "expanded" } else { "input" }
                        ),
                        total,
                        delta: delta(total),
                    });
                }
            }
        }
    }
    let one_layer_fewer = arch
        .stages
        .iter()
        .enumerate()
        .filter(|(_, s)| s.repeats > 1)
        .map(|(i, s)| {
            let mut a = arch.clone();
            a.stages[i].repeats -= 1;
            let total = count_params(&a);
            ToggleRow {
                label: format!("stage {} with {} layer(s)", i + 1, s.repeats - 1),
                total,
                delta: delta(total),
            }
        })
        .collect();
    ToggleReport {
        reference,
        conventions,
        one_layer_fewer,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCost {
    pub path: String,
    pub stage: usize,
    /// Output extent (time, coefficients).
    pub out_hw: (usize, usize),
    pub macs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlopReport {
    pub input: (usize, usize),
    pub macs: u64,
    /// `2 · macs`.
    pub flops: u64,
    pub layers: Vec<LayerCost>,
}

/// Multiply-accumulates of every conv, squeeze-excitation and classifier
/// layer for a `frames × coeffs` input. Batch-norm (foldable), activations
/// and pooling are not counted.
pub fn count_flops(arch: &Architecture, input: (usize, usize)) -> FlopReport {
    let (mut h, mut w) = input;
    let mut layers = Vec::new();
    let mut push = |path: String, stage: usize, hw: (usize, usize), macs: usize| {
        layers.push(LayerCost {
            path,
            stage,
            out_hw: hw,
            macs: macs as u64,
        });
    };
    for pb in plan(arch) {
        let p = &pb.prefix;
        let s = pb.stage;
        match pb.block {
            Block::Stem {
                cin,
                cout,
                kernel,
                stride,
            } => {
                (h, w) = (same_out(h, stride), same_out(w, stride));
                push(format!("{p}.conv"), s, (h, w), h * w * cout * cin * kernel * kernel);
            }
            Block::MBConv {
                cin,
                cout,
                expansion,
                kernel,
                stride,
            } => {
                let mid = cin * expansion;
                if expansion != 1 {
                    push(format!("{p}.expand"), s, (h, w), h * w * mid * cin);
                }
                (h, w) = (same_out(h, stride), same_out(w, stride));
                push(format!("{p}.dw"), s, (h, w), h * w * mid * kernel * kernel);
                let sq = arch.se_channels(cin);
                push(format!("{p}.se"), s, (1, 1), 2 * mid * sq);
                push(format!("{p}.project"), s, (h, w), h * w * cout * mid);
            }
            Block::Head { cin, cout, classes } => {
                push(format!("{p}.conv"), s, (h, w), h * w * cout * cin);
                push("classifier".into(), s, (1, 1), cout * classes);
            }
        }
    }
    let macs = layers.iter().map(|l| l.macs).sum();
    FlopReport {
        input,
        macs,
        flops: 2 * macs,
        layers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::arch::{build_a0, build_b0, Operator, StageSpec};

    fn tiny(stem: StageSpec, classes: usize, head: usize) -> Architecture {
        Architecture {
            name: "tiny".into(),
            stages: vec![stem, StageSpec::new(Operator::Head, 1, head, 1, 1)],
            num_classes: classes,
            ..build_a0()
        }
    }

    #[test]
    fn stem_conv_with_bn() {
        let a = tiny(StageSpec::new(Operator::Conv, 3, 16, 1, 1), 20, 384);
        let r = param_report(&a, &ParamConventions::default());
        assert_eq!(r.stages[0].params, 3 * 3 * 16 + 2 * 16);
        assert_eq!(r.stages[0].params, 176);
    }

    #[test]
    fn classifier_params() {
        let a = tiny(StageSpec::new(Operator::Conv, 3, 96, 1, 1), 20, 384);
        let head = param_report(&a, &ParamConventions::default()).stages[1].params;
        let conv_bn = 96 * 384 + 2 * 384;
        assert_eq!(head - conv_bn, 384 * 20 + 20);
        assert_eq!(head - conv_bn, 7700);
    }

    #[test]
    fn stem_macs() {
        let a = tiny(StageSpec::new(Operator::Conv, 3, 16, 1, 1), 20, 384);
        let r = count_flops(&a, (10, 10));
        assert_eq!(r.layers[0].macs, 10 * 10 * 16 * 9);
        assert_eq!(r.layers[0].macs, 14_400);
    }

    #[test]
    fn pointwise_macs() {
        let a = tiny(StageSpec::new(Operator::Conv, 1, 96, 1, 1), 20, 384);
        let r = count_flops(&a, (1, 1));
        assert_eq!(r.layers[1].macs, 36_864);
        assert_eq!(r.flops, 2 * r.macs);
    }

    #[test]
    fn b0_total_matches_family_reference() {
        // Reference B0 total for this input and head: 4 032 595.
        let b0 = count_params(&build_b0());
        assert!((b0 as i64 - 4_032_595).abs() < 100, "{b0}");
    }

    #[test]
    fn stage_counts_sum_to_total() {
        let r = param_report(&build_a0(), &ParamConventions::default());
        assert_eq!(r.stages.iter().map(|s| s.params).sum::<u64>(), r.total);
        assert_eq!(r.stages.len(), 8);
    }

    #[test]
    fn buffers_excluded_by_default() {
        let a = build_a0();
        let specs = tensor_specs(&a, &ParamConventions::default());
        let params: usize = specs.iter().filter(|t| t.kind == TensorKind::Param).map(|t| t.numel()).sum();
        assert_eq!(params as u64, count_params(&a));
        assert!(specs.iter().any(|t| t.kind == TensorKind::Buffer));
    }
}
