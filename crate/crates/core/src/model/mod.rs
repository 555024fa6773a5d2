//! The compact keyword model as data: stage table, parameter and MAC
//! accounting, CPU inference and the class-weighted cross-entropy loss.
//!
//! Block semantics follow the inverted-bottleneck family: optional 1×1
//! expansion, depthwise conv, squeeze-excitation gate (swish inside, sigmoid
//! gate), 1×1 projection without activation, and a residual add when the
//! stride is 1 and channel counts match. Every conv is followed by
//! batch-norm; swish is used everywhere else.

mod accounting;
mod arch;
mod forward;
mod loss;
mod plan;
mod weights;

pub use accounting::{
    count_flops, count_params, param_report, tensor_specs, toggle_report, FlopReport, LayerCost, ParamConventions,
    ParamReport, StageCount, TensorKind, TensorSpec, ToggleReport, ToggleRow,
};
pub use arch::{build_a0, build_b0, resolve_arch, Architecture, Operator, StageSpec, NUM_CLASSES};
pub use forward::{forward, logits, pool_logits, pre_pool, softmax, Activation};
pub use loss::{class_weights_from_counts, weighted_xent, xent_grad, ClassWeights};
pub use plan::{plan, Block, PlannedBlock};
pub use weights::{Tensor, WeightSet};

/// Parameter total reported for the compact model.
pub const REFERENCE_PARAMS: u64 = 238_250;
/// FLOP figure reported for the compact model.
pub const REFERENCE_FLOPS: u64 = 7_439_100;
