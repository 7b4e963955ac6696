//! Network specs, model surgery and parameter/MAC accounting.
//!
//! [`surgery`] replaces every pointwise convolution in a [`NetworkSpec`] with
//! a CPWC node and [`count_network`] tallies parameters and multiply-accumulates
//! per node, so baseline and modified networks can be compared.
//!
//! Counting conventions: convolution and fc weights, fc biases and two affine
//! parameters per norm channel are parameters; MACs count convolution and fc
//! multiply-accumulates only (one MAC = one FLOP unit).

mod builtin;
mod count;
mod error;
mod spec;
mod surgery;

pub use builtin::{builtin_spec, resnet164, resnet50, BUILTINS};
pub use count::{
    compare_counts, count_network, format_macs, format_params, node_cost, CountReport, NodeCount,
    NodeDelta, SurgeryComparison, REPORT_SCHEMA_VERSION,
};
pub use error::{ParseError, UnknownBuiltin, Violation, ViolationKind};
pub use spec::{
    parse_spec, Block, BottleneckParams, ConvParams, FcParams, InputShape, LayerNode, NetworkSpec,
    NodeKind, NormParams, PoolKind, PoolParams, Stage,
};
pub use surgery::surgery;
