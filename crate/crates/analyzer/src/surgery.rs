use cpwc_core::CpwcVariant;

use crate::spec::{Block, NetworkSpec};

/// Marks every 1×1 convolution in `spec` as a CPWC node of `variant`.
///
/// Bottleneck stages carry the flag for all of their 1×1 convolutions
/// (reduce, expand and projection shortcut). Other layers are untouched, and
/// since a CPWC node keeps its pointwise convolution's output shape, channel
/// and spatial propagation are unchanged.
pub fn surgery(spec: &NetworkSpec, variant: CpwcVariant) -> NetworkSpec {
    let mut out = spec.clone();
    for stage in &mut out.stages {
        match &mut stage.block {
            Block::Conv(p) if p.kernel == 1 => p.cpwc = Some(variant),
            Block::Bottleneck(p) => p.cpwc = Some(variant),
            _ => {}
        }
    }
    out
}
