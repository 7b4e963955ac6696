//! Contextual pointwise convolution (CPWC).
//!
//! A CPWC block keeps the usual 1×1 convolution and adds a parallel
//! two-stage context extraction unit:
//!
//! * stage 1 applies one 3×3 filter per channel group (see [`plan_groups`]),
//! * stage 2 applies one depthwise 3×3 filter to each stage-1 channel,
//!
//! and the three paths are summed element-wise. The crate provides the dense
//! [`Tensor`] type, the brute-force [`conv2d_oracle`] every other kernel is
//! tested against, the block's forward and backward passes, a finite-difference
//! gradient checker and closed-form parameter/MAC counts.

mod block;
mod conv;
mod cost;
mod error;
mod gradcheck;
mod group;
mod kernels;
mod params;
mod tensor;
mod variant;

pub use block::{cpwc_backward, cpwc_forward, cpwc_stage1, CpwcGrads};
pub use conv::{add_elementwise, conv2d_backward, conv2d_oracle, conv_out_dim, ConvFilterBank};
pub use cost::{count_cpwc, macs_cpwc};
pub use error::{Error, Result};
pub use gradcheck::{
    check_gradients_with, finite_difference_check, sum_of_squares_loss, BankReport, CheckReport,
    GradientBank,
};
pub use group::{plan_groups, GroupCase, GroupPlan};
pub use kernels::{
    depthwise3x3_backward, depthwise3x3_forward, grouped3x3_backward, grouped3x3_forward,
    pointwise_backward, pointwise_forward,
};
pub use params::{init_params, CpwcParams};
pub use tensor::{Element, Precision, Shape, Tensor};
pub use variant::CpwcVariant;
