//! Desk-scale training of small CPWC classifiers.
//!
//! Provides a bit-exact CIFAR binary reader, a synthetic dataset whose labels
//! depend only on spatial context, a toy network built from CPWC blocks with
//! batch normalization, minibatch SGD with momentum and weight decay, and
//! multi-seed variant comparisons.

mod compare;
mod data;
mod error;
mod model;
mod optim;
mod train;

pub use compare::{compare_variants, train_fresh, ComparisonRow, ComparisonTable, RunCell, COMPARISON_SCHEMA_VERSION};
pub use data::{
    load_cifar, parse_cifar_records, synth_context_dataset, synth_context_dataset_with, CifarFlavor, Dataset, Split,
    SynthConfig, CIFAR100_MEAN, CIFAR100_STD, CIFAR10_MEAN, CIFAR10_STD, CIFAR_PIXELS, CIFAR_SIDE, PAIR_OFFSETS,
};
pub use error::{Result, TrainError};
pub use model::{
    build_toy_model, softmax_cross_entropy, BatchNorm, Layer, Linear, Mode, Model, ModelConfig, Trace, BN_EPS,
    BN_MOMENTUM,
};
pub use optim::{Sgd, StepSchedule};
pub use train::{
    evaluate, train, EpochStats, Hyper, RunMetadata, TrainReport, DESK_CHANNELS, DESK_CLASSES, DESK_TRAIN_EXAMPLES,
    DESK_VAL_EXAMPLES, TRAIN_REPORT_SCHEMA_VERSION,
};
