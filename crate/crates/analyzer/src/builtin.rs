use crate::error::UnknownBuiltin;
use crate::spec::{
    Block, BottleneckParams, ConvParams, FcParams, InputShape, NetworkSpec, NormParams, PoolKind,
    PoolParams, Stage,
};

pub const BUILTINS: [&str; 2] = ["resnet164", "resnet50"];

fn bottleneck(cin: usize, mid: usize, stride: usize, preact: bool, repeat: usize) -> Stage {
    Stage::repeated(
        Block::Bottleneck(BottleneckParams {
            in_channels: cin,
            mid_channels: mid,
            out_channels: 4 * mid,
            stride,
            preact,
            cpwc: None,
        }),
        repeat,
    )
}

fn conv(cin: usize, cout: usize, kernel: usize, stride: usize) -> Stage {
    Stage::new(Block::Conv(ConvParams {
        in_channels: cin,
        out_channels: cout,
        kernel,
        stride,
        padding: None,
        groups: 1,
        cpwc: None,
    }))
}

fn global_pool() -> Stage {
    Stage::new(Block::Pool(PoolParams {
        kind: PoolKind::GlobalAvg,
        kernel: None,
        stride: None,
        padding: None,
    }))
}

fn fc(cin: usize, classes: usize) -> Stage {
    Stage::new(Block::Fc(FcParams {
        in_features: cin,
        out_features: classes,
        bias: true,
    }))
}

/// Pre-activation bottleneck ResNet-164 for 32×32 CIFAR-100 inputs:
/// three stages of 18 blocks at widths 16/32/64 (outputs 64/128/256).
pub fn resnet164() -> NetworkSpec {
    NetworkSpec {
        name: "resnet164".into(),
        input: InputShape { channels: 3, height: 32, width: 32 },
        stages: vec![
            conv(3, 16, 3, 1),
            bottleneck(16, 16, 1, true, 18),
            bottleneck(64, 32, 2, true, 18),
            bottleneck(128, 64, 2, true, 18),
            Stage::new(Block::Norm(NormParams {})),
            global_pool(),
            fc(256, 100),
        ],
    }
}

/// ResNet-50 for 224×224 ImageNet inputs: 3/4/6/3 bottleneck blocks.
pub fn resnet50() -> NetworkSpec {
    NetworkSpec {
        name: "resnet50".into(),
        input: InputShape { channels: 3, height: 224, width: 224 },
        stages: vec![
            conv(3, 64, 7, 2),
            Stage::new(Block::Norm(NormParams {})),
            Stage::new(Block::Pool(PoolParams {
                kind: PoolKind::Max,
                kernel: Some(3),
                stride: Some(2),
                padding: Some(1),
            })),
            bottleneck(64, 64, 1, false, 3),
            bottleneck(256, 128, 2, false, 4),
            bottleneck(512, 256, 2, false, 6),
            bottleneck(1024, 512, 2, false, 3),
            global_pool(),
            fc(2048, 1000),
        ],
    }
}

pub fn builtin_spec(name: &str) -> Result<NetworkSpec, UnknownBuiltin> {
    match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "resnet164" => Ok(resnet164()),
        "resnet50" => Ok(resnet50()),
        _ => Err(UnknownBuiltin(name.to_string())),
    }
}
