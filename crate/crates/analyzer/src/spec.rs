//! Network-spec documents.
//!
//! A spec is a JSON document of the form
//!
//! ```json
//! {
//!   "name": "resnet50",
//!   "input": { "channels": 3, "height": 224, "width": 224 },
//!   "stages": [
//!     { "block": "conv", "params": { "in_channels": 3, "out_channels": 64, "kernel": 7, "stride": 2 } },
//!     { "block": "bottleneck", "params": { "in_channels": 64, "mid_channels": 64, "out_channels": 256 }, "repeat": 3 }
//!   ]
//! }
//! ```
//!
//! Stages are expanded into a flat list of [`LayerNode`]s, which is what the
//! counting code consumes.

use std::fmt;

use cpwc_core::{conv_out_dim, CpwcVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ParseError, Violation, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

fn yes() -> bool {
    true
}

fn is_false(v: &bool) -> bool {
    !*v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub stride: usize,
    /// Defaults to `kernel / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub groups: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpwc: Option<CpwcVariant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Max,
    Avg,
    GlobalAvg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolParams {
    pub kind: PoolKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
}

/// Three-convolution residual bottleneck: 1×1 reduce, 3×3, 1×1 expand, with a
/// 1×1 projection shortcut whenever the stride or channel count changes.
///
/// Only the first of `repeat` blocks uses `in_channels` and `stride`; the
/// rest run `out_channels → out_channels` at stride 1. The stride sits on the
/// 3×3 convolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottleneckParams {
    pub in_channels: usize,
    pub mid_channels: usize,
    pub out_channels: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub stride: usize,
    /// Pre-activation ordering (norm before each convolution).
    #[serde(default, skip_serializing_if = "is_false")]
    pub preact: bool,
    /// Applies to every 1×1 convolution inside the block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpwc: Option<CpwcVariant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcParams {
    pub in_features: usize,
    pub out_features: usize,
    #[serde(default = "yes")]
    pub bias: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormParams {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "block", content = "params", rename_all = "snake_case")]
pub enum Block {
    Conv(ConvParams),
    Norm(NormParams),
    Pool(PoolParams),
    Bottleneck(BottleneckParams),
    Fc(FcParams),
}

impl Block {
    pub const KINDS: [&'static str; 5] = ["conv", "norm", "pool", "bottleneck", "fc"];

    pub fn kind(&self) -> &'static str {
        match self {
            Block::Conv(_) => "conv",
            Block::Norm(_) => "norm",
            Block::Pool(_) => "pool",
            Block::Bottleneck(_) => "bottleneck",
            Block::Fc(_) => "fc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(flatten)]
    pub block: Block,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub repeat: usize,
}

impl Stage {
    pub fn new(block: Block) -> Self {
        Self { block, repeat: 1 }
    }

    pub fn repeated(block: Block, repeat: usize) -> Self {
        Self { block, repeat }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub input: InputShape,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Conv,
    Fc,
    Norm,
    Pool,
    Add,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Input => "input",
            NodeKind::Conv => "conv",
            NodeKind::Fc => "fc",
            NodeKind::Norm => "norm",
            NodeKind::Pool => "pool",
            NodeKind::Add => "add",
        })
    }
}

/// One layer after stage expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerNode {
    pub name: String,
    pub kind: NodeKind,
    /// Index of the stage this node came from (`None` for the input node).
    pub stage: Option<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub groups: usize,
    pub bias: bool,
    pub cpwc: Option<CpwcVariant>,
    pub out_h: usize,
    pub out_w: usize,
}

impl LayerNode {
    /// A convolution whose kernel is 1×1.
    pub fn is_pwc(&self) -> bool {
        self.kind == NodeKind::Conv && self.kernel == (1, 1)
    }
}

struct Expander {
    nodes: Vec<LayerNode>,
    violations: Vec<Violation>,
    channels: usize,
    h: usize,
    w: usize,
}

impl Expander {
    fn violation(&mut self, stage: usize, kind: ViolationKind, message: String) {
        self.violations.push(Violation {
            node: Some(stage),
            kind,
            message,
        });
    }

    fn simple(&mut self, name: String, kind: NodeKind, stage: usize) {
        self.nodes.push(LayerNode {
            name,
            kind,
            stage: Some(stage),
            in_channels: self.channels,
            out_channels: self.channels,
            kernel: (1, 1),
            stride: 1,
            groups: 1,
            bias: false,
            cpwc: None,
            out_h: self.h,
            out_w: self.w,
        });
    }

    /// Appends a convolution reading `(cin, h, w)`; returns its output size.
    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        stage: usize,
        name: String,
        (cin, h, w): (usize, usize, usize),
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        cpwc: Option<CpwcVariant>,
    ) -> Option<(usize, usize)> {
        let dims = (
            conv_out_dim(h, kernel, stride, padding),
            conv_out_dim(w, kernel, stride, padding),
        );
        let (Some(oh), Some(ow)) = dims else {
            self.violation(
                stage,
                ViolationKind::Spatial,
                format!("{name}: {kernel}x{kernel} kernel (stride {stride}, padding {padding}) does not fit {h}x{w} input"),
            );
            return None;
        };
        self.nodes.push(LayerNode {
            name,
            kind: NodeKind::Conv,
            stage: Some(stage),
            in_channels: cin,
            out_channels: cout,
            kernel: (kernel, kernel),
            stride,
            groups,
            bias: false,
            cpwc: if kernel == 1 { cpwc } else { None },
            out_h: oh,
            out_w: ow,
        });
        Some((oh, ow))
    }

    fn norm(&mut self, stage: usize, name: String, channels: usize, h: usize, w: usize) {
        self.nodes.push(LayerNode {
            name,
            kind: NodeKind::Norm,
            stage: Some(stage),
            in_channels: channels,
            out_channels: channels,
            kernel: (1, 1),
            stride: 1,
            groups: 1,
            bias: false,
            cpwc: None,
            out_h: h,
            out_w: w,
        });
    }

    fn check_chain(&mut self, stage: usize, declared: usize) {
        if declared != self.channels {
            let msg = format!(
                "declares {declared} input channels but the previous layer produces {}",
                self.channels
            );
            self.violation(stage, ViolationKind::ChannelChain, msg);
        }
    }

    fn stage(&mut self, i: usize, stage: &Stage) {
        if stage.repeat == 0 {
            self.violation(i, ViolationKind::Schema, "repeat must be at least 1".into());
            return;
        }
        for r in 0..stage.repeat {
            let tag = if stage.repeat > 1 {
                format!("s{i}.{}{r}", stage.block.kind())
            } else {
                format!("s{i}.{}", stage.block.kind())
            };
            match &stage.block {
                Block::Conv(p) => {
                    if p.kernel == 0 || p.stride == 0 || p.out_channels == 0 || p.groups == 0 {
                        self.violation(i, ViolationKind::Schema, "kernel, stride, groups and out_channels must be positive".into());
                        return;
                    }
                    let cin = if r == 0 { p.in_channels } else { p.out_channels };
                    self.check_chain(i, cin);
                    if cin % p.groups != 0 || p.out_channels % p.groups != 0 {
                        self.violation(i, ViolationKind::Schema, format!("groups {} must divide both channel counts", p.groups));
                        return;
                    }
                    if p.cpwc.is_some() && p.kernel != 1 {
                        self.violation(i, ViolationKind::Schema, "cpwc is only valid on 1x1 convolutions".into());
                    }
                    let pad = p.padding.unwrap_or(p.kernel / 2);
                    let Some((h, w)) = self.conv(i, tag, (cin, self.h, self.w), p.out_channels, p.kernel, p.stride, pad, p.groups, p.cpwc) else {
                        return;
                    };
                    (self.channels, self.h, self.w) = (p.out_channels, h, w);
                }
                Block::Norm(_) => self.simple(tag, NodeKind::Norm, i),
                Block::Pool(p) => {
                    let (h, w) = match p.kind {
                        PoolKind::GlobalAvg => (1, 1),
                        PoolKind::Max | PoolKind::Avg => {
                            let k = p.kernel.unwrap_or(2);
                            let s = p.stride.unwrap_or(k);
                            let pad = p.padding.unwrap_or(0);
                            match (conv_out_dim(self.h, k, s, pad), conv_out_dim(self.w, k, s, pad)) {
                                (Some(h), Some(w)) if k > 0 => (h, w),
                                _ => {
                                    self.violation(i, ViolationKind::Spatial, format!("pool window {k} (stride {s}) does not fit {}x{} input", self.h, self.w));
                                    return;
                                }
                            }
                        }
                    };
                    (self.h, self.w) = (h, w);
                    self.simple(tag, NodeKind::Pool, i);
                }
                Block::Fc(p) => {
                    let flat = self.channels * self.h * self.w;
                    if p.in_features != flat {
                        self.violation(i, ViolationKind::ChannelChain, format!(
                            "declares {} input features but the previous layer produces {flat}",
                            p.in_features
                        ));
                    }
                    self.nodes.push(LayerNode {
                        name: tag,
                        kind: NodeKind::Fc,
                        stage: Some(i),
                        in_channels: p.in_features,
                        out_channels: p.out_features,
                        kernel: (1, 1),
                        stride: 1,
                        groups: 1,
                        bias: p.bias,
                        cpwc: None,
                        out_h: 1,
                        out_w: 1,
                    });
                    (self.channels, self.h, self.w) = (p.out_features, 1, 1);
                }
                Block::Bottleneck(p) => {
                    if [p.mid_channels, p.out_channels, p.stride].contains(&0) {
                        self.violation(i, ViolationKind::Schema, "channel counts and stride must be positive".into());
                        return;
                    }
                    let (cin, stride) = if r == 0 { (p.in_channels, p.stride) } else { (p.out_channels, 1) };
                    self.check_chain(i, cin);
                    let (h, w) = (self.h, self.w);
                    let mid = p.mid_channels;
                    if p.preact {
                        self.norm(i, format!("{tag}.norm0"), cin, h, w);
                    }
                    let Some((h1, w1)) = self.conv(i, format!("{tag}.conv1"), (cin, h, w), mid, 1, 1, 0, 1, p.cpwc) else { return };
                    self.norm(i, format!("{tag}.norm1"), mid, h1, w1);
                    let Some((h2, w2)) = self.conv(i, format!("{tag}.conv2"), (mid, h1, w1), mid, 3, stride, 1, 1, None) else { return };
                    self.norm(i, format!("{tag}.norm2"), mid, h2, w2);
                    let Some((h3, w3)) = self.conv(i, format!("{tag}.conv3"), (mid, h2, w2), p.out_channels, 1, 1, 0, 1, p.cpwc) else { return };
                    if !p.preact {
                        self.norm(i, format!("{tag}.norm3"), p.out_channels, h3, w3);
                    }
                    if stride != 1 || cin != p.out_channels {
                        if self.conv(i, format!("{tag}.proj"), (cin, h, w), p.out_channels, 1, stride, 0, 1, p.cpwc).is_none() {
                            return;
                        }
                        if !p.preact {
                            self.norm(i, format!("{tag}.proj_norm"), p.out_channels, h3, w3);
                        }
                    }
                    (self.channels, self.h, self.w) = (p.out_channels, h3, w3);
                    self.simple(format!("{tag}.add"), NodeKind::Add, i);
                }
            }
        }
    }
}

impl NetworkSpec {
    /// Flattens the stages into layer nodes, validating channel and spatial
    /// propagation along the way.
    pub fn expand(&self) -> Result<Vec<LayerNode>, ParseError> {
        if self.stages.is_empty() {
            return Err(ParseError::single(None, ViolationKind::NoInput, "the stage list is empty"));
        }
        let inp = self.input;
        if inp.channels == 0 || inp.height == 0 || inp.width == 0 {
            return Err(ParseError::single(None, ViolationKind::Schema, "input dimensions must be positive"));
        }
        let mut ex = Expander {
            nodes: vec![LayerNode {
                name: "input".into(),
                kind: NodeKind::Input,
                stage: None,
                in_channels: inp.channels,
                out_channels: inp.channels,
                kernel: (1, 1),
                stride: 1,
                groups: 1,
                bias: false,
                cpwc: None,
                out_h: inp.height,
                out_w: inp.width,
            }],
            violations: Vec::new(),
            channels: inp.channels,
            h: inp.height,
            w: inp.width,
        };
        for (i, stage) in self.stages.iter().enumerate() {
            ex.stage(i, stage);
        }
        if ex.violations.is_empty() {
            Ok(ex.nodes)
        } else {
            Err(ParseError { violations: ex.violations })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network specs always serialize")
    }
}

/// Parses and validates a network-spec document.
pub fn parse_spec(text: &str) -> Result<NetworkSpec, ParseError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ParseError::single(None, ViolationKind::Malformed, e.to_string()))?;
    let Value::Object(mut top) = doc else {
        return Err(ParseError::single(None, ViolationKind::Malformed, "document must be an object"));
    };
    let mut violations = Vec::new();
    for key in top.keys() {
        if !["name", "input", "stages"].contains(&key.as_str()) {
            violations.push(Violation {
                node: None,
                kind: ViolationKind::Schema,
                message: format!("unknown top-level field {key:?}"),
            });
        }
    }
    let name = match top.remove("name") {
        Some(Value::String(s)) => s,
        _ => {
            violations.push(Violation { node: None, kind: ViolationKind::Schema, message: "missing string field \"name\"".into() });
            String::new()
        }
    };
    let input = match top.remove("input").map(serde_json::from_value::<InputShape>) {
        Some(Ok(i)) => Some(i),
        Some(Err(e)) => {
            violations.push(Violation { node: None, kind: ViolationKind::Schema, message: format!("input: {e}") });
            None
        }
        None => {
            violations.push(Violation { node: None, kind: ViolationKind::NoInput, message: "missing \"input\"".into() });
            None
        }
    };
    let raw_stages = match top.remove("stages") {
        Some(Value::Array(a)) => a,
        Some(_) => {
            violations.push(Violation { node: None, kind: ViolationKind::Schema, message: "\"stages\" must be an array".into() });
            Vec::new()
        }
        None => Vec::new(),
    };
    let mut stages = Vec::with_capacity(raw_stages.len());
    for (i, mut raw) in raw_stages.into_iter().enumerate() {
        let block = raw.get("block").and_then(Value::as_str).map(str::to_owned);
        match block {
            None => {
                violations.push(Violation { node: Some(i), kind: ViolationKind::Schema, message: "missing string field \"block\"".into() });
                continue;
            }
            Some(b) if !Block::KINDS.contains(&b.as_str()) => {
                violations.push(Violation { node: Some(i), kind: ViolationKind::UnknownKind, message: format!("unknown block kind {b:?}") });
                continue;
            }
            Some(_) => {}
        }
        if let Value::Object(m) = &mut raw {
            m.entry("params").or_insert_with(|| Value::Object(Default::default()));
            if let Some(k) = m.keys().find(|k| !["block", "params", "repeat"].contains(&k.as_str())) {
                violations.push(Violation { node: Some(i), kind: ViolationKind::Schema, message: format!("unknown stage field {k:?}") });
                continue;
            }
        }
        match serde_json::from_value::<Stage>(raw) {
            Ok(s) => stages.push(s),
            Err(e) => violations.push(Violation { node: Some(i), kind: ViolationKind::Schema, message: e.to_string() }),
        }
    }
    if !violations.is_empty() {
        return Err(ParseError { violations });
    }
    let spec = NetworkSpec {
        name,
        input: input.expect("input present when no violations"),
        stages,
    };
    spec.expand()?;
    Ok(spec)
}
