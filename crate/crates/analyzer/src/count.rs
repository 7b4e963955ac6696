use std::fmt::Write as _;

use cpwc_core::{count_cpwc, CpwcVariant};
use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::spec::{InputShape, LayerNode, NetworkSpec, NodeKind};

/// Version of the serialized report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCount {
    pub index: usize,
    pub name: String,
    pub kind: NodeKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpwc: Option<CpwcVariant>,
    pub params: u64,
    pub macs: u64,
}

/// Per-node and total parameter/MAC tallies for one network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountReport {
    pub schema_version: u32,
    pub network: String,
    pub input: InputShape,
    pub nodes: Vec<NodeCount>,
    pub total_params: u64,
    pub total_macs: u64,
}

/// Parameters and MACs of one expanded node.
///
/// Convolutions count `k²·(C_in/groups)·C_out` weights and that many MACs per
/// output pixel; CPWC-flagged 1×1 nodes use the CPWC closed form. Fully
/// connected layers count `C_in·C_out` (+ `C_out` bias) with `C_in·C_out`
/// MACs, norm layers two affine parameters per channel and no MACs.
pub fn node_cost(node: &LayerNode) -> (u64, u64) {
    let (cin, cout) = (node.in_channels as u64, node.out_channels as u64);
    let pixels = (node.out_h * node.out_w) as u64;
    match node.kind {
        NodeKind::Conv => {
            let (kh, kw) = (node.kernel.0 as u64, node.kernel.1 as u64);
            let g = node.groups as u64;
            let dense = kh * kw * (cin / g) * cout;
            let params = match node.cpwc {
                Some(v) if node.is_pwc() => {
                    let grouped_pwc_saving = if v.has_pwc() { cin * cout - cin / g * cout } else { 0 };
                    count_cpwc(cin, cout, v) - grouped_pwc_saving
                }
                _ => dense,
            };
            (params, params * pixels)
        }
        NodeKind::Fc => (cin * cout + if node.bias { cout } else { 0 }, cin * cout),
        NodeKind::Norm => (2 * cout, 0),
        NodeKind::Input | NodeKind::Pool | NodeKind::Add => (0, 0),
    }
}

pub fn count_network(spec: &NetworkSpec) -> Result<CountReport, ParseError> {
    let nodes: Vec<NodeCount> = spec
        .expand()?
        .into_iter()
        .enumerate()
        .map(|(index, n)| {
            let (params, macs) = node_cost(&n);
            NodeCount {
                index,
                name: n.name,
                kind: n.kind,
                in_channels: n.in_channels,
                out_channels: n.out_channels,
                kernel: n.kernel,
                stride: n.stride,
                out_h: n.out_h,
                out_w: n.out_w,
                cpwc: n.cpwc,
                params,
                macs,
            }
        })
        .collect();
    Ok(CountReport {
        schema_version: REPORT_SCHEMA_VERSION,
        network: spec.name.clone(),
        input: spec.input,
        total_params: nodes.iter().map(|n| n.params).sum(),
        total_macs: nodes.iter().map(|n| n.macs).sum(),
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDelta {
    pub index: usize,
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub params: i64,
    pub macs: i64,
}

/// Baseline versus modified totals for one surgery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurgeryComparison {
    pub schema_version: u32,
    pub network: String,
    pub variant: CpwcVariant,
    pub baseline_params: u64,
    pub baseline_macs: u64,
    pub modified_params: u64,
    pub modified_macs: u64,
    pub delta_params: i64,
    pub delta_macs: i64,
    /// Nodes whose counts changed.
    pub node_deltas: Vec<NodeDelta>,
}

pub fn compare_counts(baseline: &CountReport, modified: &CountReport, variant: CpwcVariant) -> SurgeryComparison {
    let node_deltas = baseline
        .nodes
        .iter()
        .zip(&modified.nodes)
        .filter(|(a, b)| a.params != b.params || a.macs != b.macs)
        .map(|(a, b)| NodeDelta {
            index: a.index,
            name: a.name.clone(),
            in_channels: a.in_channels,
            out_channels: a.out_channels,
            params: b.params as i64 - a.params as i64,
            macs: b.macs as i64 - a.macs as i64,
        })
        .collect();
    SurgeryComparison {
        schema_version: REPORT_SCHEMA_VERSION,
        network: baseline.network.clone(),
        variant,
        baseline_params: baseline.total_params,
        baseline_macs: baseline.total_macs,
        modified_params: modified.total_params,
        modified_macs: modified.total_macs,
        delta_params: modified.total_params as i64 - baseline.total_params as i64,
        delta_macs: modified.total_macs as i64 - baseline.total_macs as i64,
        node_deltas,
    }
}

/// `1.74M` style.
pub fn format_params(n: u64) -> String {
    format!("{:.2}M", n as f64 / 1e6)
}

/// `4.09G` style.
pub fn format_macs(n: u64) -> String {
    format!("{:.2}G", n as f64 / 1e9)
}

impl CountReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Aligned text table; with `per_node` every node gets a row, otherwise
    /// only the totals line is printed.
    pub fn render_table(&self, per_node: bool) -> String {
        let mut s = String::new();
        if per_node {
            let _ = writeln!(
                s,
                "{:>4}  {:<24} {:<5} {:>5} {:>5} {:>5} {:>2} {:>9}  {:<17} {:>12} {:>14}",
                "#", "node", "kind", "in", "out", "k", "s", "out", "cpwc", "params", "MACs"
            );
            for n in &self.nodes {
                let _ = writeln!(
                    s,
                    "{:>4}  {:<24} {:<5} {:>5} {:>5} {:>5} {:>2} {:>9}  {:<17} {:>12} {:>14}",
                    n.index,
                    n.name,
                    n.kind.to_string(),
                    n.in_channels,
                    n.out_channels,
                    format!("{}x{}", n.kernel.0, n.kernel.1),
                    n.stride,
                    format!("{}x{}", n.out_h, n.out_w),
                    n.cpwc.map_or("-", CpwcVariant::name),
                    n.params,
                    n.macs
                );
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{:<28} {:>10} {:>10}", "Model", "Params", "FLOPS");
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>10}",
            self.network,
            format_params(self.total_params),
            format_macs(self.total_macs)
        );
        let _ = writeln!(s, "(params: {}, MACs: {})", self.total_params, self.total_macs);
        s
    }
}

impl SurgeryComparison {
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<36} {:>10} {:>10}", "Model", "Params", "FLOPS");
        let _ = writeln!(
            s,
            "{:<36} {:>10} {:>10}",
            format!("{} (Baseline)", self.network),
            format_params(self.baseline_params),
            format_macs(self.baseline_macs)
        );
        let _ = writeln!(
            s,
            "{:<36} {:>10} {:>10}",
            format!("{} {}", self.network, self.variant.label()),
            format_params(self.modified_params),
            format_macs(self.modified_macs)
        );
        let _ = writeln!(
            s,
            "delta: {:+} params, {:+} MACs over {} nodes",
            self.delta_params,
            self.delta_macs,
            self.node_deltas.len()
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{Block, ConvParams, Stage};

    fn single_conv(cin: usize, cout: usize, kernel: usize, cpwc: Option<CpwcVariant>) -> NetworkSpec {
        NetworkSpec {
            name: "single".into(),
            input: InputShape { channels: cin, height: 56, width: 56 },
            stages: vec![Stage::new(Block::Conv(ConvParams {
                in_channels: cin,
                out_channels: cout,
                kernel,
                stride: 1,
                padding: None,
                groups: 1,
                cpwc,
            }))],
        }
    }

    #[test]
    fn worked_example_nodes() {
        let r = count_network(&single_conv(256, 64, 1, Some(CpwcVariant::Full))).unwrap();
        assert_eq!(r.total_params, 19_264);
        assert_eq!(r.total_macs, 60_411_904);
        let r = count_network(&single_conv(256, 64, 1, None)).unwrap();
        assert_eq!(r.total_params, 16_384);
        let r = count_network(&single_conv(256, 64, 3, None)).unwrap();
        assert_eq!(r.total_params, 147_456);
    }

    #[test]
    fn totals_are_node_sums() {
        let r = count_network(&crate::builtin::resnet50()).unwrap();
        assert_eq!(r.total_params, r.nodes.iter().map(|n| n.params).sum::<u64>());
        assert_eq!(r.total_macs, r.nodes.iter().map(|n| n.macs).sum::<u64>());
    }

    #[test]
    fn grouped_conv_count() {
        let mut spec = single_conv(32, 32, 3, None);
        if let Block::Conv(p) = &mut spec.stages[0].block {
            p.groups = 32;
        }
        assert_eq!(count_network(&spec).unwrap().total_params, 9 * 32);
    }

    #[test]
    fn table_has_standard_columns() {
        let r = count_network(&crate::builtin::resnet50()).unwrap();
        let t = r.render_table(false);
        assert!(t.contains("Params") && t.contains("FLOPS"));
        assert!(t.contains("25.56M"), "{t}");
    }
}
