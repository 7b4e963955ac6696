use cpwc_analyzer::*;
use cpwc_core::{init_params, plan_groups, CpwcVariant};
use proptest::prelude::*;

fn within(actual: u64, target: f64, tol: f64) -> bool {
    ((actual as f64 - target) / target).abs() <= tol
}

#[test]
fn resnet164_costs() {
    let base = count_network(&resnet164()).unwrap();
    assert!(within(base.total_params, 1.74e6, 0.03), "{}", base.total_params);
    assert!(within(base.total_macs, 0.25e9, 0.03), "{}", base.total_macs);
    let full = count_network(&surgery(&resnet164(), CpwcVariant::Full)).unwrap();
    assert!(within(full.total_params, 1.96e6, 0.03), "{}", full.total_params);
    assert!(within(full.total_macs, 0.30e9, 0.10), "{}", full.total_macs);
    let nos2 = count_network(&surgery(&resnet164(), CpwcVariant::NoStage2)).unwrap();
    assert!(within(nos2.total_params, 1.87e6, 0.03), "{}", nos2.total_params);
    assert!(within(nos2.total_macs, 0.28e9, 0.10), "{}", nos2.total_macs);
}

#[test]
fn resnet50_costs() {
    let base = count_network(&resnet50()).unwrap();
    assert!(within(base.total_params, 25.56e6, 0.02), "{}", base.total_params);
    assert!(within(base.total_macs, 4.0e9, 0.10), "{}", base.total_macs);
    let full = count_network(&surgery(&resnet50(), CpwcVariant::Full)).unwrap();
    assert!(within(full.total_params, 26.05e6, 0.02), "{}", full.total_params);
    assert!(within(full.total_macs, 4.3e9, 0.10), "{}", full.total_macs);
    let nos2 = count_network(&surgery(&resnet50(), CpwcVariant::NoStage2)).unwrap();
    assert!(within(nos2.total_params, 25.84e6, 0.02), "{}", nos2.total_params);
}

#[test]
fn pwc_only_surgery_leaves_counts_unchanged() {
    for spec in [resnet164(), resnet50()] {
        let a = count_network(&spec).unwrap();
        let b = count_network(&surgery(&spec, CpwcVariant::PwcOnly)).unwrap();
        assert_eq!((a.total_params, a.total_macs), (b.total_params, b.total_macs));
    }
}

#[test]
fn per_node_delta_and_instantiated_banks() {
    for spec in [resnet164(), resnet50()] {
        let base = count_network(&spec).unwrap();
        for v in CpwcVariant::ALL {
            let cut = count_network(&surgery(&spec, v)).unwrap();
            if v == CpwcVariant::Full {
                assert!(cut.total_params >= base.total_params);
            }
            for (a, b) in base.nodes.iter().zip(&cut.nodes) {
                if a.kind == NodeKind::Conv && a.kernel == (1, 1) {
                    let (c, z) = (a.in_channels, a.out_channels);
                    if v == CpwcVariant::Full {
                        assert_eq!(b.params - a.params, (9 * c.max(z) + 9 * z) as u64, "{}", a.name);
                    }
                    let p = init_params::<f32>(&plan_groups(c, z).unwrap(), v, a.stride, 0).unwrap();
                    assert_eq!(b.params, p.num_weights() as u64, "{} {v}", a.name);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
    }
}

#[test]
fn comparison_summary() {
    let base = count_network(&resnet50()).unwrap();
    let cut = count_network(&surgery(&resnet50(), CpwcVariant::Full)).unwrap();
    let cmp = compare_counts(&base, &cut, CpwcVariant::Full);
    // 16 blocks × 2 + 4 projections
    assert_eq!(cmp.node_deltas.len(), 36);
    assert_eq!(cmp.delta_params, cmp.node_deltas.iter().map(|d| d.params).sum::<i64>());
    assert!(cmp.render_table().contains("26.05M"));
}

fn arb_stage(width: usize) -> impl Strategy<Value = Stage> {
    prop_oneof![
        (1usize..4, 1usize..3).prop_map(move |(k, r)| Stage::repeated(
            Block::Conv(ConvParams {
                in_channels: width,
                out_channels: width,
                kernel: 2 * k - 1,
                stride: 1,
                padding: None,
                groups: 1,
                cpwc: None,
            }),
            r
        )),
        Just(Stage::new(Block::Norm(NormParams {}))),
        (1usize..4, any::<bool>()).prop_map(move |(r, preact)| Stage::repeated(
            Block::Bottleneck(BottleneckParams {
                in_channels: width,
                mid_channels: width / 4,
                out_channels: width,
                stride: 1,
                preact,
                cpwc: None,
            }),
            r
        )),
    ]
}

proptest! {
    #[test]
    fn random_specs_round_trip_and_surgery_is_idempotent(
        stages in prop::collection::vec(arb_stage(16), 1..6), vi in 0usize..5,
    ) {
        let spec = NetworkSpec {
            name: "random".into(),
            input: InputShape { channels: 16, height: 8, width: 8 },
            stages,
        };
        prop_assert_eq!(&parse_spec(&spec.to_json()).unwrap(), &spec);
        let v = CpwcVariant::ALL[vi];
        let once = surgery(&spec, v);
        prop_assert_eq!(&surgery(&once, v), &once);
        let r = count_network(&once).unwrap();
        prop_assert_eq!(r.total_params, r.nodes.iter().map(|n| n.params).sum::<u64>());
    }
}
