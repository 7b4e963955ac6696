use cpwc_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

/// Brute-force check of every grouping rule for one `(C, Z)` pair.
fn plan_violations(c: usize, z: usize) -> Vec<String> {
    let plan = plan_groups(c, z).unwrap();
    let mut bad = Vec::new();
    let groups = plan.groups();
    if groups.len() != z {
        bad.push(format!("{} groups, want {z}", groups.len()));
    }
    let mut seen = vec![0usize; c];
    for g in groups {
        for &ch in g {
            if ch >= c {
                bad.push(format!("channel {ch} out of range"));
                return bad;
            }
            seen[ch] += 1;
        }
    }
    let total: usize = groups.iter().map(|g| g.len()).sum();
    if total != c.max(z) {
        bad.push(format!("sum r_i = {total}, want {}", c.max(z)));
    }
    if z <= c {
        if seen.iter().any(|&s| s != 1) {
            bad.push("not a partition".into());
        }
        let rm = c % z;
        for (i, g) in groups.iter().enumerate() {
            let want = c / z + usize::from(i < rm);
            if g.len() != want {
                bad.push(format!("group {i} has {} channels, want {want}", g.len()));
            }
        }
    } else {
        if groups.iter().any(|g| g.len() != 1) {
            bad.push("expanding case needs singleton groups".into());
        }
        let rm = z % c;
        for (ch, &s) in seen.iter().enumerate() {
            let want = z / c + usize::from(ch < rm);
            if s != want {
                bad.push(format!("channel {ch} shared by {s}, want {want}"));
            }
        }
    }
    bad
}

#[test]
fn grouping_rules_hold_for_all_small_pairs() {
    for c in 1..=64 {
        for z in 1..=64 {
            let bad = plan_violations(c, z);
            assert!(bad.is_empty(), "C={c} Z={z}: {bad:?}");
        }
    }
}

#[test]
fn closed_form_count_matches_instantiated_banks() {
    for c in 1..=64u64 {
        for z in 1..=64u64 {
            let plan = plan_groups(c as usize, z as usize).unwrap();
            for v in CpwcVariant::ALL {
                let p = CpwcParams::<f32>::zeros(plan.clone(), v, 1).unwrap();
                assert_eq!(count_cpwc(c, z, v), p.num_weights() as u64, "C={c} Z={z} {v}");
            }
        }
    }
}

/// Multiplications performed by a naive convolution that visits every kernel
/// tap, padding included.
fn counted_multiplies(bank_taps: &[usize], out_h: usize, out_w: usize) -> u64 {
    let mut n = 0u64;
    for &taps in bank_taps {
        for _ in 0..out_h * out_w {
            for _ in 0..taps {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn mac_count_matches_instrumented_loops() {
    let (c, z, h, w, stride) = (5usize, 3usize, 7usize, 6usize, 2usize);
    let plan = plan_groups(c, z).unwrap();
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let pwc: Vec<usize> = vec![c; z];
    let s1: Vec<usize> = plan.groups().iter().map(|g| 9 * g.len()).collect();
    let s2: Vec<usize> = vec![9; z];
    let full = counted_multiplies(&pwc, oh, ow)
        + counted_multiplies(&s1, oh, ow)
        + counted_multiplies(&s2, oh, ow);
    assert_eq!(macs_cpwc(c as u64, z as u64, CpwcVariant::Full, oh as u64, ow as u64), full);
    let nos2 = full - counted_multiplies(&s2, oh, ow);
    assert_eq!(macs_cpwc(c as u64, z as u64, CpwcVariant::NoStage2, oh as u64, ow as u64), nos2);
}

#[test]
fn oracle_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let s = Shape::new(2, 3, 6, 5).unwrap();
    let x = random_tensor(s, &mut rng);
    let y = random_tensor(s, &mut rng);
    let mut bank = ConvFilterBank::zeros((3, 3), vec![vec![0, 1], vec![2], vec![0, 1, 2], vec![1]]).unwrap();
    for w in bank.weights_mut() {
        *w = rng.random_range(-1.0..1.0);
    }
    let (a, b) = (0.75, -1.25);
    let combo = Tensor::new(
        s,
        x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
    )
    .unwrap();
    for stride in [1, 2] {
        let lhs = conv2d_oracle(&combo, &bank, stride, 1).unwrap();
        let ox = conv2d_oracle(&x, &bank, stride, 1).unwrap();
        let oy = conv2d_oracle(&y, &bank, stride, 1).unwrap();
        let rhs = add_elementwise(&ox.scale(a), &oy.scale(b)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * rhs.max_abs());
    }
}

fn oracle_paths(x: &Tensor<f64>, p: &CpwcParams<f64>) -> Tensor<f64> {
    let z = p.out_channels();
    let c = p.in_channels();
    let st = p.stride();
    let s = x.shape();
    let mut acc = Tensor::zeros(Shape::new(s.n, z, s.h.div_ceil(st), s.w.div_ceil(st)).unwrap());
    if let Some(w) = &p.pwc {
        let bank = ConvFilterBank::dense(c, z, (1, 1), w.clone()).unwrap();
        acc = add_elementwise(&acc, &conv2d_oracle(x, &bank, st, 0).unwrap()).unwrap();
    }
    if let Some(w) = &p.stage1 {
        let bank = ConvFilterBank::new((3, 3), p.plan().groups().to_vec(), w.clone()).unwrap();
        let s1 = conv2d_oracle(x, &bank, st, 1).unwrap();
        acc = add_elementwise(&acc, &s1).unwrap();
        if let Some(w2) = &p.stage2 {
            let dw = ConvFilterBank::new((3, 3), (0..z).map(|i| vec![i]).collect(), w2.clone()).unwrap();
            acc = add_elementwise(&acc, &conv2d_oracle(&s1, &dw, 1, 1).unwrap()).unwrap();
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_decomposes_into_oracle_paths(
        c in 1usize..9, z in 1usize..9, h in 1usize..8, w in 1usize..8,
        stride in 1usize..3, vi in 0usize..5, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = init_params::<f64>(&plan_groups(c, z).unwrap(), CpwcVariant::ALL[vi], stride, seed).unwrap();
        let x = random_tensor(Shape::new(2, c, h, w).unwrap(), &mut rng);
        let y = cpwc_forward(&x, &p).unwrap();
        let o = oracle_paths(&x, &p);
        prop_assert_eq!(y.shape(), o.shape());
        prop_assert!(y.max_abs_diff(&o) <= 1e-12 * o.max_abs().max(1e-300));
    }

    #[test]
    fn forward_is_homogeneous(
        c in 1usize..7, z in 1usize..7, stride in 1usize..3, vi in 0usize..5,
        alpha in -4.0f64..4.0, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = init_params::<f64>(&plan_groups(c, z).unwrap(), CpwcVariant::ALL[vi], stride, seed).unwrap();
        let x = random_tensor(Shape::new(1, c, 5, 6).unwrap(), &mut rng);
        let lhs = cpwc_forward(&x.scale(alpha), &p).unwrap();
        let rhs = cpwc_forward(&x, &p).unwrap().scale(alpha);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * rhs.max_abs().max(1e-300));
    }
}

#[test]
fn single_precision_decomposition_within_1e5() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (c, z) in [(4, 4), (8, 2), (2, 8), (10, 3), (3, 10)] {
        for stride in [1, 2] {
            for v in CpwcVariant::ALL {
                let p64 = init_params::<f64>(&plan_groups(c, z).unwrap(), v, stride, 3).unwrap();
                let x64 = random_tensor(Shape::new(1, c, 6, 6).unwrap(), &mut rng);
                let p32 = CpwcParams::<f32>::new(
                    p64.plan().clone(),
                    v,
                    stride,
                    p64.pwc.as_ref().map(|w| w.iter().map(|&v| v as f32).collect()),
                    p64.stage1.as_ref().map(|w| w.iter().map(|&v| v as f32).collect()),
                    p64.stage2.as_ref().map(|w| w.iter().map(|&v| v as f32).collect()),
                )
                .unwrap();
                // oracle in double on the single-precision values
                let p_back = CpwcParams::<f64>::new(
                    p64.plan().clone(),
                    v,
                    stride,
                    p32.pwc.as_ref().map(|w| w.iter().map(|&v| v as f64).collect()),
                    p32.stage1.as_ref().map(|w| w.iter().map(|&v| v as f64).collect()),
                    p32.stage2.as_ref().map(|w| w.iter().map(|&v| v as f64).collect()),
                )
                .unwrap();
                let x32: Tensor<f32> = x64.cast();
                let y32: Tensor<f64> = cpwc_forward(&x32, &p32).unwrap().cast();
                let o = oracle_paths(&x32.cast(), &p_back);
                assert!(y32.max_abs_diff(&o) <= 1e-5 * o.max_abs(), "C={c} Z={z} s={stride} {v}");
            }
        }
    }
}

#[test]
fn backward_matches_finite_differences_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pairs = [(4, 4), (6, 6), (8, 3), (10, 3), (5, 2), (3, 10), (2, 7), (1, 5)];
    let mut n = 0;
    for trial in 0..60 {
        let (c, z) = pairs[trial % pairs.len()];
        let v = CpwcVariant::ALL[trial % 5];
        let stride = 1 + (trial / 5) % 2;
        let (h, w) = (rng.random_range(2..7), rng.random_range(2..7));
        let p = init_params::<f64>(&plan_groups(c, z).unwrap(), v, stride, trial as u64).unwrap();
        let x = random_tensor(Shape::new(1, c, h, w).unwrap(), &mut rng);
        // the loss is exactly quadratic in every scalar, so a wide step adds no
        // truncation error and keeps roundoff small relative to tiny gradients
        let r = finite_difference_check(&p, &x, 1e-3, 1e-6).unwrap();
        assert!(r.passed, "trial {trial} C={c} Z={z} {v} stride {stride}: {r:?}");
        n += 1;
    }
    assert!(n >= 50);
}
