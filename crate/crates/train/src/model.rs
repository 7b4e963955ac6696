//! A small CPWC classifier with hand-written backward passes.

use cpwc_core::{
    cpwc_backward, cpwc_forward, grouped3x3_backward, grouped3x3_forward, init_params, macs_cpwc,
    plan_groups, pointwise_backward, pointwise_forward, CpwcParams, CpwcVariant, Element, Shape,
    Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: CpwcVariant,
    pub in_channels: usize,
    /// Width of the stem and of the first and last blocks.
    pub channels: usize,
    pub classes: usize,
    /// Stem kernel size, 1 or 3.
    pub stem_kernel: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(variant: CpwcVariant, in_channels: usize, channels: usize, classes: usize) -> Self {
        Self { variant, in_channels, channels, classes, stem_kernel: 3, seed: 0 }
    }

    /// `(in, out, stride)` of each CPWC block: one block per grouping case.
    pub fn blocks(&self) -> [(usize, usize, usize); 3] {
        let c = self.channels;
        [(c, c, 1), (c, 2 * c, 2), (2 * c, c, 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Batch statistics; running statistics are left alone.
    BatchStats,
    /// Running statistics.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Element> BatchNorm<T> {
    pub fn new(c: usize) -> Self {
        Self {
            gamma: vec![T::ONE; c],
            beta: vec![T::ZERO; c],
            running_mean: vec![T::ZERO; c],
            running_var: vec![T::ONE; c],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub in_features: usize,
    pub out_features: usize,
    /// `out × in`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    /// Dense convolution, stride 1, `same` padding.
    Stem { kernel: usize, in_channels: usize, out_channels: usize, weight: Vec<T> },
    Cpwc(CpwcParams<T>),
    BatchNorm(BatchNorm<T>),
    Relu,
    GlobalAvgPool,
    Linear(Linear<T>),
}

impl<T: Element> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Stem { .. } => "stem",
            Layer::Cpwc(_) => "cpwc",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::GlobalAvgPool => "gap",
            Layer::Linear(_) => "fc",
        }
    }

    fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Stem { weight, .. } => vec![weight],
            Layer::Cpwc(p) => [&p.pwc, &p.stage1, &p.stage2].into_iter().flatten().map(Vec::as_slice).collect(),
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            Layer::Linear(l) => vec![&l.weight, &l.bias],
            Layer::Relu | Layer::GlobalAvgPool => vec![],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Layer::Stem { weight, .. } => vec![weight],
            Layer::Cpwc(p) => p.banks_mut().into_iter().map(Vec::as_mut_slice).collect(),
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::Linear(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Relu | Layer::GlobalAvgPool => vec![],
        }
    }
}

fn dense_groups(in_channels: usize, out_channels: usize) -> Vec<Vec<usize>> {
    vec![(0..in_channels).collect(); out_channels]
}

enum Cache<T> {
    Input(Tensor<T>),
    Norm { xhat: Tensor<T>, inv_std: Vec<T> },
    Pool(Shape),
}

/// Forward activations kept for the backward pass.
pub struct Trace<T> {
    caches: Vec<Cache<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub layers: Vec<Layer<T>>,
}

fn normal_fill<T: Element>(n: usize, std: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let d = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| T::from_f64(d.sample(rng))).collect()
}

/// Stem, three CPWC + batch-norm + ReLU blocks, global average pooling and a
/// fully connected classifier.
///
/// The blocks map `ch → ch`, `ch → 2ch` (stride 2) and `2ch → ch`, so the
/// equal, expanding and reducing channel groupings all occur.
pub fn build_toy_model<T: Element>(cfg: ModelConfig) -> Result<Model<T>> {
    if cfg.channels < 4 {
        return Err(TrainError::InvalidConfig(format!("channels must be at least 4, got {}", cfg.channels)));
    }
    if cfg.in_channels == 0 || cfg.classes < 2 {
        return Err(TrainError::InvalidConfig("need at least one input channel and two classes".into()));
    }
    if cfg.stem_kernel != 1 && cfg.stem_kernel != 3 {
        return Err(TrainError::InvalidConfig(format!("stem kernel must be 1 or 3, got {}", cfg.stem_kernel)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.channels;
    let k = cfg.stem_kernel;
    let mut layers = vec![
        Layer::Stem {
            kernel: k,
            in_channels: cfg.in_channels,
            out_channels: c,
            weight: normal_fill(c * cfg.in_channels * k * k, (2.0 / (k * k * cfg.in_channels) as f64).sqrt(), &mut rng),
        },
        Layer::BatchNorm(BatchNorm::new(c)),
        Layer::Relu,
    ];
    for (cin, cout, stride) in cfg.blocks() {
        let plan = plan_groups(cin, cout)?;
        layers.push(Layer::Cpwc(init_params(&plan, cfg.variant, stride, rng.random())?));
        layers.push(Layer::BatchNorm(BatchNorm::new(cout)));
        layers.push(Layer::Relu);
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Linear(Linear {
        in_features: c,
        out_features: cfg.classes,
        weight: normal_fill(c * cfg.classes, (1.0 / c as f64).sqrt(), &mut rng),
        bias: vec![T::ZERO; cfg.classes],
    }));
    Ok(Model { config: cfg, layers })
}

fn batchnorm_forward<T: Element>(x: &Tensor<T>, bn: &mut BatchNorm<T>, mode: Mode) -> (Tensor<T>, Cache<T>) {
    let s = x.shape();
    let m = (s.n * s.plane()) as f64;
    let mut out = Tensor::zeros(s);
    let mut xhat = Tensor::zeros(s);
    let mut inv = Vec::with_capacity(s.c);
    for c in 0..s.c {
        let (mean, var) = if mode == Mode::Eval {
            (bn.running_mean[c].to_f64(), bn.running_var[c].to_f64())
        } else {
            let vals = || (0..s.n).flat_map(|n| x.plane(n, c).iter().map(|v| v.to_f64()));
            let mean = vals().sum::<f64>() / m;
            let var = vals().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
            if mode == Mode::Train {
                let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
                let rm = &mut bn.running_mean[c];
                *rm = T::from_f64((1.0 - BN_MOMENTUM) * rm.to_f64() + BN_MOMENTUM * mean);
                let rv = &mut bn.running_var[c];
                *rv = T::from_f64((1.0 - BN_MOMENTUM) * rv.to_f64() + BN_MOMENTUM * unbiased);
            }
            (mean, var)
        };
        let istd = T::from_f64(1.0 / (var + BN_EPS).sqrt());
        let mean = T::from_f64(mean);
        inv.push(istd);
        for n in 0..s.n {
            let xs = x.plane(n, c);
            for (h, &v) in xhat.plane_mut(n, c).iter_mut().zip(xs) {
                *h = (v - mean) * istd;
            }
            let (g, b) = (bn.gamma[c], bn.beta[c]);
            let hs: Vec<T> = xhat.plane(n, c).to_vec();
            for (o, h) in out.plane_mut(n, c).iter_mut().zip(hs) {
                *o = g * h + b;
            }
        }
    }
    (out, Cache::Norm { xhat, inv_std: inv })
}

fn batchnorm_backward<T: Element>(
    bn: &BatchNorm<T>,
    xhat: &Tensor<T>,
    inv_std: &[T],
    grad: &Tensor<T>,
    batch_stats: bool,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let s = grad.shape();
    let m = T::from_f64((s.n * s.plane()) as f64);
    let mut gx = Tensor::zeros(s);
    let mut gg = vec![T::ZERO; s.c];
    let mut gb = vec![T::ZERO; s.c];
    for c in 0..s.c {
        let (mut sum_g, mut sum_gx) = (T::ZERO, T::ZERO);
        for n in 0..s.n {
            for (&g, &h) in grad.plane(n, c).iter().zip(xhat.plane(n, c)) {
                sum_g += g;
                sum_gx += g * h;
            }
        }
        gg[c] = sum_gx;
        gb[c] = sum_g;
        let k = bn.gamma[c] * inv_std[c];
        for n in 0..s.n {
            let gp = grad.plane(n, c).to_vec();
            let hp = xhat.plane(n, c).to_vec();
            for ((d, g), h) in gx.plane_mut(n, c).iter_mut().zip(gp).zip(hp) {
                *d = if batch_stats { k * (g - (sum_g + h * sum_gx) / m) } else { k * g };
            }
        }
    }
    (gx, gg, gb)
}

impl<T: Element> Model<T> {
    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(<[T]>::len).sum()
    }

    /// Multiply-accumulates of the convolutions and the classifier for one
    /// `h × w` input.
    pub fn macs_per_sample(&self, h: usize, w: usize) -> u64 {
        let (mut h, mut w) = (h as u64, w as u64);
        let mut total = 0;
        for layer in &self.layers {
            match layer {
                Layer::Stem { kernel, in_channels, out_channels, .. } => {
                    total += (kernel * kernel * in_channels * out_channels) as u64 * h * w;
                }
                Layer::Cpwc(p) => {
                    let s = p.stride() as u64;
                    h = (h - 1) / s + 1;
                    w = (w - 1) / s + 1;
                    total += macs_cpwc(p.in_channels() as u64, p.out_channels() as u64, p.variant(), h, w);
                }
                Layer::Linear(l) => total += (l.in_features * l.out_features) as u64,
                _ => {}
            }
        }
        total
    }

    /// One line per layer.
    pub fn describe(&self) -> Vec<String> {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Stem { kernel, in_channels, out_channels, .. } => {
                    format!("stem {kernel}x{kernel} {in_channels}->{out_channels}")
                }
                Layer::Cpwc(p) => format!(
                    "cpwc {} {}->{} stride {} ({})",
                    p.variant().name(),
                    p.in_channels(),
                    p.out_channels(),
                    p.stride(),
                    p.plan()
                ),
                Layer::BatchNorm(b) => format!("batchnorm {}", b.gamma.len()),
                Layer::Linear(f) => format!("fc {}->{}", f.in_features, f.out_features),
                other => other.name().to_string(),
            })
            .collect()
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    /// Trainable banks in a fixed order matching the gradients of [`Model::backward`].
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Logits of shape `(N, classes, 1, 1)`.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Trace<T>)> {
        if x.shape().c != self.config.in_channels {
            return Err(TrainError::InvalidConfig(format!(
                "input has {} channels, model expects {}",
                x.shape().c,
                self.config.in_channels
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &mut self.layers {
            let (next, cache) = match layer {
                Layer::Stem { kernel: 1, out_channels, weight, .. } => {
                    (pointwise_forward(&h, weight, *out_channels, 1)?, Cache::Input(h))
                }
                Layer::Stem { in_channels, out_channels, weight, .. } => {
                    let g = dense_groups(*in_channels, *out_channels);
                    (grouped3x3_forward(&h, &g, weight, 1)?, Cache::Input(h))
                }
                Layer::Cpwc(p) => (cpwc_forward(&h, p)?, Cache::Input(h)),
                Layer::BatchNorm(bn) => batchnorm_forward(&h, bn, mode),
                Layer::Relu => (h.map(|v| if v > T::ZERO { v } else { T::ZERO }), Cache::Input(h)),
                Layer::GlobalAvgPool => {
                    let s = h.shape();
                    let inv = T::from_f64(1.0 / s.plane() as f64);
                    let out = Tensor::from_fn(Shape::new(s.n, s.c, 1, 1)?, |n, c, _, _| {
                        h.plane(n, c).iter().copied().sum::<T>() * inv
                    });
                    (out, Cache::Pool(s))
                }
                Layer::Linear(l) => {
                    let s = h.shape();
                    let out = Tensor::from_fn(Shape::new(s.n, l.out_features, 1, 1)?, |n, o, _, _| {
                        let row = &l.weight[o * l.in_features..(o + 1) * l.in_features];
                        l.bias[o] + (0..l.in_features).map(|i| row[i] * h.get(n, i, 0, 0)).sum::<T>()
                    });
                    (out, Cache::Input(h))
                }
            };
            caches.push(cache);
            h = next;
        }
        Ok((h, Trace { caches }))
    }

    /// Gradients of every trainable bank, in [`Model::params_mut`] order.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &Tensor<T>, mode: Mode) -> Result<Vec<Vec<T>>> {
        let mut grads: Vec<Vec<Vec<T>>> = Vec::with_capacity(self.layers.len());
        let mut g = grad_logits.clone();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            let (next, pg) = match (layer, cache) {
                (Layer::Stem { kernel: 1, out_channels, weight, .. }, Cache::Input(x)) => {
                    let (gx, gw) = pointwise_backward(x, weight, *out_channels, 1, &g)?;
                    (gx, vec![gw])
                }
                (Layer::Stem { in_channels, out_channels, weight, .. }, Cache::Input(x)) => {
                    let groups = dense_groups(*in_channels, *out_channels);
                    let (gx, gw) = grouped3x3_backward(x, &groups, weight, 1, &g)?;
                    (gx, vec![gw])
                }
                (Layer::Cpwc(p), Cache::Input(x)) => {
                    let cg = cpwc_backward(x, p, &g)?;
                    let banks = [cg.pwc, cg.stage1, cg.stage2].into_iter().flatten().collect();
                    (cg.input, banks)
                }
                (Layer::BatchNorm(bn), Cache::Norm { xhat, inv_std }) => {
                    let (gx, gg, gb) = batchnorm_backward(bn, xhat, inv_std, &g, mode != Mode::Eval);
                    (gx, vec![gg, gb])
                }
                (Layer::Relu, Cache::Input(x)) => {
                    let mut gx = g.clone();
                    for (d, &v) in gx.data_mut().iter_mut().zip(x.data()) {
                        if v <= T::ZERO {
                            *d = T::ZERO;
                        }
                    }
                    (gx, vec![])
                }
                (Layer::GlobalAvgPool, Cache::Pool(s)) => {
                    let inv = T::from_f64(1.0 / s.plane() as f64);
                    (Tensor::from_fn(*s, |n, c, _, _| g.get(n, c, 0, 0) * inv), vec![])
                }
                (Layer::Linear(l), Cache::Input(x)) => {
                    let n = x.shape().n;
                    let mut gw = vec![T::ZERO; l.weight.len()];
                    let mut gb = vec![T::ZERO; l.out_features];
                    let mut gx = Tensor::zeros(x.shape());
                    for b in 0..n {
                        for o in 0..l.out_features {
                            let go = g.get(b, o, 0, 0);
                            gb[o] += go;
                            for i in 0..l.in_features {
                                gw[o * l.in_features + i] += go * x.get(b, i, 0, 0);
                                let cur = gx.get(b, i, 0, 0);
                                gx.set(b, i, 0, 0, cur + go * l.weight[o * l.in_features + i]);
                            }
                        }
                    }
                    (gx, vec![gw, gb])
                }
                _ => unreachable!("trace does not match the model"),
            };
            grads.push(pg);
            g = next;
        }
        Ok(grads.into_iter().rev().flatten().collect())
    }
}

/// Mean softmax cross-entropy, its gradient and the number of correct
/// arg-max predictions.
pub fn softmax_cross_entropy<T: Element>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>, usize)> {
    let s = logits.shape();
    if s.n != labels.len() || s.h != 1 || s.w != 1 {
        return Err(TrainError::InvalidConfig(format!("logits {s} do not match {} labels", labels.len())));
    }
    let mut grad = Tensor::zeros(s);
    let mut loss = 0.0;
    let mut correct = 0;
    for (n, &y) in labels.iter().enumerate() {
        let z: Vec<f64> = (0..s.c).map(|k| logits.get(n, k, 0, 0).to_f64()).collect();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        loss += sum.ln() + max - z[y];
        let argmax = (0..s.c).fold(0, |best, k| if z[k] > z[best] { k } else { best });
        correct += usize::from(argmax == y);
        for k in 0..s.c {
            let p = (z[k] - max).exp() / sum;
            let t = if k == y { 1.0 } else { 0.0 };
            grad.set(n, k, 0, 0, T::from_f64((p - t) / s.n as f64));
        }
    }
    Ok((loss / s.n as f64, grad, correct))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(variant: CpwcVariant) -> Model<f64> {
        let mut cfg = ModelConfig::new(variant, 2, 4, 3);
        cfg.seed = 11;
        build_toy_model(cfg).unwrap()
    }

    /// Off-default norm parameters so no activation sits exactly on a ReLU kink.
    fn perturbed(variant: CpwcVariant) -> Model<f64> {
        let mut m = model(variant);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for layer in &mut m.layers {
            if let Layer::BatchNorm(b) = layer {
                for v in b.beta.iter_mut().chain(b.running_mean.iter_mut()) {
                    *v = rng.random_range(-0.3..0.3);
                }
                for v in b.gamma.iter_mut().chain(b.running_var.iter_mut()) {
                    *v = rng.random_range(0.5..1.5);
                }
            }
        }
        m
    }

    fn input(seed: u64) -> (Tensor<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::from_fn(Shape::new(3, 2, 6, 6).unwrap(), |_, _, _, _| rng.random_range(-1.0..1.0));
        (x, vec![0, 2, 1])
    }

    fn loss(m: &Model<f64>, x: &Tensor<f64>, y: &[usize], mode: Mode) -> f64 {
        let mut m = m.clone();
        let (logits, _) = m.forward(x, mode).unwrap();
        softmax_cross_entropy(&logits, y).unwrap().0
    }

    #[test]
    fn whole_model_gradients_match_finite_differences() {
        for variant in CpwcVariant::ALL {
            for mode in [Mode::BatchStats, Mode::Eval] {
                let mut m = perturbed(variant);
                let (x, y) = input(4);
                let (logits, trace) = m.forward(&x, mode).unwrap();
                let (_, g, _) = softmax_cross_entropy(&logits, &y).unwrap();
                let grads = m.backward(&trace, &g, mode).unwrap();
                let sizes: Vec<usize> = m.params().iter().map(|p| p.len()).collect();
                assert_eq!(grads.iter().map(Vec::len).collect::<Vec<_>>(), sizes);
                let eps = 1e-5;
                for (b, bank) in grads.iter().enumerate() {
                    for i in (0..bank.len()).step_by(1 + bank.len() / 12) {
                        let mut plus = m.clone();
                        plus.params_mut()[b][i] += eps;
                        let mut minus = m.clone();
                        minus.params_mut()[b][i] -= eps;
                        let num = (loss(&plus, &x, &y, mode) - loss(&minus, &x, &y, mode)) / (2.0 * eps);
                        let err = (num - bank[i]).abs() / num.abs().max(bank[i].abs()).max(1e-6);
                        assert!(err < 1e-4, "{variant} {mode:?} bank {b} index {i}: {num} vs {}", bank[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weights_give_input_independent_logits() {
        let mut m = model(CpwcVariant::Full);
        for p in m.params_mut() {
            p.fill(0.0);
        }
        if let Some(Layer::Linear(l)) = m.layers.last_mut() {
            l.bias = vec![0.5, -1.0, 2.0];
        }
        let (a, _) = m.clone().forward(&input(1).0, Mode::Eval).unwrap();
        let (b, _) = m.forward(&input(2).0, Mode::Eval).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0, 2, 0, 0), 2.0);
    }

    #[test]
    fn running_stats_only_move_in_train_mode() {
        let mut m = model(CpwcVariant::Full);
        let before = m.clone();
        m.forward(&input(1).0, Mode::BatchStats).unwrap();
        m.forward(&input(1).0, Mode::Eval).unwrap();
        assert_eq!(m, before);
        m.forward(&input(1).0, Mode::Train).unwrap();
        assert_ne!(m, before);
    }

    #[test]
    fn cross_entropy_oracle() {
        let logits = Tensor::new(Shape::new(2, 3, 1, 1).unwrap(), vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        let (l, g, correct) = softmax_cross_entropy(&logits, &[2, 0]).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        let want = ((z.ln() - 3.0) + 3f64.ln()) / 2.0;
        assert!((l - want).abs() < 1e-12);
        // the all-zero row ties and resolves to class 0
        assert_eq!(correct, 2);
        assert!((g.get(1, 0, 0, 0) - (1.0 / 3.0 - 1.0) / 2.0).abs() < 1e-12);
        assert!(g.data().chunks(3).all(|r| r.iter().sum::<f64>().abs() < 1e-12));
    }

    #[test]
    fn counts_and_structure() {
        let m = model(CpwcVariant::Full);
        let d = m.describe();
        assert!(d.iter().any(|l| l.contains("case 1")));
        assert!(d.iter().any(|l| l.contains("case 2")));
        assert!(d.iter().any(|l| l.contains("case 3")));
        // stem 4·2·9, bn 8, three blocks, three bns, fc 4·3+3
        let blocks: usize = [(4, 4), (4, 8), (8, 4)]
            .iter()
            .map(|&(c, z)| c * z + 9 * usize::max(c, z) + 9 * z + 2 * z)
            .sum();
        assert_eq!(m.param_count(), 72 + 8 + blocks + 15);
        assert!(build_toy_model::<f32>(ModelConfig::new(CpwcVariant::Full, 1, 3, 4)).is_err());
    }

    #[test]
    fn fewer_paths_mean_fewer_macs() {
        let macs: Vec<u64> = CpwcVariant::ALL.iter().map(|&v| model(v).macs_per_sample(16, 16)).collect();
        let full = model(CpwcVariant::Full).macs_per_sample(16, 16);
        assert!(macs.iter().all(|&m| m <= full));
    }
}
