use cpwc_core::Element;
use serde::{Deserialize, Serialize};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
///
/// ```text
/// g ← g + λ·w
/// v ← μ·v + g
/// w ← w − η·v
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd<T> {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Element> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self { momentum, weight_decay, velocity: Vec::new() }
    }

    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[Vec<T>], lr: f64) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter bank");
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![T::ZERO; g.len()]).collect();
        }
        let (mu, wd, lr) = (T::from_f64(self.momentum), T::from_f64(self.weight_decay), T::from_f64(lr));
        for ((w, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                *v = mu * *v + g + wd * *w;
                *w -= lr * *v;
            }
        }
    }
}

/// Step decay: `lr · factor^⌊epoch / every⌋` (epochs count from 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub lr: f64,
    pub factor: f64,
    pub every: usize,
}

impl StepSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        self.lr * self.factor.powi((epoch / self.every.max(1)) as i32)
    }
}
