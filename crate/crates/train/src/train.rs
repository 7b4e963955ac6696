use std::time::Instant;

use cpwc_core::{Element, Precision, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, TrainError};
use crate::model::{softmax_cross_entropy, Mode, Model, ModelConfig};
use crate::optim::{Sgd, StepSchedule};

pub const TRAIN_REPORT_SCHEMA_VERSION: u32 = 1;

/// Shipped desk-scale experiment: synthetic training and validation set
/// sizes, class count and toy-model width.
pub const DESK_TRAIN_EXAMPLES: usize = 2000;
pub const DESK_VAL_EXAMPLES: usize = 1000;
pub const DESK_CLASSES: usize = 4;
pub const DESK_CHANNELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub schedule: StepSchedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds shuffling and augmentation. Model initialization is seeded by
    /// [`ModelConfig::seed`].
    pub seed: u64,
    pub precision: Precision,
    /// Random 4-pixel-padded crops and horizontal flips (meant for CIFAR).
    pub augment: bool,
}

impl Hyper {
    /// The full-budget CIFAR recipe: lr 0.1 divided by 5 every 50 epochs,
    /// momentum 0.9, weight decay 5e-4, batch 128, 250 epochs.
    pub fn cifar_recipe() -> Self {
        Self {
            schedule: StepSchedule { lr: 0.1, factor: 0.2, every: 50 },
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 128,
            epochs: 250,
            seed: 0,
            precision: Precision::Single,
            augment: false,
        }
    }

    /// The shipped desk-scale configuration for the synthetic dataset.
    pub fn desk_default() -> Self {
        Self {
            schedule: StepSchedule { lr: 0.05, factor: 0.2, every: 6 },
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            precision: Precision::Single,
            augment: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        let ok = s.lr > 0.0
            && s.lr.is_finite()
            && s.factor > 0.0
            && s.factor <= 1.0
            && s.every > 0
            && self.batch_size > 0
            && self.momentum >= 0.0
            && self.momentum < 1.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig(format!("invalid hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub hyper: Hyper,
    pub train_examples: usize,
    pub val_examples: usize,
    pub param_count: usize,
    pub macs_per_sample: u64,
    /// Mean loss of the untrained model over the training batches, using
    /// batch statistics.
    pub initial_train_loss: f64,
    pub initial_val_accuracy: f64,
    pub epochs: Vec<EpochStats>,
    pub final_val_accuracy: f64,
    /// Non-deterministic run information; absent from reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<RunMetadata>,
}

/// Accuracy on `data` using running batch-norm statistics.
pub fn evaluate<T: Element>(model: &mut Model<T>, data: &Dataset, batch_size: usize) -> Result<f64> {
    let mut correct = 0;
    for (x, y) in batches(data, &(0..data.len()).collect::<Vec<_>>(), batch_size.max(1)) {
        let (logits, _) = model.forward(&x?.cast(), Mode::Eval)?;
        correct += softmax_cross_entropy(&logits, &y)?.2;
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

fn batches<'a>(
    data: &'a Dataset,
    order: &'a [usize],
    size: usize,
) -> impl Iterator<Item = (cpwc_core::Result<Tensor<f32>>, Vec<usize>)> + 'a {
    order.chunks(size).map(move |idx| (data.images.select_batch(idx), idx.iter().map(|&i| data.labels[i]).collect()))
}

/// Zero-pads by `size / 8`, takes a random crop of the original size and
/// flips half of the images horizontally.
fn augment(x: &Tensor<f32>, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let s = x.shape();
    let pad = (s.h.min(s.w) / 8) as i64;
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        let dy = rng.random_range(-pad..=pad) as isize;
        let dx = rng.random_range(-pad..=pad) as isize;
        let flip = rng.random_bool(0.5);
        for c in 0..s.c {
            for y in 0..s.h {
                for xx in 0..s.w {
                    let sy = y as isize + dy;
                    let mut sx = xx as isize + dx;
                    if flip {
                        sx = s.w as isize - 1 - sx;
                    }
                    if sy >= 0 && sx >= 0 && sy < s.h as isize && sx < s.w as isize {
                        out.set(n, c, y, xx, x.get(n, c, sy as usize, sx as usize));
                    }
                }
            }
        }
    }
    out
}

/// Trains `model` in place with minibatch SGD and reports per-epoch metrics.
///
/// Runs single-threaded; the same model, data and hyperparameters always
/// give the same report apart from [`TrainReport::metadata`].
pub fn train<T: Element>(model: &mut Model<T>, train: &Dataset, val: &Dataset, hyper: &Hyper) -> Result<TrainReport> {
    hyper.validate()?;
    if hyper.precision != T::PRECISION {
        return Err(TrainError::InvalidConfig(format!(
            "hyperparameters request {:?} precision but the model uses {:?}",
            hyper.precision,
            T::PRECISION
        )));
    }
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::InvalidConfig("training and validation sets must be non-empty".into()));
    }
    if train.classes != model.config.classes || val.classes != model.config.classes {
        return Err(TrainError::InvalidConfig(format!(
            "model has {} classes, data has {}",
            model.config.classes, train.classes
        )));
    }
    let start = Instant::now();
    let in_order: Vec<usize> = (0..train.len()).collect();
    let mut initial_loss = 0.0;
    for (x, y) in batches(train, &in_order, hyper.batch_size) {
        let (logits, _) = model.forward(&x?.cast(), Mode::BatchStats)?;
        initial_loss += softmax_cross_entropy(&logits, &y)?.0 * y.len() as f64;
    }
    initial_loss /= train.len() as f64;
    let initial_val_accuracy = evaluate(model, val, hyper.batch_size)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut opt = Sgd::<T>::new(hyper.momentum, hyper.weight_decay);
    let mut epochs = Vec::with_capacity(hyper.epochs);
    let mut order = in_order;
    for epoch in 0..hyper.epochs {
        let lr = hyper.schedule.at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0);
        for (b, idx) in order.chunks(hyper.batch_size).enumerate() {
            let mut x = train.images.select_batch(idx)?;
            if hyper.augment {
                x = augment(&x, &mut rng);
            }
            let y: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let (logits, trace) = model.forward(&x.cast(), Mode::Train)?;
            let (loss, grad, c) = softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch, batch: b, loss });
            }
            let grads = model.backward(&trace, &grad, Mode::Train)?;
            opt.step(model.params_mut(), &grads, lr);
            loss_sum += loss * y.len() as f64;
            correct += c;
        }
        epochs.push(EpochStats {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
        });
    }
    let final_val_accuracy = if hyper.epochs == 0 {
        initial_val_accuracy
    } else {
        evaluate(model, val, hyper.batch_size)?
    };
    let (h, w) = (train.images.shape().h, train.images.shape().w);
    Ok(TrainReport {
        schema_version: TRAIN_REPORT_SCHEMA_VERSION,
        model: model.config,
        hyper: *hyper,
        train_examples: train.len(),
        val_examples: val.len(),
        param_count: model.param_count(),
        macs_per_sample: model.macs_per_sample(h, w),
        initial_train_loss: initial_loss,
        initial_val_accuracy,
        epochs,
        final_val_accuracy,
        metadata: Some(RunMetadata { wall_time_secs: start.elapsed().as_secs_f64() }),
    })
}

impl TrainReport {
    /// The report without run metadata, as used for reproducible output.
    pub fn deterministic(&self) -> Self {
        Self { metadata: None, ..self.clone() }
    }

    pub fn render_table(&self) -> String {
        let mut s = format!(
            "{} ({} params, {} MACs/sample), {} train / {} val\n",
            self.model.variant.label(),
            self.param_count,
            self.macs_per_sample,
            self.train_examples,
            self.val_examples
        );
        s.push_str(&format!("{:>5}  {:>10}  {:>10}  {:>9}\n", "epoch", "lr", "loss", "train acc"));
        s.push_str(&format!("{:>5}  {:>10}  {:>10.4}  {:>9}\n", "init", "-", self.initial_train_loss, "-"));
        for e in &self.epochs {
            s.push_str(&format!(
                "{:>5}  {:>10.6}  {:>10.4}  {:>8.2}%\n",
                e.epoch + 1,
                e.lr,
                e.train_loss,
                100.0 * e.train_accuracy
            ));
        }
        s.push_str(&format!("final val accuracy {:.2}%\n", 100.0 * self.final_val_accuracy));
        s
    }
}
