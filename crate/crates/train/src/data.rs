//! Datasets: the CIFAR binary format and a synthetic context-only task.

use std::fs;
use std::path::{Path, PathBuf};

use cpwc_core::{Shape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `(N, channels, H, W)`, already normalized.
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(images: Tensor<f32>, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if images.shape().n != labels.len() {
            return Err(TrainError::InvalidConfig(format!(
                "{} images but {} labels",
                images.shape().n,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(TrainError::InvalidConfig(format!("label {bad} outside [0, {classes})")));
        }
        Ok(Self { images, labels, classes, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` examples (or all of them).
    pub fn take(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        Ok(Self {
            images: self.images.select_batch(&idx)?,
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
            split: self.split,
        })
    }

    /// Examples per class.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CifarFlavor {
    Cifar10,
    Cifar100,
}

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_PIXELS: usize = 3 * CIFAR_SIDE * CIFAR_SIDE;

/// Per-channel (R, G, B) mean of the CIFAR-10 training set, on the [0, 1] scale.
pub const CIFAR10_MEAN: [f32; 3] = [0.4914, 0.4822, 0.4465];
pub const CIFAR10_STD: [f32; 3] = [0.2470, 0.2435, 0.2616];
pub const CIFAR100_MEAN: [f32; 3] = [0.5071, 0.4865, 0.4409];
pub const CIFAR100_STD: [f32; 3] = [0.2673, 0.2564, 0.2762];

impl CifarFlavor {
    /// Bytes per record: label byte(s) followed by 3072 pixel bytes.
    pub fn record_size(self) -> usize {
        self.label_bytes() + CIFAR_PIXELS
    }

    fn label_bytes(self) -> usize {
        match self {
            CifarFlavor::Cifar10 => 1,
            CifarFlavor::Cifar100 => 2,
        }
    }

    pub fn classes(self) -> usize {
        match self {
            CifarFlavor::Cifar10 => 10,
            CifarFlavor::Cifar100 => 100,
        }
    }

    pub fn mean_std(self) -> ([f32; 3], [f32; 3]) {
        match self {
            CifarFlavor::Cifar10 => (CIFAR10_MEAN, CIFAR10_STD),
            CifarFlavor::Cifar100 => (CIFAR100_MEAN, CIFAR100_STD),
        }
    }

    fn train_files(self) -> &'static [&'static str] {
        match self {
            CifarFlavor::Cifar10 => &[
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            CifarFlavor::Cifar100 => &["train.bin"],
        }
    }

    fn val_file(self) -> &'static str {
        match self {
            CifarFlavor::Cifar10 => "test_batch.bin",
            CifarFlavor::Cifar100 => "test.bin",
        }
    }

    /// Directory name used by the official archives.
    fn archive_dir(self) -> &'static str {
        match self {
            CifarFlavor::Cifar10 => "cifar-10-batches-bin",
            CifarFlavor::Cifar100 => "cifar-100-binary",
        }
    }
}

/// Decodes CIFAR records into normalized `(N, 3, 32, 32)` images.
///
/// CIFAR-10 records are `label, R[1024], G[1024], B[1024]`; CIFAR-100 records
/// are `coarse label, fine label, R, G, B`, and the fine label is used. Pixels
/// are scaled to [0, 1] and standardized with the flavor's channel mean/std.
pub fn parse_cifar_records(bytes: &[u8], flavor: CifarFlavor, file: &str, split: Split) -> Result<Dataset> {
    let rs = flavor.record_size();
    if !bytes.len().is_multiple_of(rs) {
        return Err(TrainError::Truncated {
            file: file.to_string(),
            offset: bytes.len() / rs * rs,
            len: bytes.len(),
            record_size: rs,
        });
    }
    let n = bytes.len() / rs;
    if n == 0 {
        return Err(TrainError::InvalidConfig(format!("{file}: no records")));
    }
    let (mean, std) = flavor.mean_std();
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * CIFAR_PIXELS);
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    for (i, rec) in bytes.chunks_exact(rs).enumerate() {
        if flavor == CifarFlavor::Cifar100 && rec[0] >= 20 {
            return Err(TrainError::LabelOutOfRange { file: file.into(), record: i, label: rec[0], classes: 20 });
        }
        let label = rec[flavor.label_bytes() - 1];
        if label as usize >= flavor.classes() {
            return Err(TrainError::LabelOutOfRange {
                file: file.into(),
                record: i,
                label,
                classes: flavor.classes(),
            });
        }
        labels.push(label as usize);
        for (j, &b) in rec[flavor.label_bytes()..].iter().enumerate() {
            let c = j / plane;
            pixels.push((b as f32 / 255.0 - mean[c]) / std[c]);
        }
    }
    let images = Tensor::new(Shape::new(n, 3, CIFAR_SIDE, CIFAR_SIDE)?, pixels)?;
    Dataset::new(images, labels, flavor.classes(), split)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.is_file() {
        return Err(TrainError::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })
}

fn concat(parts: Vec<Dataset>) -> Result<Dataset> {
    let first = &parts[0];
    let (classes, split, s) = (first.classes, first.split, first.images.shape());
    let n = parts.iter().map(Dataset::len).sum();
    let mut data = Vec::with_capacity(n * s.sample());
    let mut labels = Vec::with_capacity(n);
    for p in parts {
        labels.extend_from_slice(&p.labels);
        data.extend(p.images.into_data());
    }
    Dataset::new(Tensor::new(Shape { n, ..s }, data)?, labels, classes, split)
}

/// Loads the train and test splits of a CIFAR binary distribution.
///
/// `dir` may be the directory holding the `.bin` files or its parent.
pub fn load_cifar(dir: impl AsRef<Path>, flavor: CifarFlavor) -> Result<(Dataset, Dataset)> {
    let mut dir: PathBuf = dir.as_ref().to_path_buf();
    if !dir.join(flavor.val_file()).exists() && dir.join(flavor.archive_dir()).is_dir() {
        dir = dir.join(flavor.archive_dir());
    }
    let mut parts = Vec::new();
    for f in flavor.train_files() {
        parts.push(parse_cifar_records(&read(&dir.join(f))?, flavor, f, Split::Train)?);
    }
    let train = concat(parts)?;
    let vf = flavor.val_file();
    let val = parse_cifar_records(&read(&dir.join(vf))?, flavor, vf, Split::Val)?;
    Ok((train, val))
}

/// Parameters of the synthetic context dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub size: usize,
    /// Dot pairs per image.
    pub pairs: usize,
    /// Standard deviation of the Gaussian background.
    pub noise: f32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { size: 16, pairs: 3, noise: 0.2 }
    }
}

/// Displacement between the two dots of a pair, one per class. No two
/// dots of a pair fit in a common 3×3 window.
pub const PAIR_OFFSETS: [(isize, isize); 8] =
    [(0, 4), (4, 0), (3, 3), (3, -3), (2, 4), (4, 2), (4, -2), (2, -4)];

/// Single-channel images of dot pairs on noise; the class is the
/// displacement between the dots of each pair.
///
/// Every image holds the same number of unit dots, so the histogram of pixel
/// values (and any statistic of a small window) carries no class information;
/// only a receptive field spanning both dots of a pair does.
pub fn synth_context_dataset(seed: u64, n: usize, classes: usize) -> Result<Dataset> {
    synth_context_dataset_with(SynthConfig::default(), seed, n, classes)
}

pub fn synth_context_dataset_with(cfg: SynthConfig, seed: u64, n: usize, classes: usize) -> Result<Dataset> {
    if classes < 2 || classes > PAIR_OFFSETS.len() {
        return Err(TrainError::InvalidConfig(format!(
            "synthetic dataset supports 2..={} classes, got {classes}",
            PAIR_OFFSETS.len()
        )));
    }
    if n < classes {
        return Err(TrainError::InvalidConfig(format!("need at least {classes} examples, got {n}")));
    }
    if cfg.size < 8 || cfg.pairs == 0 || !(cfg.noise >= 0.0) {
        return Err(TrainError::InvalidConfig("synthetic images need size >= 8, pairs >= 1, noise >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);

    let s = cfg.size;
    let noise = Normal::new(0.0f32, cfg.noise).expect("finite noise");
    let mut data = Vec::with_capacity(n * s * s);
    let mut dots: Vec<(isize, isize)> = Vec::new();
    for &label in &labels {
        let mut img: Vec<f32> = (0..s * s).map(|_| noise.sample(&mut rng)).collect();
        let (dy, dx) = PAIR_OFFSETS[label];
        dots.clear();
        let mut placed = 0;
        let mut attempts = 0;
        while placed < cfg.pairs && attempts < 1000 {
            attempts += 1;
            let y0 = rng.random_range(0..s as i64) as isize;
            let x0 = rng.random_range(0..s as i64) as isize;
            let (y1, x1) = (y0 + dy, x0 + dx);
            if y1 < 0 || x1 < 0 || y1 >= s as isize || x1 >= s as isize {
                continue;
            }
            // keep pairs apart so no 3x3 window sees dots from two pairs
            let clear = |(y, x): (isize, isize)| dots.iter().all(|&(a, b)| (a - y).abs().max((b - x).abs()) > 2);
            if !clear((y0, x0)) || !clear((y1, x1)) {
                continue;
            }
            dots.push((y0, x0));
            dots.push((y1, x1));
            placed += 1;
        }
        for &(y, x) in &dots {
            img[y as usize * s + x as usize] += 1.0;
        }
        data.extend(img);
    }
    let images = Tensor::new(Shape::new(n, 1, s, s)?, data)?;
    Dataset::new(images, labels, classes, Split::Train)
}
