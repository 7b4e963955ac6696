use cpwc_core::{CpwcVariant, Precision};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, TrainError};
use crate::model::{build_toy_model, ModelConfig};
use crate::train::{train, Hyper, TrainReport};

pub const COMPARISON_SCHEMA_VERSION: u32 = 1;

/// Builds a fresh model for `cfg` in the precision named by `hyper` and trains it.
pub fn train_fresh(cfg: ModelConfig, hyper: &Hyper, train_set: &Dataset, val: &Dataset) -> Result<TrainReport> {
    match hyper.precision {
        Precision::Single => train(&mut build_toy_model::<f32>(cfg)?, train_set, val, hyper),
        Precision::Double => train(&mut build_toy_model::<f64>(cfg)?, train_set, val, hyper),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub seed: u64,
    pub final_val_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: CpwcVariant,
    pub label: String,
    pub params: usize,
    pub macs_per_sample: u64,
    pub runs: Vec<RunCell>,
    /// Over successful runs only; `None` if every run failed.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub hyper: Hyper,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, variant: CpwcVariant) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn render_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
        let mut s = format!(
            "{:<width$}  {:>8}  {:>10}  {:>7}  {:>7}  {:>7}  {:>6}\n",
            "variant", "params", "MACs", "mean", "min", "max", "failed"
        );
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        for r in &self.rows {
            let failed = r.runs.iter().filter(|c| c.error.is_some()).count();
            s.push_str(&format!(
                "{:<width$}  {:>8}  {:>10}  {:>7}  {:>7}  {:>7}  {:>6}\n",
                r.label,
                r.params,
                r.macs_per_sample,
                pct(r.mean),
                pct(r.min),
                pct(r.max),
                failed
            ));
        }
        s
    }
}

/// Trains one model per `(variant, seed)` and summarizes final validation
/// accuracy per variant.
///
/// Each seed sets both the model initialization and the shuffling seed.
/// Rows follow the canonical variant order (baseline first, full CPWC last)
/// whatever order `variants` is given in. A failed run is recorded in its
/// cell and the sweep continues.
pub fn compare_variants(
    train_set: &Dataset,
    val: &Dataset,
    base: ModelConfig,
    variants: &[CpwcVariant],
    hyper: &Hyper,
    seeds: &[u64],
) -> Result<ComparisonTable> {
    if seeds.is_empty() || variants.is_empty() {
        return Err(TrainError::InvalidConfig("need at least one seed and one variant".into()));
    }
    hyper.validate()?;
    let (h, w) = (train_set.images.shape().h, train_set.images.shape().w);
    let mut rows = Vec::new();
    for variant in CpwcVariant::ALL.into_iter().filter(|v| variants.contains(v)) {
        let cfg = ModelConfig { variant, ..base };
        let probe = build_toy_model::<f32>(cfg)?;
        let mut runs = Vec::new();
        for &seed in seeds {
            let hyper = Hyper { seed, ..*hyper };
            let cell = match train_fresh(ModelConfig { seed, ..cfg }, &hyper, train_set, val) {
                Ok(r) => RunCell { seed, final_val_accuracy: Some(r.final_val_accuracy), error: None },
                Err(e) => RunCell { seed, final_val_accuracy: None, error: Some(e.to_string()) },
            };
            runs.push(cell);
        }
        let ok: Vec<f64> = runs.iter().filter_map(|c| c.final_val_accuracy).collect();
        let (mean, min, max) = if ok.is_empty() {
            (None, None, None)
        } else {
            (
                Some(ok.iter().sum::<f64>() / ok.len() as f64),
                ok.iter().copied().reduce(f64::min),
                ok.iter().copied().reduce(f64::max),
            )
        };
        rows.push(ComparisonRow {
            variant,
            label: variant.label().to_string(),
            params: probe.param_count(),
            macs_per_sample: probe.macs_per_sample(h, w),
            runs,
            mean,
            min,
            max,
        });
    }
    Ok(ComparisonTable { schema_version: COMPARISON_SCHEMA_VERSION, model: base, hyper: *hyper, seeds: seeds.to_vec(), rows })
}
