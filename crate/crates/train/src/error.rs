use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("failed to read {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: truncated record at byte offset {offset} (file length {len} is not a multiple of {record_size})")]
    Truncated {
        file: String,
        offset: usize,
        len: usize,
        record_size: usize,
    },
    #[error("{file}: record {record} has label {label}, expected < {classes}")]
    LabelOutOfRange {
        file: String,
        record: usize,
        label: u8,
        classes: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Core(#[from] cpwc_core::Error),
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
