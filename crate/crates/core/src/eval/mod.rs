//! Distribution metrics between real and generated item vectors.
//!
//! EMD and JSD are computed per dimension and averaged; JSD uses
//! fixed-width histograms over the scaled range `[-1, 1]`. The
//! discriminative score is the held-out accuracy of a logistic regression.

mod classifier;
mod metrics;
mod report;

use ndarray::Array2;
use thiserror::Error;

pub use classifier::{discriminative_accuracy, discriminative_accuracy_with, ClassifierConfig, MIN_SAMPLES};
pub use metrics::{dataset_emd, dataset_jsd, emd_1d, jsd_discrete, Histogram, DEFAULT_BINS};
pub use report::{build_report, CellKey, CellSummary, MetricReport, MetricRow, CSV_HEADER, METHOD_PAIRS, MODE_COLUMNS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("histograms have different binning ({p} vs {q} bins)")]
    Bins { p: usize, q: usize },
    #[error("histogram: {0}")]
    Probs(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("classifier needs at least {min} samples per class, got {real} real and {fake} fake")]
    TooFewSamples { real: usize, fake: usize, min: usize },
    #[error("classes are imbalanced after balancing")]
    Imbalance,
    #[error("invalid classifier config: {0}")]
    Config(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// The three scores for one real/fake comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub emd: f64,
    pub jsd: f64,
    pub acc: f64,
}

pub fn evaluate(real: &Array2<f64>, fake: &Array2<f64>, bins: usize, seed: u64) -> Result<Metrics> {
    Ok(Metrics {
        emd: dataset_emd(real, fake)?,
        jsd: dataset_jsd(real, fake, bins)?,
        acc: discriminative_accuracy(real, fake, seed)?,
    })
}
