//! Per-facet multi-label page classifier.
//!
//! A page is a sequence of chunk vectors. The default classifier slides
//! filters of several widths over that sequence, max-pools each filter over
//! all window positions and maps the pooled features to independent sigmoid
//! probabilities, one per label. A site's prediction is the mean of its page
//! predictions.
//!
//! A linear baseline that averages chunk vectors into one page vector is
//! available as [`Architecture::Linear`].

mod cnn;
mod file;
mod linear;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::Facet;
use crate::embed::EmbedError;

pub use cnn::{forward_page, grad, ModelParams};
pub use file::{load_model, save_model};
pub use linear::{linear_baseline_forward, LinearParams};
pub use train::{encode_page, train, Classifier, TrainedModel};

/// Probability clamp used by the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("no pages")]
    NoPages,
    #[error("page has no chunks")]
    NoChunks,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("a facet needs at least two labels, got {0}")]
    TooFewLabels(usize),
    #[error("duplicate label {0:?} in facet")]
    DuplicateLabel(String),
    #[error("label {0:?} is not in the facet label space")]
    UnknownLabel(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("not a model file")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Encode(#[from] bincode::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// The label space a model is trained and evaluated on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetSpec {
    pub facet: Facet,
    pub labels: Vec<String>,
}

impl FacetSpec {
    pub fn new(facet: Facet, labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(ModelError::TooFewLabels(labels.len()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(ModelError::DuplicateLabel(dup.clone()));
        }
        Ok(Self { facet, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// 0/1 target vector for a label set.
    pub fn targets<'a>(&self, labels: impl IntoIterator<Item = &'a String>) -> Result<Vec<f64>> {
        let mut t = vec![0.0; self.len()];
        for label in labels {
            let i = self.index_of(label).ok_or_else(|| ModelError::UnknownLabel(label.clone()))?;
            t[i] = 1.0;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub widths: Vec<usize>,
    pub filters_per_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Cnn,
            widths: vec![2, 3],
            filters_per_width: 8,
            learning_rate: 0.05,
            batch_size: 16,
            epochs: 30,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagePrediction {
    pub url: String,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitePrediction {
    pub domain: String,
    pub probs: Vec<f64>,
    pub per_page: Vec<PagePrediction>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_len(expected: usize, actual: usize, what: &str) -> Result<()> {
    if expected != actual {
        return Err(ModelError::DimensionMismatch {
            expected: format!("{what} of length {expected}"),
            actual: format!("length {actual}"),
        });
    }
    Ok(())
}

/// Mean binary cross-entropy over classes, with probabilities clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`.
pub fn loss(probs: &[f64], targets: &[f64]) -> Result<f64> {
    check_len(probs.len(), targets.len(), "targets")?;
    let total: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Site prediction as the elementwise mean of its page predictions.
///
/// Each class sums its page probabilities in ascending order, so the result
/// does not depend on page order.
pub fn forward_site(domain: impl Into<String>, pages: Vec<PagePrediction>) -> Result<SitePrediction> {
    let first = pages.first().ok_or(ModelError::NoPages)?;
    let c = first.probs.len();
    for page in &pages {
        check_len(c, page.probs.len(), "page probabilities")?;
    }
    let n = pages.len() as f64;
    let probs = (0..c)
        .map(|k| {
            let mut column: Vec<f64> = pages.iter().map(|p| p.probs[k]).collect();
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n
        })
        .collect();
    Ok(SitePrediction { domain: domain.into(), probs, per_page: pages })
}
