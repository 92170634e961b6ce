//! Metrics, domain splits and the ablation harnesses.

mod experiments;
mod metrics;
mod split;

use std::collections::{BTreeMap, BTreeSet};

pub use experiments::{
    run_experiment_1, run_experiment_2, ExperimentConfig, ExperimentOneReport, ExperimentTwoReport,
};
pub use metrics::{
    auc, decide_labels, micro_auc, micro_confusion, micro_f1, per_class_f1, Confusion, MetricReport,
};
pub use split::{split_by_domain, SplitSpec};

use crate::corpus::SiteDocument;
use crate::embed::EmbeddingTable;
use crate::model::{ModelError, TrainedModel};

/// Decision threshold used for F1 unless configured otherwise.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and gold key sets differ")]
    KeyMismatch,
    #[error("undefined AUC")]
    UndefinedAuc,
    #[error("score is NaN")]
    NonFiniteScore,
    #[error("need at least two domains, got {0}")]
    TooFewDomains(usize),
    #[error("duplicate domain {0}")]
    DuplicateDomain(String),
    #[error("class {0:?} is absent")]
    ClassAbsent(String),
    #[error("no test sites carry labels for the facet")]
    EmptyTestSet,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    SemiSup(Box<crate::semisup::SemiSupError>),
}

impl From<crate::semisup::SemiSupError> for EvalError {
    fn from(e: crate::semisup::SemiSupError) -> Self {
        EvalError::SemiSup(Box::new(e))
    }
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Scores a trained model on held-out sites.
///
/// Only sites carrying labels for the model's facet are scored; they are
/// visited in domain order.
pub fn evaluate(
    model: &TrainedModel,
    test_sites: &[SiteDocument],
    table: &EmbeddingTable,
    threshold: f64,
) -> Result<MetricReport> {
    let facet = model.facet.facet;
    let mut preds = BTreeMap::new();
    let mut gold = BTreeMap::new();
    let mut scores = BTreeMap::new();
    let mut flags = BTreeMap::new();
    for site in test_sites {
        let Some(truth) = site.labels_for(facet) else { continue };
        let prediction = model.predict_site(site, table)?;
        for (label, p) in model.label_probs(&prediction) {
            let key = (site.domain.clone(), label.to_string());
            scores.insert(key.clone(), p);
            flags.insert(key, truth.contains(label));
        }
        preds.insert(site.domain.clone(), decide_labels(model.label_probs(&prediction), threshold));
        gold.insert(site.domain.clone(), truth.clone());
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    Ok(MetricReport {
        micro_f1: micro_f1(&preds, &gold)?,
        micro_auc: micro_auc(&scores, &flags)?,
        per_class_f1: per_class_f1(&preds, &gold, &model.facet.labels)?,
        decision_threshold: threshold,
        test_domains: preds.keys().cloned().collect(),
    })
}

/// Sites whose domain is in `domains`, in input order.
pub fn select_sites(sites: &[SiteDocument], domains: &BTreeSet<String>) -> Vec<SiteDocument> {
    sites.iter().filter(|s| domains.contains(&s.domain)).cloned().collect()
}
