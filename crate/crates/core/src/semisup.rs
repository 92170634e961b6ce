//! Iterative pseudo-labeling of external companies.
//!
//! Round 0 trains on the internal training sites only. Every later round
//! predicts the external sites with the latest model, admits labels whose
//! probability reaches `tau`, and retrains from scratch on the internal
//! training sites plus the admitted external sites. Pseudo-labels are rebuilt
//! from fresh predictions every round rather than accumulated.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSource, SiteDocument};
use crate::embed::EmbeddingTable;
use crate::eval::{self, EvalError, DEFAULT_THRESHOLD};
use crate::model::{self, FacetSpec, ModelConfig, ModelError, SitePrediction, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum SemiSupError {
    #[error("tau must lie strictly between 0 and 1, got {0}")]
    InvalidTau(f64),
    #[error("at least one round is required")]
    NoRounds,
    #[error("domain {0} is in both the internal training and test sets")]
    TrainTestOverlap(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = SemiSupError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSupConfig {
    pub rounds: usize,
    pub tau: f64,
    /// Decision threshold for the per-round held-out F1.
    pub threshold: f64,
    pub model: ModelConfig,
}

impl Default for SemiSupConfig {
    fn default() -> Self {
        Self { rounds: 3, tau: 0.8, threshold: DEFAULT_THRESHOLD, model: ModelConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub labels: BTreeSet<String>,
    /// Mean probability of the admitted labels.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub admitted: usize,
    pub training_sites: usize,
    /// Held-out micro-F1, absent when no test sites were given.
    pub micro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSupState {
    pub round: usize,
    pub internal_train_ids: BTreeSet<String>,
    pub pseudo_labeled: BTreeMap<String, PseudoLabel>,
    pub history: Vec<RoundMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiSupOutcome {
    pub model: TrainedModel,
    pub state: SemiSupState,
}

/// Labels whose probability is at least `tau`; `None` when nothing passes.
pub fn pseudo_label(pred: &SitePrediction, facet: &FacetSpec, tau: f64) -> Option<PseudoLabel> {
    let admitted: Vec<(&String, f64)> =
        facet.labels.iter().zip(pred.probs.iter().copied()).filter(|&(_, p)| p >= tau).collect();
    if admitted.is_empty() {
        return None;
    }
    let confidence = admitted.iter().map(|(_, p)| p).sum::<f64>() / admitted.len() as f64;
    Some(PseudoLabel { labels: admitted.into_iter().map(|(l, _)| l.clone()).collect(), confidence })
}

fn held_out_f1(
    model: &TrainedModel,
    test: &[SiteDocument],
    table: &EmbeddingTable,
    threshold: f64,
) -> Result<Option<f64>> {
    if !test.iter().any(|s| s.labels_for(model.facet.facet).is_some()) {
        return Ok(None);
    }
    Ok(Some(eval::evaluate(model, test, table, threshold)?.micro_f1))
}

/// Runs `config.rounds` training rounds (round 0 included).
pub fn run_rounds(
    internal_train: &[SiteDocument],
    internal_test: &[SiteDocument],
    external: &[SiteDocument],
    facet: &FacetSpec,
    table: &EmbeddingTable,
    config: &SemiSupConfig,
) -> Result<SemiSupOutcome> {
    if !(config.tau > 0.0 && config.tau < 1.0) {
        return Err(SemiSupError::InvalidTau(config.tau));
    }
    if config.rounds == 0 {
        return Err(SemiSupError::NoRounds);
    }
    let internal_train_ids: BTreeSet<String> = internal_train.iter().map(|s| s.domain.clone()).collect();
    let test_ids: BTreeSet<String> = internal_test.iter().map(|s| s.domain.clone()).collect();
    if let Some(d) = internal_train_ids.intersection(&test_ids).next() {
        return Err(SemiSupError::TrainTestOverlap(d.clone()));
    }

    let mut model = model::train(internal_train, facet, table, &config.model)?;
    let mut state = SemiSupState {
        round: 0,
        internal_train_ids: internal_train_ids.clone(),
        pseudo_labeled: BTreeMap::new(),
        history: vec![RoundMetrics {
            round: 0,
            admitted: 0,
            training_sites: internal_train.len(),
            micro_f1: held_out_f1(&model, internal_test, table, config.threshold)?,
        }],
    };
    if external.is_empty() {
        if config.rounds > 1 {
            log::warn!("no external sites; semi-supervision reduces to plain training");
        }
        return Ok(SemiSupOutcome { model, state });
    }

    let candidates: Vec<&SiteDocument> = external
        .iter()
        .filter(|s| !internal_train_ids.contains(&s.domain) && !test_ids.contains(&s.domain))
        .collect();
    for round in 1..config.rounds {
        let mut pseudo_labeled = BTreeMap::new();
        let mut training: Vec<SiteDocument> = internal_train.to_vec();
        for site in &candidates {
            let prediction = model.predict_site(site, table)?;
            if let Some(pl) = pseudo_label(&prediction, facet, config.tau) {
                training.push(SiteDocument {
                    domain: site.domain.clone(),
                    pages: site.pages.clone(),
                    labels: [(facet.facet, pl.labels.clone())].into_iter().collect(),
                    label_source: LabelSource::Pseudo,
                });
                pseudo_labeled.insert(site.domain.clone(), pl);
            }
        }
        debug_assert!(training.iter().all(|s| !test_ids.contains(&s.domain)));
        model = model::train(&training, facet, table, &config.model)?;
        assert_eq!(state.internal_train_ids, internal_train_ids, "internal training set changed");
        state.round = round;
        state.history.push(RoundMetrics {
            round,
            admitted: pseudo_labeled.len(),
            training_sites: training.len(),
            micro_f1: held_out_f1(&model, internal_test, table, config.threshold)?,
        });
        state.pseudo_labeled = pseudo_labeled;
    }
    Ok(SemiSupOutcome { model, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Facet;

    fn facet() -> FacetSpec {
        FacetSpec::new(Facet::Industry, vec!["A".into(), "B".into()]).unwrap()
    }

    fn pred(probs: &[f64]) -> SitePrediction {
        SitePrediction { domain: "x.com".into(), probs: probs.to_vec(), per_page: vec![] }
    }

    #[test]
    fn threshold_rule() {
        let pl = pseudo_label(&pred(&[0.9, 0.3]), &facet(), 0.8).unwrap();
        assert_eq!(pl.labels, ["A".to_string()].into_iter().collect());
        assert!((pl.confidence - 0.9).abs() < 1e-15);
        assert!(pseudo_label(&pred(&[0.7, 0.3]), &facet(), 0.8).is_none());
        let at = pseudo_label(&pred(&[0.8, 0.8]), &facet(), 0.8).unwrap();
        assert_eq!(at.labels.len(), 2);
    }
}
