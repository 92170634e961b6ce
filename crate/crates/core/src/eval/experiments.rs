//! Ablation harnesses.
//!
//! Experiment one compares a model trained on internal companies alone with
//! one that also learns from pseudo-labeled external companies. Experiment
//! two swaps the internal positives of one class for externally labeled
//! companies to measure how well the external label concept transfers. Both
//! arms of an experiment always share the same internal test domains.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{evaluate, split_by_domain, EvalError, MetricReport, Result, SplitSpec};
use crate::corpus::SiteDocument;
use crate::embed::EmbeddingTable;
use crate::model::{self, FacetSpec};
use crate::semisup::{self, RoundMetrics, SemiSupConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub split_seed: u64,
    pub semisup: SemiSupConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { split_seed: 7, semisup: SemiSupConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOneReport {
    pub split: SplitSpec,
    pub without_external: MetricReport,
    pub with_external: MetricReport,
    /// with − without, per class.
    pub per_class_delta: BTreeMap<String, f64>,
    pub rounds: Vec<RoundMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTwoReport {
    pub class_id: String,
    pub split: SplitSpec,
    pub internal_arm: MetricReport,
    pub external_arm: MetricReport,
    pub class_f1_internal: f64,
    pub class_f1_external: f64,
    /// Internal training domains positive for the class, removed in the
    /// external arm.
    pub replaced: Vec<String>,
    /// External domains added in their place.
    pub added: Vec<String>,
}

fn split_internal(
    internal: &[SiteDocument],
    facet: &FacetSpec,
    seed: u64,
) -> Result<(SplitSpec, Vec<SiteDocument>, Vec<SiteDocument>)> {
    let labeled: Vec<&SiteDocument> = internal.iter().filter(|s| s.labels_for(facet.facet).is_some()).collect();
    let domains: Vec<String> = labeled.iter().map(|s| s.domain.clone()).collect();
    let split = split_by_domain(&domains, seed)?;
    let pick = |set: &BTreeSet<String>| -> Vec<SiteDocument> {
        labeled.iter().filter(|s| set.contains(&s.domain)).map(|s| (*s).clone()).collect()
    };
    let train = pick(&split.train_domains);
    let test = pick(&split.test_domains);
    Ok((split, train, test))
}

fn same_test_domains(a: &MetricReport, b: &MetricReport) {
    assert_eq!(a.test_domains, b.test_domains, "experiment arms must share test domains");
}

/// Internal-only training versus training with pseudo-labeled external sites.
pub fn run_experiment_1(
    internal: &[SiteDocument],
    external: &[SiteDocument],
    facet: &FacetSpec,
    table: &EmbeddingTable,
    config: &ExperimentConfig,
) -> Result<ExperimentOneReport> {
    let (split, train, test) = split_internal(internal, facet, config.split_seed)?;
    let threshold = config.semisup.threshold;
    let baseline = model::train(&train, facet, table, &config.semisup.model)?;
    let without_external = evaluate(&baseline, &test, table, threshold)?;
    let outcome = semisup::run_rounds(&train, &test, external, facet, table, &config.semisup)?;
    let with_external = evaluate(&outcome.model, &test, table, threshold)?;
    same_test_domains(&without_external, &with_external);
    let per_class_delta = with_external
        .per_class_f1
        .iter()
        .map(|(label, f)| (label.clone(), f - without_external.per_class_f1[label]))
        .collect();
    Ok(ExperimentOneReport {
        split,
        without_external,
        with_external,
        per_class_delta,
        rounds: outcome.state.history,
    })
}

/// Internal labels versus externally sourced labels for one class.
///
/// The external arm removes every internal training site positive for
/// `class_id`. External sites are then added in domain order, with all of
/// their own labels, until as many of them are positive for the class as
/// were removed.
pub fn run_experiment_2(
    internal: &[SiteDocument],
    external: &[SiteDocument],
    facet: &FacetSpec,
    class_id: &str,
    table: &EmbeddingTable,
    config: &ExperimentConfig,
) -> Result<ExperimentTwoReport> {
    if facet.index_of(class_id).is_none() {
        return Err(EvalError::ClassAbsent(class_id.to_string()));
    }
    let (split, train, test) = split_internal(internal, facet, config.split_seed)?;
    let is_positive = |s: &SiteDocument| s.labels_for(facet.facet).is_some_and(|l| l.contains(class_id));

    let (replaced_sites, kept): (Vec<SiteDocument>, Vec<SiteDocument>) =
        train.iter().cloned().partition(|s| is_positive(s));
    let kept_ids: BTreeSet<&str> = kept.iter().map(|s| s.domain.as_str()).collect();
    let mut candidates: Vec<&SiteDocument> = external
        .iter()
        .filter(|s| s.labels_for(facet.facet).is_some())
        .filter(|s| !split.test_domains.contains(&s.domain) && !kept_ids.contains(s.domain.as_str()))
        .collect();
    candidates.sort_by(|a, b| a.domain.cmp(&b.domain));
    candidates.dedup_by(|a, b| a.domain == b.domain);
    let mut added = Vec::new();
    let mut positives = 0;
    for site in candidates {
        if positives == replaced_sites.len() {
            break;
        }
        positives += usize::from(is_positive(site));
        added.push(site.clone());
    }
    if replaced_sites.is_empty() || positives == 0 {
        return Err(EvalError::ClassAbsent(class_id.to_string()));
    }
    if positives < replaced_sites.len() {
        log::warn!("only {positives} external positives for {class_id}, {} removed", replaced_sites.len());
    }

    let threshold = config.semisup.threshold;
    let internal_model = model::train(&train, facet, table, &config.semisup.model)?;
    let internal_arm = evaluate(&internal_model, &test, table, threshold)?;
    let mut swapped = kept;
    swapped.extend(added.iter().cloned());
    let external_model = model::train(&swapped, facet, table, &config.semisup.model)?;
    let external_arm = evaluate(&external_model, &test, table, threshold)?;
    same_test_domains(&internal_arm, &external_arm);

    Ok(ExperimentTwoReport {
        class_id: class_id.to_string(),
        class_f1_internal: internal_arm.per_class_f1[class_id],
        class_f1_external: external_arm.per_class_f1[class_id],
        split,
        internal_arm,
        external_arm,
        replaced: replaced_sites.into_iter().map(|s| s.domain).collect(),
        added: added.into_iter().map(|s| s.domain).collect(),
    })
}
