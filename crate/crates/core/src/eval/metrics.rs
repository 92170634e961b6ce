use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Pooled counts over (domain, label) decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

type LabelSets = BTreeMap<String, BTreeSet<String>>;

fn check_keys(preds: &LabelSets, gold: &LabelSets) -> Result<()> {
    if preds.len() != gold.len() || preds.keys().zip(gold.keys()).any(|(a, b)| a != b) {
        return Err(EvalError::KeyMismatch);
    }
    Ok(())
}

pub fn micro_confusion(preds: &LabelSets, gold: &LabelSets) -> Result<Confusion> {
    check_keys(preds, gold)?;
    let mut c = Confusion::default();
    for (domain, predicted) in preds {
        let truth = &gold[domain];
        let hits = predicted.intersection(truth).count();
        c.tp += hits;
        c.fp += predicted.len() - hits;
        c.fn_ += truth.len() - hits;
    }
    Ok(c)
}

/// Micro-averaged F1 pooled over every (domain, label) pair; 0 when there
/// are no true positives.
pub fn micro_f1(preds: &LabelSets, gold: &LabelSets) -> Result<f64> {
    Ok(micro_confusion(preds, gold)?.f1())
}

/// F1 of each label in `labels`, treating that label as a binary task.
pub fn per_class_f1(preds: &LabelSets, gold: &LabelSets, labels: &[String]) -> Result<BTreeMap<String, f64>> {
    check_keys(preds, gold)?;
    let mut out = BTreeMap::new();
    for label in labels {
        let mut c = Confusion::default();
        for (domain, predicted) in preds {
            match (predicted.contains(label), gold[domain].contains(label)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        out.insert(label.clone(), c.f1());
    }
    Ok(out)
}

/// Rank-based AUC over pooled (score, is_positive) pairs. Tied
/// positive/negative pairs count one half.
pub fn auc(pairs: &[(f64, bool)]) -> Result<f64> {
    if pairs.iter().any(|(s, _)| s.is_nan()) {
        return Err(EvalError::NonFiniteScore);
    }
    let n_pos = pairs.iter().filter(|(_, y)| *y).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::UndefinedAuc);
    }
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney U with mid-ranks for ties, in doubled units to stay integral
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1, mid-rank = (i + j + 2) / 2
        let doubled_mid = (i + j + 2) as u128;
        let positives = sorted[i..=j].iter().filter(|(_, y)| *y).count() as u128;
        doubled_rank_sum += doubled_mid * positives;
        i = j + 1;
    }
    let (n_pos, n_neg) = (n_pos as u128, n_neg as u128);
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Micro-averaged AUC: scores and gold flags keyed by (domain, label).
pub fn micro_auc(
    scores: &BTreeMap<(String, String), f64>,
    gold: &BTreeMap<(String, String), bool>,
) -> Result<f64> {
    if scores.len() != gold.len() {
        return Err(EvalError::KeyMismatch);
    }
    let pairs = scores
        .iter()
        .map(|(k, &s)| gold.get(k).map(|&y| (s, y)).ok_or(EvalError::KeyMismatch))
        .collect::<Result<Vec<_>>>()?;
    auc(&pairs)
}

/// Labels whose probability reaches `threshold`.
pub fn decide_labels<'a>(probs: impl IntoIterator<Item = (&'a str, f64)>, threshold: f64) -> BTreeSet<String> {
    probs.into_iter().filter(|&(_, p)| p >= threshold).map(|(l, _)| l.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub micro_f1: f64,
    pub micro_auc: f64,
    pub per_class_f1: BTreeMap<String, f64>,
    #[serde(rename = "threshold")]
    pub decision_threshold: f64,
    pub test_domains: Vec<String>,
}
