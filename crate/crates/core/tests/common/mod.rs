//! Independent reference implementations and random instance generators
//! shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use facetseg::concept::LinkGraph;
use facetseg::model::{forward_page, loss, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- relatedness ----

/// Membership-vector view of a link graph over its W entities.
pub struct Incidence {
    pub universe: Vec<String>,
    pub rows: BTreeMap<String, Vec<bool>>,
}

impl Incidence {
    pub fn of(g: &LinkGraph) -> Self {
        let universe: Vec<String> = g.entities().iter().cloned().collect();
        let rows = universe
            .iter()
            .map(|e| (e.clone(), universe.iter().map(|u| g.inlinks(e).contains(u)).collect()))
            .collect();
        Self { universe, rows }
    }

    fn count(&self, a: &str, b: Option<&str>, union: bool) -> f64 {
        let ra = &self.rows[a];
        let rb = b.map(|b| &self.rows[b]);
        let mut n = 0usize;
        for i in 0..self.universe.len() {
            let hit = match rb {
                None => ra[i],
                Some(rb) if union => ra[i] || rb[i],
                Some(rb) => ra[i] && rb[i],
            };
            n += hit as usize;
        }
        n as f64
    }

    /// (|A|, |B|, |A∩B|, |A∪B|, W)
    pub fn sizes(&self, a: &str, b: &str) -> (f64, f64, f64, f64, f64) {
        (
            self.count(a, None, false),
            self.count(b, None, false),
            self.count(a, Some(b), false),
            self.count(a, Some(b), true),
            self.universe.len() as f64,
        )
    }

    pub fn milne_witten(&self, a: &str, b: &str) -> Option<f64> {
        let (na, nb, i, _, w) = self.sizes(a, b);
        if na == 0.0 || nb == 0.0 || w <= na.min(nb) {
            return None;
        }
        if i == 0.0 {
            return Some(0.0);
        }
        let v = 1.0 - (na.max(nb).ln() - i.ln()) / (w.ln() - na.min(nb).ln());
        Some(if v < 0.0 { 0.0 } else { v })
    }

    pub fn jaccard(&self, a: &str, b: &str) -> f64 {
        let (_, _, i, u, _) = self.sizes(a, b);
        if u == 0.0 { 0.0 } else { i / u }
    }

    pub fn cond_prob(&self, a: &str, b: &str) -> Option<f64> {
        let (na, _, i, _, _) = self.sizes(a, b);
        (na > 0.0).then(|| i / na)
    }

    pub fn pmi(&self, a: &str, b: &str) -> Option<f64> {
        let (na, nb, i, _, w) = self.sizes(a, b);
        if na == 0.0 || nb == 0.0 || w <= na.min(nb) {
            return None;
        }
        Some(if i == 0.0 { 0.0 } else { (i * w / (na * nb)).ln() })
    }

    pub fn barabasi_albert(&self, a: &str, b: &str) -> Option<f64> {
        let (na, nb, i, _, w) = self.sizes(a, b);
        if na == 0.0 || nb == 0.0 || w <= na.min(nb) {
            return None;
        }
        Some((i * w / (na * nb)).min(1.0))
    }
}

/// Random graph over `n` concepts plus `extra` pure linkers.
pub fn random_graph(n: usize, extra: usize, density: f64, seed: u64) -> LinkGraph {
    let mut r = rng(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("e{i:02}")).collect();
    let linkers: Vec<String> = (0..extra).map(|i| format!("x{i:02}")).collect();
    let all: Vec<&String> = ids.iter().chain(&linkers).collect();
    let mut g = LinkGraph::new();
    for id in &ids {
        let links: Vec<String> = all.iter().filter(|_| r.random_bool(density)).map(|s| (*s).clone()).collect();
        g.add_entity(id, links);
    }
    for l in &linkers {
        g.add_entity(l, Vec::<String>::new());
    }
    g
}

// ---- metrics ----

pub type LabelSets = BTreeMap<String, BTreeSet<String>>;

/// Micro-F1 by enumerating every (domain, label) decision.
pub fn f1_oracle(pred: &LabelSets, gold: &LabelSets, labels: &[String]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
    for d in gold.keys() {
        for l in labels {
            match (pred[d].contains(l), gold[d].contains(l)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
    }
    if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64 }
}

/// AUC by explicit enumeration of positive–negative pairs.
pub fn auc_oracle(pairs: &[(f64, bool)]) -> Option<f64> {
    let pos: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
    let neg: Vec<f64> = pairs.iter().filter(|p| !p.1).map(|p| p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

pub struct MetricInstance {
    pub labels: Vec<String>,
    pub pred: LabelSets,
    pub gold: LabelSets,
    pub scores: Vec<(f64, bool)>,
}

/// Random multi-label instance with at most `max_pairs` (domain, label)
/// pairs; scores are coarse so ties occur.
pub fn random_metric_instance(seed: u64, max_pairs: usize) -> MetricInstance {
    let mut r = rng(seed);
    let n_labels = r.random_range(1..=5);
    let n_domains = r.random_range(1..=(max_pairs / n_labels).max(1));
    let labels: Vec<String> = (0..n_labels).map(|i| format!("L{i}")).collect();
    let mut pred = LabelSets::new();
    let mut gold = LabelSets::new();
    let mut scores = Vec::new();
    for d in 0..n_domains {
        let domain = format!("d{d}.com");
        let mut p = BTreeSet::new();
        let mut g = BTreeSet::new();
        for l in &labels {
            let truth = r.random_bool(0.4);
            // dyadic values: exact ties, and monotone maps cannot merge them
            let score = (r.random_range(0..16) as f64) / 16.0 + if truth { 0.0625 } else { 0.0 };
            if truth {
                g.insert(l.clone());
            }
            if score >= 0.5 {
                p.insert(l.clone());
            }
            scores.push((score, truth));
        }
        pred.insert(domain.clone(), p);
        gold.insert(domain, g);
    }
    MetricInstance { labels, pred, gold, scores }
}

// ---- gradients ----

pub struct GradInstance {
    pub params: ModelParams,
    pub batch: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

pub fn random_grad_instance(seed: u64) -> GradInstance {
    let mut r = rng(seed);
    let d = r.random_range(2..=5);
    let c = r.random_range(2..=4);
    let f = r.random_range(1..=3);
    let widths: Vec<usize> = if r.random_bool(0.5) { vec![2, 3] } else { vec![2] };
    let mut params = ModelParams::random(d, &widths, f, c, &mut r);
    params.filter_bias.iter_mut().flatten().for_each(|b| *b = r.random_range(-0.1..0.1));
    params.out_bias.iter_mut().for_each(|b| *b = r.random_range(-0.1..0.1));
    let batch = (0..r.random_range(1..=3))
        .map(|_| {
            let len = r.random_range(1..=5);
            let chunks = (0..len).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
            let targets = (0..c).map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            (chunks, targets)
        })
        .collect();
    GradInstance { params, batch }
}

pub fn batch_loss(params: &ModelParams, batch: &[(Vec<Vec<f64>>, Vec<f64>)]) -> f64 {
    batch.iter().map(|(x, t)| loss(&forward_page(x, params).unwrap(), t).unwrap()).sum::<f64>() / batch.len() as f64
}

/// Central finite differences, parameter by parameter, in `values()` order.
pub fn numeric_grad(params: &ModelParams, batch: &[(Vec<Vec<f64>>, Vec<f64>)], h: f64) -> Vec<f64> {
    let sizes: Vec<usize> = params.values().iter().map(|s| s.len()).collect();
    let mut out = Vec::new();
    for (block, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let mut plus = params.clone();
            plus.values_mut()[block][i] += h;
            let mut minus = params.clone();
            minus.values_mut()[block][i] -= h;
            out.push((batch_loss(&plus, batch) - batch_loss(&minus, batch)) / (2.0 * h));
        }
    }
    out
}

/// max over parameters of |a − n| / max(|a|, |n|, floor).
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

// ---- matrices ----

use facetseg::concept::{RelatednessView, ViewName};
use nalgebra::DMatrix;

/// Random square view with roughly `observed` of its entries unmasked and
/// values in [lo, hi).
pub fn random_view(n: usize, observed: f64, lo: f64, hi: f64, seed: u64) -> RelatednessView {
    let mut r = rng(seed);
    let matrix = DMatrix::from_fn(n, n, |_, _| r.random_range(lo..hi));
    let mut mask = DMatrix::from_fn(n, n, |_, _| r.random_bool(observed));
    mask[(0, 0)] = true;
    RelatednessView { name: ViewName::Jaccard, ids: (0..n).map(|i| format!("c{i}")).collect(), matrix, mask }
}

pub struct LowRank {
    pub truth: DMatrix<f64>,
    pub view: RelatednessView,
}

/// Non-negative rank-`rank` n×n matrix with a random `hidden` share masked.
pub fn low_rank_view(n: usize, rank: usize, hidden: f64, seed: u64) -> LowRank {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(n, rank, |_, _| r.random_range(0.1..1.0));
    let b = DMatrix::from_fn(rank, n, |_, _| r.random_range(0.1..1.0));
    let truth = &a * &b;
    let mut cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    use rand::seq::SliceRandom;
    cells.shuffle(&mut r);
    let n_hidden = (hidden * (n * n) as f64).round() as usize;
    let mut mask = DMatrix::from_element(n, n, true);
    for &(i, j) in &cells[..n_hidden] {
        mask[(i, j)] = false;
    }
    let view = RelatednessView {
        name: ViewName::Jaccard,
        ids: (0..n).map(|i| format!("c{i}")).collect(),
        matrix: truth.clone(),
        mask,
    };
    LowRank { truth, view }
}

/// RMSE over cells where `select(mask value)` holds.
pub fn rmse_where(a: &DMatrix<f64>, b: &DMatrix<f64>, mask: &DMatrix<bool>, want: bool) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for ((x, y), &m) in a.iter().zip(b.iter()).zip(mask.iter()) {
        if m == want {
            total += (x - y) * (x - y);
            n += 1;
        }
    }
    (total / n.max(1) as f64).sqrt()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Shared-subspace views X_j = G₀ A_j + noise.
pub fn shared_views(n: usize, k: usize, views: usize, noise: f64, seed: u64) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let g0 = random_matrix(n, k, seed);
    let xs = (0..views)
        .map(|j| {
            let d = 6 + 2 * j;
            &g0 * random_matrix(k, d, seed + 100 + j as u64) + random_matrix(n, d, seed + 200 + j as u64) * noise
        })
        .collect();
    (g0, xs)
}
