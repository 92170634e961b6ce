use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::measures::Counts;
use super::LinkGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewName {
    MilneWitten,
    Jaccard,
    CondProb,
    BarabasiAlbert,
    Pmi,
    TextCosine,
    Cooccurrence,
}

impl ViewName {
    pub const ALL: [ViewName; 7] = [
        ViewName::MilneWitten,
        ViewName::Jaccard,
        ViewName::CondProb,
        ViewName::BarabasiAlbert,
        ViewName::Pmi,
        ViewName::TextCosine,
        ViewName::Cooccurrence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewName::MilneWitten => "milne_witten",
            ViewName::Jaccard => "jaccard",
            ViewName::CondProb => "cond_prob",
            ViewName::BarabasiAlbert => "barabasi_albert",
            ViewName::Pmi => "pmi",
            ViewName::TextCosine => "text_cosine",
            ViewName::Cooccurrence => "cooccurrence",
        }
    }

    pub fn is_symmetric(self) -> bool {
        self != ViewName::CondProb
    }
}

/// One concept-by-concept relatedness matrix with its observation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatednessView {
    pub name: ViewName,
    pub ids: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub mask: DMatrix<bool>,
}

impl RelatednessView {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn empty(name: ViewName, ids: &[String]) -> Self {
        let n = ids.len();
        Self { name, ids: ids.to_vec(), matrix: DMatrix::zeros(n, n), mask: DMatrix::from_element(n, n, false) }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.matrix[(i, j)] = v;
        self.mask[(i, j)] = true;
    }
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Default observed pairs: a pair is unobserved when the two concepts share
/// no inlink and at least one of them has fewer than `min_support` inlinks.
pub fn support_pairs(g: &LinkGraph, min_support: usize) -> BTreeSet<(String, String)> {
    let ids = g.concepts();
    let mut out = BTreeSet::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i..] {
            let (sa, sb) = (g.inlinks(a), g.inlinks(b));
            let supported = sa.len() >= min_support && sb.len() >= min_support;
            if supported || sa.intersection(sb).next().is_some() {
                out.insert(key(a, b));
            }
        }
    }
    out
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| (dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Unit-length product profile per concept: industries use their
/// co-occurrence counts over products, products are their own axis.
fn product_profiles(g: &LinkGraph) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((industry, product), &c) in g.cooc() {
        if c > 0 {
            *counts.entry(industry.clone()).or_default().entry(product.clone()).or_default() += c as f64;
        }
    }
    let mut profiles = BTreeMap::new();
    for ((_, product), &c) in g.cooc() {
        if c > 0 && !counts.contains_key(product) {
            profiles.insert(product.clone(), [(product.clone(), 1.0)].into_iter().collect());
        }
    }
    for (industry, row) in counts {
        let norm = row.values().map(|v| v * v).sum::<f64>().sqrt();
        profiles.insert(industry, row.into_iter().map(|(p, v)| (p, v / norm)).collect());
    }
    profiles
}

fn sparse_dot(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    a.iter().filter_map(|(k, v)| b.get(k).map(|w| v * w)).sum()
}

/// Builds the seven views over `g.concepts()`.
///
/// Entries outside `observed` are masked, as are entries a measure cannot
/// define (no inlinks, missing text vector, zero co-occurrence). Diagonals
/// are 1 for bounded measures; the PMI diagonal is masked.
pub fn build_views(
    g: &LinkGraph,
    text_vectors: &BTreeMap<String, Vec<f64>>,
    observed: &BTreeSet<(String, String)>,
) -> Vec<RelatednessView> {
    let ids = g.concepts();
    let n = ids.len();
    let mut views: BTreeMap<ViewName, RelatednessView> =
        ViewName::ALL.iter().map(|&v| (v, RelatednessView::empty(v, &ids))).collect();
    let profiles = product_profiles(g);

    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&ids[i], &ids[j]);
            if i != j && !observed.contains(&key(a, b)) {
                continue;
            }
            let c = Counts::of(a, b, g).expect("concepts are entities");
            let diag = i == j;
            let bounded = [
                (ViewName::MilneWitten, c.milne_witten().ok()),
                (ViewName::Jaccard, if c.a + c.b > 0 { Some(c.jaccard()) } else { None }),
                (ViewName::CondProb, c.cond_prob().ok()),
                (ViewName::BarabasiAlbert, c.barabasi_albert().ok()),
            ];
            for (name, value) in bounded {
                if diag {
                    view(&mut views, name).set(i, j, 1.0);
                } else if let Some(v) = value {
                    view(&mut views, name).set(i, j, v);
                }
            }
            if !diag {
                if let Ok(v) = c.pmi() {
                    view(&mut views, ViewName::Pmi).set(i, j, v);
                }
            }
            if let (Some(x), Some(y)) = (text_vectors.get(a), text_vectors.get(b)) {
                if let Some(v) = cosine(x, y) {
                    view(&mut views, ViewName::TextCosine).set(i, j, if diag { 1.0 } else { v });
                }
            }
            if diag {
                view(&mut views, ViewName::Cooccurrence).set(i, j, 1.0);
            } else if let (Some(x), Some(y)) = (profiles.get(a), profiles.get(b)) {
                let v = sparse_dot(x, y);
                if v > 0.0 {
                    view(&mut views, ViewName::Cooccurrence).set(i, j, v);
                }
            }
        }
    }
    ViewName::ALL.iter().map(|v| views.remove(v).expect("all views")).collect()
}

fn view(views: &mut BTreeMap<ViewName, RelatednessView>, name: ViewName) -> &mut RelatednessView {
    views.get_mut(&name).expect("all views")
}
