//! Concept embeddings from a link graph and text vectors.
//!
//! Pipeline: relatedness views over the concept set, masked NMF to fill
//! unobserved entries, GCCA to fuse the completed views into one embedding,
//! then a cosine graph over concepts and agglomerative label clusters.

mod clusters;
mod gcca;
mod graph;
mod measures;
mod nmf;
mod pipeline;
mod views;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clusters::{cluster_labels, ClusterStatus, LabelCluster};
pub use gcca::{gcca_fuse, principal_angles, standardize_columns, ConceptEmbedding};
pub use graph::{concept_events, cosine_graph, ConceptEdge};
pub use measures::{barabasi_albert, cond_prob, jaccard, milne_witten, pmi};
pub use nmf::{masked_loss, nmf_complete, nmf_from, NmfResult};
pub use pipeline::{build_embedding, load_embedding, save_embedding, ConceptConfig};
pub use views::{build_views, support_pairs, RelatednessView, ViewName};

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("degenerate graph")]
    DegenerateGraph,
    #[error("no inlinks")]
    NoInlinks,
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("view {0} has no observed entries")]
    AllUnobserved(String),
    #[error("observed entries must be non-negative")]
    NegativeEntries,
    #[error("invalid rank {0}")]
    InvalidRank(usize),
    #[error("k = {k} exceeds n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("masked loss increased at iteration {iteration}: {before} -> {after}")]
    LossIncreased { iteration: usize, before: f64, after: f64 },
    #[error("no views")]
    NoViews,
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("not an embedding file")]
    BadMagic,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Encode(#[from] bincode::Error),
}

pub type Result<T> = std::result::Result<T, ConceptError>;

/// Entities, their inlink sets and industry–product co-occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkGraph {
    entities: BTreeSet<String>,
    /// Entities given by a record or a co-occurrence; the rows of the views.
    concepts: BTreeSet<String>,
    inlinks: BTreeMap<String, BTreeSet<String>>,
    cooc: BTreeMap<(String, String), u64>,
}

static EMPTY: BTreeSet<String> = BTreeSet::new();

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum GraphRecord {
    Entity { entity: String, #[serde(default)] inlinks: Vec<String> },
    Cooc { cooc: CoocRecord },
}

#[derive(Debug, Serialize, Deserialize)]
struct CoocRecord {
    industry: String,
    product: String,
    count: u64,
}

impl LinkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a concept with its inlinks; linking entities join the entity
    /// set (and so count towards W) without becoming concepts.
    pub fn add_entity<I, S>(&mut self, id: &str, inlinks: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set = self.inlinks.entry(id.to_string()).or_default();
        for l in inlinks {
            let l = l.into();
            self.entities.insert(l.clone());
            set.insert(l);
        }
        self.entities.insert(id.to_string());
        self.concepts.insert(id.to_string());
    }

    pub fn add_cooc(&mut self, industry: &str, product: &str, count: u64) {
        for id in [industry, product] {
            self.entities.insert(id.to_string());
            self.concepts.insert(id.to_string());
        }
        *self.cooc.entry((industry.to_string(), product.to_string())).or_default() += count;
    }

    /// Total entity count W.
    pub fn w(&self) -> usize {
        self.entities.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains(id)
    }

    pub fn inlinks(&self, id: &str) -> &BTreeSet<String> {
        self.inlinks.get(id).unwrap_or(&EMPTY)
    }

    /// Concept ids in sorted order.
    pub fn concepts(&self) -> Vec<String> {
        self.concepts.iter().cloned().collect()
    }

    pub fn entities(&self) -> &BTreeSet<String> {
        &self.entities
    }

    pub fn cooc(&self) -> &BTreeMap<(String, String), u64> {
        &self.cooc
    }

    pub fn read_jsonl<R: Read>(reader: R) -> Result<Self> {
        let mut g = Self::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| ConceptError::BadLine { line: i + 1, message };
            match serde_json::from_str(&line).map_err(|e| bad(e.to_string()))? {
                GraphRecord::Entity { entity, inlinks } => g.add_entity(&entity, inlinks),
                GraphRecord::Cooc { cooc } => g.add_cooc(&cooc.industry, &cooc.product, cooc.count),
            }
        }
        Ok(g)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, links) in &self.inlinks {
            let rec = GraphRecord::Entity { entity: id.clone(), inlinks: links.iter().cloned().collect() };
            writeln!(out, "{}", serde_json::to_string(&rec).expect("serializable"))?;
        }
        for ((industry, product), count) in &self.cooc {
            let rec = GraphRecord::Cooc {
                cooc: CoocRecord { industry: industry.clone(), product: product.clone(), count: *count },
            };
            writeln!(out, "{}", serde_json::to_string(&rec).expect("serializable"))?;
        }
        Ok(())
    }
}
