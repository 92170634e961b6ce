//! Embedded knowledge graph: companies, pages, labels and concepts updated
//! by keyed snapshot events.
//!
//! Each event owns one node and the full set of edges leaving it. Applying
//! an event either inserts the node, leaves it untouched (same content
//! hash) or replaces its attributes and edge set.

mod log;
mod store;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use log::{read_event_log, read_events_any, read_events_jsonl, write_event_log, EventLog};
pub use store::{IngestReport, KnowledgeGraph, Rejection, DEFAULT_SHARDS};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("stale event: key {key} sequence {sequence} < last applied {last}")]
    StaleEvent { key: String, sequence: i64, last: i64 },
    #[error("not found: {0}")]
    NotFound(NodeRef),
    #[error("malformed event for key {key}: {message}")]
    Malformed { key: String, message: String },
    #[error("log frame {frame}: {message}")]
    BadFrame { frame: usize, message: String },
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KgError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Company,
    Page,
    Label,
    Concept,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Company => "company",
            NodeKind::Page => "page",
            NodeKind::Label => "label",
            NodeKind::Concept => "concept",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    HasPage,
    LabeledAs,
    RelatedTo,
    MemberOfCluster,
}

/// Typed node key; ids are unique per kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub id: String,
}

impl NodeRef {
    pub fn new(kind: NodeKind, id: impl Into<String>) -> Self {
        Self { kind, id: id.into() }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.id)
    }
}

/// Attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}
impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Scalar::Text(s)
    }
}
impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}
impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}
impl From<bool> for Scalar {
    fn from(v: bool) -> Self {
        Scalar::Bool(v)
    }
}

impl Scalar {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Float(v) => Some(*v),
            Scalar::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: String,
    pub kind: NodeKind,
    pub attributes: BTreeMap<String, Scalar>,
    pub content_hash: u64,
    pub version: u64,
}

impl EntityNode {
    pub fn node_ref(&self) -> NodeRef {
        NodeRef::new(self.kind, self.id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl Edge {
    /// Weight used for ranking; an absent weight counts as 1.
    pub fn effective_weight(&self) -> f64 {
        self.weight.unwrap_or(1.0)
    }
}

/// Edge as carried by an event; the source is the event's node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub dst: NodeRef,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePayload {
    pub kind: NodeKind,
    #[serde(default)]
    pub attributes: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsertEvent {
    pub key: String,
    pub payload: NodePayload,
    pub sequence: i64,
}

impl UpsertEvent {
    pub fn new(kind: NodeKind, key: impl Into<String>, sequence: i64) -> Self {
        Self { key: key.into(), payload: NodePayload { kind, attributes: BTreeMap::new(), edges: Vec::new() }, sequence }
    }

    pub fn attr(mut self, name: &str, value: impl Into<Scalar>) -> Self {
        self.payload.attributes.insert(name.to_string(), value.into());
        self
    }

    pub fn edge(mut self, kind: EdgeKind, dst: NodeRef, weight: Option<f64>) -> Self {
        self.payload.edges.push(EdgeSpec { dst, kind, weight });
        self
    }

    pub fn node_ref(&self) -> NodeRef {
        NodeRef::new(self.payload.kind, self.key.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(KgError::Malformed { key: self.key.clone(), message });
        if self.key.is_empty() {
            return bad("empty key".into());
        }
        for (name, value) in &self.payload.attributes {
            if let Scalar::Float(v) = value {
                if !v.is_finite() {
                    return bad(format!("attribute {name} is not finite"));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.payload.edges {
            match e.weight {
                Some(w) if !(0.0..=1.0).contains(&w) => return bad(format!("edge weight {w} outside [0,1]")),
                None if e.kind == EdgeKind::RelatedTo => return bad("related_to edge without weight".into()),
                _ => {}
            }
            if !seen.insert((e.kind, &e.dst)) {
                return bad(format!("duplicate edge to {}", e.dst));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsertOutcome {
    Inserted,
    Updated,
    Unchanged,
}
