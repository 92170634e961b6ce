use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{mpsc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::log::EventLog;
use super::{Edge, EdgeKind, EntityNode, KgError, NodeKind, NodeRef, Result, Scalar, UpsertEvent, UpsertOutcome};
use crate::fnv1a64;

pub const DEFAULT_SHARDS: usize = 16;

#[derive(Debug, Clone)]
struct Entry {
    node: EntityNode,
    edges: Vec<Edge>,
    last_sequence: i64,
    /// Derived values (e.g. cached predictions); not part of the content
    /// hash or the snapshot, cleared when the content changes.
    annotations: BTreeMap<String, Value>,
}

type Shard = BTreeMap<NodeRef, Entry>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub key: String,
    pub sequence: i64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub inserted: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    fn record(&mut self, event: &UpsertEvent, result: &Result<UpsertOutcome>) {
        match result {
            Ok(UpsertOutcome::Inserted) => self.inserted += 1,
            Ok(UpsertOutcome::Updated) => self.updated += 1,
            Ok(UpsertOutcome::Unchanged) => self.unchanged += 1,
            Err(e) => self.rejected.push(Rejection {
                key: event.key.clone(),
                sequence: event.sequence,
                reason: e.to_string(),
            }),
        }
    }

    pub fn merge(&mut self, other: IngestReport) {
        self.inserted += other.inserted;
        self.updated += other.updated;
        self.unchanged += other.unchanged;
        self.rejected.extend(other.rejected);
        self.rejected.sort_by(|a, b| (&a.key, a.sequence, &a.reason).cmp(&(&b.key, b.sequence, &b.reason)));
    }
}

/// Sharded in-memory store with an optional write-ahead log.
///
/// Keys are assigned to shards by hash, so writes to one key are serialized
/// while distinct keys proceed in parallel.
pub struct KnowledgeGraph {
    shards: Vec<RwLock<Shard>>,
    wal: Option<Mutex<EventLog>>,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new()
    }
}

fn content_hash(kind: NodeKind, attributes: &BTreeMap<String, Scalar>, edges: &[Edge]) -> u64 {
    let edges: Vec<Value> = edges
        .iter()
        .map(|e| json!([e.kind, e.dst.kind, e.dst.id, e.weight]))
        .collect();
    let canonical = json!({ "kind": kind, "attributes": attributes, "edges": edges });
    fnv1a64(canonical.to_string().as_bytes())
}

fn shard_of(key: &str, n: usize) -> usize {
    (fnv1a64(key.as_bytes()) % n as u64) as usize
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::with_shards(DEFAULT_SHARDS)
    }

    pub fn with_shards(n: usize) -> Self {
        Self { shards: (0..n.max(1)).map(|_| RwLock::new(Shard::new())).collect(), wal: None }
    }

    /// Opens a store backed by a log file, replaying whatever it holds.
    pub fn open(path: &Path) -> Result<Self> {
        let mut kg = Self::new();
        if path.exists() {
            for event in super::read_event_log(path)? {
                if let Err(e) = kg.upsert(event) {
                    log::warn!("replay: {e}");
                }
            }
        }
        kg.wal = Some(Mutex::new(EventLog::append_to(path)?));
        Ok(kg)
    }

    fn shard(&self, key: &str) -> &RwLock<Shard> {
        &self.shards[shard_of(key, self.shards.len())]
    }

    pub fn upsert(&self, event: UpsertEvent) -> Result<UpsertOutcome> {
        event.validate()?;
        let node_ref = event.node_ref();
        let src = node_ref.clone();
        let mut edges: Vec<Edge> = event
            .payload
            .edges
            .iter()
            .map(|e| Edge { src: src.clone(), dst: e.dst.clone(), kind: e.kind, weight: e.weight })
            .collect();
        edges.sort_by(|a, b| (a.kind, &a.dst).cmp(&(b.kind, &b.dst)));
        let hash = content_hash(event.payload.kind, &event.payload.attributes, &edges);

        let mut shard = self.shard(&event.key).write().expect("shard lock poisoned");
        let outcome = match shard.get_mut(&node_ref) {
            Some(entry) if event.sequence < entry.last_sequence => {
                return Err(KgError::StaleEvent {
                    key: event.key.clone(),
                    sequence: event.sequence,
                    last: entry.last_sequence,
                })
            }
            Some(entry) if entry.node.content_hash == hash => {
                entry.last_sequence = event.sequence;
                UpsertOutcome::Unchanged
            }
            Some(entry) => {
                entry.node.attributes = event.payload.attributes.clone();
                entry.node.content_hash = hash;
                entry.node.version += 1;
                entry.edges = edges;
                entry.last_sequence = event.sequence;
                entry.annotations.clear();
                UpsertOutcome::Updated
            }
            None => {
                let node = EntityNode {
                    id: event.key.clone(),
                    kind: event.payload.kind,
                    attributes: event.payload.attributes.clone(),
                    content_hash: hash,
                    version: 1,
                };
                shard.insert(
                    node_ref,
                    Entry { node, edges, last_sequence: event.sequence, annotations: BTreeMap::new() },
                );
                UpsertOutcome::Inserted
            }
        };
        if outcome != UpsertOutcome::Unchanged {
            if let Some(wal) = &self.wal {
                wal.lock().expect("log lock poisoned").append(&event)?;
            }
        }
        Ok(outcome)
    }

    /// Applies events with `workers` threads. Events are routed by key hash,
    /// so each key's events keep their source order.
    pub fn consume_stream<I>(&self, events: I, workers: usize) -> IngestReport
    where
        I: IntoIterator<Item = UpsertEvent>,
    {
        let workers = workers.max(1);
        if workers == 1 {
            let mut report = IngestReport::default();
            for event in events {
                let result = self.upsert(event.clone());
                report.record(&event, &result);
            }
            report.merge(IngestReport::default());
            return report;
        }
        std::thread::scope(|scope| {
            let mut senders = Vec::with_capacity(workers);
            let mut handles = Vec::with_capacity(workers);
            for _ in 0..workers {
                let (tx, rx) = mpsc::sync_channel::<UpsertEvent>(256);
                senders.push(tx);
                handles.push(scope.spawn(move || {
                    let mut report = IngestReport::default();
                    for event in rx {
                        let result = self.upsert(event.clone());
                        report.record(&event, &result);
                    }
                    report
                }));
            }
            for event in events {
                let w = shard_of(&event.key, workers);
                senders[w].send(event).expect("worker exited early");
            }
            drop(senders);
            let mut report = IngestReport::default();
            for h in handles {
                report.merge(h.join().expect("worker panicked"));
            }
            report
        })
    }

    pub fn get(&self, node: &NodeRef) -> Option<EntityNode> {
        let shard = self.shard(&node.id).read().expect("shard lock poisoned");
        shard.get(node).map(|e| e.node.clone())
    }

    pub fn contains(&self, node: &NodeRef) -> bool {
        self.shard(&node.id).read().expect("shard lock poisoned").contains_key(node)
    }

    /// Edges owned by `node`, in canonical order.
    pub fn edges_from(&self, node: &NodeRef) -> Result<Vec<Edge>> {
        let shard = self.shard(&node.id).read().expect("shard lock poisoned");
        shard.get(node).map(|e| e.edges.clone()).ok_or_else(|| KgError::NotFound(node.clone()))
    }

    /// Outgoing edges of one kind with weight ≥ `min_weight`, by descending
    /// weight then destination.
    pub fn neighbors(&self, node: &NodeRef, kind: EdgeKind, min_weight: f64) -> Result<Vec<(NodeRef, f64)>> {
        let mut out: Vec<(NodeRef, f64)> = self
            .edges_from(node)?
            .into_iter()
            .filter(|e| e.kind == kind && e.effective_weight() >= min_weight)
            .map(|e| {
                let w = e.effective_weight();
                (e.dst, w)
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    /// All nodes of a kind, sorted by id.
    pub fn nodes(&self, kind: NodeKind) -> Vec<EntityNode> {
        let mut out: Vec<EntityNode> = self
            .shards
            .iter()
            .flat_map(|s| {
                let shard = s.read().expect("shard lock poisoned");
                shard.values().filter(|e| e.node.kind == kind).map(|e| e.node.clone()).collect::<Vec<_>>()
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.read().expect("shard lock poisoned").len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set_annotation(&self, node: &NodeRef, name: &str, value: Value) -> Result<()> {
        let mut shard = self.shard(&node.id).write().expect("shard lock poisoned");
        let entry = shard.get_mut(node).ok_or_else(|| KgError::NotFound(node.clone()))?;
        entry.annotations.insert(name.to_string(), value);
        Ok(())
    }

    pub fn annotation(&self, node: &NodeRef, name: &str) -> Option<Value> {
        let shard = self.shard(&node.id).read().expect("shard lock poisoned");
        shard.get(node).and_then(|e| e.annotations.get(name).cloned())
    }

    /// Canonical JSONL export: nodes sorted by (kind, id), then edges sorted
    /// by (src, kind, dst).
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for s in &self.shards {
            let shard = s.read().expect("shard lock poisoned");
            for (r, e) in shard.iter() {
                nodes.push((r.clone(), e.node.clone()));
                edges.extend(e.edges.iter().cloned());
            }
        }
        nodes.sort_by(|a, b| a.0.cmp(&b.0));
        edges.sort_by(|a, b| (&a.src, a.kind, &a.dst).cmp(&(&b.src, b.kind, &b.dst)));
        for (_, n) in nodes {
            let line = json!({
                "type": "node", "kind": n.kind, "id": n.id, "attributes": n.attributes,
                "content_hash": format!("{:016x}", n.content_hash), "version": n.version,
            });
            writeln!(out, "{line}")?;
        }
        for e in edges {
            let mut line = json!({ "type": "edge", "src": e.src, "dst": e.dst, "kind": e.kind });
            if let Some(w) = e.weight {
                line["weight"] = json!(w);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("writing to memory");
        buf
    }

    pub fn snapshot_hash(&self) -> u64 {
        fnv1a64(&self.snapshot_bytes())
    }

    /// Builds a fresh store from an ordered event sequence.
    pub fn replay<I: IntoIterator<Item = UpsertEvent>>(events: I, workers: usize) -> (Self, IngestReport) {
        let kg = Self::new();
        let report = kg.consume_stream(events, workers);
        (kg, report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn company(key: &str, seq: i64, html: &str) -> UpsertEvent {
        UpsertEvent::new(NodeKind::Company, key, seq).attr("html_hash", html)
    }

    fn concept(key: &str, rel: &[(&str, f64)]) -> UpsertEvent {
        rel.iter().fold(UpsertEvent::new(NodeKind::Concept, key, 1), |e, (k, w)| {
            e.edge(EdgeKind::RelatedTo, NodeRef::new(NodeKind::Concept, *k), Some(*w))
        })
    }

    #[test]
    fn upsert_outcomes() {
        let kg = KnowledgeGraph::new();
        let x = NodeRef::new(NodeKind::Company, "x.com");
        assert_eq!(kg.upsert(company("x.com", 1, "a")).unwrap(), UpsertOutcome::Inserted);
        assert_eq!(kg.get(&x).unwrap().version, 1);
        assert_eq!(kg.upsert(company("x.com", 1, "a")).unwrap(), UpsertOutcome::Unchanged);
        assert_eq!(kg.get(&x).unwrap().version, 1);
        assert_eq!(kg.upsert(company("x.com", 2, "b")).unwrap(), UpsertOutcome::Updated);
        assert_eq!(kg.get(&x).unwrap().version, 2);
        let err = kg.upsert(company("x.com", 1, "c")).unwrap_err();
        assert!(err.to_string().contains("stale event"));
    }

    #[test]
    fn edges_are_reconciled() {
        let kg = KnowledgeGraph::new();
        let a = NodeRef::new(NodeKind::Concept, "a");
        kg.upsert(concept("a", &[("b", 0.5), ("c", 0.7)])).unwrap();
        let mut next = concept("a", &[("c", 0.7), ("d", 0.2)]);
        next.sequence = 2;
        assert_eq!(kg.upsert(next).unwrap(), UpsertOutcome::Updated);
        let dsts: Vec<String> = kg.edges_from(&a).unwrap().into_iter().map(|e| e.dst.id).collect();
        assert_eq!(dsts, ["c", "d"]);
    }

    #[test]
    fn neighbors_filter_and_order() {
        let kg = KnowledgeGraph::new();
        kg.upsert(concept("x", &[("B", 0.4), ("A", 0.9)])).unwrap();
        let x = NodeRef::new(NodeKind::Concept, "x");
        let ids = |v: Vec<(NodeRef, f64)>| v.into_iter().map(|(n, w)| (n.id, w)).collect::<Vec<_>>();
        assert_eq!(ids(kg.neighbors(&x, EdgeKind::RelatedTo, 0.5).unwrap()), [("A".to_string(), 0.9)]);
        assert_eq!(
            ids(kg.neighbors(&x, EdgeKind::RelatedTo, 0.0).unwrap()),
            [("A".to_string(), 0.9), ("B".to_string(), 0.4)]
        );
        let missing = kg.neighbors(&NodeRef::new(NodeKind::Concept, "nope"), EdgeKind::RelatedTo, 0.0);
        assert!(missing.unwrap_err().to_string().contains("not found"));
    }

    #[test]
    fn unweighted_edges_count_as_one() {
        let kg = KnowledgeGraph::new();
        let e = UpsertEvent::new(NodeKind::Company, "x.com", 1)
            .edge(EdgeKind::HasPage, NodeRef::new(NodeKind::Page, "https://x.com/"), None);
        kg.upsert(e).unwrap();
        let n = kg.neighbors(&NodeRef::new(NodeKind::Company, "x.com"), EdgeKind::HasPage, 1.0).unwrap();
        assert_eq!(n.len(), 1);
    }

    #[test]
    fn stream_report_and_rejections() {
        let kg = KnowledgeGraph::new();
        let events = vec![company("a", 2, "v"), company("a", 2, "v"), company("a", 1, "w"), company("b", 1, "v")];
        for workers in [1, 4] {
            let kg2 = KnowledgeGraph::new();
            let r = kg2.consume_stream(events.clone(), workers);
            assert_eq!((r.inserted, r.updated, r.unchanged, r.rejected.len()), (2, 0, 1, 1));
            assert!(r.rejected[0].reason.contains("stale event"));
        }
        kg.consume_stream(events, 2);
        assert_eq!(kg.len(), 2);
    }

    #[test]
    fn interleaving_does_not_change_snapshot() {
        let events = [company("a", 1, "1"), company("b", 1, "2"), company("c", 1, "3")];
        let orders = [[0, 1, 2], [2, 1, 0], [1, 2, 0]];
        let hashes: Vec<u64> = orders
            .iter()
            .map(|o| KnowledgeGraph::replay(o.iter().map(|&i| events[i].clone()), 3).0.snapshot_hash())
            .collect();
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn annotations_reset_on_update() {
        let kg = KnowledgeGraph::new();
        let x = NodeRef::new(NodeKind::Company, "x.com");
        kg.upsert(company("x.com", 1, "a")).unwrap();
        let before = kg.snapshot_bytes();
        kg.set_annotation(&x, "probs", json!([0.5])).unwrap();
        assert_eq!(kg.snapshot_bytes(), before);
        kg.upsert(company("x.com", 1, "a")).unwrap();
        assert!(kg.annotation(&x, "probs").is_some());
        kg.upsert(company("x.com", 2, "b")).unwrap();
        assert!(kg.annotation(&x, "probs").is_none());
    }

    #[test]
    fn wal_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        {
            let kg = KnowledgeGraph::open(&path).unwrap();
            kg.upsert(company("a", 1, "x")).unwrap();
            kg.upsert(company("a", 1, "x")).unwrap();
            kg.upsert(concept("k", &[("a", 0.3)])).unwrap();
        }
        let first = KnowledgeGraph::open(&path).unwrap();
        assert_eq!(first.len(), 2);
        let events = super::super::read_event_log(&path).unwrap();
        assert_eq!(events.len(), 2);
        let (fresh, _) = KnowledgeGraph::replay(events, 1);
        assert_eq!(fresh.snapshot_bytes(), first.snapshot_bytes());
    }
}
