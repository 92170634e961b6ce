use std::collections::BTreeMap;

use facetseg::kg::{EdgeKind, KnowledgeGraph, NodeKind, NodeRef, UpsertEvent, UpsertOutcome};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Spec {
    key: usize,
    attr: u8,
    edges: BTreeMap<usize, u8>,
}

fn spec() -> impl Strategy<Value = Spec> {
    (0usize..5, 0u8..3, prop::collection::btree_map(0usize..6, 0u8..3, 0..4))
        .prop_map(|(key, attr, edges)| Spec { key, attr, edges })
}

fn event(s: &Spec, sequence: i64) -> UpsertEvent {
    let mut e = UpsertEvent::new(NodeKind::Concept, format!("k{}", s.key), sequence).attr("v", s.attr as i64);
    for (&dst, &w) in s.edges.iter().rev() {
        e = e.edge(EdgeKind::RelatedTo, NodeRef::new(NodeKind::Concept, format!("k{dst}")), Some(w as f64 / 2.0));
    }
    e
}

/// Events with per-key increasing sequence numbers.
fn stream(specs: &[Spec]) -> Vec<UpsertEvent> {
    let mut next: BTreeMap<usize, i64> = BTreeMap::new();
    specs
        .iter()
        .map(|s| {
            let seq = next.entry(s.key).or_insert(0);
            *seq += 1;
            event(s, *seq)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_is_deterministic(specs in prop::collection::vec(spec(), 0..40)) {
        let events = stream(&specs);
        let (a, ra) = KnowledgeGraph::replay(events.clone(), 1);
        let (b, rb) = KnowledgeGraph::replay(events, 4);
        prop_assert_eq!(a.snapshot_bytes(), b.snapshot_bytes());
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn version_counts_content_changes(specs in prop::collection::vec(spec(), 1..40)) {
        let kg = KnowledgeGraph::new();
        let mut last: BTreeMap<usize, (u8, BTreeMap<usize, u8>)> = BTreeMap::new();
        let mut versions: BTreeMap<usize, u64> = BTreeMap::new();
        for (s, e) in specs.iter().zip(stream(&specs)) {
            let content = (s.attr, s.edges.clone());
            let outcome = kg.upsert(e).unwrap();
            match last.get(&s.key) {
                None => prop_assert_eq!(outcome, UpsertOutcome::Inserted),
                Some(prev) if *prev == content => prop_assert_eq!(outcome, UpsertOutcome::Unchanged),
                Some(_) => prop_assert_eq!(outcome, UpsertOutcome::Updated),
            }
            if last.get(&s.key) != Some(&content) {
                *versions.entry(s.key).or_insert(0) += 1;
            }
            last.insert(s.key, content);
        }
        for (key, v) in versions {
            let node = kg.get(&NodeRef::new(NodeKind::Concept, format!("k{key}"))).unwrap();
            prop_assert_eq!(node.version, v);
        }
    }

    #[test]
    fn reapplying_is_unchanged(specs in prop::collection::vec(spec(), 1..20)) {
        let kg = KnowledgeGraph::new();
        for e in stream(&specs) {
            kg.upsert(e.clone()).unwrap();
            let before = kg.snapshot_bytes();
            prop_assert_eq!(kg.upsert(e).unwrap(), UpsertOutcome::Unchanged);
            prop_assert_eq!(kg.snapshot_bytes(), before);
        }
    }

    #[test]
    fn distinct_keys_commute(specs in prop::collection::vec(spec(), 1..12), seed in any::<u64>()) {
        // one event per key, shuffled
        let mut uniq: BTreeMap<usize, Spec> = BTreeMap::new();
        for s in specs {
            uniq.entry(s.key).or_insert(s);
        }
        let events: Vec<UpsertEvent> = uniq.values().map(|s| event(s, 1)).collect();
        let mut shuffled = events.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed as usize) % n);
        shuffled.reverse();
        let (a, _) = KnowledgeGraph::replay(events, 1);
        let (b, _) = KnowledgeGraph::replay(shuffled, 3);
        prop_assert_eq!(a.snapshot_hash(), b.snapshot_hash());
    }
}

#[test]
fn duplicate_delivery_and_stale_order() {
    let e = UpsertEvent::new(NodeKind::Company, "x.com", 1).attr("name", "X");
    let (_, r) = KnowledgeGraph::replay(vec![e.clone(), e], 2);
    assert_eq!((r.inserted, r.unchanged), (1, 1));
    let two = UpsertEvent::new(NodeKind::Company, "x.com", 2).attr("name", "X2");
    let one = UpsertEvent::new(NodeKind::Company, "x.com", 1).attr("name", "X1");
    let (_, r) = KnowledgeGraph::replay(vec![two, one], 2);
    assert_eq!(r.rejected.len(), 1);
    assert!(r.rejected[0].reason.contains("stale event"));
}
