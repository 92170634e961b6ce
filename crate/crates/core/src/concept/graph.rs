use serde::{Deserialize, Serialize};

use super::ConceptEmbedding;
use crate::kg::{EdgeKind, NodeKind, NodeRef, UpsertEvent};

/// Undirected concept pair with its cosine similarity; `a < b` by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptEdge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Pairs of embedding rows with cosine ≥ `theta`. Zero rows are skipped.
pub fn cosine_graph(emb: &ConceptEmbedding, theta: f64) -> Vec<ConceptEdge> {
    let rows: Vec<Vec<f64>> = (0..emb.g.nrows()).map(|i| emb.row(i)).collect();
    let live: Vec<usize> = (0..rows.len())
        .filter(|&i| {
            let zero = rows[i].iter().all(|v| *v == 0.0);
            if zero {
                log::warn!("concept {} has a zero embedding row; excluded", emb.ids[i]);
            }
            !zero
        })
        .collect();
    let mut edges = Vec::new();
    for (x, &i) in live.iter().enumerate() {
        for &j in &live[x + 1..] {
            let c = cosine(&rows[i], &rows[j]);
            if c >= theta {
                edges.push(ConceptEdge { a: emb.ids[i].clone(), b: emb.ids[j].clone(), weight: c });
            }
        }
    }
    edges
}

/// One concept node event per embedded id, each owning `related_to` edges
/// to its neighbours. Negative similarities cannot be stored as edge
/// weights and are dropped.
pub fn concept_events(emb: &ConceptEmbedding, edges: &[ConceptEdge], sequence: i64) -> Vec<UpsertEvent> {
    let mut events: Vec<UpsertEvent> = emb
        .ids
        .iter()
        .map(|id| UpsertEvent::new(NodeKind::Concept, id.clone(), sequence).attr("name", id.as_str()))
        .collect();
    let index = |id: &str| emb.index_of(id).expect("edge ids come from the embedding");
    for e in edges {
        if e.weight < 0.0 {
            log::warn!("dropping negative similarity {} between {} and {}", e.weight, e.a, e.b);
            continue;
        }
        let w = e.weight.min(1.0);
        let (ia, ib) = (index(&e.a), index(&e.b));
        let ea = std::mem::replace(&mut events[ia], UpsertEvent::new(NodeKind::Concept, "", 0));
        events[ia] = ea.edge(EdgeKind::RelatedTo, NodeRef::new(NodeKind::Concept, e.b.clone()), Some(w));
        let eb = std::mem::replace(&mut events[ib], UpsertEvent::new(NodeKind::Concept, "", 0));
        events[ib] = eb.edge(EdgeKind::RelatedTo, NodeRef::new(NodeKind::Concept, e.a.clone()), Some(w));
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn emb(rows: &[&[f64]]) -> ConceptEmbedding {
        let k = rows[0].len();
        let g = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        ConceptEmbedding {
            ids: (0..rows.len()).map(|i| format!("c{i}")).collect(),
            g,
            loadings: Vec::new(),
            eigenvalues: Vec::new(),
            k,
        }
    }

    #[test]
    fn thresholds() {
        let e = emb(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let edges = cosine_graph(&e, 0.6);
        assert_eq!(edges, [ConceptEdge { a: "c0".into(), b: "c1".into(), weight: 1.0 }]);
        assert_eq!(cosine_graph(&e, -1.0).len(), 3);
        let events = concept_events(&e, &cosine_graph(&e, -1.0), 1);
        assert_eq!(events[0].payload.edges.len(), 2);
        events.iter().for_each(|ev| ev.validate().unwrap());
    }
}
