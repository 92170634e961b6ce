use serde::{Deserialize, Serialize};

use super::graph::cosine;
use crate::fnv1a64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterStatus {
    Proposed,
    Approved,
    Rejected,
    Merged,
}

impl ClusterStatus {
    /// Only proposed clusters can be decided; decisions are final.
    pub fn transition(self, to: ClusterStatus) -> Option<ClusterStatus> {
        match (self, to) {
            (ClusterStatus::Proposed, ClusterStatus::Approved | ClusterStatus::Rejected | ClusterStatus::Merged) => {
                Some(to)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCluster {
    /// Derived from the member list, so a re-run yields the same ids.
    pub id: String,
    pub members: Vec<String>,
    pub status: ClusterStatus,
}

fn cluster_id(members: &[String]) -> String {
    format!("cl-{:016x}", fnv1a64(members.join("\n").as_bytes()))
}

/// Average-linkage clustering on 1 − cosine, merging while the closest pair
/// of clusters is within 1 − `theta_c`. Ties go to the lexicographically
/// smallest pair of clusters (by smallest member id).
pub fn cluster_labels(ids: &[String], rows: &[Vec<f64>], theta_c: f64) -> Vec<LabelCluster> {
    assert_eq!(ids.len(), rows.len(), "one row per label");
    let n = ids.len();
    let dist: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| 1.0 - cosine(&rows[i], &rows[j])).collect()).collect();
    let cut = 1.0 - theta_c + 1e-12;
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let min_id = |c: &Vec<usize>| c.iter().map(|&i| &ids[i]).min().expect("non-empty cluster").clone();
    loop {
        let mut best: Option<(f64, String, String, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let total: f64 = clusters[a].iter().flat_map(|&i| clusters[b].iter().map(move |&j| (i, j))).map(|(i, j)| dist[i][j]).sum();
                let d = total / (clusters[a].len() * clusters[b].len()) as f64;
                let (ka, kb) = {
                    let (x, y) = (min_id(&clusters[a]), min_id(&clusters[b]));
                    if x <= y { (x, y) } else { (y, x) }
                };
                let better = match &best {
                    None => true,
                    Some((bd, ba, bb, _, _)) => d < *bd || (d == *bd && (&ka, &kb) < (ba, bb)),
                };
                if better {
                    best = Some((d, ka, kb, a, b));
                }
            }
        }
        match best {
            Some((d, _, _, a, b)) if d <= cut => {
                let merged = clusters.remove(b);
                clusters[a].extend(merged);
            }
            _ => break,
        }
    }
    let mut out: Vec<LabelCluster> = clusters
        .into_iter()
        .map(|c| {
            let mut members: Vec<String> = c.into_iter().map(|i| ids[i].clone()).collect();
            members.sort();
            LabelCluster { id: cluster_id(&members), members, status: ClusterStatus::Proposed }
        })
        .collect();
    out.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn members(c: &[LabelCluster]) -> Vec<Vec<String>> {
        c.iter().map(|c| c.members.clone()).collect()
    }

    #[test]
    fn examples() {
        let same = cluster_labels(&ids(&["a", "b"]), &[vec![1.0, 2.0], vec![1.0, 2.0]], 0.75);
        assert_eq!(members(&same), [ids(&["a", "b"])]);
        let ortho = cluster_labels(&ids(&["a", "b", "c"]), &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 0.5);
        assert_eq!(ortho.len(), 3);
        let angle = 0.95f64.acos();
        let rows = [vec![1.0, 0.0, 0.0], vec![angle.cos(), angle.sin(), 0.0], vec![0.0, 0.0, 1.0]];
        let c = cluster_labels(&ids(&["a", "b", "c"]), &rows, 0.8);
        assert_eq!(members(&c), [ids(&["a", "b"]), ids(&["c"])]);
        assert!(c.iter().all(|c| c.status == ClusterStatus::Proposed));
    }

    #[test]
    fn ties_break_by_label_id() {
        // b is equally close to a and c; the (a, b) pair wins
        let rows = [vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let c = cluster_labels(&ids(&["c", "b", "a"]), &rows, 0.7);
        assert_eq!(members(&c), [ids(&["a", "b"]), ids(&["c"])]);
    }

    #[test]
    fn transitions() {
        assert_eq!(ClusterStatus::Proposed.transition(ClusterStatus::Approved), Some(ClusterStatus::Approved));
        assert_eq!(ClusterStatus::Approved.transition(ClusterStatus::Rejected), None);
        assert_eq!(ClusterStatus::Proposed.transition(ClusterStatus::Proposed), None);
    }
}
