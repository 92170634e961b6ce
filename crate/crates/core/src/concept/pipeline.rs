use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_views, gcca_fuse, nmf_complete, standardize_columns, support_pairs, ConceptEmbedding};
use super::{ConceptError, LinkGraph, Result};

const MAGIC: &[u8; 8] = b"FSEGEMB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptConfig {
    pub rank: usize,
    pub iters: usize,
    pub seed: u64,
    pub k: usize,
    pub ridge: f64,
    pub theta: f64,
    pub theta_c: f64,
    pub min_support: usize,
}

impl Default for ConceptConfig {
    fn default() -> Self {
        Self { rank: 10, iters: 500, seed: 7, k: 16, ridge: 1e-6, theta: 0.6, theta_c: 0.75, min_support: 3 }
    }
}

/// Views → NMF completion → column z-score → GCCA. Views without any
/// observed entry are skipped.
pub fn build_embedding(
    g: &LinkGraph,
    text_vectors: &BTreeMap<String, Vec<f64>>,
    config: &ConceptConfig,
) -> Result<ConceptEmbedding> {
    let observed = support_pairs(g, config.min_support);
    let mut completed = Vec::new();
    for view in build_views(g, text_vectors, &observed) {
        if view.observed_count() == 0 {
            log::warn!("view {} has no observed entries; skipped", view.name.as_str());
            continue;
        }
        let out = nmf_complete(&view, config.rank, config.iters, config.seed)?;
        log::info!(
            "view {}: {} observed, loss {:.4e}",
            view.name.as_str(),
            view.observed_count(),
            out.loss_history.last().copied().unwrap_or(0.0)
        );
        completed.push(standardize_columns(&out.completed));
    }
    if completed.is_empty() {
        return Err(ConceptError::NoViews);
    }
    Ok(gcca_fuse(&completed, config.k, config.ridge)?.with_ids(g.concepts()))
}

pub fn save_embedding(path: &Path, emb: &ConceptEmbedding) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    bincode::serialize_into(&mut f, emb)?;
    f.flush()?;
    Ok(())
}

pub fn load_embedding(path: &Path) -> Result<ConceptEmbedding> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).map_err(|_| ConceptError::BadMagic)?;
    if &magic != MAGIC {
        return Err(ConceptError::BadMagic);
    }
    Ok(bincode::deserialize_from(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_to_end_small_graph() {
        let mut g = LinkGraph::new();
        for i in 0..8 {
            let group = i % 2;
            let links: Vec<String> = (0..6).map(|j| format!("l{group}_{}", (i + j) % 9)).collect();
            g.add_entity(&format!("c{i}"), links);
        }
        let config = ConceptConfig { rank: 3, iters: 100, k: 4, ..Default::default() };
        let emb = build_embedding(&g, &BTreeMap::new(), &config).unwrap();
        assert_eq!(emb.g.shape(), (8, 4));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        save_embedding(&path, &emb).unwrap();
        assert_eq!(load_embedding(&path).unwrap(), emb);
        std::fs::write(&path, b"nope").unwrap();
        assert!(matches!(load_embedding(&path), Err(ConceptError::BadMagic)));
    }
}
