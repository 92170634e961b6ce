#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use facetseg::concept::{build_embedding, ConceptConfig, ConceptEmbedding};
use facetseg::corpus::{PageRecord, RawPage};
use facetseg::model::{train, FacetSpec, ModelConfig, TrainedModel};
use facetseg::synth::{LinkGraphConfig, SynthConcepts, SynthConfig, SynthWorld};
use facetseg::Facet;
use facetseg_api::{Assets, Config, Service};

pub struct Fixture {
    pub world: SynthWorld,
    pub models: BTreeMap<Facet, TrainedModel>,
    pub embedding: ConceptEmbedding,
}

pub fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let world = SynthWorld::generate(&SynthConfig { n_internal: 120, ..Default::default() });
        let corpus = world.internal_corpus().unwrap();
        let mut models = BTreeMap::new();
        for facet in Facet::ALL {
            let spec = FacetSpec::new(facet, corpus.label_space(facet).to_vec()).unwrap();
            let mut model = train(&corpus.sites, &spec, &world.table, &ModelConfig::default()).unwrap();
            model.vocabulary = Some(corpus.vocabulary.clone());
            models.insert(facet, model);
        }
        let concepts = SynthConcepts::generate(&LinkGraphConfig::default());
        let embedding =
            build_embedding(&concepts.graph, &concepts.text_vectors, &ConceptConfig { k: 8, ..Default::default() })
                .unwrap();
        Fixture { world, models, embedding }
    })
}

pub fn assets() -> Assets {
    let f = fixture();
    Assets { table: Some(f.world.table.clone()), models: f.models.clone(), embedding: Some(f.embedding.clone()) }
}

/// A service whose logs live in `dir`.
pub fn service_in(dir: &Path) -> Service {
    let config = Config {
        event_log: Some(dir.join("kg.log")),
        decision_log: Some(dir.join("decisions.jsonl")),
        ..Default::default()
    };
    Service::new(config, assets()).unwrap()
}

/// Domains whose only industry is `industry`.
pub fn domains_with(industry: &str) -> Vec<String> {
    fixture()
        .world
        .truth
        .iter()
        .filter(|(d, t)| {
            t.get(&Facet::Industry).is_some_and(|s| s.len() == 1 && s.contains(industry))
                && fixture().world.internal_pages.iter().any(|p| &p.domain == *d)
        })
        .map(|(d, _)| d.clone())
        .collect()
}

pub fn pages_of(domains: &[&str]) -> Vec<RawPage> {
    fixture().world.internal_pages.iter().filter(|p| domains.contains(&p.domain.as_str())).cloned().collect()
}

pub fn jsonl(pages: &[RawPage]) -> String {
    pages.iter().map(|p| serde_json::to_string(&PageRecord::from(p.clone())).unwrap() + "\n").collect()
}
