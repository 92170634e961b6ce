//! Seeded synthetic corpora.
//!
//! Each label owns a pool of pseudo-words whose vectors sit near a
//! label-specific prototype direction. Every text block of a site with labels
//! `L` picks one label of `L` and draws a fixed share of its tokens from that
//! label's pool, the rest from a shared background pool. Pages are rendered as HTML with nested
//! blocks, scripts and noise so the whole corpus pipeline is exercised.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_sites, CorpusConfig, CorpusError, Facet, LabelRecord, LabelSource, RawPage, SiteCorpus,
};
use crate::concept::LinkGraph;
use crate::embed::EmbeddingTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_internal: usize,
    pub n_external: usize,
    pub industries: Vec<String>,
    pub roles: Vec<String>,
    pub dim: usize,
    pub pool_size: usize,
    pub background_size: usize,
    /// Share of page tokens drawn from the site's label pools.
    pub signal_fraction: f64,
    pub tokens_per_page: usize,
    pub second_industry_prob: f64,
    /// Noise added to pool-token vectors around their prototype.
    pub token_noise: f64,
    /// Length of the label prototype vectors; background vectors have unit length.
    pub prototype_norm: f64,
    /// Labels whose external (encyclopedia) assignment ignores the content.
    pub randomized_external: BTreeSet<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            seed: 7,
            n_internal: 200,
            n_external: 0,
            industries: owned(&["healthcare", "retail", "transportation", "education", "communications", "video_analytics"]),
            roles: owned(&["manufacturer", "retailer", "distributor", "service_provider"]),
            dim: 50,
            pool_size: 24,
            background_size: 300,
            signal_fraction: 0.6,
            tokens_per_page: 90,
            second_industry_prob: 0.15,
            token_noise: 1.0,
            prototype_norm: 5.0,
            randomized_external: BTreeSet::new(),
        }
    }
}

/// Generated pages, labels and the matching word-vector table.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub config: SynthConfig,
    pub table: EmbeddingTable,
    pub internal_pages: Vec<RawPage>,
    pub internal_labels: Vec<LabelRecord>,
    pub external_pages: Vec<RawPage>,
    pub external_labels: Vec<LabelRecord>,
    /// True labels of every generated site, before any randomization.
    pub truth: BTreeMap<String, BTreeMap<Facet, BTreeSet<String>>>,
}

fn word_stem(label: &str) -> String {
    label.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_lowercase()
}

fn pool_token(label: &str, j: usize) -> String {
    format!("{}w{j}", word_stem(label))
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z }).collect::<Vec<f64>>()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

struct Lexicon {
    pools: BTreeMap<String, Vec<String>>,
    background: Vec<String>,
}

fn build_lexicon(config: &SynthConfig, rng: &mut ChaCha8Rng) -> (Lexicon, EmbeddingTable) {
    let mut pairs: Vec<(String, Vec<f64>)> = Vec::new();
    let mut pools = BTreeMap::new();
    let noise = config.token_noise / (config.dim as f64).sqrt();
    for label in config.industries.iter().chain(&config.roles) {
        let prototype: Vec<f64> = normalized(gaussian(rng, config.dim, 1.0)).into_iter().map(|x| x * config.prototype_norm).collect();
        let tokens: Vec<String> = (0..config.pool_size).map(|j| pool_token(label, j)).collect();
        for t in &tokens {
            let v: Vec<f64> = prototype.iter().zip(gaussian(rng, config.dim, noise)).map(|(p, n)| p + n).collect();
            pairs.push((t.clone(), v));
        }
        pools.insert(label.clone(), tokens);
    }
    let background: Vec<String> = (0..config.background_size).map(|j| format!("bgw{j}")).collect();
    for t in &background {
        pairs.push((t.clone(), normalized(gaussian(rng, config.dim, 1.0))));
    }
    // in the table but too rare in the corpus to survive the frequency filter
    for j in 0..20 {
        pairs.push((format!("rarew{j}"), normalized(gaussian(rng, config.dim, 1.0))));
    }
    let table = EmbeddingTable::from_pairs(pairs).expect("generated table is non-empty");
    (Lexicon { pools, background }, table)
}

fn draw_labels(config: &SynthConfig, rng: &mut ChaCha8Rng) -> BTreeMap<Facet, BTreeSet<String>> {
    let mut industries = BTreeSet::new();
    industries.insert(config.industries.choose(rng).expect("industries non-empty").clone());
    if rng.random_bool(config.second_industry_prob) {
        industries.insert(config.industries.choose(rng).expect("industries non-empty").clone());
    }
    let mut roles = BTreeSet::new();
    roles.insert(config.roles.choose(rng).expect("roles non-empty").clone());
    [(Facet::Industry, industries), (Facet::Role, roles)].into_iter().collect()
}

/// Splits a page into blocks; each block takes its signal tokens from one
/// label, so multi-label sites keep a full-strength signal per label.
fn page_blocks(
    config: &SynthConfig,
    lexicon: &Lexicon,
    labels: &[&String],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<String>> {
    let mut blocks = Vec::new();
    let mut left = config.tokens_per_page;
    while left > 0 {
        let len = rng.random_range(6..=18).min(left);
        left -= len;
        let label = labels.choose(rng).copied();
        let block = (0..len)
            .map(|_| match label {
                Some(label) if rng.random_bool(config.signal_fraction) => {
                    lexicon.pools[label].choose(rng).expect("pool non-empty").clone()
                }
                _ => lexicon.background.choose(rng).expect("background non-empty").clone(),
            })
            .collect();
        blocks.push(block);
    }
    blocks
}

fn render_html(blocks: &[Vec<String>], rng: &mut ChaCha8Rng) -> String {
    let mut html = String::from("<html><head><title>Company</title><style>p{margin:0}</style></head><body>");
    for (block, words) in blocks.iter().enumerate() {
        let mut text = String::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push_str(if rng.random_bool(0.1) { ", " } else { " " });
            }
            if rng.random_bool(0.1) {
                text.push_str(&w.to_uppercase());
            } else {
                text.push_str(w);
            }
        }
        match block % 4 {
            0 => html.push_str(&format!("<h2>{text}</h2>")),
            1 => html.push_str(&format!("<div class=\"c\"><p>{text}.</p><script>var n = {block};</script></div>")),
            2 => html.push_str(&format!("<ul><li>{text}</li></ul>")),
            _ => html.push_str(&format!("<section><p>{text} &amp; more</p></section>")),
        }
    }
    html.push_str("<footer>&copy; zzgarble</footer></body></html>");
    html
}

fn site_pages(
    domain: &str,
    config: &SynthConfig,
    lexicon: &Lexicon,
    labels: &BTreeMap<Facet, BTreeSet<String>>,
    rng: &mut ChaCha8Rng,
) -> Vec<RawPage> {
    let all: Vec<&String> = labels.values().flatten().collect();
    let paths = ["/", "/about_us", "/products", "/blog/news"];
    paths
        .iter()
        .map(|path| {
            let topics = if path.starts_with("/blog") { &[][..] } else { &all[..] };
            let blocks = page_blocks(config, lexicon, topics, rng);
            RawPage::new(format!("https://www.{domain}{path}"), render_html(&blocks, rng), 1_700_000_000)
                .expect("generated page is well-formed")
        })
        .collect()
}

fn label_records(
    domain: &str,
    labels: &BTreeMap<Facet, BTreeSet<String>>,
    source: LabelSource,
) -> Vec<LabelRecord> {
    labels
        .iter()
        .map(|(facet, set)| LabelRecord {
            domain: domain.to_string(),
            facet: *facet,
            labels: set.iter().cloned().collect(),
            source,
        })
        .collect()
}

impl SynthWorld {
    pub fn generate(config: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (lexicon, table) = build_lexicon(config, &mut rng);
        let mut truth = BTreeMap::new();
        let mut internal_pages = Vec::new();
        let mut internal_labels = Vec::new();
        for i in 0..config.n_internal {
            let domain = format!("site{i:04}.com");
            let labels = draw_labels(config, &mut rng);
            internal_pages.extend(site_pages(&domain, config, &lexicon, &labels, &mut rng));
            internal_labels.extend(label_records(&domain, &labels, LabelSource::Internal));
            truth.insert(domain, labels);
        }
        let mut external_pages = Vec::new();
        let mut external_labels = Vec::new();
        for i in 0..config.n_external {
            let domain = format!("ext{i:04}.org");
            let labels = draw_labels(config, &mut rng);
            external_pages.extend(site_pages(&domain, config, &lexicon, &labels, &mut rng));
            let mut published = labels.clone();
            for label in &config.randomized_external {
                let facet = if config.industries.contains(label) { Facet::Industry } else { Facet::Role };
                let base_rate = if facet == Facet::Industry {
                    (1.0 + config.second_industry_prob) / config.industries.len() as f64
                } else {
                    1.0 / config.roles.len() as f64
                };
                let set = published.entry(facet).or_default();
                set.remove(label);
                if rng.random_bool(base_rate) {
                    set.insert(label.clone());
                }
            }
            external_labels.extend(label_records(&domain, &published, LabelSource::Wikipedia));
            truth.insert(domain, labels);
        }
        Self { config: config.clone(), table, internal_pages, internal_labels, external_pages, external_labels, truth }
    }

    pub fn label_spaces(&self) -> BTreeMap<Facet, Vec<String>> {
        [
            (Facet::Industry, self.config.industries.clone()),
            (Facet::Role, self.config.roles.clone()),
        ]
        .into_iter()
        .collect()
    }

    fn corpus_config(&self, source: LabelSource) -> CorpusConfig {
        CorpusConfig { default_source: source, label_spaces: Some(self.label_spaces()), ..Default::default() }
    }

    /// Runs the corpus pipeline over the internal pages.
    pub fn internal_corpus(&self) -> Result<SiteCorpus, CorpusError> {
        let config = self.corpus_config(LabelSource::Internal);
        Ok(build_sites(&self.internal_pages, &self.internal_labels, &self.table, &config)?.0)
    }

    /// Runs the corpus pipeline over the external pages.
    pub fn external_corpus(&self) -> Result<SiteCorpus, CorpusError> {
        let config = self.corpus_config(LabelSource::Wikipedia);
        Ok(build_sites(&self.external_pages, &self.external_labels, &self.table, &config)?.0)
    }
}

/// Grouped concept graph: industries and products in the same group share
/// linkers, co-occur and have nearby text vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGraphConfig {
    pub seed: u64,
    pub groups: usize,
    pub industries_per_group: usize,
    pub products_per_group: usize,
    pub linkers_per_group: usize,
    pub links_per_concept: usize,
    /// Extra inlinks drawn from all linkers.
    pub noise_links: usize,
    pub text_dim: usize,
}

impl Default for LinkGraphConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            groups: 4,
            industries_per_group: 3,
            products_per_group: 3,
            linkers_per_group: 20,
            links_per_concept: 8,
            noise_links: 2,
            text_dim: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConcepts {
    pub graph: LinkGraph,
    pub text_vectors: BTreeMap<String, Vec<f64>>,
    /// Concept id → generating group.
    pub groups: BTreeMap<String, usize>,
}

impl SynthConcepts {
    pub fn generate(config: &LinkGraphConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let linkers: Vec<Vec<String>> = (0..config.groups)
            .map(|g| (0..config.linkers_per_group).map(|j| format!("page_g{g}_{j}")).collect())
            .collect();
        let everyone: Vec<&String> = linkers.iter().flatten().collect();
        let mut graph = LinkGraph::new();
        let mut text_vectors = BTreeMap::new();
        let mut groups = BTreeMap::new();
        for (g, pool) in linkers.iter().enumerate() {
            let prototype = normalized(gaussian(&mut rng, config.text_dim, 1.0));
            let industries: Vec<String> = (0..config.industries_per_group).map(|i| format!("industry_g{g}_{i}")).collect();
            let products: Vec<String> = (0..config.products_per_group).map(|i| format!("product_g{g}_{i}")).collect();
            for id in industries.iter().chain(&products) {
                let mut links: Vec<String> =
                    pool.choose_multiple(&mut rng, config.links_per_concept.min(pool.len())).cloned().collect();
                links.extend((0..config.noise_links).map(|_| (*everyone.choose(&mut rng).expect("linkers")).clone()));
                graph.add_entity(id, links);
                let v = prototype.iter().zip(gaussian(&mut rng, config.text_dim, 0.2)).map(|(p, n)| p + n).collect();
                text_vectors.insert(id.clone(), v);
                groups.insert(id.clone(), g);
            }
            for i in &industries {
                for p in &products {
                    if rng.random_bool(0.7) {
                        graph.add_cooc(i, p, rng.random_range(1..10));
                    }
                }
            }
        }
        Self { graph, text_vectors, groups }
    }
}
