//! Request handling independent of the transport. The HTTP router and the
//! command line both drive a [`Service`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use facetseg::concept::{
    cluster_labels, concept_events, cosine_graph, load_embedding, ClusterStatus, ConceptEdge, ConceptEmbedding,
    LabelCluster,
};
use facetseg::corpus::{
    chunk_domains, clean_pages, normalize_domain, read_pages_jsonl, CleanPage, CorpusConfig, CorpusError, RawPage,
    SiteDocument, TextChunk,
};
use facetseg::embed::{load_embeddings, EmbeddingTable};
use facetseg::kg::{IngestReport, KnowledgeGraph, NodeKind, NodeRef, Scalar, UpsertEvent, EdgeKind};
use facetseg::model::{load_model, TrainedModel};
use facetseg::{Facet, LabelSource};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Config, ConfigError};
use crate::error::{ApiError, ApiResult};

const PAGE_PREFIX: &str = "page:";

/// Models and embeddings the service serves from.
#[derive(Debug, Default)]
pub struct Assets {
    pub table: Option<EmbeddingTable>,
    pub models: BTreeMap<Facet, TrainedModel>,
    pub embedding: Option<ConceptEmbedding>,
}

impl Assets {
    pub fn load(config: &Config) -> Result<Self, ConfigError> {
        let asset = |what, path: &Path, message: String| ConfigError::Asset { what, path: path.into(), message };
        let table = match &config.embeddings {
            Some(p) => Some(load_embeddings(p).map_err(|e| asset("embeddings", p, e.to_string()))?),
            None => None,
        };
        let mut models = BTreeMap::new();
        for (facet, path) in &config.models {
            let file = File::open(path).map_err(|e| asset("model", path, e.to_string()))?;
            let model = load_model(BufReader::new(file)).map_err(|e| asset("model", path, e.to_string()))?;
            if model.facet.facet != *facet {
                return Err(asset("model", path, format!("model is for facet {}, not {facet}", model.facet.facet)));
            }
            models.insert(*facet, model);
        }
        let embedding = match &config.concept_embedding {
            Some(p) => Some(load_embedding(p).map_err(|e| asset("concept embedding", p, e.to_string()))?),
            None => None,
        };
        Ok(Self { table, models, embedding })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageProbs {
    pub url: String,
    pub probs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub domain: String,
    pub facet: Facet,
    pub probs: BTreeMap<String, f64>,
    pub per_page: Vec<PageProbs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadQuery {
    pub industries: BTreeSet<String>,
    pub roles: BTreeSet<String>,
    pub min_prob: f64,
    pub limit: usize,
}

impl Default for LeadQuery {
    fn default() -> Self {
        Self { industries: BTreeSet::new(), roles: BTreeSet::new(), min_prob: 0.0, limit: 50 }
    }
}

impl LeadQuery {
    fn requested(&self) -> impl Iterator<Item = (Facet, &String)> {
        self.industries.iter().map(|l| (Facet::Industry, l)).chain(self.roles.iter().map(|l| (Facet::Role, l)))
    }

    fn validate(&self) -> ApiResult<()> {
        if self.industries.is_empty() && self.roles.is_empty() {
            return Err(ApiError::bad_request("empty query"));
        }
        if !(0.0..=1.0).contains(&self.min_prob) {
            return Err(ApiError::bad_request("min_prob must lie in [0, 1]"));
        }
        if self.limit == 0 {
            return Err(ApiError::bad_request("limit must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lead {
    pub domain: String,
    pub score: f64,
    /// Requested label probabilities, per facet.
    pub probs: BTreeMap<Facet, BTreeMap<String, f64>>,
}

/// Cached probabilities of one company, per facet.
pub type CachedProbs = BTreeMap<Facet, BTreeMap<String, f64>>;

/// Companies meeting `min_prob` on every requested label, ranked by the
/// product of those probabilities, then by domain.
pub fn rank_leads<'a>(companies: impl IntoIterator<Item = (&'a str, &'a CachedProbs)>, query: &LeadQuery) -> Vec<Lead> {
    let mut leads: Vec<Lead> = companies
        .into_iter()
        .filter_map(|(domain, cached)| {
            let mut score = 1.0;
            let mut probs: BTreeMap<Facet, BTreeMap<String, f64>> = BTreeMap::new();
            for (facet, label) in query.requested() {
                let p = *cached.get(&facet)?.get(label)?;
                if p < query.min_prob {
                    return None;
                }
                score *= p;
                probs.entry(facet).or_default().insert(label.clone(), p);
            }
            Some(Lead { domain: domain.to_string(), score, probs })
        })
        .collect();
    leads.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.domain.cmp(&b.domain)));
    leads.truncate(query.limit);
    leads
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptGraphView {
    pub theta: f64,
    pub nodes: Vec<String>,
    pub edges: Vec<ConceptEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptNeighbors {
    pub id: String,
    pub neighbors: Vec<Neighbor>,
    /// Companies whose cached industry probability for this concept is at
    /// least one half.
    pub companies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSummary {
    pub url: String,
    pub chunks: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyDetail {
    pub domain: String,
    pub version: u64,
    pub fetched_at: Option<i64>,
    pub pages: Vec<PageSummary>,
    pub probs: CachedProbs,
}

/// A label cluster with its review state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    #[serde(flatten)]
    pub cluster: LabelCluster,
    pub merge_into: Option<String>,
    pub decided_by: Option<String>,
    pub decided_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub status: ClusterStatus,
    #[serde(default)]
    pub merge_into: Option<String>,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub cluster: String,
    pub status: ClusterStatus,
    pub merge_into: Option<String>,
    pub actor: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

struct ClusterBook {
    clusters: BTreeMap<String, ClusterRecord>,
    log: Option<PathBuf>,
}

impl ClusterBook {
    fn check(&self, id: &str, decision: &Decision) -> ApiResult<()> {
        let record = self.clusters.get(id).ok_or_else(|| ApiError::not_found(format!("unknown cluster {id}")))?;
        match (decision.status, decision.merge_into.as_deref()) {
            (ClusterStatus::Proposed, _) => return Err(ApiError::bad_request("decision must be approved, rejected or merged")),
            (ClusterStatus::Merged, None) => return Err(ApiError::bad_request("merged requires merge_into")),
            (ClusterStatus::Merged, Some(target)) if target == id => {
                return Err(ApiError::bad_request("a cluster cannot be merged into itself"))
            }
            (ClusterStatus::Merged, Some(target)) if !self.clusters.contains_key(target) => {
                return Err(ApiError::not_found(format!("unknown merge target {target}")))
            }
            (_, Some(_)) if decision.status != ClusterStatus::Merged => {
                return Err(ApiError::bad_request("merge_into is only valid with merged"))
            }
            _ => {}
        }
        if record.cluster.status.transition(decision.status).is_none() {
            return Err(ApiError::conflict(format!("cluster {id} already decided")));
        }
        Ok(())
    }

    fn apply(&mut self, record: &DecisionRecord) {
        let entry = self.clusters.get_mut(&record.cluster).expect("checked cluster");
        entry.cluster.status = record.status;
        entry.merge_into = record.merge_into.clone();
        entry.decided_by = Some(record.actor.clone());
        entry.decided_at = Some(record.timestamp);
    }

    fn replay(&mut self, path: &Path) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Asset { what: "decision log", path: path.into(), message };
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(bad(e.to_string())),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DecisionRecord =
                serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
            let decision = Decision { status: record.status, merge_into: record.merge_into.clone() };
            match self.check(&record.cluster, &decision) {
                Ok(()) => self.apply(&record),
                Err(e) => log::warn!("decision log line {}: {e}", i + 1),
            }
        }
        Ok(())
    }
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn company_ref(domain: &str) -> NodeRef {
    NodeRef::new(NodeKind::Company, domain)
}

fn probs_key(facet: Facet) -> String {
    format!("probs:{facet}")
}

fn encode_page(page: &CleanPage) -> String {
    page.chunks.iter().map(|c| format!("{}\t{}", c.source_block, c.tokens.join(" "))).collect::<Vec<_>>().join("\n")
}

fn decode_page(url: &str, text: &str) -> CleanPage {
    let chunks = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let (block, tokens) = line.split_once('\t').unwrap_or(("", line));
            TextChunk {
                tokens: tokens.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
                source_block: block.to_string(),
                index_in_page: i,
            }
        })
        .collect();
    CleanPage::new(url, chunks)
}

fn corpus_error(e: CorpusError) -> ApiError {
    match e {
        CorpusError::Malformed { line, message } => {
            ApiError::bad_request(format!("malformed record on line {line}: {message}")).at_line(line)
        }
        other => ApiError::bad_request(other.to_string()),
    }
}

pub struct Service {
    config: Config,
    assets: Assets,
    kg: KnowledgeGraph,
    /// Tokens kept at ingestion; `None` keeps everything.
    ingest_vocab: Option<BTreeSet<String>>,
    clusters: Mutex<ClusterBook>,
}

impl Service {
    pub fn from_config(config: Config) -> Result<Self, ConfigError> {
        let assets = Assets::load(&config)?;
        Self::new(config, assets)
    }

    pub fn new(config: Config, assets: Assets) -> Result<Self, ConfigError> {
        let kg = match &config.event_log {
            Some(path) => KnowledgeGraph::open(path)
                .map_err(|e| ConfigError::Asset { what: "event log", path: path.clone(), message: e.to_string() })?,
            None => KnowledgeGraph::new(),
        };
        let vocabularies: Vec<_> = assets.models.values().filter_map(|m| m.vocabulary.as_ref()).collect();
        let ingest_vocab = if !vocabularies.is_empty() {
            Some(vocabularies.iter().flat_map(|v| v.tokens()).map(str::to_string).collect())
        } else {
            assets.table.as_ref().map(|t| t.tokens().map(str::to_string).collect())
        };

        let mut book = ClusterBook { clusters: BTreeMap::new(), log: config.decision_log.clone() };
        if let Some(emb) = &assets.embedding {
            let edges = cosine_graph(emb, config.concepts.theta);
            let report = kg.consume_stream(concept_events(emb, &edges, 1), 1);
            if !report.rejected.is_empty() {
                log::warn!("{} concept events rejected", report.rejected.len());
            }
            let rows: Vec<Vec<f64>> = (0..emb.ids.len()).map(|i| emb.row(i)).collect();
            for cluster in cluster_labels(&emb.ids, &rows, config.concepts.theta_c) {
                let record = ClusterRecord { cluster, merge_into: None, decided_by: None, decided_at: None };
                book.clusters.insert(record.cluster.id.clone(), record);
            }
        }
        if let Some(path) = config.decision_log.clone() {
            book.replay(&path)?;
        }
        Ok(Self { config, assets, kg, ingest_vocab, clusters: Mutex::new(book) })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn knowledge_graph(&self) -> &KnowledgeGraph {
        &self.kg
    }

    fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            max_chunk_tokens: self.config.ingest.max_chunk_tokens,
            min_page_tokens: self.config.ingest.min_page_tokens,
            keywords: self.config.ingest.keywords.clone(),
            ..Default::default()
        }
    }

    /// Ingests a page corpus given as JSONL text.
    pub fn ingest_jsonl(&self, body: &str) -> ApiResult<IngestReport> {
        let pages = read_pages_jsonl(body.as_bytes()).map_err(corpus_error)?;
        self.ingest_pages(&pages)
    }

    pub fn ingest_path(&self, path: &Path) -> ApiResult<IngestReport> {
        let file = File::open(path).map_err(|e| ApiError::bad_request(format!("cannot open {}: {e}", path.display())))?;
        let pages = read_pages_jsonl(BufReader::new(file)).map_err(corpus_error)?;
        self.ingest_pages(&pages)
    }

    /// Chunks and cleans the pages, then upserts one company node per
    /// domain. The event sequence is the latest fetch time of the domain.
    pub fn ingest_pages(&self, pages: &[RawPage]) -> ApiResult<IngestReport> {
        let config = self.corpus_config();
        let (chunked, _) = chunk_domains(pages, &config);
        let mut latest: BTreeMap<&str, i64> = BTreeMap::new();
        for p in pages {
            let slot = latest.entry(p.domain.as_str()).or_insert(p.fetched_at);
            *slot = (*slot).max(p.fetched_at);
        }
        let events: Vec<UpsertEvent> = chunked
            .into_iter()
            .map(|(domain, pages)| {
                let pages = match &self.ingest_vocab {
                    Some(vocab) => clean_pages(&pages, vocab, config.min_page_tokens),
                    None => pages,
                };
                let sequence = latest[domain.as_str()];
                let mut event = UpsertEvent::new(NodeKind::Company, domain.clone(), sequence)
                    .attr("pages", pages.len() as i64)
                    .attr("fetched_at", sequence);
                for page in &pages {
                    event = event.attr(&format!("{PAGE_PREFIX}{}", page.url), encode_page(page));
                }
                event
            })
            .collect();
        let report = self.kg.consume_stream(events, self.config.ingest.workers);
        if report.rejected.is_empty() {
            return Ok(report);
        }
        let stale = report.rejected.iter().any(|r| r.reason.starts_with("stale event"));
        let first = &report.rejected[0];
        let mut err = if stale {
            ApiError::conflict(format!("stale sequence for {}: {}", first.key, first.reason))
        } else {
            ApiError::bad_request(format!("{}: {}", first.key, first.reason))
        };
        err.report = Some(report);
        Err(err)
    }

    fn find_company(&self, domain: &str) -> ApiResult<(NodeRef, facetseg::kg::EntityNode)> {
        let key = normalize_domain(domain).unwrap_or_else(|_| domain.to_string());
        let node_ref = company_ref(&key);
        let node = self.kg.get(&node_ref).ok_or_else(|| ApiError::not_found(format!("unknown domain {domain}")))?;
        Ok((node_ref, node))
    }

    fn pages_of(node: &facetseg::kg::EntityNode) -> Vec<CleanPage> {
        node.attributes
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix(PAGE_PREFIX)?, v.as_str()?)))
            .map(|(url, text)| decode_page(url, text))
            .collect()
    }

    fn parse_facet(facet: &str) -> ApiResult<Facet> {
        facet.parse().map_err(|_| ApiError::bad_request(format!("unknown facet {facet:?}")))
    }

    /// Predicts the facet's labels for an ingested domain and caches the
    /// probabilities on its company node.
    pub fn classify(&self, domain: &str, facet: &str) -> ApiResult<Classification> {
        let facet = Self::parse_facet(facet)?;
        let (node_ref, node) = self.find_company(domain)?;
        let model = self.assets.models.get(&facet).ok_or_else(|| ApiError::conflict(format!("no {facet} model loaded")))?;
        let table = self.assets.table.as_ref().ok_or_else(|| ApiError::conflict("embeddings not loaded"))?;
        let mut pages = clean_pages(&Self::pages_of(&node), table, 1);
        if let Some(vocab) = &model.vocabulary {
            pages = clean_pages(&pages, vocab, self.config.ingest.min_page_tokens);
        }
        if pages.is_empty() {
            return Err(ApiError::new(422, format!("{} has no usable pages", node.id)));
        }
        let site = SiteDocument { domain: node.id.clone(), pages, labels: BTreeMap::new(), label_source: LabelSource::Internal };
        let pred = model.predict_site(&site, table).map_err(|e| ApiError::internal(e.to_string()))?;
        let named = |probs: &[f64]| -> BTreeMap<String, f64> {
            model.facet.labels.iter().cloned().zip(probs.iter().copied()).collect()
        };
        let out = Classification {
            domain: node.id.clone(),
            facet,
            probs: named(&pred.probs),
            per_page: pred.per_page.iter().map(|p| PageProbs { url: p.url.clone(), probs: named(&p.probs) }).collect(),
        };
        let cached = serde_json::to_value(&out.probs).expect("probabilities serialize");
        self.kg.set_annotation(&node_ref, &probs_key(facet), cached).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(out)
    }

    /// Classifies every ingested company, skipping those without usable
    /// pages.
    pub fn classify_all(&self, facet: &str) -> ApiResult<Vec<Classification>> {
        let mut out = Vec::new();
        for node in self.kg.nodes(NodeKind::Company) {
            match self.classify(&node.id, facet) {
                Ok(c) => out.push(c),
                Err(e) if e.status == 422 => log::warn!("{e}"),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    fn cached_probs(&self, node_ref: &NodeRef) -> CachedProbs {
        Facet::ALL
            .into_iter()
            .filter_map(|f| {
                let v = self.kg.annotation(node_ref, &probs_key(f))?;
                Some((f, serde_json::from_value(v).ok()?))
            })
            .collect()
    }

    pub fn leads(&self, query: &LeadQuery) -> ApiResult<Vec<Lead>> {
        query.validate()?;
        for (facet, label) in query.requested() {
            let model = self
                .assets
                .models
                .get(&facet)
                .ok_or_else(|| ApiError::conflict(format!("no {facet} model loaded")))?;
            if model.facet.index_of(label).is_none() {
                return Err(ApiError::bad_request(format!("unknown {facet} label {label:?}")));
            }
        }
        let companies: Vec<(String, CachedProbs)> = self
            .kg
            .nodes(NodeKind::Company)
            .into_iter()
            .map(|n| {
                let probs = self.cached_probs(&company_ref(&n.id));
                (n.id, probs)
            })
            .collect();
        Ok(rank_leads(companies.iter().map(|(d, p)| (d.as_str(), p)), query))
    }

    pub fn company(&self, domain: &str) -> ApiResult<CompanyDetail> {
        let (node_ref, node) = self.find_company(domain)?;
        let pages = Self::pages_of(&node)
            .into_iter()
            .map(|p| PageSummary { chunks: p.chunks.len(), tokens: p.clean_token_count, url: p.url })
            .collect();
        let fetched_at = match node.attributes.get("fetched_at") {
            Some(Scalar::Int(t)) => Some(*t),
            _ => None,
        };
        Ok(CompanyDetail { domain: node.id.clone(), version: node.version, fetched_at, pages, probs: self.cached_probs(&node_ref) })
    }

    fn embedding(&self) -> ApiResult<&ConceptEmbedding> {
        self.assets.embedding.as_ref().ok_or_else(|| ApiError::conflict("embedding not built"))
    }

    pub fn concept_graph(&self, theta: f64) -> ApiResult<ConceptGraphView> {
        let emb = self.embedding()?;
        if !(-1.0..=1.0).contains(&theta) {
            return Err(ApiError::bad_request("theta must lie in [-1, 1]"));
        }
        Ok(ConceptGraphView { theta, nodes: emb.ids.clone(), edges: cosine_graph(emb, theta) })
    }

    /// Related concepts from the knowledge graph, strongest first.
    pub fn concept_neighbors(&self, id: &str, min_weight: f64) -> ApiResult<ConceptNeighbors> {
        self.embedding()?;
        let node = NodeRef::new(NodeKind::Concept, id);
        let neighbors = self
            .kg
            .neighbors(&node, EdgeKind::RelatedTo, min_weight)
            .map_err(|_| ApiError::not_found(format!("unknown concept {id}")))?
            .into_iter()
            .map(|(n, weight)| Neighbor { id: n.id, weight })
            .collect();
        let companies = self
            .kg
            .nodes(NodeKind::Company)
            .into_iter()
            .filter(|n| {
                let probs = self.cached_probs(&company_ref(&n.id));
                probs.get(&Facet::Industry).and_then(|p| p.get(id)).is_some_and(|&p| p >= 0.5)
            })
            .map(|n| n.id)
            .collect();
        Ok(ConceptNeighbors { id: id.to_string(), neighbors, companies })
    }

    pub fn clusters(&self) -> Vec<ClusterRecord> {
        self.clusters.lock().expect("cluster lock poisoned").clusters.values().cloned().collect()
    }

    pub fn cluster(&self, id: &str) -> ApiResult<ClusterRecord> {
        let book = self.clusters.lock().expect("cluster lock poisoned");
        book.clusters.get(id).cloned().ok_or_else(|| ApiError::not_found(format!("unknown cluster {id}")))
    }

    /// Records a review decision. The log line is written and synced before
    /// the in-memory status changes.
    pub fn decide(&self, id: &str, decision: &Decision, actor: &str) -> ApiResult<ClusterRecord> {
        let mut book = self.clusters.lock().expect("cluster lock poisoned");
        book.check(id, decision)?;
        let record = DecisionRecord {
            cluster: id.to_string(),
            status: decision.status,
            merge_into: decision.merge_into.clone(),
            actor: actor.to_string(),
            timestamp: now_millis(),
        };
        if let Some(path) = &book.log {
            append_decision(path, &record).map_err(|e| ApiError::internal(format!("decision log: {e}")))?;
        }
        book.apply(&record);
        Ok(book.clusters[id].clone())
    }
}

fn append_decision(path: &Path, record: &DecisionRecord) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()
}

/// Reads a decision log, for inspection.
pub fn read_decisions(path: &Path) -> std::io::Result<Vec<DecisionRecord>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
    }
    Ok(out)
}

/// JSON value of a serializable response.
pub fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("response serializes")
}
