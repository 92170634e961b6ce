//! Service configuration, read from a TOML file.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! embeddings = "vectors.txt"
//! concept_embedding = "emb.bin"
//! event_log = "kg.log"
//! decision_log = "decisions.jsonl"
//!
//! [models]
//! industry = "industry.bin"
//! role = "role.bin"
//!
//! [concepts]
//! theta = 0.6
//! theta_c = 0.75
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use facetseg::corpus::{DEFAULT_KEYWORDS, DEFAULT_MAX_CHUNK_TOKENS, DEFAULT_MIN_PAGE_TOKENS};
use facetseg::Facet;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot load {what} from {path}: {message}")]
    Asset { what: &'static str, path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConceptSettings {
    /// Cosine threshold for concept edges written to the graph.
    pub theta: f64,
    /// Cosine threshold for proposing label clusters.
    pub theta_c: f64,
}

impl Default for ConceptSettings {
    fn default() -> Self {
        Self { theta: 0.6, theta_c: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    pub max_chunk_tokens: usize,
    pub min_page_tokens: usize,
    pub keywords: Vec<String>,
    pub workers: usize,
}

impl Default for IngestSettings {
    fn default() -> Self {
        Self {
            max_chunk_tokens: DEFAULT_MAX_CHUNK_TOKENS,
            min_page_tokens: DEFAULT_MIN_PAGE_TOKENS,
            keywords: DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect(),
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    /// Word vectors in text format; needed for classification.
    pub embeddings: Option<PathBuf>,
    pub models: BTreeMap<Facet, PathBuf>,
    pub concept_embedding: Option<PathBuf>,
    /// Write-ahead log of the knowledge graph. In-memory only when absent.
    pub event_log: Option<PathBuf>,
    /// Append-only cluster decision log.
    pub decision_log: Option<PathBuf>,
    /// When set, requests must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
    pub concepts: ConceptSettings,
    pub ingest: IngestSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            embeddings: None,
            models: BTreeMap::new(),
            concept_embedding: None,
            event_log: None,
            decision_log: None,
            token: None,
            concepts: ConceptSettings::default(),
            ingest: IngestSettings::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let theta_ok = |t: f64| (-1.0..=1.0).contains(&t);
        if !theta_ok(self.concepts.theta) || !theta_ok(self.concepts.theta_c) {
            return Err(ConfigError::Invalid("concept thresholds must lie in [-1, 1]".into()));
        }
        if self.ingest.max_chunk_tokens == 0 {
            return Err(ConfigError::Invalid("ingest.max_chunk_tokens must be positive".into()));
        }
        if self.token.as_deref() == Some("") {
            return Err(ConfigError::Invalid("token must not be empty".into()));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.embeddings.iter_mut().for_each(fix);
        self.concept_embedding.iter_mut().for_each(fix);
        self.event_log.iter_mut().for_each(fix);
        self.decision_log.iter_mut().for_each(fix);
        self.models.values_mut().for_each(fix);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_models() {
        let c = Config::parse("[models]\nrole = \"r.bin\"\n").unwrap();
        assert_eq!(c.listen, "127.0.0.1:8080");
        assert_eq!(c.models[&Facet::Role], PathBuf::from("r.bin"));
        assert_eq!(c.concepts.theta, 0.6);
    }

    #[test]
    fn rejects_unknown_keys_and_facets() {
        assert!(Config::parse("lisen = \"x\"").is_err());
        assert!(Config::parse("[models]\ncolor = \"c.bin\"").is_err());
        assert!(Config::parse("[concepts]\ntheta = 3.0").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svc.toml");
        std::fs::write(&path, "event_log = \"kg.log\"\ndecision_log = \"/abs/d.jsonl\"").unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.event_log.unwrap(), dir.path().join("kg.log"));
        assert_eq!(c.decision_log.unwrap(), PathBuf::from("/abs/d.jsonl"));
    }
}
