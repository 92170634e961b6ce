//! Page ingestion: URL selection, block chunking, vocabulary and cleaning.
//!
//! Raw pages become [`SiteDocument`]s in a few pure steps:
//!
//! 1. [`select_urls`] keeps the home page and pages whose path names an
//!    informative section (`about_us`, `products`, ...).
//! 2. [`extract_chunks`] walks the HTML block structure and emits bounded
//!    token chunks.
//! 3. [`build_vocabulary`] keeps tokens that are frequent enough and known to
//!    the word-vector table.
//! 4. [`clean_pages`] drops out-of-vocabulary tokens and short pages.
//!
//! [`build_sites`] runs the whole chain over a page and label dump.

mod domain;
pub mod fetch;
mod html;
mod infobox;
mod io;
mod pipeline;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use domain::{normalize_domain, select_urls, DEFAULT_KEYWORDS};
pub use html::{extract_chunks, tokenize, PageChunks};
pub use infobox::{filter_relevant_infobox, InfoboxFilterReport, InfoboxRecord};
pub use io::{
    load_sites, read_infobox_jsonl, read_labels_jsonl, read_pages_jsonl, save_sites,
    LabelRecord, PageRecord,
};
pub use pipeline::{build_sites, chunk_domains, BuildReport, CorpusConfig};
pub use vocab::{build_vocabulary, clean_pages, TokenLookup, Vocabulary};

/// Default maximum chunk length in tokens.
pub const DEFAULT_MAX_CHUNK_TOKENS: usize = 128;
/// Tokens seen fewer times than this are dropped from the vocabulary.
pub const DEFAULT_MIN_TOKEN_FREQ: u64 = 10;
/// Pages with fewer clean tokens than this are not used.
pub const DEFAULT_MIN_PAGE_TOKENS: usize = 20;
/// Default info-box employee threshold.
pub const DEFAULT_MIN_EMPLOYEES: u64 = 25;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("vocabulary empty")]
    EmptyVocabulary,
    #[error("no sites to build a vocabulary from")]
    NoSites,
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("empty html for {0}")]
    EmptyHtml(String),
    #[error("label {label:?} is not in the {facet} label space")]
    UnknownLabel { facet: Facet, label: String },
    #[error("domain {0} has labels from more than one source")]
    MixedLabelSources(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("not a site corpus file")]
    BadMagic,
    #[error("fetch failed for {url}: {message}")]
    Fetch { url: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Encode(#[from] bincode::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// One of the two orthogonal label views of a company.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    Industry,
    Role,
}

impl Facet {
    pub const ALL: [Facet; 2] = [Facet::Industry, Facet::Role];

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Industry => "industry",
            Facet::Role => "role",
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown facet {0:?}")]
pub struct UnknownFacet(pub String);

impl FromStr for Facet {
    type Err = UnknownFacet;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "industry" => Ok(Facet::Industry),
            "role" => Ok(Facet::Role),
            other => Err(UnknownFacet(other.to_string())),
        }
    }
}

/// Where a site's labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Internal,
    Wikipedia,
    Pseudo,
}

/// A fetched page before any processing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPage {
    pub url: String,
    pub domain: String,
    pub html: String,
    /// UTC seconds.
    pub fetched_at: i64,
}

impl RawPage {
    /// Builds a page, deriving the domain from the URL.
    pub fn new(url: impl Into<String>, html: impl Into<String>, fetched_at: i64) -> Result<Self> {
        let url = url.into();
        let html = html.into();
        if html.trim().is_empty() {
            return Err(CorpusError::EmptyHtml(url));
        }
        let domain = normalize_domain(&url)?;
        Ok(Self { url, domain, html, fetched_at })
    }
}

/// A bounded run of tokens taken from one HTML block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub tokens: Vec<String>,
    pub source_block: String,
    pub index_in_page: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanPage {
    pub url: String,
    pub chunks: Vec<TextChunk>,
    pub clean_token_count: usize,
}

impl CleanPage {
    pub fn new(url: impl Into<String>, chunks: Vec<TextChunk>) -> Self {
        let clean_token_count = chunks.iter().map(|c| c.tokens.len()).sum();
        Self { url: url.into(), chunks, clean_token_count }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.chunks.iter().flat_map(|c| c.tokens.iter().map(String::as_str))
    }
}

/// One company website with its per-facet labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteDocument {
    pub domain: String,
    pub pages: Vec<CleanPage>,
    pub labels: BTreeMap<Facet, BTreeSet<String>>,
    pub label_source: LabelSource,
}

impl SiteDocument {
    /// Labels for one facet, `None` when the site carries no labels for it.
    pub fn labels_for(&self, facet: Facet) -> Option<&BTreeSet<String>> {
        self.labels.get(&facet)
    }
}

/// A processed corpus: label spaces, vocabulary and sites.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteCorpus {
    pub label_spaces: BTreeMap<Facet, Vec<String>>,
    pub vocabulary: Vocabulary,
    pub sites: Vec<SiteDocument>,
}

impl SiteCorpus {
    pub fn label_space(&self, facet: Facet) -> &[String] {
        self.label_spaces.get(&facet).map(Vec::as_slice).unwrap_or(&[])
    }
}
