use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CleanPage, CorpusError, Result, SiteDocument, TextChunk};

/// Membership test against a pre-trained token inventory.
pub trait TokenLookup {
    fn contains_token(&self, token: &str) -> bool;
}

impl TokenLookup for HashSet<String> {
    fn contains_token(&self, token: &str) -> bool {
        self.contains(token)
    }
}

impl TokenLookup for std::collections::BTreeSet<String> {
    fn contains_token(&self, token: &str) -> bool {
        self.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct VocabEntry {
    token: String,
    freq: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    entries: Vec<VocabEntry>,
}

/// Token ids ordered by descending corpus frequency, then lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, u32>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(repr: VocabularyRepr) -> Self {
        let index = repr
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.token.clone(), i as u32))
            .collect();
        Self { entries: repr.entries, index }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self { entries: v.entries }
    }
}

impl Vocabulary {
    fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut entries: Vec<VocabEntry> =
            counts.into_iter().map(|(token, freq)| VocabEntry { token, freq }).collect();
        entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.token.cmp(&b.token)));
        VocabularyRepr { entries }.into()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn frequency(&self, token: &str) -> Option<u64> {
        self.id(token).map(|i| self.entries[i as usize].freq)
    }

    /// Tokens in id order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }
}

impl TokenLookup for Vocabulary {
    fn contains_token(&self, token: &str) -> bool {
        self.contains(token)
    }
}

/// Keeps tokens with corpus frequency `>= min_freq` that the embedding table
/// knows.
pub fn build_vocabulary(
    sites: &[SiteDocument],
    embedding_vocab: &dyn TokenLookup,
    min_freq: u64,
) -> Result<Vocabulary> {
    if sites.is_empty() {
        return Err(CorpusError::NoSites);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for token in sites.iter().flat_map(|s| s.pages.iter()).flat_map(CleanPage::tokens) {
        *counts.entry(token).or_default() += 1;
    }
    let vocab = Vocabulary::from_counts(
        counts
            .into_iter()
            .filter(|&(t, n)| n >= min_freq && embedding_vocab.contains_token(t))
            .map(|(t, n)| (t.to_string(), n)),
    );
    if vocab.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    Ok(vocab)
}

/// Removes out-of-vocabulary tokens, drops emptied chunks and pages left with
/// fewer than `min_page_tokens` tokens.
pub fn clean_pages(
    pages: &[CleanPage],
    vocab: &dyn TokenLookup,
    min_page_tokens: usize,
) -> Vec<CleanPage> {
    pages
        .iter()
        .filter_map(|page| {
            let chunks: Vec<TextChunk> = page
                .chunks
                .iter()
                .filter_map(|chunk| {
                    let tokens: Vec<String> = chunk
                        .tokens
                        .iter()
                        .filter(|t| vocab.contains_token(t))
                        .cloned()
                        .collect();
                    (!tokens.is_empty()).then(|| TextChunk { tokens, ..chunk.clone() })
                })
                .collect();
            let page = CleanPage::new(page.url.clone(), chunks);
            (page.clean_token_count >= min_page_tokens).then_some(page)
        })
        .collect()
}
