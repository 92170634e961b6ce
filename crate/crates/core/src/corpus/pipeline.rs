use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    build_vocabulary, clean_pages, extract_chunks, select_urls, CleanPage, CorpusError, Facet,
    LabelRecord, LabelSource, RawPage, Result, SiteCorpus, SiteDocument, TokenLookup,
    DEFAULT_KEYWORDS, DEFAULT_MAX_CHUNK_TOKENS, DEFAULT_MIN_PAGE_TOKENS, DEFAULT_MIN_TOKEN_FREQ,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub max_chunk_tokens: usize,
    pub min_token_freq: u64,
    pub min_page_tokens: usize,
    pub keywords: Vec<String>,
    /// Source given to sites that have no label records.
    pub default_source: LabelSource,
    /// Declared label spaces; derived from the label records when absent.
    pub label_spaces: Option<BTreeMap<Facet, Vec<String>>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            max_chunk_tokens: DEFAULT_MAX_CHUNK_TOKENS,
            min_token_freq: DEFAULT_MIN_TOKEN_FREQ,
            min_page_tokens: DEFAULT_MIN_PAGE_TOKENS,
            keywords: DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect(),
            default_source: LabelSource::Internal,
            label_spaces: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub domains: usize,
    pub pages_in: usize,
    pub pages_selected: usize,
    pub fallback_pages: usize,
    pub pages_kept: usize,
    pub sites_kept: usize,
    pub sites_without_pages: usize,
    pub vocabulary_size: usize,
}

/// Selected and chunked pages per domain, before vocabulary filtering.
///
/// When a URL appears more than once the latest fetch wins.
pub fn chunk_domains(
    pages: &[RawPage],
    config: &CorpusConfig,
) -> (BTreeMap<String, Vec<CleanPage>>, BuildReport) {
    let mut report = BuildReport { pages_in: pages.len(), ..Default::default() };
    let mut by_domain: BTreeMap<&str, BTreeMap<&str, &RawPage>> = BTreeMap::new();
    for page in pages {
        let slot = by_domain.entry(&page.domain).or_default().entry(&page.url).or_insert(page);
        if page.fetched_at > slot.fetched_at {
            *slot = page;
        }
    }
    report.domains = by_domain.len();
    let mut out = BTreeMap::new();
    for (domain, url_map) in by_domain {
        // keep first-seen order among the latest copies
        let mut ordered: Vec<&RawPage> = Vec::new();
        for page in pages.iter().filter(|p| p.domain == domain) {
            let latest = url_map[page.url.as_str()];
            if std::ptr::eq(latest, page) {
                ordered.push(page);
            }
        }
        let urls: Vec<&str> = ordered.iter().map(|p| p.url.as_str()).collect();
        let keywords: Vec<&str> = config.keywords.iter().map(String::as_str).collect();
        let selected: BTreeSet<String> = select_urls(&urls, &keywords).into_iter().collect();
        let mut chunked = Vec::new();
        for page in ordered.into_iter().filter(|p| selected.contains(&p.url)) {
            let extracted = extract_chunks(&page.html, config.max_chunk_tokens);
            report.pages_selected += 1;
            if extracted.fallback {
                report.fallback_pages += 1;
            }
            chunked.push(CleanPage::new(page.url.clone(), extracted.chunks));
        }
        out.insert(domain.to_string(), chunked);
    }
    (out, report)
}

type SiteLabels = BTreeMap<String, (BTreeMap<Facet, BTreeSet<String>>, LabelSource)>;

fn collect_labels(
    labels: &[LabelRecord],
    declared: Option<&BTreeMap<Facet, Vec<String>>>,
) -> Result<(BTreeMap<Facet, Vec<String>>, SiteLabels)> {
    let mut spaces: BTreeMap<Facet, BTreeSet<String>> = BTreeMap::new();
    let mut per_domain: SiteLabels = BTreeMap::new();
    for record in labels {
        let domain = super::normalize_domain(&record.domain)?;
        if let Some(declared) = declared {
            let space = declared.get(&record.facet).map(Vec::as_slice).unwrap_or(&[]);
            if let Some(bad) = record.labels.iter().find(|l| !space.contains(l)) {
                return Err(CorpusError::UnknownLabel { facet: record.facet, label: bad.clone() });
            }
        }
        spaces.entry(record.facet).or_default().extend(record.labels.iter().cloned());
        let entry = per_domain.entry(domain.clone()).or_insert_with(|| (BTreeMap::new(), record.source));
        if entry.1 != record.source {
            return Err(CorpusError::MixedLabelSources(domain));
        }
        entry.0.entry(record.facet).or_default().extend(record.labels.iter().cloned());
    }
    let spaces = match declared {
        Some(d) => d.clone(),
        None => spaces.into_iter().map(|(f, s)| (f, s.into_iter().collect())).collect(),
    };
    Ok((spaces, per_domain))
}

/// Runs selection, chunking, vocabulary building and cleaning over a page dump.
///
/// Sites left without any page after cleaning are dropped and counted in the
/// report.
pub fn build_sites(
    pages: &[RawPage],
    labels: &[LabelRecord],
    embedding_vocab: &dyn TokenLookup,
    config: &CorpusConfig,
) -> Result<(SiteCorpus, BuildReport)> {
    let (label_spaces, mut site_labels) = collect_labels(labels, config.label_spaces.as_ref())?;
    let (chunked, mut report) = chunk_domains(pages, config);
    let raw_sites: Vec<SiteDocument> = chunked
        .into_iter()
        .map(|(domain, pages)| {
            let (labels, label_source) =
                site_labels.remove(&domain).unwrap_or((BTreeMap::new(), config.default_source));
            SiteDocument { domain, pages, labels, label_source }
        })
        .collect();
    let vocabulary = build_vocabulary(&raw_sites, embedding_vocab, config.min_token_freq)?;
    let mut sites = Vec::with_capacity(raw_sites.len());
    for mut site in raw_sites {
        site.pages = clean_pages(&site.pages, &vocabulary, config.min_page_tokens);
        if site.pages.is_empty() {
            report.sites_without_pages += 1;
            continue;
        }
        report.pages_kept += site.pages.len();
        sites.push(site);
    }
    report.sites_kept = sites.len();
    report.vocabulary_size = vocabulary.len();
    Ok((SiteCorpus { label_spaces, vocabulary, sites }, report))
}
