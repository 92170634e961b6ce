//! JSONL inputs and the binary site-corpus file.

use std::io::{BufRead, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Facet, InfoboxRecord, LabelSource, RawPage, Result, SiteCorpus};

const SITES_MAGIC: &[u8; 8] = b"FSEGSIT1";

/// One line of the page corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub domain: String,
    pub url: String,
    pub html: String,
    pub fetched_at: i64,
}

impl From<RawPage> for PageRecord {
    fn from(p: RawPage) -> Self {
        Self { domain: p.domain, url: p.url, html: p.html, fetched_at: p.fetched_at }
    }
}

/// One line of the label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub domain: String,
    pub facet: Facet,
    pub labels: Vec<String>,
    pub source: LabelSource,
}

fn read_numbered<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    Ok(read_numbered(reader)?.into_iter().map(|(_, v)| v).collect())
}

/// Reads page records, re-deriving each domain from its URL.
pub fn read_pages_jsonl(reader: impl BufRead) -> Result<Vec<RawPage>> {
    let records: Vec<(usize, PageRecord)> = read_numbered(reader)?;
    let mut pages = Vec::with_capacity(records.len());
    for (line, r) in records {
        let domain = super::normalize_domain(if r.url.is_empty() { &r.domain } else { &r.url })
            .map_err(|e| CorpusError::Malformed { line, message: e.to_string() })?;
        if r.html.trim().is_empty() {
            return Err(CorpusError::Malformed { line, message: "empty html".into() });
        }
        pages.push(RawPage { url: r.url, domain, html: r.html, fetched_at: r.fetched_at });
    }
    Ok(pages)
}

pub fn read_labels_jsonl(reader: impl BufRead) -> Result<Vec<LabelRecord>> {
    read_jsonl(reader)
}

pub fn read_infobox_jsonl(reader: impl BufRead) -> Result<Vec<InfoboxRecord>> {
    read_jsonl(reader)
}

pub fn save_sites(corpus: &SiteCorpus, mut writer: impl Write) -> Result<()> {
    writer.write_all(SITES_MAGIC)?;
    bincode::serialize_into(&mut writer, corpus)?;
    writer.flush()?;
    Ok(())
}

pub fn load_sites(mut reader: impl Read) -> Result<SiteCorpus> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != SITES_MAGIC {
        return Err(CorpusError::BadMagic);
    }
    Ok(bincode::deserialize_from(reader)?)
}
