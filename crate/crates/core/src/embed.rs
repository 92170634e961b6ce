//! Pre-trained word vectors and chunk encoding.
//!
//! Vectors are read from the plain text format used by GloVe dumps: one token
//! followed by `d` space-separated decimals per line.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::{TextChunk, TokenLookup};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("dimension mismatch line {line}: expected {expected}, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("invalid number on line {line}: {value:?}")]
    InvalidNumber { line: usize, value: String },
    #[error("no vectors in embedding file")]
    Empty,
    #[error("empty chunk")]
    EmptyChunk,
    #[error("token {0:?} has no vector")]
    UnknownToken(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable token → vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
    duplicate_lines: usize,
}

/// How a chunk is turned into numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMode {
    Sequence,
    Mean,
}

/// Per-token vectors of one chunk, in chunk order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodedChunk {
    Sequence(ChunkMatrix),
    Mean(Vec<f64>),
}

impl EmbeddingTable {
    /// Builds a table from in-memory pairs; the first vector for a token wins.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::empty();
        for (line, (token, vector)) in pairs.into_iter().enumerate() {
            table.insert(line + 1, token.into(), vector)?;
        }
        if table.tokens.is_empty() {
            return Err(EmbedError::Empty);
        }
        Ok(table)
    }

    fn empty() -> Self {
        Self { dim: 0, tokens: Vec::new(), data: Vec::new(), index: HashMap::new(), duplicate_lines: 0 }
    }

    fn insert(&mut self, line: usize, token: String, vector: Vec<f64>) -> Result<(), EmbedError> {
        if self.tokens.is_empty() {
            self.dim = vector.len();
        }
        if vector.len() != self.dim || vector.is_empty() {
            return Err(EmbedError::DimensionMismatch { line, expected: self.dim, found: vector.len() });
        }
        if self.index.contains_key(&token) {
            self.duplicate_lines += 1;
            return Ok(());
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend(vector);
        Ok(())
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, EmbedError> {
        let mut table = Self::empty();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let vector = parts
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| EmbedError::InvalidNumber { line: i + 1, value: v.to_string() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.insert(i + 1, token.to_string(), vector)?;
        }
        if table.tokens.is_empty() {
            return Err(EmbedError::Empty);
        }
        if table.duplicate_lines > 0 {
            log::warn!("{} duplicate embedding lines ignored", table.duplicate_lines);
        }
        Ok(table)
    }

    pub fn write_to(&self, mut writer: impl Write) -> std::io::Result<()> {
        for (i, token) in self.tokens.iter().enumerate() {
            write!(writer, "{token}")?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(writer, " {v}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lines skipped because their token was already present.
    pub fn duplicate_lines(&self) -> usize {
        self.duplicate_lines
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    fn rows(&self, chunk: &TextChunk) -> Result<Vec<&[f64]>, EmbedError> {
        if chunk.tokens.is_empty() {
            return Err(EmbedError::EmptyChunk);
        }
        chunk
            .tokens
            .iter()
            .map(|t| self.get(t).ok_or_else(|| EmbedError::UnknownToken(t.clone())))
            .collect()
    }

    /// Arithmetic mean of the chunk's token vectors.
    pub fn encode_mean(&self, chunk: &TextChunk) -> Result<Vec<f64>, EmbedError> {
        let rows = self.rows(chunk)?;
        let mut mean = vec![0.0; self.dim];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        let n = rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }

    pub fn encode_sequence(&self, chunk: &TextChunk) -> Result<ChunkMatrix, EmbedError> {
        let rows = self.rows(chunk)?.into_iter().map(<[f64]>::to_vec).collect();
        Ok(ChunkMatrix { dim: self.dim, rows })
    }

    pub fn encode_chunk(&self, chunk: &TextChunk, mode: EncodeMode) -> Result<EncodedChunk, EmbedError> {
        Ok(match mode {
            EncodeMode::Sequence => EncodedChunk::Sequence(self.encode_sequence(chunk)?),
            EncodeMode::Mean => EncodedChunk::Mean(self.encode_mean(chunk)?),
        })
    }
}

impl TokenLookup for EmbeddingTable {
    fn contains_token(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbedError> {
    let file = std::fs::File::open(path)?;
    EmbeddingTable::from_reader(BufReader::new(file))
}
