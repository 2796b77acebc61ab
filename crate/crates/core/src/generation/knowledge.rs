//! Clinical knowledge base: paragraph chunking and lexical BM25 retrieval.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_CHUNK_TOKENS: usize = 512;
pub const DEFAULT_CHUNK_OVERLAP: usize = 64;
pub const DEFAULT_TOP_K: usize = 4;
const BM25_K1: f64 = 1.2;
const BM25_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge corpus is empty")]
    EmptyCorpus,
    #[error("cannot read knowledge file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("retrieval requested but no knowledge index was built")]
    IndexNotBuilt,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("knowledge manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KbSource {
    #[serde(rename = "DSM-V")]
    Dsm,
    #[serde(rename = "ICD-10")]
    Icd,
}

impl KbSource {
    pub fn label(self) -> &'static str {
        match self {
            Self::Dsm => "DSM-V",
            Self::Icd => "ICD-10",
        }
    }
}

impl fmt::Display for KbSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which manuals ground generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KbMode {
    #[serde(rename = "none")]
    NoKb,
    #[serde(rename = "dsm")]
    DsmOnly,
    #[serde(rename = "icd")]
    IcdOnly,
    #[serde(rename = "dual")]
    DualKb,
}

impl KbMode {
    pub const ALL: [KbMode; 4] = [Self::NoKb, Self::DsmOnly, Self::IcdOnly, Self::DualKb];

    pub fn name(self) -> &'static str {
        match self {
            Self::NoKb => "none",
            Self::DsmOnly => "dsm",
            Self::IcdOnly => "icd",
            Self::DualKb => "dual",
        }
    }

    fn admits(self, source: KbSource) -> bool {
        match self {
            Self::NoKb => false,
            Self::DsmOnly => source == KbSource::Dsm,
            Self::IcdOnly => source == KbSource::Icd,
            Self::DualKb => true,
        }
    }
}

impl fmt::Display for KbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KbMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "no-kb" | "nokb" => Ok(Self::NoKb),
            "dsm" | "dsm-v" | "dsm5" => Ok(Self::DsmOnly),
            "icd" | "icd-10" | "icd10" => Ok(Self::IcdOnly),
            "dual" | "dual-kb" | "both" => Ok(Self::DualKb),
            other => Err(format!("unknown kb mode `{other}` (expected none, dsm, icd or dual)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeSnippet {
    pub source: KbSource,
    pub disorder_tag: String,
    pub text: String,
    pub score: f64,
    pub chunk_index: usize,
}

impl KnowledgeSnippet {
    /// Stable identifier used in run logs.
    pub fn id(&self) -> String {
        format!("{}#{}", self.source, self.chunk_index)
    }
}

/// One knowledge file and its labels, as listed in a knowledge manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeFile {
    pub path: PathBuf,
    pub source: KbSource,
    #[serde(default)]
    pub disorder_tags: Vec<String>,
}

/// Reads a knowledge manifest (JSON array of files); relative paths resolve
/// against the manifest's directory.
pub fn load_kb_manifest(path: impl AsRef<Path>) -> Result<Vec<KnowledgeFile>, KbError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| KbError::Manifest(format!("{}: {e}", path.display())))?;
    let mut files: Vec<KnowledgeFile> = serde_json::from_str(&text).map_err(|e| KbError::Manifest(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for f in &mut files {
        if f.path.is_relative() {
            f.path = base.join(&f.path);
        }
    }
    Ok(files)
}

/// Splits text at blank lines, then windows any paragraph longer than
/// `max_tokens` whitespace tokens with `overlap` shared tokens between
/// consecutive windows.
pub fn chunk_text(text: &str, max_tokens: usize, overlap: usize) -> Vec<String> {
    assert!(max_tokens > overlap, "chunk size must exceed overlap");
    let mut chunks = Vec::new();
    let mut paragraph: Vec<&str> = Vec::new();
    let mut flush = |paragraph: &mut Vec<&str>| {
        if paragraph.is_empty() {
            return;
        }
        let joined = paragraph.join("\n");
        let tokens: Vec<&str> = joined.split_whitespace().collect();
        if tokens.len() <= max_tokens {
            chunks.push(joined.trim().to_string());
        } else {
            let stride = max_tokens - overlap;
            let mut start = 0;
            loop {
                let end = (start + max_tokens).min(tokens.len());
                chunks.push(tokens[start..end].join(" "));
                if end == tokens.len() {
                    break;
                }
                start += stride;
            }
        }
        paragraph.clear();
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut paragraph);
        } else {
            paragraph.push(line);
        }
    }
    flush(&mut paragraph);
    chunks
}

fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug)]
struct Chunk {
    source: KbSource,
    disorder_tag: String,
    text: String,
    term_freqs: HashMap<String, usize>,
    length: usize,
}

/// BM25 index over knowledge chunks.
#[derive(Debug)]
pub struct KnowledgeIndex {
    chunks: Vec<Chunk>,
    doc_freq: HashMap<String, usize>,
    avg_len: f64,
    retrieve_calls: AtomicUsize,
}

impl KnowledgeIndex {
    /// Builds an index from in-memory documents `(source, disorder tag, text)`.
    pub fn from_documents<'a>(
        docs: impl IntoIterator<Item = (KbSource, &'a str, &'a str)>,
        max_tokens: usize,
        overlap: usize,
    ) -> Result<Self, KbError> {
        let mut chunks = Vec::new();
        for (source, tag, text) in docs {
            for chunk in chunk_text(text, max_tokens, overlap) {
                let tokens = terms(&chunk);
                let mut term_freqs = HashMap::new();
                for t in &tokens {
                    *term_freqs.entry(t.clone()).or_insert(0) += 1;
                }
                chunks.push(Chunk {
                    source,
                    disorder_tag: tag.to_string(),
                    text: chunk,
                    term_freqs,
                    length: tokens.len(),
                });
            }
        }
        if chunks.is_empty() {
            return Err(KbError::EmptyCorpus);
        }
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for c in &chunks {
            for t in c.term_freqs.keys() {
                *doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let avg_len = chunks.iter().map(|c| c.length).sum::<usize>() as f64 / chunks.len() as f64;
        Ok(Self {
            chunks,
            doc_freq,
            avg_len: avg_len.max(1.0),
            retrieve_calls: AtomicUsize::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunk_text(&self, index: usize) -> &str {
        &self.chunks[index].text
    }

    /// Number of `retrieve` calls served so far.
    pub fn retrieve_calls(&self) -> usize {
        self.retrieve_calls.load(Ordering::Relaxed)
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.chunks.len() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of chunk `index` for a query.
    pub fn score(&self, query: &str, index: usize) -> f64 {
        let mut q = terms(query);
        q.sort();
        q.dedup();
        let chunk = &self.chunks[index];
        let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * chunk.length as f64 / self.avg_len);
        q.iter()
            .map(|t| {
                let tf = chunk.term_freqs.get(t).copied().unwrap_or(0) as f64;
                if tf == 0.0 {
                    0.0
                } else {
                    self.idf(t) * tf * (BM25_K1 + 1.0) / (tf + norm)
                }
            })
            .sum()
    }

    /// Top-`k` chunks with positive score among the sources `mode` admits,
    /// by descending score, ties by (source, chunk index).
    pub fn retrieve(&self, query: &str, k: usize, mode: KbMode) -> Result<Vec<KnowledgeSnippet>, KbError> {
        if k == 0 {
            return Err(KbError::InvalidK);
        }
        self.retrieve_calls.fetch_add(1, Ordering::Relaxed);
        if mode == KbMode::NoKb {
            return Ok(Vec::new());
        }
        let mut scored: Vec<(f64, KbSource, usize)> = self
            .chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| mode.admits(c.source))
            .map(|(i, c)| (self.score(query, i), c.source, i))
            .filter(|(s, _, _)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(score, source, i)| KnowledgeSnippet {
                source,
                disorder_tag: self.chunks[i].disorder_tag.clone(),
                text: self.chunks[i].text.clone(),
                score,
                chunk_index: i,
            })
            .collect())
    }
}

/// Reads and indexes knowledge files with the default chunking parameters.
pub fn build_kb(files: &[KnowledgeFile]) -> Result<KnowledgeIndex, KbError> {
    if files.is_empty() {
        return Err(KbError::EmptyCorpus);
    }
    let mut loaded = Vec::with_capacity(files.len());
    for f in files {
        let text = fs::read_to_string(&f.path).map_err(|e| KbError::UnreadableFile {
            path: f.path.clone(),
            reason: e.to_string(),
        })?;
        let tag = f.disorder_tags.first().cloned().unwrap_or_default();
        loaded.push((f.source, tag, text));
    }
    KnowledgeIndex::from_documents(
        loaded.iter().map(|(s, t, x)| (*s, t.as_str(), x.as_str())),
        DEFAULT_MAX_CHUNK_TOKENS,
        DEFAULT_CHUNK_OVERLAP,
    )
}

/// Retrieval entry point used by the generator.
pub fn retrieve(
    index: Option<&KnowledgeIndex>,
    query: &str,
    k: usize,
    mode: KbMode,
) -> Result<Vec<KnowledgeSnippet>, KbError> {
    if mode == KbMode::NoKb {
        return Ok(Vec::new());
    }
    index.ok_or(KbError::IndexNotBuilt)?.retrieve(query, k, mode)
}
