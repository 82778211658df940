//! Corpus ingestion: normalization, word-level tokenization, vocabulary
//! construction and id encoding.
//!
//! Tokens are lowercased runs of alphanumeric characters. Apostrophes are
//! dropped inside words ("don't" -> "dont"); every other non-alphanumeric
//! character separates tokens.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const MASK: &str = "[MASK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const MASK_ID: u32 = 2;
pub const CLS_ID: u32 = 3;
pub const SEP_ID: u32 = 4;

pub const SPECIAL_TOKENS: [&str; 5] = [PAD, UNK, MASK, CLS, SEP];
pub const NUM_SPECIALS: usize = SPECIAL_TOKENS.len();

pub const DEFAULT_MIN_COUNT: u64 = 5;
pub const DEFAULT_MAX_SIZE: usize = 50_000;

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`')
}

pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in lowered.chars() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_apostrophe(c) {
            continue;
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document { id, text, tokens }
    }
}

/// Reads a corpus file: UTF-8, one document per line, blank lines skipped.
/// Document ids are assigned in order of the surviving lines.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let id = docs.len();
        docs.push(Document::new(id, line));
    }
    Ok(docs)
}

/// Token frequency counts. Shards built independently can be merged; merging
/// is a plain summation, so it is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounts {
    counts: HashMap<String, u64>,
    total: u64,
}

impl TokenCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tokens<S: AsRef<str>>(&mut self, tokens: &[S]) {
        for t in tokens {
            *self.counts.entry(t.as_ref().to_owned()).or_insert(0) += 1;
            self.total += 1;
        }
    }

    pub fn merge(&mut self, other: TokenCounts) {
        for (token, count) in other.counts {
            *self.counts.entry(token).or_insert(0) += count;
        }
        self.total += other.total;
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Token to id mapping. The five special tokens occupy ids 0..5; the rest are
/// ranked by count (descending) then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_counts(counts: &TokenCounts, min_count: u64, max_size: usize) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be >= 1".into()));
        }
        if max_size <= NUM_SPECIALS {
            return Err(Error::InvalidConfig(format!("max_size must be > {NUM_SPECIALS}")));
        }
        if counts.total() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(&String, u64)> = counts
            .counts
            .iter()
            .filter(|(t, &c)| c >= min_count && !SPECIAL_TOKENS.contains(&t.as_str()))
            .map(|(t, &c)| (t, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        kept.truncate(max_size - NUM_SPECIALS);

        let mut entries: Vec<(String, u64)> = SPECIAL_TOKENS.iter().map(|s| (s.to_string(), 0)).collect();
        entries.extend(kept.into_iter().map(|(t, c)| (t.clone(), c)));
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut tokens = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (id, (token, count)) in entries.into_iter().enumerate() {
            if index.insert(token.clone(), id as u32).is_some() {
                return Err(Error::Invalid(format!("duplicate vocabulary token {token:?}")));
            }
            tokens.push(token);
            counts.push(count);
        }
        for (id, special) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(id).map(String::as_str) != Some(*special) {
                return Err(Error::Invalid(format!("special token {special} must have id {id}")));
            }
        }
        Ok(Vocabulary { tokens, counts, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < NUM_SPECIALS
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(id, (t, &c))| (id as u32, t.as_str(), c))
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> EncodedSequence {
        EncodedSequence {
            ids: tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK_ID)).collect(),
        }
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&id| self.token(id).unwrap_or(UNK).to_owned()).collect()
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, token, count) in self.iter() {
            writeln!(w, "{token}\t{id}\t{count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let shown = path.display();
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(&shown, lineno + 1, "expected token<TAB>id<TAB>count"));
            }
            let id: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(&shown, lineno + 1, "bad id"))?;
            let count: u64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(&shown, lineno + 1, "bad count"))?;
            if id != entries.len() {
                return Err(Error::parse(&shown, lineno + 1, "ids must be dense and in order"));
            }
            entries.push((fields[0].to_owned(), count));
        }
        Self::from_entries(entries)
    }
}

/// Builds a vocabulary from tokenized documents.
pub fn build_vocabulary<'a, I>(documents: I, min_count: u64, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts = TokenCounts::new();
    for doc in documents {
        counts.add_tokens(&doc.tokens);
    }
    Vocabulary::from_counts(&counts, min_count, max_size)
}

/// A sequence of token ids, without [CLS]/[SEP] framing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
}

impl EncodedSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        EncodedSequence { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Truncates to at most `max_tokens`, returning whether anything was cut.
    pub fn truncate(&mut self, max_tokens: usize) -> bool {
        let cut = self.ids.len() > max_tokens;
        self.ids.truncate(max_tokens);
        cut
    }

    /// `[CLS] ids.. [SEP]`
    pub fn framed(&self) -> Vec<u32> {
        frame(&self.ids)
    }
}

pub fn frame(ids: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len() + 2);
    out.push(CLS_ID);
    out.extend_from_slice(ids);
    out.push(SEP_ID);
    out
}
