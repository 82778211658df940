//! Text to unit-norm vector.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{tokenize, Vocabulary};
use crate::encoder::{Encoder, Pooling};
use crate::error::{Error, Result};

pub trait Embedder: Sync {
    fn dim(&self) -> usize;

    /// Unit-norm embedding of `text`.
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

pub(crate) fn unit(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// A trained encoder plus its vocabulary and a pooling strategy.
#[derive(Debug, Clone)]
pub struct EncoderEmbedder {
    pub encoder: Encoder<f32>,
    pub vocab: Vocabulary,
    pub pooling: Pooling,
}

impl EncoderEmbedder {
    pub fn new(encoder: Encoder<f32>, vocab: Vocabulary, pooling: Pooling) -> Result<Self> {
        if vocab.len() != encoder.config.vocab_size {
            return Err(Error::Invalid(format!(
                "vocabulary has {} entries but the checkpoint expects {}",
                vocab.len(),
                encoder.config.vocab_size
            )));
        }
        Ok(EncoderEmbedder { encoder, vocab, pooling })
    }

    /// Token ids for `text`, truncated to what the encoder accepts.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut seq = self.vocab.encode(&tokenize(text));
        if seq.truncate(self.encoder.max_tokens()) {
            log::warn!("input truncated to {} tokens: {:.40}", self.encoder.max_tokens(), text);
        }
        seq.ids
    }
}

impl Embedder for EncoderEmbedder {
    fn dim(&self) -> usize {
        self.encoder.config.d_model
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let v = self.encoder.embed(&self.encode(text), self.pooling)?;
        unit(v.into_iter().map(f64::from).collect())
    }
}

/// Average of static word vectors over the known tokens of a text.
#[derive(Debug, Clone, Default)]
pub struct BowEmbedder {
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl BowEmbedder {
    pub fn new(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let dim = vectors.values().next().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Invalid("word vector table is empty".into()));
        }
        if let Some((w, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::Invalid(format!("vector for {w:?} has dimension {} (expected {dim})", v.len())));
        }
        Ok(BowEmbedder { vectors, dim })
    }

    /// Reads `token v1 .. vd` lines. A leading `count dim` header line, as
    /// written by word2vec, is skipped.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<&str> = parts.collect();
            if i == 0 && values.len() == 1 && token.parse::<u64>().is_ok() && values[0].parse::<u64>().is_ok() {
                continue;
            }
            let v = values
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path.display(), i + 1, e.to_string()))?;
            match dim {
                None if v.is_empty() => return Err(Error::parse(path.display(), i + 1, "no vector components")),
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::parse(path.display(), i + 1, format!("dimension {} (expected {d})", v.len())))
                }
                _ => {}
            }
            vectors.insert(token.to_lowercase(), v);
        }
        Self::new(vectors)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Embedder for BowEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for tok in tokenize(text) {
            if let Some(v) = self.vectors.get(&tok) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                found += 1;
            }
        }
        if found == 0 {
            return Err(Error::Invalid(format!("no known words in {text:?}")));
        }
        unit(sum)
    }
}

/// Row-major `n x dim` matrix of unit-norm embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn embed_corpus<S: AsRef<str> + Sync>(texts: &[S], embedder: &dyn Embedder) -> Result<EmbeddingMatrix> {
    if texts.is_empty() {
        return Err(Error::Invalid("no texts to embed".into()));
    }
    let rows = texts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            if t.as_ref().trim().is_empty() {
                return Err(Error::Invalid(format!("text {i} is empty")));
            }
            embedder.embed(t.as_ref()).map_err(|e| Error::Invalid(format!("text {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = embedder.dim();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(Error::Invalid(format!("text {i} embedded to dimension {} (expected {dim})", r.len())));
    }
    Ok(EmbeddingMatrix { rows: rows.len(), dim, data: rows.concat() })
}
