//! Paraphrase retrieval: dense Top-k ranking and an Okapi BM25 baseline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::embedder::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalSet {
    pub corpus: Vec<(u64, String)>,
    /// (query text, gold ids)
    pub queries: Vec<(String, Vec<u64>)>,
}

impl RetrievalSet {
    pub fn new(corpus: Vec<(u64, String)>, queries: Vec<(String, Vec<u64>)>) -> Result<Self> {
        let mut ids = HashSet::new();
        for (id, _) in &corpus {
            if !ids.insert(*id) {
                return Err(Error::Invalid(format!("duplicate corpus id {id}")));
            }
        }
        for (i, (_, gold)) in queries.iter().enumerate() {
            if gold.is_empty() {
                return Err(Error::Invalid(format!("query {i} has no gold ids")));
            }
            if let Some(g) = gold.iter().find(|g| !ids.contains(g)) {
                return Err(Error::Invalid(format!("query {i}: gold id {g} is not in the corpus")));
            }
        }
        Ok(RetrievalSet { corpus, queries })
    }

    pub fn read(corpus: impl AsRef<Path>, queries: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_corpus_tsv(corpus)?, read_queries_tsv(queries)?)
    }

    pub fn ids(&self) -> Vec<u64> {
        self.corpus.iter().map(|(id, _)| *id).collect()
    }

    pub fn gold_sets(&self) -> Vec<Vec<u64>> {
        self.queries.iter().map(|(_, g)| g.clone()).collect()
    }
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

/// `id \t text`
pub fn read_corpus_tsv(path: impl AsRef<Path>) -> Result<Vec<(u64, String)>> {
    let path = path.as_ref();
    lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let (id, text) = l.split_once('\t').ok_or_else(|| Error::parse(path.display(), n, "expected id<TAB>text"))?;
            let id = id.trim().parse().map_err(|_| Error::parse(path.display(), n, format!("bad id {id:?}")))?;
            Ok((id, text.to_string()))
        })
        .collect()
}

/// `text \t gold_id[,gold_id..]`
pub fn read_queries_tsv(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<u64>)>> {
    let path = path.as_ref();
    lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let (text, gold) =
                l.rsplit_once('\t').ok_or_else(|| Error::parse(path.display(), n, "expected text<TAB>gold_ids"))?;
            let gold = gold
                .split(',')
                .map(|g| g.trim().parse().map_err(|_| Error::parse(path.display(), n, format!("bad gold id {g:?}"))))
                .collect::<Result<Vec<u64>>>()?;
            Ok((text.to_string(), gold))
        })
        .collect()
}

fn order_by_score(scores: &[f64], ids: &[u64], k: usize) -> Vec<u64> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    order.into_iter().take(k).map(|i| ids[i]).collect()
}

/// Ids of the `k` corpus rows with the highest cosine to `query`,
/// descending; ties by ascending id.
pub fn retrieve_topk(query: &[f64], corpus: &EmbeddingMatrix, ids: &[u64], k: usize) -> Vec<u64> {
    assert_eq!(ids.len(), corpus.rows);
    let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scores: Vec<f64> = (0..corpus.rows)
        .map(|i| {
            let row = corpus.row(i);
            let rn = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = row.iter().zip(query).map(|(a, b)| a * b).sum();
            if qn > 0.0 && rn > 0.0 {
                dot / (qn * rn)
            } else {
                0.0
            }
        })
        .collect();
    order_by_score(&scores, ids, k.min(ids.len()))
}

/// Fraction of queries with a gold id in the first k results, per k.
pub fn topk_accuracy(rankings: &[Vec<u64>], gold: &[Vec<u64>], ks: &[usize]) -> Result<Vec<f64>> {
    if rankings.len() != gold.len() {
        return Err(Error::Invalid(format!("{} rankings for {} gold sets", rankings.len(), gold.len())));
    }
    if let Some(i) = gold.iter().position(Vec::is_empty) {
        return Err(Error::Invalid(format!("query {i} has no gold ids")));
    }
    if rankings.is_empty() {
        return Ok(vec![0.0; ks.len()]);
    }
    // first rank (1-based) at which a gold id appears
    let first_hit: Vec<Option<usize>> =
        rankings.iter().zip(gold).map(|(r, g)| r.iter().position(|id| g.contains(id)).map(|p| p + 1)).collect();
    Ok(ks
        .iter()
        .map(|&k| first_hit.iter().filter(|h| h.is_some_and(|h| h <= k)).count() as f64 / rankings.len() as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub ks: Vec<usize>,
    /// (group label, query count, accuracy per k); the first row is `all`.
    pub rows: Vec<(String, usize, Vec<f64>)>,
}

impl RetrievalReport {
    /// Overall accuracies, plus one row per query-length bucket when
    /// `lengths` and a positive `bucket_width` are given.
    pub fn build(
        rankings: &[Vec<u64>],
        gold: &[Vec<u64>],
        ks: &[usize],
        lengths: Option<(&[usize], usize)>,
    ) -> Result<Self> {
        let mut rows = vec![("all".to_string(), rankings.len(), topk_accuracy(rankings, gold, ks)?)];
        if let Some((lengths, width)) = lengths.filter(|(_, w)| *w > 0) {
            let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &len) in lengths.iter().enumerate() {
                buckets.entry(len / width).or_default().push(i);
            }
            for (b, idx) in buckets {
                let r: Vec<Vec<u64>> = idx.iter().map(|&i| rankings[i].clone()).collect();
                let g: Vec<Vec<u64>> = idx.iter().map(|&i| gold[i].clone()).collect();
                let label = format!("len{}-{}", b * width, (b + 1) * width - 1);
                rows.push((label, idx.len(), topk_accuracy(&r, &g, ks)?));
            }
        }
        Ok(RetrievalReport { ks: ks.to_vec(), rows })
    }

    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "group\tqueries")?;
        for k in &self.ks {
            write!(out, "\ttop{k}")?;
        }
        writeln!(out)?;
        for (label, n, acc) in &self.rows {
            write!(out, "{label}\t{n}")?;
            for a in acc {
                write!(out, "\t{a:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Okapi BM25 over a fixed tokenized corpus.
#[derive(Debug, Clone)]
pub struct Bm25 {
    tf: Vec<HashMap<String, u32>>,
    len: Vec<usize>,
    df: HashMap<String, u32>,
    avgdl: f64,
    pub k1: f64,
    pub b: f64,
}

impl Bm25 {
    pub fn new<S: AsRef<str>>(docs: &[Vec<S>], k1: f64, b: f64) -> Self {
        let mut tf = Vec::with_capacity(docs.len());
        let mut df: HashMap<String, u32> = HashMap::new();
        for d in docs {
            let mut counts: HashMap<String, u32> = HashMap::new();
            for t in d {
                *counts.entry(t.as_ref().to_string()).or_default() += 1;
            }
            for t in counts.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            tf.push(counts);
        }
        let len: Vec<usize> = docs.iter().map(Vec::len).collect();
        let avgdl = if docs.is_empty() { 0.0 } else { len.iter().sum::<usize>() as f64 / docs.len() as f64 };
        Bm25 { tf, len, df, avgdl, k1, b }
    }

    /// `ln((N - n + 0.5) / (n + 0.5) + 1)`, which stays positive for terms
    /// present in most documents.
    pub fn idf(&self, term: &str) -> f64 {
        let n = *self.df.get(term).unwrap_or(&0) as f64;
        let total = self.tf.len() as f64;
        ((total - n + 0.5) / (n + 0.5) + 1.0).ln()
    }

    /// One score per document. Each distinct query term contributes once.
    pub fn scores<S: AsRef<str>>(&self, query: &[S]) -> Vec<f64> {
        let mut terms: Vec<&str> = query.iter().map(AsRef::as_ref).collect();
        terms.sort_unstable();
        terms.dedup();
        let idf: Vec<f64> = terms.iter().map(|t| self.idf(t)).collect();
        (0..self.tf.len())
            .map(|d| {
                let norm = if self.avgdl > 0.0 { self.len[d] as f64 / self.avgdl } else { 0.0 };
                let denom_base = self.k1 * (1.0 - self.b + self.b * norm);
                terms
                    .iter()
                    .zip(&idf)
                    .map(|(t, idf)| {
                        let f = *self.tf[d].get(*t).unwrap_or(&0) as f64;
                        if f == 0.0 {
                            0.0
                        } else {
                            idf * f * (self.k1 + 1.0) / (f + denom_base)
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

/// Every corpus id ranked by BM25 score, ties by ascending id.
pub fn bm25_rank<S: AsRef<str>, T: AsRef<str>>(query: &[S], docs: &[Vec<T>], ids: &[u64], k1: f64, b: f64) -> Vec<u64> {
    let index = Bm25::new(docs, k1, b);
    order_by_score(&index.scores(query), ids, ids.len())
}
