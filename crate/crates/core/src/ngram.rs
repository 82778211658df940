//! N-gram statistics: counting, length-normalized PMI scoring, pruning and
//! span annotation of encoded sequences.
//!
//! PMI of an n-gram `w = (x_1..x_n)` is
//! `(1/n) * (ln P(w) - sum_k ln P(x_k))`, with every probability estimated
//! as `count / T` where `T` is the total number of tokens in the corpus.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use smallvec::SmallVec;

use crate::corpus::{EncodedSequence, Vocabulary};
use crate::error::{Error, Result};

pub type Ngram = SmallVec<[u32; 6]>;

pub const DEFAULT_MAX_N: usize = 6;
pub const DEFAULT_PER_DOC_TOP_K: usize = 3000;
pub const DEFAULT_PMI_THRESHOLD: f64 = 0.0;

const TABLE_HEADER: &str = "ngram\tcount\tpmi";

/// Raw n-gram and unigram counts over a corpus.
///
/// N-grams that contain a special id (e.g. `[UNK]`) are not counted, but the
/// special tokens still contribute to unigram counts and to `T`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramCounts {
    unigrams: HashMap<u32, u64>,
    ngrams: HashMap<Ngram, u64>,
    total: u64,
    max_n: usize,
}

impl NgramCounts {
    pub fn new(max_n: usize) -> Self {
        NgramCounts { max_n, ..Default::default() }
    }

    pub fn add_sequence(&mut self, ids: &[u32]) {
        for &id in ids {
            *self.unigrams.entry(id).or_insert(0) += 1;
        }
        self.total += ids.len() as u64;
        for start in 0..ids.len() {
            for n in 2..=self.max_n {
                let Some(window) = ids.get(start..start + n) else { break };
                if window.iter().any(|&id| Vocabulary::is_special(id)) {
                    break;
                }
                *self.ngrams.entry(Ngram::from_slice(window)).or_insert(0) += 1;
            }
        }
    }

    /// Sums another shard into this one.
    pub fn merge(&mut self, other: NgramCounts) {
        for (id, c) in other.unigrams {
            *self.unigrams.entry(id).or_insert(0) += c;
        }
        for (g, c) in other.ngrams {
            *self.ngrams.entry(g).or_insert(0) += c;
        }
        self.total += other.total;
        self.max_n = self.max_n.max(other.max_n);
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn unigram(&self, id: u32) -> u64 {
        self.unigrams.get(&id).copied().unwrap_or(0)
    }

    pub fn ngram(&self, ids: &[u32]) -> u64 {
        if ids.len() == 1 {
            return self.unigram(ids[0]);
        }
        self.ngrams.get(ids).copied().unwrap_or(0)
    }

    pub fn ngrams(&self) -> impl Iterator<Item = (&Ngram, u64)> {
        self.ngrams.iter().map(|(g, &c)| (g, c))
    }

    pub fn unigrams(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.unigrams.iter().map(|(&id, &c)| (id, c))
    }

    pub fn num_ngrams(&self) -> usize {
        self.ngrams.len()
    }

    /// PMI of `ngram` under these counts.
    pub fn pmi(&self, ngram: &[u32]) -> Result<f64> {
        let joint = self.ngram(ngram);
        let parts: Vec<u64> = ngram.iter().map(|&id| self.unigram(id)).collect();
        pmi_from_counts(joint, &parts, self.total).map_err(|_| Error::UnseenNgram(format!("{ngram:?}")))
    }
}

/// Counts every unigram and every contiguous n-gram of length 2..=max_n.
pub fn count_ngrams<'a, I>(sequences: I, max_n: usize) -> Result<NgramCounts>
where
    I: IntoIterator<Item = &'a EncodedSequence>,
{
    if max_n < 2 {
        return Err(Error::InvalidConfig("N must be >= 2".into()));
    }
    let mut counts = NgramCounts::new(max_n);
    for seq in sequences {
        counts.add_sequence(&seq.ids);
    }
    if counts.total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(counts)
}

/// Length-normalized PMI from raw counts: the joint count of the n-gram, the
/// count of each of its tokens, and the corpus size.
pub fn pmi_from_counts(joint: u64, unigram_counts: &[u64], total: u64) -> Result<f64> {
    if joint == 0 || total == 0 || unigram_counts.is_empty() || unigram_counts.contains(&0) {
        return Err(Error::UnseenNgram(format!("joint={joint} parts={unigram_counts:?}")));
    }
    let ln_t = (total as f64).ln();
    let log_joint = (joint as f64).ln() - ln_t;
    let log_parts: f64 = unigram_counts.iter().map(|&c| (c as f64).ln() - ln_t).sum();
    Ok((log_joint - log_parts) / unigram_counts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramEntry {
    pub count: u64,
    pub pmi: f64,
    /// Exempt from pruning (injected entity n-grams).
    pub privileged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneParams {
    /// Entries must score strictly above this.
    pub threshold: f64,
    pub per_doc_top_k: usize,
    /// Entries seen fewer times than this are dropped before ranking.
    pub min_count: u64,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams {
            threshold: DEFAULT_PMI_THRESHOLD,
            per_doc_top_k: DEFAULT_PER_DOC_TOP_K,
            min_count: 1,
        }
    }
}

/// Scored n-gram inventory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NgramTable {
    entries: HashMap<Ngram, NgramEntry>,
    max_n: usize,
    total: u64,
}

/// pmi desc, count desc, then ids ascending.
fn rank_order(a: (&[u32], &NgramEntry), b: (&[u32], &NgramEntry)) -> Ordering {
    b.1.pmi
        .total_cmp(&a.1.pmi)
        .then_with(|| b.1.count.cmp(&a.1.count))
        .then_with(|| a.0.cmp(b.0))
}

impl NgramTable {
    pub fn empty(max_n: usize, total: u64) -> Self {
        NgramTable { entries: HashMap::new(), max_n, total }
    }

    /// Scores every counted n-gram.
    pub fn from_counts(counts: &NgramCounts) -> Self {
        let entries = counts
            .ngrams
            .iter()
            .map(|(g, &count)| {
                let pmi = counts.pmi(g).expect("counted n-grams have nonzero counts");
                (g.clone(), NgramEntry { count, pmi, privileged: false })
            })
            .collect();
        NgramTable { entries, max_n: counts.max_n, total: counts.total }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, ngram: &[u32]) -> Option<&NgramEntry> {
        self.entries.get(ngram)
    }

    pub fn contains(&self, ngram: &[u32]) -> bool {
        self.entries.contains_key(ngram)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ngram, &NgramEntry)> {
        self.entries.iter()
    }

    /// Entries in rank order (pmi desc, count desc, ids asc).
    pub fn ranked(&self) -> Vec<(&Ngram, &NgramEntry)> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by(|a, b| rank_order((a.0, a.1), (b.0, b.1)));
        v
    }

    /// Drops entries at or below the threshold, then keeps, for each
    /// document, its `per_doc_top_k` best-ranked surviving n-grams. The result
    /// is the union over documents. Privileged entries are always kept.
    pub fn prune<'a, I>(&self, documents: I, params: &PruneParams) -> NgramTable
    where
        I: IntoIterator<Item = &'a EncodedSequence>,
    {
        let passes = |e: &NgramEntry| e.pmi > params.threshold && e.count >= params.min_count;
        let mut keep: HashSet<&[u32]> = self
            .entries
            .iter()
            .filter(|(_, e)| e.privileged)
            .map(|(g, _)| g.as_slice())
            .collect();

        let mut seen: HashSet<&[u32]> = HashSet::new();
        for doc in documents {
            seen.clear();
            let ids = &doc.ids;
            for start in 0..ids.len() {
                for n in 2..=self.max_n {
                    let Some(window) = ids.get(start..start + n) else { break };
                    if let Some((g, e)) = self.entries.get_key_value(window) {
                        if passes(e) {
                            seen.insert(g.as_slice());
                        }
                    }
                }
            }
            let mut candidates: Vec<(&[u32], &NgramEntry)> =
                seen.iter().map(|g| (*g, &self.entries[*g])).collect();
            if candidates.len() > params.per_doc_top_k {
                candidates.select_nth_unstable_by(params.per_doc_top_k, |a, b| rank_order(*a, *b));
                candidates.truncate(params.per_doc_top_k);
            }
            keep.extend(candidates.into_iter().map(|(g, _)| g));
        }

        let entries = keep
            .into_iter()
            .map(|g| (Ngram::from_slice(g), self.entries[g]))
            .collect();
        NgramTable { entries, max_n: self.max_n, total: self.total }
    }

    /// Adds entity n-grams as privileged entries. The PMI is taken from
    /// `counts` when it is computable there, otherwise recorded as +inf.
    /// Returns the number of entities skipped for having a bad length.
    pub fn inject_entities(&mut self, entities: &[Ngram], counts: Option<&NgramCounts>) -> usize {
        let mut skipped = 0;
        for entity in entities {
            if entity.len() < 2 || entity.len() > self.max_n {
                warn!("skipping entity {entity:?}: length {} outside 2..={}", entity.len(), self.max_n);
                skipped += 1;
                continue;
            }
            let (count, pmi) = match counts.map(|c| (c.ngram(entity), c.pmi(entity))) {
                Some((count, Ok(pmi))) => (count, pmi),
                Some((count, Err(_))) => (count, f64::INFINITY),
                None => (0, f64::INFINITY),
            };
            self.entries
                .entry(entity.clone())
                .and_modify(|e| e.privileged = true)
                .or_insert(NgramEntry { count, pmi, privileged: true });
        }
        skipped
    }

    /// Histogram of n-gram lengths among the `top` best-ranked entries;
    /// index `n` holds the number of entries of length `n`.
    pub fn length_histogram(&self, top: usize) -> Vec<usize> {
        let mut hist = vec![0; self.max_n.max(2) + 1];
        for (g, _) in self.ranked().into_iter().take(top) {
            if g.len() >= hist.len() {
                hist.resize(g.len() + 1, 0);
            }
            hist[g.len()] += 1;
        }
        hist
    }

    /// Writes the table sorted by pmi descending (ties: count desc, then the
    /// joined token string). PMI is written with 9 significant digits.
    pub fn write_tsv(&self, path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut rows: Vec<(String, &NgramEntry)> = self
            .entries
            .iter()
            .map(|(g, e)| (vocab.decode(g).join(" "), e))
            .collect();
        rows.sort_by(|a, b| {
            b.1.pmi
                .total_cmp(&a.1.pmi)
                .then_with(|| b.1.count.cmp(&a.1.count))
                .then_with(|| a.0.cmp(&b.0))
        });
        let io = |e| Error::io(path, e);
        writeln!(w, "# total_tokens={} max_n={}", self.total, self.max_n).map_err(io)?;
        writeln!(w, "{TABLE_HEADER}").map_err(io)?;
        for (text, e) in rows {
            writeln!(w, "{text}\t{}\t{}", e.count, format_pmi(e.pmi)).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a table file. N-grams containing tokens missing from `vocab` are
    /// dropped with a warning.
    pub fn read_tsv(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let shown = path.display();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = NgramTable::empty(DEFAULT_MAX_N, 0);
        let mut saw_max_n = false;
        let mut dropped = 0usize;
        let mut longest = 0usize;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("total_tokens", v)) => {
                            table.total = v.parse().map_err(|_| Error::parse(&shown, lineno + 1, "bad total_tokens"))?
                        }
                        Some(("max_n", v)) => {
                            table.max_n = v.parse().map_err(|_| Error::parse(&shown, lineno + 1, "bad max_n"))?;
                            saw_max_n = true;
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line == TABLE_HEADER || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(&shown, lineno + 1, "expected ngram<TAB>count<TAB>pmi"));
            }
            let count: u64 = fields[1].parse().map_err(|_| Error::parse(&shown, lineno + 1, "bad count"))?;
            let pmi: f64 = fields[2].parse().map_err(|_| Error::parse(&shown, lineno + 1, "bad pmi"))?;
            let ids: Option<Ngram> = fields[0].split(' ').map(|t| vocab.id(t)).collect();
            match ids {
                Some(g) if g.len() >= 2 => {
                    longest = longest.max(g.len());
                    table.entries.insert(g, NgramEntry { count, pmi, privileged: pmi.is_infinite() });
                }
                Some(_) => return Err(Error::parse(&shown, lineno + 1, "n-grams need at least two tokens")),
                None => dropped += 1,
            }
        }
        if dropped > 0 {
            warn!("{shown}: dropped {dropped} n-grams with out-of-vocabulary tokens");
        }
        if !saw_max_n {
            table.max_n = longest.max(2);
        }
        Ok(table)
    }
}

/// 9 significant digits, scientific notation; parsing and re-formatting
/// reproduces the same text.
pub fn format_pmi(pmi: f64) -> String {
    if pmi.is_finite() {
        format!("{pmi:.8e}")
    } else {
        pmi.to_string()
    }
}

/// Inclusive, 1-based token span within an unframed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn validate(&self, seq_len: usize) -> Result<()> {
        if self.start >= 1 && self.start < self.end && self.end <= seq_len {
            Ok(())
        } else {
            Err(Error::SpanOutOfBounds { start: self.start, end: self.end, len: seq_len })
        }
    }

    /// Zero-based half-open range over the unframed ids.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start - 1..self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanAnnotation {
    pub spans: Vec<Span>,
}

impl SpanAnnotation {
    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// Greedy left-to-right annotation: at each uncovered position the longest
/// table n-gram starting there is taken, then scanning resumes after it.
pub fn mark_sequence(seq: &EncodedSequence, table: &NgramTable) -> SpanAnnotation {
    let ids = &seq.ids;
    let mut spans = Vec::new();
    let mut i = 0;
    while i < ids.len() {
        let longest = (2..=table.max_n.min(ids.len() - i))
            .rev()
            .find(|&n| table.contains(&ids[i..i + n]));
        match longest {
            Some(n) => {
                spans.push(Span::new(i + 1, i + n));
                i += n;
            }
            None => i += 1,
        }
    }
    SpanAnnotation { spans }
}
