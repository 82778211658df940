//! Closed-candidate analogy questions: A : B :: C : ?, answered by the
//! candidate closest in cosine to c + b - a.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::embedder::Embedder;
use crate::error::{Error, Result};

/// Categories counted as semantic in reports; everything else is syntactic.
pub const SEMANTIC_CATEGORIES: &[&str] = &[
    "capital-common",
    "capital-common-countries",
    "capital-world",
    "capital-country",
    "city-state",
    "city-in-state",
    "male-female",
    "family",
    "country-currency",
    "currency",
];

/// Left out of phrase and sentence expansion.
pub const EXCLUDED_FROM_EXPANSION: &str = "country-currency";

pub fn is_semantic(category: &str) -> bool {
    SEMANTIC_CATEGORIES.contains(&category)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub category: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub candidates: Vec<String>,
    pub answer_index: usize,
}

impl AnalogyQuestion {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Invalid("question has no candidates".into()));
        }
        if self.answer_index >= self.candidates.len() {
            return Err(Error::Invalid(format!(
                "answer index {} out of range for {} candidates",
                self.answer_index,
                self.candidates.len()
            )));
        }
        let distinct: HashSet<&String> = self.candidates.iter().collect();
        if distinct.len() != self.candidates.len() {
            return Err(Error::Invalid("candidates are not distinct".into()));
        }
        Ok(())
    }

    pub fn gold(&self) -> &str {
        &self.candidates[self.answer_index]
    }
}

/// Reads `category \t a \t b \t c \t cand1|cand2|.. \t answer_index`.
pub fn read_analogies(path: impl AsRef<Path>) -> Result<Vec<AnalogyQuestion>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::parse(path.display(), i + 1, format!("expected 6 tab-separated fields, found {}", f.len())));
        }
        let q = AnalogyQuestion {
            category: f[0].to_string(),
            a: f[1].to_string(),
            b: f[2].to_string(),
            c: f[3].to_string(),
            candidates: f[4].split('|').map(str::to_string).collect(),
            answer_index: f[5]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path.display(), i + 1, format!("bad answer index {:?}", f[5])))?,
        };
        q.validate().map_err(|e| Error::parse(path.display(), i + 1, e.to_string()))?;
        out.push(q);
    }
    Ok(out)
}

pub fn write_analogies(path: impl AsRef<Path>, questions: &[AnalogyQuestion]) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for q in questions {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            q.category,
            q.a,
            q.b,
            q.c,
            q.candidates.join("|"),
            q.answer_index
        ));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the candidate maximizing cosine(c + b - a, d); lowest index on
/// ties, and 0 (with a warning) when the target vector is zero.
pub fn answer_from_vectors(a: &[f64], b: &[f64], c: &[f64], candidates: &[Vec<f64>]) -> usize {
    let target: Vec<f64> = (0..a.len()).map(|i| c[i] + b[i] - a[i]).collect();
    let tn = dot(&target, &target).sqrt();
    if !(tn > 0.0) {
        log::warn!("analogy target vector is zero; answering with the first candidate");
        return 0;
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, d) in candidates.iter().enumerate() {
        let dn = dot(d, d).sqrt();
        let score = if dn > 0.0 { dot(&target, d) / (tn * dn) } else { 0.0 };
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

pub fn answer_analogy(q: &AnalogyQuestion, embedder: &dyn Embedder) -> Result<usize> {
    let cands = q.candidates.iter().map(|t| embedder.embed(t)).collect::<Result<Vec<_>>>()?;
    Ok(answer_from_vectors(&embedder.embed(&q.a)?, &embedder.embed(&q.b)?, &embedder.embed(&q.c)?, &cands))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalogyReport {
    /// category -> (correct, total)
    pub per_category: BTreeMap<String, (usize, usize)>,
    pub predictions: Vec<usize>,
}

impl AnalogyReport {
    pub fn accuracy(&self, category: &str) -> Option<f64> {
        self.per_category.get(category).filter(|(_, n)| *n > 0).map(|&(c, n)| c as f64 / n as f64)
    }

    fn pooled(&self, semantic: bool) -> Option<f64> {
        let (c, n) = self
            .per_category
            .iter()
            .filter(|(k, _)| is_semantic(k) == semantic)
            .fold((0, 0), |(c, n), (_, &(c2, n2))| (c + c2, n + n2));
        (n > 0).then(|| c as f64 / n as f64)
    }

    /// Fraction correct over all semantic questions.
    pub fn semantic(&self) -> Option<f64> {
        self.pooled(true)
    }

    pub fn syntactic(&self) -> Option<f64> {
        self.pooled(false)
    }

    /// Mean of the semantic and syntactic scores (whichever exist).
    pub fn average(&self) -> Option<f64> {
        match (self.semantic(), self.syntactic()) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            (a, b) => a.or(b),
        }
    }

    pub fn overall(&self) -> Option<f64> {
        let (c, n) = self.per_category.values().fold((0, 0), |(c, n), &(c2, n2)| (c + c2, n + n2));
        (n > 0).then(|| c as f64 / n as f64)
    }

    /// TSV with one row per category followed by `sem`, `syn` and `avg`
    /// rows. Absent aggregates are written as `-`.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        writeln!(out, "category\tcorrect\ttotal\taccuracy")?;
        for (cat, &(c, n)) in &self.per_category {
            writeln!(out, "{cat}\t{c}\t{n}\t{}", fmt(self.accuracy(cat)))?;
        }
        for (name, semantic) in [("sem", true), ("syn", false)] {
            let (c, n) = self
                .per_category
                .iter()
                .filter(|(k, _)| is_semantic(k) == semantic)
                .fold((0, 0), |(c, n), (_, &(c2, n2))| (c + c2, n + n2));
            writeln!(out, "{name}\t{c}\t{n}\t{}", fmt(self.pooled(semantic)))?;
        }
        writeln!(out, "avg\t-\t-\t{}", fmt(self.average()))
    }
}

/// Answers every question, embedding each distinct text once.
pub fn evaluate_analogy(questions: &[AnalogyQuestion], embedder: &dyn Embedder) -> Result<AnalogyReport> {
    let mut texts: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for q in questions {
        q.validate()?;
        for t in [q.a.as_str(), q.b.as_str(), q.c.as_str()].into_iter().chain(q.candidates.iter().map(String::as_str)) {
            index.entry(t).or_insert_with(|| {
                texts.push(t);
                texts.len() - 1
            });
        }
    }
    let vectors = texts
        .par_iter()
        .map(|t| embedder.embed(t).map_err(|e| Error::Invalid(format!("cannot embed {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let dim = embedder.dim();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::Invalid(format!("embedding dimension {} does not match {dim}", v.len())));
    }
    let vec_of = |t: &str| &vectors[index[t]];
    let predictions: Vec<usize> = questions
        .par_iter()
        .map(|q| {
            let cands: Vec<Vec<f64>> = q.candidates.iter().map(|t| vec_of(t).clone()).collect();
            answer_from_vectors(vec_of(&q.a), vec_of(&q.b), vec_of(&q.c), &cands)
        })
        .collect();
    let mut report = AnalogyReport { predictions, ..Default::default() };
    for (q, &p) in questions.iter().zip(&report.predictions) {
        let e = report.per_category.entry(q.category.clone()).or_insert((0, 0));
        e.0 += usize::from(p == q.answer_index);
        e.1 += 1;
    }
    Ok(report)
}

/// The top `k` items of `vocabulary` by cosine to c + b - a (excluding a, b
/// and c), with the gold answer swapped into the last slot if it missed the
/// cut. Ties go to the earlier vocabulary entry.
pub fn build_candidates(
    a: &str,
    b: &str,
    c: &str,
    gold: &str,
    reference: &dyn Embedder,
    vocabulary: &[String],
    k: usize,
) -> Result<Vec<String>> {
    let pool: Vec<&String> = vocabulary.iter().filter(|w| ![a, b, c].contains(&w.as_str())).collect();
    if k == 0 || pool.len() < k {
        return Err(Error::Invalid(format!("need {k} candidates but the vocabulary offers {}", pool.len())));
    }
    let (va, vb, vc) = (reference.embed(a)?, reference.embed(b)?, reference.embed(c)?);
    let target: Vec<f64> = (0..va.len()).map(|i| vc[i] + vb[i] - va[i]).collect();
    let scores = pool
        .par_iter()
        .map(|w| reference.embed(w).map(|v| dot(&target, &v)))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
    let mut out: Vec<String> = order[..k].iter().map(|&i| pool[i].clone()).collect();
    if !out.iter().any(|w| w == gold) {
        out[k - 1] = gold.to_string();
    }
    Ok(out)
}

/// A carrier phrase with a single `{X}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub text: String,
}

pub const SLOT: &str = "{X}";

impl Template {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        match text.matches(SLOT).count() {
            1 => Ok(Template { text }),
            n => Err(Error::Invalid(format!("template {text:?} must contain exactly one {SLOT} slot (found {n})"))),
        }
    }

    pub fn fill(&self, word: &str) -> String {
        self.text.replace(SLOT, word)
    }

    /// The template with every synonym-map key in the carrier text replaced
    /// by its paraphrase (longest keys first).
    pub fn paraphrased(&self, synonyms: &[(String, String)]) -> Template {
        let mut keys: Vec<&(String, String)> = synonyms.iter().collect();
        keys.sort_by(|x, y| y.0.len().cmp(&x.0.len()).then(x.0.cmp(&y.0)));
        let (before, after) = self.text.split_once(SLOT).expect("validated slot");
        let sub = |s: &str| {
            let mut out = s.to_string();
            for (k, v) in &keys {
                if !k.is_empty() {
                    out = out.replace(k.as_str(), v);
                }
            }
            out
        };
        Template { text: format!("{}{SLOT}{}", sub(before), sub(after)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LengthStats {
    pub texts: usize,
    pub mean_tokens: f64,
    pub max_tokens: usize,
}

/// Expands word pairs into phrase or sentence questions.
///
/// For pairs i = (A, B) and j = (C, D), i != j, and each template, the
/// question is `t(A) : t'(B) :: t'(C) : ?` with gold `t(D)`, where `t'` is the
/// synonym-substituted variant of `t`. Each emitted question therefore has
/// no carrier words shared between a and b, or between c and the gold.
/// Distractors are `t(.)` applied to the second words of the pairs following
/// j (cyclically, skipping i and j); the gold position rotates with (i, j).
/// `country-currency` yields nothing.
pub fn expand_templates(
    category: &str,
    pairs: &[(String, String)],
    templates: &[Template],
    synonyms: &[(String, String)],
    n_candidates: usize,
) -> Result<(Vec<AnalogyQuestion>, LengthStats)> {
    if category == EXCLUDED_FROM_EXPANSION {
        log::warn!("{category} is not expanded to phrases or sentences");
        return Ok((Vec::new(), LengthStats::default()));
    }
    if synonyms.is_empty() {
        log::warn!("empty synonym map: template variants will be identical");
    }
    if n_candidates == 0 {
        return Err(Error::Invalid("n_candidates must be positive".into()));
    }
    let p = pairs.len();
    let k = n_candidates.min(p.saturating_sub(1));
    let mut questions = Vec::with_capacity(p * p.saturating_sub(1) * templates.len());
    for t in templates {
        Template::new(t.text.clone())?;
        let alt = t.paraphrased(synonyms);
        for i in 0..p {
            for j in 0..p {
                if i == j {
                    continue;
                }
                let distractors: Vec<String> =
                    (1..p).map(|o| (j + o) % p).filter(|&o| o != i).take(k - 1).map(|o| t.fill(&pairs[o].1)).collect();
                let answer_index = (i * p + j) % k;
                let mut candidates = distractors;
                candidates.insert(answer_index, t.fill(&pairs[j].1));
                let q = AnalogyQuestion {
                    category: category.to_string(),
                    a: t.fill(&pairs[i].0),
                    b: alt.fill(&pairs[i].1),
                    c: alt.fill(&pairs[j].0),
                    candidates,
                    answer_index,
                };
                q.validate()?;
                questions.push(q);
            }
        }
    }
    let lengths: Vec<usize> = questions
        .iter()
        .flat_map(|q| [&q.a, &q.b, &q.c, &q.candidates[q.answer_index]])
        .map(|s| crate::corpus::tokenize(s).len())
        .collect();
    let stats = LengthStats {
        texts: lengths.len(),
        mean_tokens: if lengths.is_empty() { 0.0 } else { lengths.iter().sum::<usize>() as f64 / lengths.len() as f64 },
        max_tokens: lengths.iter().copied().max().unwrap_or(0),
    };
    Ok((questions, stats))
}
