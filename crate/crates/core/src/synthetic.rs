//! A generated corpus where meaning is compositional by construction, and a
//! small experiment comparing MLM-only training with joint training on it.
//!
//! Sentences are concatenations of multi-token phrase units. Analogies are
//! built from unit pairs: `X Y : X W :: Z Y : ?` with gold `Z W`, against
//! distractors that share one unit with the gold (`Z W'`, `Z' W`).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_vocabulary, Document, EncodedSequence, Vocabulary};
use crate::encoder::{Encoder, EncoderConfig, EncoderParams, Pooling};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_analogy, AnalogyQuestion, EncoderEmbedder};
use crate::ngram::{count_ngrams, mark_sequence, NgramTable, PruneParams, Span};
use crate::training::{composition_error, train, LossReport, Objective, TrainSettings, TrainingExample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub n_units: usize,
    /// Inclusive token-length range of a unit.
    pub unit_len: (usize, usize),
    pub n_sentences: usize,
    /// Inclusive unit-count range of a sentence.
    pub units_per_sentence: (usize, usize),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { n_units: 80, unit_len: (2, 3), n_sentences: 5000, units_per_sentence: (2, 4), seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    /// Each unit's tokens. No token is shared between units.
    pub units: Vec<Vec<String>>,
    /// Sentences as unit indices.
    pub sentences: Vec<Vec<usize>>,
}

impl SyntheticCorpus {
    pub fn generate(spec: &CorpusSpec) -> Result<Self> {
        let (lo, hi) = spec.unit_len;
        let (slo, shi) = spec.units_per_sentence;
        if spec.n_units < 6 || lo < 1 || lo > hi || slo < 1 || slo > shi {
            return Err(Error::InvalidConfig(format!("bad synthetic corpus spec {spec:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut next = 0usize;
        let units: Vec<Vec<String>> = (0..spec.n_units)
            .map(|_| {
                let len = rng.gen_range(lo..=hi);
                (0..len)
                    .map(|_| {
                        next += 1;
                        format!("t{next:03}")
                    })
                    .collect()
            })
            .collect();
        let mut corpus = SyntheticCorpus { units, sentences: Vec::new() };
        corpus.sentences = corpus.sample_sentences(spec.n_sentences, spec.units_per_sentence, &mut rng);
        Ok(corpus)
    }

    pub fn sample_sentences(&self, n: usize, per: (usize, usize), rng: &mut impl Rng) -> Vec<Vec<usize>> {
        (0..n)
            .map(|_| {
                let k = rng.gen_range(per.0..=per.1);
                (0..k).map(|_| rng.gen_range(0..self.units.len())).collect()
            })
            .collect()
    }

    pub fn num_tokens(&self) -> usize {
        self.units.iter().map(Vec::len).sum()
    }

    pub fn text(&self, units: &[usize]) -> String {
        units.iter().map(|&u| self.units[u].join(" ")).collect::<Vec<_>>().join(" ")
    }

    pub fn documents(&self) -> Vec<Document> {
        self.sentences.iter().enumerate().map(|(i, s)| Document::new(i, self.text(s))).collect()
    }

    /// `n` analogy questions of the given form with `n_candidates`
    /// candidates each: the gold plus distractors sharing one unit with it.
    pub fn analogies(&self, form: AnalogyForm, n: usize, n_candidates: usize, seed: u64) -> Result<Vec<AnalogyQuestion>> {
        let u = self.units.len();
        let distractors = n_candidates.saturating_sub(1);
        if n_candidates < 2 || u < 4 + distractors {
            return Err(Error::InvalidConfig(format!("cannot build {n_candidates}-candidate questions from {u} units")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let all: Vec<usize> = (0..u).collect();
        for _ in 0..n {
            let picked: Vec<usize> = all.choose_multiple(&mut rng, 4 + distractors).copied().collect();
            let (x, y, z, w) = (picked[0], picked[1], picked[2], picked[3]);
            let mut candidates: Vec<String> = picked[4..]
                .iter()
                .enumerate()
                .map(|(i, &o)| if i % 2 == 0 { self.text(&[z, o]) } else { self.text(&[o, w]) })
                .collect();
            let answer_index = rng.gen_range(0..n_candidates);
            candidates.insert(answer_index, self.text(&[z, w]));
            let (a, b, c) = match form {
                AnalogyForm::Swap => (self.text(&[x, y]), self.text(&[x, w]), self.text(&[z, y])),
                AnalogyForm::Extend => (self.text(&[x]), self.text(&[x, w]), self.text(&[z])),
            };
            let q = AnalogyQuestion { category: form.to_string(), a, b, c, candidates, answer_index };
            q.validate()?;
            out.push(q);
        }
        Ok(out)
    }
}

/// Shape of a synthetic analogy over units X, Y, Z, W with gold `Z W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogyForm {
    /// `X Y : X W :: Z Y : Z W`, all two-unit sequences.
    Swap,
    /// `X : X W :: Z : Z W`, single units against two-unit sequences.
    Extend,
}

impl std::fmt::Display for AnalogyForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnalogyForm::Swap => "unit-swap",
            AnalogyForm::Extend => "unit-extend",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub held_out_sentences: usize,
    pub n_analogies: usize,
    pub n_candidates: usize,
    /// Model shape; `vocab_size` is filled in from the corpus.
    pub encoder: EncoderConfig,
    /// MLM-only steps shared by both models before they diverge, standing in
    /// for a pretrained checkpoint. Zero starts both from random weights.
    pub warm_start_steps: u64,
    /// Shared by both runs except for the objective.
    pub train: TrainSettings,
    pub prune: PruneParams,
    pub max_n: usize,
    /// Pooling for the composition error and the analogies.
    pub eval_pooling: Pooling,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut train = TrainSettings { peak_lr: 2e-3, total_steps: 1500, batch_size: 32, ..Default::default() };
        train.step.seed = 5;
        ExperimentConfig {
            corpus: CorpusSpec::default(),
            held_out_sentences: 500,
            n_analogies: 1000,
            n_candidates: 5,
            encoder: EncoderConfig {
                vocab_size: 0,
                d_model: 32,
                n_heads: 2,
                n_layers: 2,
                d_ff: 64,
                max_len: 16,
                dropout: 0.1,
                seed: 11,
            },
            warm_start_steps: 0,
            train,
            prune: PruneParams { min_count: 20, ..Default::default() },
            max_n: 6,
            eval_pooling: Pooling::Cls,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub objective: Objective,
    pub composition_error: f64,
    /// Accuracy for every analogy form and pooling.
    pub analogy: Vec<(AnalogyForm, Pooling, f64)>,
    pub final_report: LossReport,
    pub seconds: f64,
}

impl ModelOutcome {
    pub fn accuracy(&self, form: AnalogyForm, pooling: Pooling) -> Option<f64> {
        self.analogy.iter().find(|(f, p, _)| *f == form && *p == pooling).map(|a| a.2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub vocab_size: usize,
    pub table_size: usize,
    /// Fraction of training sentences with at least one marked span.
    pub marked_fraction: f64,
    pub mlm: ModelOutcome,
    pub joint: ModelOutcome,
}

struct Prepared {
    vocab: Vocabulary,
    train: Vec<TrainingExample>,
    held_out: Vec<(Vec<u32>, Span)>,
    analogies: Vec<(AnalogyForm, Vec<AnalogyQuestion>)>,
    table_size: usize,
    marked_fraction: f64,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let corpus = SyntheticCorpus::generate(&cfg.corpus)?;
    let docs = corpus.documents();
    let vocab = build_vocabulary(&docs, 1, usize::MAX)?;
    let seqs: Vec<EncodedSequence> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let counts = count_ngrams(&seqs, cfg.max_n)?;
    let table = NgramTable::from_counts(&counts).prune(&seqs, &cfg.prune);

    let mark = |seq: EncodedSequence| TrainingExample { annotation: mark_sequence(&seq, &table), seq };
    let train: Vec<TrainingExample> = seqs.into_iter().map(mark).collect();
    let marked_fraction = train.iter().filter(|e| !e.annotation.is_empty()).count() as f64 / train.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.corpus.seed ^ 0x00C0_FFEE);
    let held_sentences = corpus.sample_sentences(cfg.held_out_sentences, cfg.corpus.units_per_sentence, &mut rng);
    let mut held_out = Vec::new();
    for s in &held_sentences {
        let ids = vocab.encode(&crate::corpus::tokenize(&corpus.text(s))).ids;
        for span in mark_sequence(&EncodedSequence::new(ids.clone()), &table).spans {
            if span.len() < ids.len() {
                held_out.push((ids.clone(), span));
            }
        }
    }
    let analogies = [AnalogyForm::Swap, AnalogyForm::Extend]
        .into_iter()
        .enumerate()
        .map(|(i, form)| Ok((form, corpus.analogies(form, cfg.n_analogies, cfg.n_candidates, cfg.corpus.seed ^ (0xA11A + i as u64))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { vocab, train, held_out, analogies, table_size: table.len(), marked_fraction })
}

fn initial_params(cfg: &ExperimentConfig, data: &Prepared) -> Result<EncoderParams<f32>> {
    let config = EncoderConfig { vocab_size: data.vocab.len(), ..cfg.encoder };
    let mut params = EncoderParams::<f32>::init(&config)?;
    if cfg.warm_start_steps > 0 {
        let mut settings = cfg.train;
        settings.total_steps = cfg.warm_start_steps;
        settings.step.objective = Objective::Mlm;
        settings.step.seed ^= 0x5741_524D;
        let rows = train(&data.train, &mut params, &config, &settings, |_| {})?;
        if let Some(last) = rows.last() {
            log::info!("warm start: {}", last.tsv());
        }
    }
    Ok(params)
}

fn train_one(
    cfg: &ExperimentConfig,
    data: &Prepared,
    init: &EncoderParams<f32>,
    objective: Objective,
) -> Result<ModelOutcome> {
    let start = Instant::now();
    let config = EncoderConfig { vocab_size: data.vocab.len(), ..cfg.encoder };
    let mut params = init.clone();
    let mut settings = cfg.train;
    settings.step.objective = objective;
    let rows = train(&data.train, &mut params, &config, &settings, |row| {
        if row.step % 250 == 0 {
            log::info!("{objective} step {}: {}", row.step, row.tsv());
        }
    })?;
    let composition_error = composition_error(&params, &config, &data.held_out, cfg.eval_pooling)?
        .ok_or_else(|| Error::Invalid("no held-out spans to evaluate".into()))?;
    let encoder = Encoder { config, params };
    let mut analogy = Vec::new();
    for (form, questions) in &data.analogies {
        for pooling in [Pooling::Cls, Pooling::Mean, Pooling::Max] {
            let embedder = EncoderEmbedder::new(encoder.clone(), data.vocab.clone(), pooling)?;
            let acc = evaluate_analogy(questions, &embedder)?.overall().unwrap_or(0.0);
            analogy.push((*form, pooling, acc));
        }
    }
    Ok(ModelOutcome {
        objective,
        composition_error,
        analogy,
        final_report: rows.last().map(|r| r.report).unwrap_or_default(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trains an MLM-only model and a joint model from the same initialization
/// for the same number of steps and evaluates both.
pub fn run_compositional_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = prepare(cfg)?;
    let init = initial_params(cfg, &data)?;
    log::info!(
        "synthetic corpus: {} sentences, vocab {}, {} table n-grams, {:.1}% marked, {} held-out spans",
        data.train.len(),
        data.vocab.len(),
        data.table_size,
        100.0 * data.marked_fraction,
        data.held_out.len()
    );
    Ok(ExperimentOutcome {
        vocab_size: data.vocab.len(),
        table_size: data.table_size,
        marked_fraction: data.marked_fraction,
        mlm: train_one(cfg, &data, &init, Objective::Mlm)?,
        joint: train_one(cfg, &data, &init, Objective::Joint)?,
    })
}
