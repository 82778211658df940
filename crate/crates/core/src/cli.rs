//! The `ulr` command line: argument parsing and the five pipeline commands.
//!
//! Every command writes into the `--out` directory and echoes its resolved
//! configuration both to the log and to `config.resolved` there.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{key, parse_override, Key, RunConfig};
use crate::corpus::{build_vocabulary, read_corpus, tokenize, Vocabulary};
use crate::encoder::{load_checkpoint, save_checkpoint, Encoder, EncoderConfig, EncoderParams, Pooling};
use crate::error::{Error, Result};
use crate::evaluation::{
    bm25_rank, embed_corpus, evaluate_analogy, read_analogies, retrieve_topk, AnalogyReport, BowEmbedder, Embedder,
    EncoderEmbedder, RetrievalReport, RetrievalSet,
};
use crate::ngram::{count_ngrams, mark_sequence, Ngram, NgramTable, PruneParams};
use crate::training::{train, write_metrics, MetricsRow, Objective, StepSettings, TrainSettings, TrainingExample};

pub const CONFIG_RESOLVED: &str = "config.resolved";
pub const NGRAMS_FILE: &str = "ngrams.tsv";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const SUMMARY_FILE: &str = "ngram_summary.tsv";
pub const CHECKPOINT_FILE: &str = "model.ulrm";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const ANALOGY_REPORT: &str = "analogy_report.tsv";
pub const RETRIEVAL_REPORT: &str = "retrieval_report.tsv";
pub const VECTORS_FILE: &str = "vectors.txt";

pub const EXTRACT_KEYS: &[Key] = &[
    key("corpus", "", "corpus file, one document per line"),
    key("max_n", "6", "longest n-gram counted"),
    key("threshold", "0", "keep n-grams with PMI strictly above this (inf keeps none)"),
    key("top_k", "3000", "n-grams kept per document"),
    key("min_count", "1", "drop n-grams seen fewer times than this"),
    key("entities", "", "optional file of entity phrases, one per line, always kept"),
    key("vocab_min_count", "5", "minimum token count for the vocabulary"),
    key("max_vocab", "50000", "vocabulary size cap, specials included"),
    key("histogram_top", "2000", "length histogram over this many top-ranked n-grams"),
    key("seed", "0", "unused; accepted for uniformity"),
];

pub const TRAIN_KEYS: &[Key] = &[
    key("corpus", "", "corpus file, one document per line"),
    key("ngrams", "", "n-gram table from extract-ngrams"),
    key("vocab", "", "vocabulary from extract-ngrams; built from the corpus when empty"),
    key("vocab_min_count", "5", "used only when building the vocabulary"),
    key("max_vocab", "50000", "used only when building the vocabulary"),
    key("d_model", "64", "hidden size"),
    key("n_heads", "4", "attention heads"),
    key("n_layers", "2", "transformer layers"),
    key("d_ff", "256", "feed-forward size"),
    key("max_len", "128", "longest framed input"),
    key("dropout", "0.1", "dropout rate"),
    key("peak_lr", "5e-5", "learning rate after warmup"),
    key("total_steps", "0", "optimizer steps; 0 means one epoch"),
    key("warmup_fraction", "0.1", "share of steps spent warming up"),
    key("mask_rate", "0.15", "MLM masking rate"),
    key("batch_size", "64", "examples per step"),
    key("pooling_for_misad", "cls", "cls, mean or max"),
    key("objective", "joint", "joint or mlm"),
    key("log_every", "100", "log a metrics row every this many steps"),
    key("seed", "0", "seed for initialization, masking, dropout and shuffling"),
];

pub const ANALOGY_KEYS: &[Key] = &[
    key("checkpoint", "", "trained model (either this or vectors)"),
    key("vectors", "", "word vector file, averaged over words (either this or checkpoint)"),
    key("vocab", "", "vocabulary; defaults to vocab.tsv next to the checkpoint"),
    key("dataset", "", "analogy TSV file"),
    key("pooling", "mean", "cls, mean or max"),
    key("seed", "0", "unused; accepted for uniformity"),
];

pub const BACKENDS: &[&str] = &["checkpoint", "vectors", "bm25"];

pub const RETRIEVAL_KEYS: &[Key] = &[
    key("backend", "checkpoint", "checkpoint, vectors or bm25"),
    key("checkpoint", "", "trained model for the checkpoint backend"),
    key("vectors", "", "word vector file for the vectors backend"),
    key("vocab", "", "vocabulary; defaults to vocab.tsv next to the checkpoint"),
    key("corpus", "", "id<TAB>text file"),
    key("queries", "", "query<TAB>gold ids file"),
    key("pooling", "mean", "cls, mean or max"),
    key("ks", "1,5,10", "cutoffs for top-k accuracy"),
    key("bucket_width", "0", "group queries by token length in buckets this wide; 0 disables"),
    key("bm25_k1", "1.2", "BM25 term saturation"),
    key("bm25_b", "0.75", "BM25 length normalization"),
    key("seed", "0", "unused; accepted for uniformity"),
];

pub const EMBED_KEYS: &[Key] = &[
    key("checkpoint", "", "trained model"),
    key("vocab", "", "vocabulary; defaults to vocab.tsv next to the checkpoint"),
    key("texts", "", "one text per line"),
    key("pooling", "mean", "cls, mean or max"),
    key("seed", "0", "unused; accepted for uniformity"),
];

#[derive(Debug, Parser)]
#[command(name = "ulr", version, about = "Mine n-grams, train and evaluate universal sequence embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count n-grams, score them by PMI and prune them into a table.
    ExtractNgrams {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<String>,
        /// Longest n-gram counted.
        #[arg(long = "max-n")]
        max_n: Option<String>,
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long = "top-k")]
        top_k: Option<String>,
        #[arg(long)]
        entities: Option<String>,
    },
    /// Train an encoder with MLM, optionally joined with the composition loss.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        ngrams: Option<String>,
        #[arg(long)]
        vocab: Option<String>,
        #[arg(long = "total-steps")]
        total_steps: Option<String>,
        #[arg(long)]
        objective: Option<String>,
    },
    /// Answer an analogy dataset and report accuracy per category.
    EvalAnalogy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        vectors: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        pooling: Option<String>,
    },
    /// Rank a corpus for each query and report top-k accuracy.
    EvalRetrieval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        vectors: Option<String>,
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        queries: Option<String>,
        #[arg(long)]
        pooling: Option<String>,
    },
    /// Write one unit-norm vector per input line.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        texts: Option<String>,
        #[arg(long)]
        pooling: Option<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Print the command's config keys with their defaults and exit.
    #[arg(long)]
    pub list_keys: bool,
}

impl Command {
    fn parts(&self) -> (&'static str, &'static [Key], &Common, Vec<(&'static str, Option<&String>)>) {
        match self {
            Command::ExtractNgrams { common, corpus, max_n, threshold, top_k, entities } => (
                "extract-ngrams",
                EXTRACT_KEYS,
                common,
                vec![
                    ("corpus", corpus.as_ref()),
                    ("max_n", max_n.as_ref()),
                    ("threshold", threshold.as_ref()),
                    ("top_k", top_k.as_ref()),
                    ("entities", entities.as_ref()),
                ],
            ),
            Command::Train { common, corpus, ngrams, vocab, total_steps, objective } => (
                "train",
                TRAIN_KEYS,
                common,
                vec![
                    ("corpus", corpus.as_ref()),
                    ("ngrams", ngrams.as_ref()),
                    ("vocab", vocab.as_ref()),
                    ("total_steps", total_steps.as_ref()),
                    ("objective", objective.as_ref()),
                ],
            ),
            Command::EvalAnalogy { common, checkpoint, vectors, dataset, pooling } => (
                "eval-analogy",
                ANALOGY_KEYS,
                common,
                vec![
                    ("checkpoint", checkpoint.as_ref()),
                    ("vectors", vectors.as_ref()),
                    ("dataset", dataset.as_ref()),
                    ("pooling", pooling.as_ref()),
                ],
            ),
            Command::EvalRetrieval { common, backend, checkpoint, vectors, corpus, queries, pooling } => (
                "eval-retrieval",
                RETRIEVAL_KEYS,
                common,
                vec![
                    ("backend", backend.as_ref()),
                    ("checkpoint", checkpoint.as_ref()),
                    ("vectors", vectors.as_ref()),
                    ("corpus", corpus.as_ref()),
                    ("queries", queries.as_ref()),
                    ("pooling", pooling.as_ref()),
                ],
            ),
            Command::Embed { common, checkpoint, texts, pooling } => (
                "embed",
                EMBED_KEYS,
                common,
                vec![("checkpoint", checkpoint.as_ref()), ("texts", texts.as_ref()), ("pooling", pooling.as_ref())],
            ),
        }
    }
}

/// Parses arguments and runs the chosen command.
pub fn run(cli: Cli) -> Result<()> {
    let (name, keys, common, flags) = cli.command.parts();
    if common.list_keys {
        for k in keys {
            println!("{:<18} {:<10} {}", k.name, if k.default.is_empty() { "-" } else { k.default }, k.help);
        }
        return Ok(());
    }
    let mut overrides = Vec::new();
    for s in &common.set {
        overrides.push(parse_override(s)?);
    }
    for (k, v) in flags {
        if let Some(v) = v {
            overrides.push((k.to_string(), v.clone()));
        }
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let cfg = RunConfig::resolve(name, keys, common.config.as_deref(), &overrides)?;
    let out = common.out.clone().ok_or_else(|| Error::InvalidConfig("--out is required".into()))?;
    let threads = common.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| execute(&cfg, &out))
}

/// Runs an already resolved command, writing into `out`.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let rendered = cfg.render();
    log::info!("{} resolved config:\n{}", cfg.command, rendered.trim_end());
    write_file(&out.join(CONFIG_RESOLVED), rendered.as_bytes())?;
    match cfg.command.as_str() {
        "extract-ngrams" => cmd_extract_ngrams(cfg, out).map(|_| ()),
        "train" => cmd_train(cfg, out).map(|_| ()),
        "eval-analogy" => cmd_eval_analogy(cfg, out).map(|_| ()),
        "eval-retrieval" => cmd_eval_retrieval(cfg, out).map(|_| ()),
        "embed" => cmd_embed(cfg, out).map(|_| ()),
        other => Err(Error::InvalidConfig(format!("unknown command {other:?}"))),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub vocab_size: usize,
    pub counted: usize,
    pub kept: usize,
    /// Index `n` holds the number of top-ranked entries of length `n`.
    pub histogram: Vec<usize>,
}

pub fn cmd_extract_ngrams(cfg: &RunConfig, out: &Path) -> Result<ExtractSummary> {
    let corpus_path = cfg.path("corpus")?;
    let docs = read_corpus(&corpus_path)?;
    if docs.is_empty() {
        return Err(Error::InvalidConfig(format!("{}: corpus is empty", corpus_path.display())));
    }
    let vocab = build_vocabulary(&docs, cfg.get("vocab_min_count")?, cfg.get("max_vocab")?)?;
    let seqs: Vec<_> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let counts = count_ngrams(&seqs, cfg.get("max_n")?)?;
    let params = PruneParams {
        threshold: cfg.get("threshold")?,
        per_doc_top_k: cfg.get("top_k")?,
        min_count: cfg.get("min_count")?,
    };
    let full = NgramTable::from_counts(&counts);
    let mut table = full.prune(&seqs, &params);
    if let Some(path) = cfg.path_opt("entities")? {
        let entities = read_entities(&path, &vocab)?;
        let skipped = table.inject_entities(&entities, Some(&counts));
        log::info!("{} entities added ({} skipped for length)", entities.len() - skipped, skipped);
    }
    let top: usize = cfg.get("histogram_top")?;
    let histogram = table.length_histogram(top);
    table.write_tsv(out.join(NGRAMS_FILE), &vocab)?;
    vocab.write_tsv(out.join(VOCAB_FILE))?;

    let considered: usize = histogram.iter().sum();
    let path = out.join(SUMMARY_FILE);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "counted\t{}", counts.num_ngrams()).map_err(io)?;
    writeln!(w, "kept\t{}", table.len()).map_err(io)?;
    writeln!(w, "histogram_top\t{considered}").map_err(io)?;
    writeln!(w, "length\tcount\tshare").map_err(io)?;
    for (n, &c) in histogram.iter().enumerate().skip(2) {
        let share = if considered == 0 { 0.0 } else { c as f64 / considered as f64 };
        writeln!(w, "{n}\t{c}\t{share:.4}").map_err(io)?;
        log::info!("top-{considered} n-grams of length {n}: {c} ({:.1}%)", 100.0 * share);
    }
    w.flush().map_err(io)?;
    log::info!("{} n-grams counted, {} kept, vocabulary {}", counts.num_ngrams(), table.len(), vocab.len());
    Ok(ExtractSummary { vocab_size: vocab.len(), counted: counts.num_ngrams(), kept: table.len(), histogram })
}

fn read_entities(path: &Path, vocab: &Vocabulary) -> Result<Vec<Ngram>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let ids: Option<Ngram> = tokenize(line).iter().map(|t| vocab.id(t)).collect();
        match ids {
            Some(g) => out.push(g),
            None => log::warn!("{}: entity {line:?} has out-of-vocabulary tokens; skipped", path.display()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainSummary> {
    let corpus_path = cfg.path("corpus")?;
    let docs = read_corpus(&corpus_path)?;
    if docs.is_empty() {
        return Err(Error::InvalidConfig(format!("{}: corpus is empty", corpus_path.display())));
    }
    let vocab = match cfg.path_opt("vocab")? {
        Some(p) => Vocabulary::read_tsv(p)?,
        None => build_vocabulary(&docs, cfg.get("vocab_min_count")?, cfg.get("max_vocab")?)?,
    };
    let table = NgramTable::read_tsv(cfg.path("ngrams")?, &vocab)?;
    let seed: u64 = cfg.get("seed")?;
    let config = EncoderConfig {
        vocab_size: vocab.len(),
        d_model: cfg.get("d_model")?,
        n_heads: cfg.get("n_heads")?,
        n_layers: cfg.get("n_layers")?,
        d_ff: cfg.get("d_ff")?,
        max_len: cfg.get("max_len")?,
        dropout: cfg.get("dropout")?,
        seed,
    };
    config.validate()?;
    let max_tokens = config.max_len - 2;
    let mut truncated = 0usize;
    let data: Vec<TrainingExample> = docs
        .iter()
        .map(|d| {
            let mut seq = vocab.encode(&d.tokens);
            truncated += seq.truncate(max_tokens) as usize;
            TrainingExample { annotation: mark_sequence(&seq, &table), seq }
        })
        .collect();
    if truncated > 0 {
        log::warn!("{truncated} documents truncated to {max_tokens} tokens");
    }
    let batch_size: usize = cfg.get("batch_size")?;
    let mut total_steps: u64 = cfg.get("total_steps")?;
    if total_steps == 0 {
        total_steps = data.len().div_ceil(batch_size.max(1)) as u64;
    }
    let settings = TrainSettings {
        step: StepSettings {
            mask_rate: cfg.get("mask_rate")?,
            pooling: cfg.get("pooling_for_misad")?,
            objective: cfg.get::<Objective>("objective")?,
            seed,
        },
        peak_lr: cfg.get("peak_lr")?,
        total_steps,
        warmup_fraction: cfg.get("warmup_fraction")?,
        batch_size,
    };
    let log_every: u64 = cfg.get::<u64>("log_every")?.max(1);
    let marked = data.iter().filter(|e| !e.annotation.is_empty()).count();
    log::info!(
        "{} documents ({} with n-gram spans), vocabulary {}, {} parameters, {} steps",
        data.len(),
        marked,
        vocab.len(),
        config.num_parameters(),
        total_steps
    );
    let mut params = EncoderParams::<f32>::init(&config)?;
    let rows = train(&data, &mut params, &config, &settings, |row| {
        if row.step % log_every == 0 || row.step == total_steps {
            log::info!("{}", row.tsv());
        }
    })?;
    write_metrics_file(&out.join(METRICS_FILE), &rows)?;
    save_checkpoint(&params, &config, out.join(CHECKPOINT_FILE))?;
    vocab.write_tsv(out.join(VOCAB_FILE))?;
    let loss = |r: Option<&MetricsRow>| r.map_or(0.0, |r| r.report.l_total);
    Ok(TrainSummary { steps: total_steps, initial_loss: loss(rows.first()), final_loss: loss(rows.last()) })
}

fn write_metrics_file(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = create(path)?;
    write_metrics(&mut w, rows).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn load_encoder_embedder(cfg: &RunConfig) -> Result<EncoderEmbedder> {
    let checkpoint = cfg.path("checkpoint")?;
    let vocab_path = match cfg.path_opt("vocab")? {
        Some(p) => p,
        None => checkpoint.with_file_name(VOCAB_FILE),
    };
    let (config, params) = load_checkpoint(&checkpoint)?;
    let vocab = Vocabulary::read_tsv(&vocab_path)?;
    EncoderEmbedder::new(Encoder { config, params }, vocab, cfg.get::<Pooling>("pooling")?)
}

/// The checkpoint or word-vector embedder named by the config.
fn load_embedder(cfg: &RunConfig) -> Result<Box<dyn Embedder>> {
    match (cfg.raw("checkpoint"), cfg.raw("vectors")) {
        (Some(_), None) => Ok(Box::new(load_encoder_embedder(cfg)?)),
        (None, Some(_)) => Ok(Box::new(BowEmbedder::read(cfg.path("vectors")?)?)),
        _ => Err(Error::InvalidConfig("exactly one of checkpoint and vectors must be set".into())),
    }
}

pub fn cmd_eval_analogy(cfg: &RunConfig, out: &Path) -> Result<AnalogyReport> {
    let questions = read_analogies(cfg.path("dataset")?)?;
    let embedder = load_embedder(cfg)?;
    let report = evaluate_analogy(&questions, embedder.as_ref())?;
    let path = out.join(ANALOGY_REPORT);
    let mut w = create(&path)?;
    report.write_tsv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.1}", 100.0 * v));
    log::info!(
        "{} questions: sem {} syn {} avg {}",
        questions.len(),
        pct(report.semantic()),
        pct(report.syntactic()),
        pct(report.average())
    );
    Ok(report)
}

pub fn cmd_eval_retrieval(cfg: &RunConfig, out: &Path) -> Result<RetrievalReport> {
    let backend = cfg.raw("backend").unwrap_or("");
    if !BACKENDS.contains(&backend) {
        return Err(Error::InvalidConfig(format!(
            "unknown backend {backend:?} (valid backends: {})",
            BACKENDS.join(", ")
        )));
    }
    let set = RetrievalSet::read(cfg.path("corpus")?, cfg.path("queries")?)?;
    let ks: Vec<usize> = cfg
        .raw("ks")
        .unwrap_or("")
        .split(',')
        .map(|k| k.trim().parse().map_err(|_| Error::InvalidConfig(format!("key \"ks\": bad cutoff {k:?}"))))
        .collect::<Result<_>>()?;
    let ids = set.ids();
    let depth = ks.iter().copied().max().unwrap_or(0);
    let rankings: Vec<Vec<u64>> = if backend == "bm25" {
        let docs: Vec<Vec<String>> = set.corpus.iter().map(|(_, t)| tokenize(t)).collect();
        let (k1, b) = (cfg.get("bm25_k1")?, cfg.get("bm25_b")?);
        set.queries
            .iter()
            .map(|(q, _)| bm25_rank(&tokenize(q), &docs, &ids, k1, b).into_iter().take(depth).collect())
            .collect()
    } else {
        let embedder: Box<dyn Embedder> = if backend == "checkpoint" {
            if cfg.raw("vectors").is_some() {
                log::warn!("vectors is ignored by the checkpoint backend");
            }
            Box::new(load_encoder_embedder(cfg)?)
        } else {
            Box::new(BowEmbedder::read(cfg.path("vectors")?)?)
        };
        let texts: Vec<&str> = set.corpus.iter().map(|(_, t)| t.as_str()).collect();
        let matrix = embed_corpus(&texts, embedder.as_ref())?;
        let queries: Vec<&str> = set.queries.iter().map(|(q, _)| q.as_str()).collect();
        let qm = embed_corpus(&queries, embedder.as_ref())?;
        (0..qm.rows).map(|i| retrieve_topk(qm.row(i), &matrix, &ids, depth)).collect()
    };
    let width: usize = cfg.get("bucket_width")?;
    let lengths: Vec<usize> = set.queries.iter().map(|(q, _)| tokenize(q).len()).collect();
    let report = RetrievalReport::build(&rankings, &set.gold_sets(), &ks, Some((&lengths, width)))?;
    let path = out.join(RETRIEVAL_REPORT);
    let mut w = create(&path)?;
    report.write_tsv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    if let Some((_, n, acc)) = report.rows.first() {
        let shown: Vec<String> = ks.iter().zip(acc).map(|(k, a)| format!("top{k} {:.1}", 100.0 * a)).collect();
        log::info!("{backend}: {n} queries, {}", shown.join(", "));
    }
    Ok(report)
}

pub fn cmd_embed(cfg: &RunConfig, out: &Path) -> Result<usize> {
    let texts_path = cfg.path("texts")?;
    let text = fs::read_to_string(&texts_path).map_err(|e| Error::io(&texts_path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    let embedder = load_encoder_embedder(cfg)?;
    let m = embed_corpus(&lines, &embedder)?;
    let path = out.join(VECTORS_FILE);
    let mut w = create(&path)?;
    for i in 0..m.rows {
        let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", row.join(" ")).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    log::info!("{} vectors of dimension {} written", m.rows, m.dim);
    Ok(m.rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags_into_overrides() {
        let cli = Cli::try_parse_from([
            "ulr", "extract-ngrams", "--corpus", "c.txt", "--threshold", "inf", "--set", "top_k=5", "--out", "o",
        ])
        .unwrap();
        let (name, _, common, flags) = cli.command.parts();
        assert_eq!(name, "extract-ngrams");
        assert_eq!(common.set, vec!["top_k=5".to_string()]);
        assert!(flags.contains(&("threshold", Some(&"inf".to_string()))));
    }

    #[test]
    fn every_command_declares_seed() {
        for keys in [EXTRACT_KEYS, TRAIN_KEYS, ANALOGY_KEYS, RETRIEVAL_KEYS, EMBED_KEYS] {
            assert!(keys.iter().any(|k| k.name == "seed"));
        }
    }

    #[test]
    fn unknown_backend_lists_valid_ones() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::resolve("eval-retrieval", RETRIEVAL_KEYS, None, &[("backend".into(), "dense".into())])
            .unwrap();
        let err = cmd_eval_retrieval(&cfg, dir.path()).unwrap_err().to_string();
        assert!(err.contains("checkpoint, vectors, bm25"), "{err}");
    }
}
