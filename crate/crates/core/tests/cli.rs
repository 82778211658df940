use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ulr_core::corpus::Vocabulary;
use ulr_core::encoder::{load_checkpoint, Encoder, Pooling};
use ulr_core::evaluation::{embed_corpus, EncoderEmbedder};

const CORPUS: &str = "\
new york is a big city
i moved to new york last year
the city of new york never sleeps
los angeles is far from new york
she flew from los angeles to new york
los angeles has warm weather
the weather in new york is cold
a big city like los angeles
";

fn ulr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ulr")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the corpus and runs extract-ngrams and a short training run.
/// Returns (corpus, extract dir, train dir).
fn trained(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let corpus = dir.join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let ex = dir.join("ex");
    let o = ulr(&["extract-ngrams", "--corpus", s(&corpus), "--set", "vocab_min_count=1", "--out", s(&ex)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tr = dir.join("tr");
    let o = ulr(&[
        "train",
        "--corpus",
        s(&corpus),
        "--ngrams",
        s(&ex.join("ngrams.tsv")),
        "--vocab",
        s(&ex.join("vocab.tsv")),
        "--total-steps",
        "10",
        "--set",
        "d_model=16",
        "--set",
        "n_heads=2",
        "--set",
        "d_ff=32",
        "--set",
        "max_len=16",
        "--set",
        "batch_size=4",
        "--set",
        "log_every=1",
        "--set",
        "peak_lr=1e-3",
        "--seed",
        "3",
        "--out",
        s(&tr),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    (corpus, ex, tr)
}

#[test]
fn unknown_key_is_rejected_with_valid_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = ulr(&["extract-ngrams", "--set", "treshold=1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("treshold"), "{err}");
    assert!(err.contains("threshold"), "{err}");

    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "# comment\nmax_n = 4\nbogus = 1\n").unwrap();
    let o = ulr(&["extract-ngrams", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn empty_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("empty.txt");
    fs::write(&corpus, "\n\n").unwrap();
    let o = ulr(&["extract-ngrams", "--corpus", s(&corpus), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
}

#[test]
fn infinite_threshold_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let out = dir.path().join("o");
    let o = ulr(&["extract-ngrams", "--corpus", s(&corpus), "--threshold", "inf", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("ngrams.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# total_tokens="));
    assert!(lines[1..].iter().all(|l| l.starts_with('#') || l.starts_with("ngram\t")), "{table}");
}

#[test]
fn extraction_is_reproducible_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = ulr(&["extract-ngrams", "--corpus", s(&corpus), "--threads", threads, "--max-n", "4", "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "3"));
    for f in ["ngrams.tsv", "vocab.tsv", "ngram_summary.tsv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let resolved = fs::read_to_string(a.join("config.resolved")).unwrap();
    assert!(resolved.lines().any(|l| l.replace(' ', "") == "max_n=4"), "{resolved}");
    assert!(fs::read_to_string(a.join("ngrams.tsv")).unwrap().contains("new york\t"));
}

#[test]
fn train_logs_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, tr) = trained(dir.path());
    let metrics = fs::read_to_string(tr.join("metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 11, "{metrics}");
    assert!(tr.join("model.ulrm").exists());
}

#[test]
fn embed_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ex, tr) = trained(dir.path());
    let texts = ["new york is big", "los angeles", "new york is big", "unseenword"];
    let texts_path = dir.path().join("texts.txt");
    fs::write(&texts_path, texts.join("\n") + "\n").unwrap();
    let out = dir.path().join("emb");
    let o = ulr(&[
        "embed",
        "--checkpoint",
        s(&tr.join("model.ulrm")),
        "--set",
        &format!("vocab={}", s(&ex.join("vocab.tsv"))),
        "--texts",
        s(&texts_path),
        "--pooling",
        "cls",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<Vec<f64>> = fs::read_to_string(out.join("vectors.txt"))
        .unwrap()
        .lines()
        .map(|l| l.split(' ').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), texts.len());
    assert_eq!(rows[0], rows[2]);

    let (config, params) = load_checkpoint(tr.join("model.ulrm")).unwrap();
    let vocab = Vocabulary::read_tsv(ex.join("vocab.tsv")).unwrap();
    let embedder = EncoderEmbedder::new(Encoder { config, params }, vocab, Pooling::Cls).unwrap();
    let m = embed_corpus(&texts, &embedder).unwrap();
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.as_slice(), m.row(i));
    }
}

#[test]
fn self_retrieval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ex, tr) = trained(dir.path());
    let lines: Vec<&str> = CORPUS.lines().collect();
    let corpus_tsv = dir.path().join("corpus.tsv");
    let queries = dir.path().join("queries.tsv");
    let tsv: String = lines.iter().enumerate().map(|(i, l)| format!("{}\t{l}\n", 100 + i)).collect();
    let q: String = lines.iter().enumerate().map(|(i, l)| format!("{l}\t{}\n", 100 + i)).collect();
    fs::write(&corpus_tsv, tsv).unwrap();
    fs::write(&queries, q).unwrap();
    let out = dir.path().join("ret");
    let o = ulr(&[
        "eval-retrieval",
        "--checkpoint",
        s(&tr.join("model.ulrm")),
        "--set",
        &format!("vocab={}", s(&ex.join("vocab.tsv"))),
        "--corpus",
        s(&corpus_tsv),
        "--queries",
        s(&queries),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("retrieval_report.tsv")).unwrap();
    let all = report.lines().nth(1).unwrap();
    assert_eq!(all.split('\t').nth(2), Some("1.000000"), "{report}");
}

#[test]
fn bm25_backend_and_unknown_backend() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    let queries = dir.path().join("queries.tsv");
    fs::write(&corpus, "1\tthe cat sat\n2\tthe dog ran fast\n").unwrap();
    fs::write(&queries, "cat the\t1\nfast dog\t2\nthe\t2\n").unwrap();
    let run = |backend: &str, out: &Path| {
        ulr(&[
            "eval-retrieval",
            "--backend",
            backend,
            "--corpus",
            s(&corpus),
            "--queries",
            s(&queries),
            "--set",
            "ks=1,2",
            "--out",
            s(out),
        ])
    };
    let out = dir.path().join("bm25");
    let o = run("bm25", &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("retrieval_report.tsv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split('\t').collect();
    // "the" alone scores the shorter document higher, so the third query misses at top 1
    assert_eq!(&row[1..], ["3", "0.666667", "1.000000"], "{report}");

    let o = run("word2vec", &dir.path().join("x"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("word2vec") && err.contains("bm25"), "{err}");
}

#[test]
fn analogy_with_exact_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("vectors.txt");
    fs::write(
        &vectors,
        "5 3\nman 1 0 0\nwoman 1 1 0\nking 1 0 1\nqueen 1 1 1\nprince 0 0 1\n",
    )
    .unwrap();
    let dataset = dir.path().join("analogy.tsv");
    fs::write(
        &dataset,
        "family\tman\twoman\tking\tprince|queen\t1\n\
         family\tman\tking\twoman\tqueen|prince|man\t0\n",
    )
    .unwrap();
    let out = dir.path().join("an");
    let o = ulr(&["eval-analogy", "--vectors", s(&vectors), "--dataset", s(&dataset), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("analogy_report.tsv")).unwrap();
    assert!(report.lines().any(|l| l == "family\t2\t2\t1.000000"), "{report}");
}
