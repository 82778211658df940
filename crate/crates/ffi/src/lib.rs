//! C interface to `ulr-core`.
//!
//! Functions return a [`UlrStatus`]; on failure a message is available from
//! [`ulr_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their `_free` function. Output values are written only
//! on success.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ulr_core::corpus::{tokenize, Vocabulary};
use ulr_core::encoder::{load_checkpoint, Encoder, Pooling};
use ulr_core::evaluation::{answer_from_vectors, BowEmbedder, Embedder, EncoderEmbedder};
use ulr_core::ngram::{pmi_from_counts, NgramTable};
use ulr_core::Error;

pub const ULR_POOLING_CLS: c_int = 0;
pub const ULR_POOLING_MEAN: c_int = 1;
pub const ULR_POOLING_MAX: c_int = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UlrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Checkpoint = 6,
    Degenerate = 7,
    BufferTooSmall = 8,
    NotFound = 9,
    Panic = 10,
}

/// A text embedder: a trained checkpoint or averaged word vectors.
pub struct UlrEmbedder {
    inner: Box<dyn Embedder + Send>,
}

/// An n-gram table together with the vocabulary its ids refer to.
pub struct UlrNgramTable {
    table: NgramTable,
    vocab: Vocabulary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(UlrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => UlrStatus::Io,
            Error::Parse { .. } => UlrStatus::Parse,
            Error::BadMagic | Error::Checkpoint(_) => UlrStatus::Checkpoint,
            Error::DegenerateEmbedding => UlrStatus::Degenerate,
            Error::UnseenNgram(_) => UlrStatus::NotFound,
            _ => UlrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: UlrStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UlrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            UlrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UlrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(UlrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(UlrStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(UlrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(UlrStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn pooling(code: c_int) -> Result<Pooling, Failure> {
    match code {
        ULR_POOLING_CLS => Ok(Pooling::Cls),
        ULR_POOLING_MEAN => Ok(Pooling::Mean),
        ULR_POOLING_MAX => Ok(Pooling::Max),
        other => Err(fail(UlrStatus::InvalidArgument, format!("unknown pooling code {other}"))),
    }
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn ulr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Length-normalized PMI of an n-gram from its joint count, the counts of
/// its `n` tokens, and the corpus size.
///
/// # Safety
/// `unigram_counts` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ulr_pmi(
    joint: u64,
    unigram_counts: *const u64,
    n: usize,
    total: u64,
    out: *mut f64,
) -> UlrStatus {
    guard(|| {
        non_null(out, "out")?;
        let counts = slice_arg(unigram_counts, n, "unigram_counts")?;
        *out = pmi_from_counts(joint, counts, total)?;
        Ok(())
    })
}

/// Index of the candidate maximizing cosine(c + b - a, candidate); the
/// lowest index wins ties. All vectors have `dim` entries; `candidates` is
/// row-major `n_candidates x dim`.
///
/// # Safety
/// Each pointer must reference the stated number of readable values, and
/// `out_index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ulr_analogy_answer(
    a: *const f64,
    b: *const f64,
    c: *const f64,
    candidates: *const f64,
    n_candidates: usize,
    dim: usize,
    out_index: *mut usize,
) -> UlrStatus {
    guard(|| {
        non_null(out_index, "out_index")?;
        if dim == 0 || n_candidates == 0 {
            return Err(fail(UlrStatus::InvalidArgument, "dim and n_candidates must be positive"));
        }
        let a = slice_arg(a, dim, "a")?;
        let b = slice_arg(b, dim, "b")?;
        let c = slice_arg(c, dim, "c")?;
        let flat = slice_arg(candidates, n_candidates * dim, "candidates")?;
        let rows: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        *out_index = answer_from_vectors(a, b, c, &rows);
        Ok(())
    })
}

/// Opens a checkpoint with its vocabulary file. `pooling_code` is one of the
/// `ULR_POOLING_*` constants.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ulr_embedder_open_checkpoint(
    checkpoint_path: *const c_char,
    vocab_path: *const c_char,
    pooling_code: c_int,
    out: *mut *mut UlrEmbedder,
) -> UlrStatus {
    guard(|| {
        non_null(out, "out")?;
        let checkpoint = PathBuf::from(str_arg(checkpoint_path, "checkpoint_path")?);
        let vocab = PathBuf::from(str_arg(vocab_path, "vocab_path")?);
        let pooling = pooling(pooling_code)?;
        let (config, params) = load_checkpoint(&checkpoint)?;
        let vocab = Vocabulary::read_tsv(&vocab)?;
        let inner = EncoderEmbedder::new(Encoder { config, params }, vocab, pooling)?;
        *out = Box::into_raw(Box::new(UlrEmbedder { inner: Box::new(inner) }));
        Ok(())
    })
}

/// Opens a word-vector file; texts are embedded as the mean of their known
/// words' vectors.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ulr_embedder_open_vectors(path: *const c_char, out: *mut *mut UlrEmbedder) -> UlrStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = BowEmbedder::read(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(UlrEmbedder { inner: Box::new(inner) }));
        Ok(())
    })
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `embedder` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ulr_embedder_dim(embedder: *const UlrEmbedder) -> usize {
    embedder.as_ref().map_or(0, |e| e.inner.dim())
}

/// Writes the unit-norm embedding of `text` into `out`, which holds `len`
/// values. `len` must be at least the embedder's dimension.
///
/// # Safety
/// `embedder` must be a live handle, `text` a NUL-terminated string and
/// `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ulr_embedder_embed(
    embedder: *const UlrEmbedder,
    text: *const c_char,
    out: *mut f64,
    len: usize,
) -> UlrStatus {
    guard(|| {
        let e = embedder.as_ref().ok_or_else(|| fail(UlrStatus::NullPointer, "embedder is null"))?;
        let text = str_arg(text, "text")?;
        non_null(out, "out")?;
        let dim = e.inner.dim();
        if len < dim {
            return Err(fail(UlrStatus::BufferTooSmall, format!("buffer holds {len} values, need {dim}")));
        }
        let v = e.inner.embed(text)?;
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v);
        Ok(())
    })
}

/// # Safety
/// `embedder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ulr_embedder_free(embedder: *mut UlrEmbedder) {
    if !embedder.is_null() {
        drop(Box::from_raw(embedder));
    }
}

/// Reads an n-gram table file and the vocabulary it was written with.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ulr_ngram_table_open(
    table_path: *const c_char,
    vocab_path: *const c_char,
    out: *mut *mut UlrNgramTable,
) -> UlrStatus {
    guard(|| {
        non_null(out, "out")?;
        let table_path = str_arg(table_path, "table_path")?;
        let vocab = Vocabulary::read_tsv(str_arg(vocab_path, "vocab_path")?)?;
        let table = NgramTable::read_tsv(table_path, &vocab)?;
        *out = Box::into_raw(Box::new(UlrNgramTable { table, vocab }));
        Ok(())
    })
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ulr_ngram_table_len(table: *const UlrNgramTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.len())
}

/// Looks up the n-gram spelled by `text` (tokenized like the corpus) and
/// writes its PMI and count. Returns `ULR_STATUS_NOT_FOUND` when absent.
///
/// # Safety
/// `table` must be a live handle, `text` a NUL-terminated string, and both
/// outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ulr_ngram_table_lookup(
    table: *const UlrNgramTable,
    text: *const c_char,
    out_pmi: *mut f64,
    out_count: *mut u64,
) -> UlrStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| fail(UlrStatus::NullPointer, "table is null"))?;
        let text = str_arg(text, "text")?;
        non_null(out_pmi, "out_pmi")?;
        non_null(out_count, "out_count")?;
        let ids: Option<Vec<u32>> = tokenize(text).iter().map(|w| t.vocab.id(w)).collect();
        let entry = ids
            .and_then(|ids| t.table.get(&ids).copied())
            .ok_or_else(|| fail(UlrStatus::NotFound, format!("n-gram {text:?} not in table")))?;
        *out_pmi = entry.pmi;
        *out_count = entry.count;
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ulr_ngram_table_free(table: *mut UlrNgramTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}
