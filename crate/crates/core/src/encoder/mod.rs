//! A small BERT-shaped transformer encoder with hand-written backward passes.
//!
//! Post-layer-norm blocks, tanh-GELU, learned positions, no segment
//! embeddings. The MLM output projection is tied to the token embeddings.
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking.

pub mod checkpoint;
pub mod linalg;
pub mod model;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use linalg::Scalar;
pub use model::{
    backward_sequence, forward_sequence, mlm_head, mlm_nll_backward, pool_backward, pool_sequence, HeadCache, Mode,
    Pooling, SeqCache,
};
pub use params::{EncoderConfig, EncoderParams, LayerParams, Tensor};

use crate::corpus::{frame, CLS_ID, PAD_ID, SEP_ID};
use crate::error::{Error, Result};
use crate::rng;

/// Right-padded batch of framed sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// B x L token ids.
    pub ids: Vec<u32>,
    /// B x L, 1 for real tokens.
    pub mask: Vec<u8>,
    pub lengths: Vec<usize>,
    pub seq_len: usize,
}

impl Batch {
    /// Pads framed sequences (`[CLS] .. [SEP]`) to the longest one.
    pub fn from_framed(seqs: &[Vec<u32>]) -> Result<Self> {
        Self::padded_to(seqs, seqs.iter().map(Vec::len).max().unwrap_or(0))
    }

    pub fn padded_to(seqs: &[Vec<u32>], seq_len: usize) -> Result<Self> {
        let mut ids = Vec::with_capacity(seqs.len() * seq_len);
        let mut mask = Vec::with_capacity(seqs.len() * seq_len);
        for s in seqs {
            if s.len() < 2 || s[0] != CLS_ID || s[s.len() - 1] != SEP_ID {
                return Err(Error::Invalid("batch rows must start with [CLS] and end with [SEP]".into()));
            }
            if s.len() > seq_len {
                return Err(Error::Invalid(format!("row of length {} exceeds padded length {seq_len}", s.len())));
            }
            ids.extend_from_slice(s);
            ids.extend(std::iter::repeat(PAD_ID).take(seq_len - s.len()));
            mask.extend(std::iter::repeat(1).take(s.len()));
            mask.extend(std::iter::repeat(0).take(seq_len - s.len()));
        }
        Ok(Batch { ids, mask, lengths: seqs.iter().map(Vec::len).collect(), seq_len })
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn row(&self, b: usize) -> &[u32] {
        &self.ids[b * self.seq_len..(b + 1) * self.seq_len]
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput<F> {
    /// B x L x d
    pub hidden: Vec<F>,
    /// B x d pooler outputs.
    pub pooled: Vec<F>,
    pub caches: Vec<SeqCache<F>>,
}

pub fn forward<F: Scalar>(
    batch: &Batch,
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    mode: Mode,
) -> Result<BatchOutput<F>> {
    let d = config.d_model;
    let mut out = BatchOutput {
        hidden: Vec::with_capacity(batch.batch_size() * batch.seq_len * d),
        pooled: Vec::with_capacity(batch.batch_size() * d),
        caches: Vec::with_capacity(batch.batch_size()),
    };
    for b in 0..batch.batch_size() {
        let row_mode = match mode {
            Mode::Eval => Mode::Eval,
            Mode::Train { key } => Mode::Train { key: rng::hash_key(&[key, b as u64]) },
        };
        let cache = forward_sequence(params, config, batch.row(b), batch.lengths[b], row_mode)?;
        out.hidden.extend_from_slice(&cache.hidden);
        out.pooled.extend_from_slice(&cache.pooled);
        out.caches.push(cache);
    }
    Ok(out)
}

/// Pools `hidden` (B x L x d) over positions where `mask` is 1. The `cls`
/// strategy applies the pooler to position 0.
pub fn pool<F: Scalar>(
    hidden: &[F],
    mask: &[u8],
    seq_len: usize,
    strategy: Pooling,
    params: &EncoderParams<F>,
    config: &EncoderConfig,
) -> Result<Vec<F>> {
    let d = config.d_model;
    let b = mask.len() / seq_len;
    let mut out = Vec::with_capacity(b * d);
    for r in 0..b {
        let m = &mask[r * seq_len..(r + 1) * seq_len];
        let rows = &hidden[r * seq_len * d..(r + 1) * seq_len * d];
        let real: Vec<usize> = (0..seq_len).filter(|&t| m[t] != 0).collect();
        if real.is_empty() {
            return Err(Error::Invalid(format!("row {r} has an all-zero mask")));
        }
        match strategy {
            Pooling::Cls => {
                let pre = linalg::affine(&rows[..d], &params.pooler_w.data, &params.pooler_b.data, 1, d, d);
                out.extend(pre.into_iter().map(F::tanh));
            }
            Pooling::Mean => {
                let inv = F::one() / F::c(real.len() as f64);
                for i in 0..d {
                    out.push(real.iter().map(|&t| rows[t * d + i]).sum::<F>() * inv);
                }
            }
            Pooling::Max => {
                for i in 0..d {
                    out.push(real.iter().map(|&t| rows[t * d + i]).fold(F::neg_infinity(), F::max));
                }
            }
        }
    }
    Ok(out)
}

/// B x L x V log-probabilities of the MLM head at every position.
pub fn mlm_log_probs<F: Scalar>(hidden: &[F], seq_len: usize, params: &EncoderParams<F>, config: &EncoderConfig) -> Vec<F> {
    let d = config.d_model;
    let b = hidden.len() / (seq_len * d);
    let positions: Vec<usize> = (0..seq_len).collect();
    let mut out = Vec::with_capacity(b * seq_len * config.vocab_size);
    for r in 0..b {
        let head = mlm_head(params, config, &hidden[r * seq_len * d..(r + 1) * seq_len * d], &positions);
        out.extend_from_slice(&head.log_probs);
    }
    out
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize<F: Scalar>(v: &[F]) -> Result<Vec<F>> {
    let norm = v.iter().map(|&x| x * x).sum::<F>().sqrt();
    if !(norm > F::zero()) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    Ok(v.iter().map(|&x| x / norm).collect())
}

/// Parameters plus configuration, with a convenience embedding call.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<F> {
    pub config: EncoderConfig,
    pub params: EncoderParams<F>,
}

impl<F: Scalar> Encoder<F> {
    pub fn init(config: EncoderConfig) -> Result<Self> {
        Ok(Encoder { params: EncoderParams::init(&config)?, config })
    }

    /// Largest number of unframed tokens the encoder accepts.
    pub fn max_tokens(&self) -> usize {
        self.config.max_len - 2
    }

    /// Unit-norm pooled embedding of unframed token ids, in eval mode.
    pub fn embed(&self, ids: &[u32], strategy: Pooling) -> Result<Vec<F>> {
        let framed = frame(ids);
        let cache = forward_sequence(&self.params, &self.config, &framed, framed.len(), Mode::Eval)?;
        normalize(&pool_sequence(&cache, self.config.d_model, strategy))
    }
}
