//! Forward and backward passes of a post-layer-norm transformer encoder.
//!
//! Each sequence is processed on its own. Positions at or beyond a
//! sequence's real length are padding: they are excluded as attention keys
//! (equivalent to a -inf logit), so real positions never depend on them.

use super::linalg::{
    affine, affine_backward, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, log_softmax_in_place, LnCache,
    Scalar,
};
use super::params::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::rng;

/// Dropout is active only in `Train`; `key` selects the dropout stream
/// (callers derive it from seed, step and example).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { key: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pooling {
    /// tanh(affine(hidden at position 0))
    Cls,
    Mean,
    Max,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cls" => Ok(Pooling::Cls),
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            other => Err(Error::Invalid(format!("unknown pooling {other:?} (expected cls, mean or max)"))),
        }
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pooling::Cls => "cls",
            Pooling::Mean => "mean",
            Pooling::Max => "max",
        })
    }
}

#[derive(Debug, Clone)]
struct LayerCache<F> {
    x: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// heads x L x n_real
    probs: Vec<F>,
    ctx: Vec<F>,
    attn_drop: Option<Vec<F>>,
    ln1: LnCache<F>,
    h1: Vec<F>,
    ff_pre: Vec<F>,
    ff_act: Vec<F>,
    ff_drop: Option<Vec<F>>,
    ln2: LnCache<F>,
}

/// Activations of one sequence, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SeqCache<F> {
    ids: Vec<u32>,
    n_real: usize,
    emb_ln: LnCache<F>,
    emb_drop: Option<Vec<F>>,
    layers: Vec<LayerCache<F>>,
    /// L x d final hidden states.
    pub hidden: Vec<F>,
    /// Pooler output tanh(W h_0 + b).
    pub pooled: Vec<F>,
}

impl<F: Scalar> SeqCache<F> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    /// Attention weights of one head, `L x n_real`, row-major.
    pub fn attention(&self, layer: usize, head: usize) -> &[F] {
        let l = self.ids.len();
        let n = self.n_real;
        &self.layers[layer].probs[head * l * n..(head + 1) * l * n]
    }

    pub fn hidden_row(&self, pos: usize, d: usize) -> &[F] {
        &self.hidden[pos * d..(pos + 1) * d]
    }
}

const SITE_EMB: u64 = 0;

fn dropout_mask<F: Scalar>(mode: Mode, rate: f32, site: u64, len: usize) -> Option<Vec<F>> {
    let Mode::Train { key } = mode else { return None };
    if rate <= 0.0 {
        return None;
    }
    let site_key = rng::hash_key(&[key, site]);
    let keep = F::c(1.0 / (1.0 - rate as f64));
    Some(
        (0..len as u64)
            .map(|i| if rng::unit_uniform(site_key, i) < rate as f64 { F::zero() } else { keep })
            .collect(),
    )
}

fn apply_mask<F: Scalar>(x: &mut [F], mask: &Option<Vec<F>>) {
    if let Some(m) = mask {
        for (v, &s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

/// Runs the encoder over one framed sequence. `ids.len()` is the padded
/// length L; only the first `n_real` positions act as attention keys.
pub fn forward_sequence<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    ids: &[u32],
    n_real: usize,
    mode: Mode,
) -> Result<SeqCache<F>> {
    let l = ids.len();
    let d = config.d_model;
    if l > config.max_len {
        return Err(Error::SequenceTooLong { len: l, max_len: config.max_len });
    }
    if n_real == 0 || n_real > l {
        return Err(Error::Invalid(format!("real length {n_real} must be in 1..={l}")));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= config.vocab_size) {
        return Err(Error::Invalid(format!("token id {bad} >= vocab size {}", config.vocab_size)));
    }

    let mut emb = vec![F::zero(); l * d];
    for (t, &id) in ids.iter().enumerate() {
        let tok = &params.token_emb.data[id as usize * d..(id as usize + 1) * d];
        let pos = &params.pos_emb.data[t * d..(t + 1) * d];
        for i in 0..d {
            emb[t * d + i] = tok[i] + pos[i];
        }
    }
    let (mut x, emb_ln) = layer_norm(&emb, &params.emb_ln_gain.data, &params.emb_ln_bias.data, d);
    let emb_drop = dropout_mask(mode, config.dropout, SITE_EMB, l * d);
    apply_mask(&mut x, &emb_drop);

    let heads = config.n_heads;
    let dh = config.head_dim();
    let scale = F::one() / F::c(dh as f64).sqrt();
    let mut layers = Vec::with_capacity(config.n_layers);
    for (li, lp) in params.layers.iter().enumerate() {
        let q = affine(&x, &lp.wq.data, &lp.bq.data, l, d, d);
        let k = affine(&x, &lp.wk.data, &lp.bk.data, l, d, d);
        let v = affine(&x, &lp.wv.data, &lp.bv.data, l, d, d);
        let mut probs = vec![F::zero(); heads * l * n_real];
        let mut ctx = vec![F::zero(); l * d];
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..l {
                let qi = &q[i * d..(i + 1) * d][cols.clone()];
                let row = &mut probs[(h * l + i) * n_real..(h * l + i + 1) * n_real];
                for (j, p) in row.iter_mut().enumerate() {
                    *p = dot(qi, &k[j * d..(j + 1) * d][cols.clone()]) * scale;
                }
                let max = row.iter().copied().fold(F::neg_infinity(), F::max);
                let mut sum = F::zero();
                for p in row.iter_mut() {
                    *p = (*p - max).exp();
                    sum += *p;
                }
                for p in row.iter_mut() {
                    *p /= sum;
                }
                let out = &mut ctx[i * d + h * dh..i * d + (h + 1) * dh];
                for (j, &p) in row.iter().enumerate() {
                    for (o, &vv) in out.iter_mut().zip(&v[j * d + h * dh..j * d + (h + 1) * dh]) {
                        *o += p * vv;
                    }
                }
            }
        }
        let mut a = affine(&ctx, &lp.wo.data, &lp.bo.data, l, d, d);
        let attn_drop = dropout_mask(mode, config.dropout, 1 + 2 * li as u64, l * d);
        apply_mask(&mut a, &attn_drop);
        for (ai, &xi) in a.iter_mut().zip(&x) {
            *ai += xi;
        }
        let (h1, ln1) = layer_norm(&a, &lp.ln1_gain.data, &lp.ln1_bias.data, d);

        let ff = config.d_ff;
        let ff_pre = affine(&h1, &lp.w1.data, &lp.b1.data, l, d, ff);
        let ff_act: Vec<F> = ff_pre.iter().map(|&u| gelu(u)).collect();
        let mut f2 = affine(&ff_act, &lp.w2.data, &lp.b2.data, l, ff, d);
        let ff_drop = dropout_mask(mode, config.dropout, 2 + 2 * li as u64, l * d);
        apply_mask(&mut f2, &ff_drop);
        for (fi, &hi) in f2.iter_mut().zip(&h1) {
            *fi += hi;
        }
        let (out, ln2) = layer_norm(&f2, &lp.ln2_gain.data, &lp.ln2_bias.data, d);

        layers.push(LayerCache { x, q, k, v, probs, ctx, attn_drop, ln1, h1, ff_pre, ff_act, ff_drop, ln2 });
        x = out;
    }

    let pooled: Vec<F> = affine(&x[..d], &params.pooler_w.data, &params.pooler_b.data, 1, d, d)
        .into_iter()
        .map(F::tanh)
        .collect();

    Ok(SeqCache { ids: ids.to_vec(), n_real, emb_ln, emb_drop, layers, hidden: x, pooled })
}

/// Backpropagates `d_hidden` (L x d, gradient w.r.t. the final hidden
/// states) and optionally `d_pooled` (gradient w.r.t. the pooler output)
/// through one cached forward pass, accumulating into `grads`.
pub fn backward_sequence<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    cache: &SeqCache<F>,
    mut d_hidden: Vec<F>,
    d_pooled: Option<&[F]>,
    grads: &mut EncoderParams<F>,
) {
    let l = cache.ids.len();
    let d = config.d_model;
    let n_real = cache.n_real;
    assert_eq!(d_hidden.len(), l * d);

    if let Some(dp) = d_pooled {
        let dpre: Vec<F> = dp.iter().zip(&cache.pooled).map(|(&g, &p)| g * (F::one() - p * p)).collect();
        affine_backward(
            &dpre,
            &cache.hidden[..d],
            &params.pooler_w.data,
            &mut grads.pooler_w.data,
            &mut grads.pooler_b.data,
            Some(&mut d_hidden[..d]),
            1,
            d,
            d,
        );
    }

    let heads = config.n_heads;
    let dh = config.head_dim();
    let scale = F::one() / F::c(dh as f64).sqrt();
    let ff = config.d_ff;
    let mut dx = d_hidden;
    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let lg = &mut grads.layers[li];

        let d_r2 = layer_norm_backward(&dx, &lc.ln2, &lp.ln2_gain.data, &mut lg.ln2_gain.data, &mut lg.ln2_bias.data, d);
        let mut d_h1 = d_r2.clone();
        let mut d_f2 = d_r2;
        apply_mask(&mut d_f2, &lc.ff_drop);
        let mut d_act = vec![F::zero(); l * ff];
        affine_backward(&d_f2, &lc.ff_act, &lp.w2.data, &mut lg.w2.data, &mut lg.b2.data, Some(&mut d_act), l, ff, d);
        for (g, &u) in d_act.iter_mut().zip(&lc.ff_pre) {
            *g *= gelu_grad(u);
        }
        affine_backward(&d_act, &lc.h1, &lp.w1.data, &mut lg.w1.data, &mut lg.b1.data, Some(&mut d_h1), l, d, ff);

        let d_r1 = layer_norm_backward(&d_h1, &lc.ln1, &lp.ln1_gain.data, &mut lg.ln1_gain.data, &mut lg.ln1_bias.data, d);
        let mut d_x = d_r1.clone();
        let mut d_a = d_r1;
        apply_mask(&mut d_a, &lc.attn_drop);
        let mut d_ctx = vec![F::zero(); l * d];
        affine_backward(&d_a, &lc.ctx, &lp.wo.data, &mut lg.wo.data, &mut lg.bo.data, Some(&mut d_ctx), l, d, d);

        let mut dq = vec![F::zero(); l * d];
        let mut dk = vec![F::zero(); l * d];
        let mut dv = vec![F::zero(); l * d];
        let mut dp = vec![F::zero(); n_real];
        for h in 0..heads {
            let c0 = h * dh;
            for i in 0..l {
                let probs = &lc.probs[(h * l + i) * n_real..(h * l + i + 1) * n_real];
                let dci = &d_ctx[i * d + c0..i * d + c0 + dh];
                let mut weighted = F::zero();
                for j in 0..n_real {
                    dp[j] = dot(dci, &lc.v[j * d + c0..j * d + c0 + dh]);
                    weighted += dp[j] * probs[j];
                    for (g, &c) in dv[j * d + c0..j * d + c0 + dh].iter_mut().zip(dci) {
                        *g += probs[j] * c;
                    }
                }
                for j in 0..n_real {
                    let ds = probs[j] * (dp[j] - weighted) * scale;
                    if ds == F::zero() {
                        continue;
                    }
                    for t in 0..dh {
                        dq[i * d + c0 + t] += ds * lc.k[j * d + c0 + t];
                        dk[j * d + c0 + t] += ds * lc.q[i * d + c0 + t];
                    }
                }
            }
        }
        affine_backward(&dq, &lc.x, &lp.wq.data, &mut lg.wq.data, &mut lg.bq.data, Some(&mut d_x), l, d, d);
        affine_backward(&dk, &lc.x, &lp.wk.data, &mut lg.wk.data, &mut lg.bk.data, Some(&mut d_x), l, d, d);
        affine_backward(&dv, &lc.x, &lp.wv.data, &mut lg.wv.data, &mut lg.bv.data, Some(&mut d_x), l, d, d);
        dx = d_x;
    }

    apply_mask(&mut dx, &cache.emb_drop);
    let d_emb = layer_norm_backward(
        &dx,
        &cache.emb_ln,
        &params.emb_ln_gain.data,
        &mut grads.emb_ln_gain.data,
        &mut grads.emb_ln_bias.data,
        d,
    );
    for (t, &id) in cache.ids.iter().enumerate() {
        let g = &d_emb[t * d..(t + 1) * d];
        for (dst, &v) in grads.token_emb.data[id as usize * d..(id as usize + 1) * d].iter_mut().zip(g) {
            *dst += v;
        }
        for (dst, &v) in grads.pos_emb.data[t * d..(t + 1) * d].iter_mut().zip(g) {
            *dst += v;
        }
    }
}

/// Pools one sequence's real positions into a single vector.
pub fn pool_sequence<F: Scalar>(cache: &SeqCache<F>, d: usize, strategy: Pooling) -> Vec<F> {
    let n = cache.n_real;
    match strategy {
        Pooling::Cls => cache.pooled.clone(),
        Pooling::Mean => {
            let mut out = vec![F::zero(); d];
            for t in 0..n {
                for (o, &h) in out.iter_mut().zip(cache.hidden_row(t, d)) {
                    *o += h;
                }
            }
            let inv = F::one() / F::c(n as f64);
            out.iter_mut().for_each(|v| *v *= inv);
            out
        }
        Pooling::Max => {
            let mut out = vec![F::neg_infinity(); d];
            for t in 0..n {
                for (o, &h) in out.iter_mut().zip(cache.hidden_row(t, d)) {
                    *o = o.max(h);
                }
            }
            out
        }
    }
}

/// Gradient of a pooled vector routed back to hidden states (mean, max) or
/// to the pooler output (cls). Returns `(d_hidden, d_pooled)`.
pub fn pool_backward<F: Scalar>(
    cache: &SeqCache<F>,
    d: usize,
    strategy: Pooling,
    d_out: &[F],
) -> (Vec<F>, Option<Vec<F>>) {
    let l = cache.len();
    let n = cache.n_real;
    let mut d_hidden = vec![F::zero(); l * d];
    match strategy {
        Pooling::Cls => return (d_hidden, Some(d_out.to_vec())),
        Pooling::Mean => {
            let inv = F::one() / F::c(n as f64);
            for t in 0..n {
                for (g, &v) in d_hidden[t * d..(t + 1) * d].iter_mut().zip(d_out) {
                    *g = v * inv;
                }
            }
        }
        Pooling::Max => {
            for i in 0..d {
                let best = (0..n)
                    .max_by(|&a, &b| cache.hidden[a * d + i].partial_cmp(&cache.hidden[b * d + i]).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a)))
                    .expect("at least one real position");
                d_hidden[best * d + i] = d_out[i];
            }
        }
    }
    (d_hidden, None)
}

/// MLM head activations for selected positions of one sequence.
#[derive(Debug, Clone)]
pub struct HeadCache<F> {
    pub positions: Vec<usize>,
    rows: Vec<F>,
    u: Vec<F>,
    ln: LnCache<F>,
    t: Vec<F>,
    /// positions x V log-probabilities.
    pub log_probs: Vec<F>,
}

/// `log_softmax(LN(GELU(h W + b)) E^T + b_out)` at `positions`.
pub fn mlm_head<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    hidden: &[F],
    positions: &[usize],
) -> HeadCache<F> {
    let d = config.d_model;
    let v = config.vocab_size;
    let p = positions.len();
    let mut rows = Vec::with_capacity(p * d);
    for &pos in positions {
        rows.extend_from_slice(&hidden[pos * d..(pos + 1) * d]);
    }
    let u = affine(&rows, &params.mlm_w.data, &params.mlm_b.data, p, d, d);
    let act: Vec<F> = u.iter().map(|&x| gelu(x)).collect();
    let (t, ln) = layer_norm(&act, &params.mlm_ln_gain.data, &params.mlm_ln_bias.data, d);
    let mut log_probs = Vec::with_capacity(p * v);
    for _ in 0..p {
        log_probs.extend_from_slice(&params.mlm_out_bias.data);
    }
    super::linalg::matmul_bt_add(&mut log_probs, &t, &params.token_emb.data, p, d, v);
    for row in log_probs.chunks_mut(v) {
        log_softmax_in_place(row);
    }
    HeadCache { positions: positions.to_vec(), rows, u, ln, t, log_probs }
}

/// Accumulates gradients of `weight * sum_r -log p(labels[r])` through the
/// head; hidden-state gradients go into `d_hidden` (L x d). Returns the
/// unweighted NLL sum.
pub fn mlm_nll_backward<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    head: &HeadCache<F>,
    labels: &[u32],
    weight: F,
    grads: &mut EncoderParams<F>,
    d_hidden: &mut [F],
) -> F {
    let d = config.d_model;
    let v = config.vocab_size;
    let p = head.positions.len();
    assert_eq!(labels.len(), p);
    let mut nll = F::zero();
    let mut d_logits = vec![F::zero(); p * v];
    for r in 0..p {
        let lp = &head.log_probs[r * v..(r + 1) * v];
        let y = labels[r] as usize;
        nll -= lp[y];
        for (g, &l) in d_logits[r * v..(r + 1) * v].iter_mut().zip(lp) {
            *g = weight * l.exp();
        }
        d_logits[r * v + y] -= weight;
    }
    for row in d_logits.chunks(v) {
        for (b, &g) in grads.mlm_out_bias.data.iter_mut().zip(row) {
            *b += g;
        }
    }
    // logits = t E^T: dE += d_logits^T t, dt = d_logits E
    super::linalg::matmul_at_add(&mut grads.token_emb.data, &d_logits, &head.t, p, v, d);
    let mut dt = vec![F::zero(); p * d];
    super::linalg::matmul_add(&mut dt, &d_logits, &params.token_emb.data, p, v, d);
    let mut d_act = layer_norm_backward(
        &dt,
        &head.ln,
        &params.mlm_ln_gain.data,
        &mut grads.mlm_ln_gain.data,
        &mut grads.mlm_ln_bias.data,
        d,
    );
    for (g, &u) in d_act.iter_mut().zip(&head.u) {
        *g *= gelu_grad(u);
    }
    let mut d_rows = vec![F::zero(); p * d];
    affine_backward(&d_act, &head.rows, &params.mlm_w.data, &mut grads.mlm_w.data, &mut grads.mlm_b.data, Some(&mut d_rows), p, d, d);
    for (r, &pos) in head.positions.iter().enumerate() {
        for (dst, &g) in d_hidden[pos * d..(pos + 1) * d].iter_mut().zip(&d_rows[r * d..(r + 1) * d]) {
            *dst += g;
        }
    }
    nll
}
