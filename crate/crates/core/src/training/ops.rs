//! Per-example building blocks of the joint objective.

use crate::corpus::{frame, CLS_ID, MASK_ID, NUM_SPECIALS, SEP_ID};
use crate::encoder::{forward_sequence, mlm_head, EncoderConfig, EncoderParams, Mode, Scalar};
use crate::error::{Error, Result};
use crate::ngram::Span;
use crate::rng;

/// Average true-token probability of each span's tokens when that span
/// (alone) is replaced by `[MASK]`. Runs without dropout.
///
/// Span coordinates are 1-based over the unframed sequence, which makes
/// them valid 0-based indices into the framed one.
pub fn score_spans<F: Scalar>(
    seq: &[u32],
    spans: &[Span],
    params: &EncoderParams<F>,
    config: &EncoderConfig,
) -> Result<Vec<f64>> {
    let framed = frame(seq);
    let v = config.vocab_size;
    let mut scores = Vec::with_capacity(spans.len());
    for span in spans {
        span.validate(seq.len())?;
        let mut input = framed.clone();
        let positions: Vec<usize> = (span.start..=span.end).collect();
        for &p in &positions {
            input[p] = MASK_ID;
        }
        let cache = forward_sequence(params, config, &input, input.len(), Mode::Eval)?;
        let head = mlm_head(params, config, &cache.hidden, &positions);
        let total: f64 = positions
            .iter()
            .enumerate()
            .map(|(r, &p)| head.log_probs[r * v + framed[p] as usize].to_f64().unwrap_or(f64::NAN).exp())
            .sum();
        scores.push(total / positions.len() as f64);
    }
    Ok(scores)
}

/// Index of the lowest score, leftmost on ties. `None` for an empty list,
/// which marks the example as MLM-only.
pub fn select_span(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// The three framed inputs of a MiSAD example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitInputs {
    pub w: Vec<u32>,
    pub r: Vec<u32>,
    pub s: Vec<u32>,
}

/// Splits `seq` around `span`. Returns `Ok(None)` when the span covers the
/// whole sequence (the remainder would be empty).
pub fn split_sequence(seq: &[u32], span: Span) -> Result<Option<SplitInputs>> {
    span.validate(seq.len())?;
    if span.len() == seq.len() {
        return Ok(None);
    }
    let range = span.range();
    let rest: Vec<u32> = seq[..range.start].iter().chain(&seq[range.end..]).copied().collect();
    Ok(Some(SplitInputs { w: frame(&seq[range]), r: frame(&rest), s: frame(seq) }))
}

fn unit<F: Scalar>(x: &[F]) -> Result<(Vec<F>, F)> {
    let norm = x.iter().map(|&v| v * v).sum::<F>().sqrt();
    if !(norm > F::zero()) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    Ok((x.iter().map(|&v| v / norm).collect(), norm))
}

/// `mean((ŵ + r̂ - ŝ)^2)` over unit-normalized inputs.
pub fn misad_loss<F: Scalar>(e_w: &[F], e_r: &[F], e_s: &[F]) -> Result<F> {
    Ok(misad_loss_and_grad(e_w, e_r, e_s)?.0)
}

/// Loss plus its gradients with respect to the raw (pre-normalization)
/// vectors.
#[allow(clippy::type_complexity)]
pub fn misad_loss_and_grad<F: Scalar>(e_w: &[F], e_r: &[F], e_s: &[F]) -> Result<(F, [Vec<F>; 3])> {
    let d = e_w.len();
    if e_r.len() != d || e_s.len() != d || d == 0 {
        return Err(Error::Invalid(format!("embedding dimensions differ: {d}, {}, {}", e_r.len(), e_s.len())));
    }
    let (w, nw) = unit(e_w)?;
    let (r, nr) = unit(e_r)?;
    let (s, ns) = unit(e_s)?;
    let diff: Vec<F> = (0..d).map(|i| w[i] + r[i] - s[i]).collect();
    let inv_d = F::one() / F::c(d as f64);
    let loss = diff.iter().map(|&x| x * x).sum::<F>() * inv_d;
    let g: Vec<F> = diff.iter().map(|&x| F::c(2.0) * x * inv_d).collect();
    // d(x/|x|)/dx applied to g: (g - u (u.g)) / |x|
    let through = |u: &[F], norm: F, sign: F| -> Vec<F> {
        let ug = u.iter().zip(&g).map(|(&a, &b)| a * b).sum::<F>() * sign;
        u.iter().zip(&g).map(|(&ui, &gi)| (gi * sign - ui * ug) / norm).collect()
    };
    Ok((loss, [through(&w, nw, F::one()), through(&r, nr, F::one()), through(&s, ns, -F::one())]))
}

/// MLM input with the selected span protected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedInput {
    pub ids: Vec<u32>,
    /// Framed positions carrying a label, ascending.
    pub positions: Vec<usize>,
    pub labels: Vec<u32>,
}

/// BERT-style masking of a framed sequence. Eligible positions exclude
/// `[CLS]`, `[SEP]` and the protected span (1-based, unframed coordinates,
/// which equal framed indices). Each eligible position is selected with
/// probability `mask_rate`; selected positions become `[MASK]` 80% of the
/// time, a random non-special token 10%, and stay unchanged 10%.
pub fn mask_for_mlm(framed: &[u32], protect: Option<Span>, mask_rate: f64, vocab_size: usize, key: u64) -> MaskedInput {
    let mut out = MaskedInput { ids: framed.to_vec(), positions: Vec::new(), labels: Vec::new() };
    let n_regular = vocab_size.saturating_sub(NUM_SPECIALS) as u64;
    for (t, &id) in framed.iter().enumerate() {
        if id == CLS_ID || id == SEP_ID || protect.is_some_and(|s| (s.start..=s.end).contains(&t)) {
            continue;
        }
        let base = 3 * t as u64;
        if rng::unit_uniform(key, base) >= mask_rate {
            continue;
        }
        out.positions.push(t);
        out.labels.push(id);
        let action = rng::unit_uniform(key, base + 1);
        if action < 0.8 {
            out.ids[t] = MASK_ID;
        } else if action < 0.9 && n_regular > 0 {
            let r = (rng::unit_uniform(key, base + 2) * n_regular as f64) as u64;
            out.ids[t] = NUM_SPECIALS as u32 + r.min(n_regular - 1) as u32;
        }
    }
    out
}

/// Mean negative log-likelihood over labelled rows of a `rows x V` matrix
/// of log-probabilities; 0 when there are no labels.
pub fn mlm_loss<F: Scalar>(log_probs: &[F], vocab_size: usize, labels: &[u32]) -> F {
    if labels.is_empty() {
        return F::zero();
    }
    let nll: F = labels.iter().enumerate().map(|(r, &y)| -log_probs[r * vocab_size + y as usize]).sum();
    nll / F::c(labels.len() as f64)
}
