//! Batch losses, gradients and the optimizer step.

use rayon::prelude::*;

use super::ops::{mask_for_mlm, misad_loss_and_grad, score_spans, select_span, split_sequence, MaskedInput};
use super::optim::{adam_step, OptimizerState};
use crate::corpus::{frame, EncodedSequence};
use crate::encoder::{
    backward_sequence, forward_sequence, mlm_head, mlm_nll_backward, pool_backward, pool_sequence, EncoderConfig,
    EncoderParams, Mode, Pooling, Scalar, SeqCache,
};
use crate::error::{Error, Result};
use crate::ngram::{Span, SpanAnnotation};
use crate::rng;

pub const DEFAULT_MASK_RATE: f64 = 0.15;
pub const DEFAULT_BATCH_SIZE: usize = 64;

/// Examples are split into at most this many contiguous chunks whose
/// gradients are summed in order, so results do not depend on the thread
/// count.
const GRAD_CHUNKS: usize = 8;

const STREAM_MASK: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub seq: EncodedSequence,
    pub annotation: SpanAnnotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// MiSAD plus MLM with equal weights.
    Joint,
    /// MLM alone; spans are ignored.
    Mlm,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Objective::Joint),
            "mlm" => Ok(Objective::Mlm),
            other => Err(Error::Invalid(format!("unknown objective {other:?} (expected joint or mlm)"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Joint => "joint",
            Objective::Mlm => "mlm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub mask_rate: f64,
    pub pooling: Pooling,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings { mask_rate: DEFAULT_MASK_RATE, pooling: Pooling::Cls, objective: Objective::Joint, seed: 0 }
    }
}

/// An example with its span chosen and its MLM masking drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedExample {
    pub span: Option<Span>,
    /// Framed w and R inputs when the example trains MiSAD.
    pub misad: Option<(Vec<u32>, Vec<u32>)>,
    pub s: MaskedInput,
}

/// Picks the span (lowest average masked-token probability under the
/// current model), splits around it, and masks S outside it.
pub fn prepare_example<F: Scalar>(
    example: &TrainingExample,
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    settings: &StepSettings,
    mask_key: u64,
) -> Result<PreparedExample> {
    let seq = &example.seq.ids;
    let mut span = None;
    let mut misad = None;
    if settings.objective == Objective::Joint && !example.annotation.is_empty() {
        let spans = &example.annotation.spans;
        let scores = score_spans(seq, spans, params, config)?;
        if let Some(i) = select_span(&scores) {
            if let Some(split) = split_sequence(seq, spans[i])? {
                span = Some(spans[i]);
                misad = Some((split.w, split.r));
            }
        }
    }
    let s = mask_for_mlm(&frame(seq), span, settings.mask_rate, config.vocab_size, mask_key);
    Ok(PreparedExample { span, misad, s })
}

/// Multipliers on the two loss terms. Training uses 1 and 1; gradient
/// checks switch terms off individually.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossScales {
    pub misad: f64,
    pub mlm: f64,
}

impl Default for LossScales {
    fn default() -> Self {
        LossScales { misad: 1.0, mlm: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub l_misad: f64,
    pub l_mlm: f64,
    pub l_total: f64,
}

impl LossReport {
    pub fn new(l_misad: f64, l_mlm: f64) -> Self {
        LossReport { l_misad, l_mlm, l_total: l_misad + l_mlm }
    }

    /// The scalar whose gradient `batch_loss_and_gradients` returns.
    pub fn scaled(&self, scales: LossScales) -> f64 {
        scales.misad * self.l_misad + scales.mlm * self.l_mlm
    }
}

fn mode_for(dropout_key: Option<u64>, example: usize, input: u64) -> Mode {
    match dropout_key {
        Some(key) => Mode::Train { key: rng::hash_key(&[key, example as u64, input]) },
        None => Mode::Eval,
    }
}

fn run<F: Scalar>(params: &EncoderParams<F>, config: &EncoderConfig, ids: &[u32], mode: Mode) -> Result<SeqCache<F>> {
    forward_sequence(params, config, ids, ids.len(), mode)
}

/// Returns (MiSAD loss, MLM NLL sum) of one example; accumulates
/// `w_misad * misad + w_mlm * nll_sum` gradients when `grads` is given.
#[allow(clippy::too_many_arguments)]
fn example_terms<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    ex: &PreparedExample,
    index: usize,
    pooling: Pooling,
    w_misad: F,
    w_mlm: F,
    dropout_key: Option<u64>,
    mut grads: Option<&mut EncoderParams<F>>,
) -> Result<(F, F)> {
    let d = config.d_model;
    let s_cache = run(params, config, &ex.s.ids, mode_for(dropout_key, index, 0))?;
    let mut d_hidden_s = vec![F::zero(); s_cache.len() * d];
    let mut d_pooled_s = None;
    let mut misad = F::zero();

    if let Some((w_ids, r_ids)) = &ex.misad {
        let w_cache = run(params, config, w_ids, mode_for(dropout_key, index, 1))?;
        let r_cache = run(params, config, r_ids, mode_for(dropout_key, index, 2))?;
        let e_w = pool_sequence(&w_cache, d, pooling);
        let e_r = pool_sequence(&r_cache, d, pooling);
        let e_s = pool_sequence(&s_cache, d, pooling);
        let (loss, [gw, gr, gs]) = misad_loss_and_grad(&e_w, &e_r, &e_s)?;
        misad = loss;
        if let Some(g) = grads.as_deref_mut().filter(|_| w_misad != F::zero()) {
            let scaled = |v: Vec<F>| v.into_iter().map(|x| x * w_misad).collect::<Vec<F>>();
            for (cache, grad) in [(&w_cache, gw), (&r_cache, gr)] {
                let (dh, dp) = pool_backward(cache, d, pooling, &scaled(grad));
                backward_sequence(params, config, cache, dh, dp.as_deref(), g);
            }
            let (dh, dp) = pool_backward(&s_cache, d, pooling, &scaled(gs));
            d_hidden_s = dh;
            d_pooled_s = dp;
        }
    }

    let mut nll = F::zero();
    if !ex.s.labels.is_empty() {
        let head = mlm_head(params, config, &s_cache.hidden, &ex.s.positions);
        match grads.as_deref_mut().filter(|_| w_mlm != F::zero()) {
            Some(g) => nll = mlm_nll_backward(params, config, &head, &ex.s.labels, w_mlm, g, &mut d_hidden_s),
            None => {
                let v = config.vocab_size;
                for (r, &y) in ex.s.labels.iter().enumerate() {
                    nll -= head.log_probs[r * v + y as usize];
                }
            }
        }
    }

    if let Some(g) = grads {
        backward_sequence(params, config, &s_cache, d_hidden_s, d_pooled_s.as_deref(), g);
    }
    Ok((misad, nll))
}

/// Batch loss = mean MiSAD over MiSAD-eligible examples + mean NLL over all
/// masked positions of the batch. With `want_grads`, also returns the exact
/// gradient of `scales.misad * l_misad + scales.mlm * l_mlm`. `dropout_key`
/// of `None` disables dropout.
pub fn batch_loss_and_gradients<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    examples: &[PreparedExample],
    pooling: Pooling,
    scales: LossScales,
    dropout_key: Option<u64>,
    want_grads: bool,
) -> Result<(LossReport, Option<EncoderParams<F>>)> {
    let n_misad = examples.iter().filter(|e| e.misad.is_some()).count();
    let n_labels: usize = examples.iter().map(|e| e.s.labels.len()).sum();
    let w_misad = if n_misad > 0 { F::c(scales.misad / n_misad as f64) } else { F::zero() };
    let w_mlm = if n_labels > 0 { F::c(scales.mlm / n_labels as f64) } else { F::zero() };

    let chunk = examples.len().div_ceil(GRAD_CHUNKS).max(1);
    let partials = examples
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, part)| -> Result<(F, F, Option<EncoderParams<F>>)> {
            let mut grads = want_grads.then(|| EncoderParams::zeros(config));
            let (mut misad, mut nll) = (F::zero(), F::zero());
            for (j, ex) in part.iter().enumerate() {
                let index = ci * chunk + j;
                let (m, n) =
                    example_terms(params, config, ex, index, pooling, w_misad, w_mlm, dropout_key, grads.as_mut())?;
                misad += m;
                nll += n;
            }
            Ok((misad, nll, grads))
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut misad_sum, mut nll_sum) = (F::zero(), F::zero());
    let mut total_grads: Option<EncoderParams<F>> = None;
    for (m, n, g) in partials {
        misad_sum += m;
        nll_sum += n;
        match (&mut total_grads, g) {
            (Some(acc), Some(g)) => acc.add_assign(&g),
            (acc @ None, g) => *acc = g,
            _ => {}
        }
    }
    let to_f64 = |x: F| x.to_f64().unwrap_or(f64::NAN);
    let l_misad = if n_misad > 0 { to_f64(misad_sum) / n_misad as f64 } else { 0.0 };
    let l_mlm = if n_labels > 0 { to_f64(nll_sum) / n_labels as f64 } else { 0.0 };
    if !l_misad.is_finite() {
        return Err(Error::NonFinite("l_misad".into()));
    }
    if !l_mlm.is_finite() {
        return Err(Error::NonFinite("l_mlm".into()));
    }
    if let Some(name) = total_grads.as_ref().and_then(EncoderParams::first_non_finite) {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    Ok((LossReport::new(l_misad, l_mlm), total_grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub report: LossReport,
    pub lr: f64,
    pub n_misad: usize,
    pub n_masked: usize,
}

/// Prepares every example against the current parameters, computes the
/// joint loss and applies one Adam update. All randomness is keyed by
/// (seed, optimizer step, example index).
pub fn train_step<F: Scalar>(
    examples: &[TrainingExample],
    params: &mut EncoderParams<F>,
    config: &EncoderConfig,
    state: &mut OptimizerState<F>,
    settings: &StepSettings,
) -> Result<StepOutcome> {
    let step_key = rng::hash_key(&[settings.seed, state.step]);
    let prepared = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            prepare_example(ex, params, config, settings, rng::hash_key(&[step_key, STREAM_MASK, i as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let dropout_key = Some(rng::hash_key(&[step_key, STREAM_DROPOUT]));
    let (report, grads) =
        batch_loss_and_gradients(params, config, &prepared, settings.pooling, LossScales::default(), dropout_key, true)?;
    let grads = grads.unwrap_or_else(|| EncoderParams::zeros(config));
    let lr = adam_step(params, &grads, state)?;
    Ok(StepOutcome {
        report,
        lr,
        n_misad: prepared.iter().filter(|p| p.misad.is_some()).count(),
        n_masked: prepared.iter().map(|p| p.s.labels.len()).sum(),
    })
}

/// Mean MiSAD loss over held-out (sequence, span) pairs, evaluated without
/// masking or dropout. Pairs whose span covers the whole sequence are
/// skipped; returns `None` if nothing is left.
pub fn composition_error<F: Scalar>(
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    items: &[(Vec<u32>, Span)],
    pooling: Pooling,
) -> Result<Option<f64>> {
    let losses = items
        .par_iter()
        .map(|(seq, span)| -> Result<Option<f64>> {
            let Some(split) = split_sequence(seq, *span)? else { return Ok(None) };
            let embed = |ids: &[u32]| -> Result<Vec<F>> {
                Ok(pool_sequence(&run(params, config, ids, Mode::Eval)?, config.d_model, pooling))
            };
            let (loss, _) = misad_loss_and_grad(&embed(&split.w)?, &embed(&split.r)?, &embed(&split.s)?)?;
            Ok(loss.to_f64())
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = losses.into_iter().flatten().collect();
    Ok((!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64))
}
