//! Oracles and checkers shared by the integration tests. Each oracle is a
//! deliberately naive re-derivation that does not call the code it checks.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ulr_core::corpus::EncodedSequence;
use ulr_core::encoder::{EncoderConfig, EncoderParams, Pooling};
use ulr_core::ngram::{Span, SpanAnnotation};
use ulr_core::training::{
    batch_loss_and_gradients, prepare_example, LossReport, LossScales, Objective, PreparedExample, StepSettings,
    TrainingExample,
};

/// Every contiguous window of length 1..=max_n, counted with a plain map.
pub fn brute_force_counts(seqs: &[Vec<u32>], max_n: usize) -> HashMap<Vec<u32>, u64> {
    let mut out = HashMap::new();
    for s in seqs {
        for i in 0..s.len() {
            for j in i + 1..=(i + max_n).min(s.len()) {
                *out.entry(s[i..j].to_vec()).or_insert(0) += 1;
            }
        }
    }
    out
}

/// `(1/n) * ln( P(w) / prod P(x_k) )` evaluated directly.
pub fn direct_pmi(ngram: &[u32], counts: &HashMap<Vec<u32>, u64>, total: u64) -> f64 {
    let t = total as f64;
    let joint = counts[ngram] as f64 / t;
    let parts: f64 = ngram.iter().map(|x| counts[&vec![*x]] as f64 / t).product();
    (joint / parts).ln() / ngram.len() as f64
}

/// Greedy annotation by interval enumeration: list every table interval,
/// order by (start, longest first), and accept each one that begins after
/// the last accepted interval ends.
pub fn interval_scan(seq: &[u32], contains: impl Fn(&[u32]) -> bool, max_n: usize) -> Vec<Span> {
    let mut intervals = Vec::new();
    for i in 0..seq.len() {
        for n in 2..=max_n {
            if i + n <= seq.len() && contains(&seq[i..i + n]) {
                intervals.push((i, n));
            }
        }
    }
    intervals.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut next_free = 0;
    let mut out = Vec::new();
    for (i, n) in intervals {
        if i >= next_free {
            out.push(Span::new(i + 1, i + n));
            next_free = i + n;
        }
    }
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Ranks all candidates by cosine to `c + b - a` with a full sort and
/// returns the top one (lowest index among equals).
pub fn analogy_oracle(a: &[f64], b: &[f64], c: &[f64], candidates: &[Vec<f64>]) -> usize {
    let target: Vec<f64> = (0..a.len()).map(|i| c[i] + b[i] - a[i]).collect();
    let mut order: Vec<(usize, f64)> = candidates.iter().map(|d| cosine(&target, d)).enumerate().collect();
    order.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    order[0].0
}

/// Full sort of the corpus by cosine (descending, ties by id ascending).
pub fn retrieval_oracle(query: &[f64], rows: &[Vec<f64>], ids: &[u64], k: usize) -> Vec<u64> {
    let mut scored: Vec<(u64, f64)> = rows.iter().zip(ids).map(|(r, &id)| (id, cosine(query, r))).collect();
    scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    scored.into_iter().take(k).map(|(id, _)| id).collect()
}

pub fn gradient_config(seed: u64) -> EncoderConfig {
    EncoderConfig { vocab_size: 50, d_model: 16, n_heads: 2, n_layers: 2, d_ff: 32, max_len: 32, dropout: 0.1, seed }
}

/// Freshly initialized parameters with every entry nudged, so that biases
/// and gains are not at their special initial values.
pub fn perturbed_params(config: &EncoderConfig) -> EncoderParams<f64> {
    let mut p = EncoderParams::<f64>::init(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37);
    for (_, t) in p.named_tensors_mut() {
        for x in &mut t.data {
            *x += rng.gen_range(-0.05..0.05);
        }
    }
    p
}

/// A small batch with at least one composition example and one masked
/// token.
pub fn gradient_batch(params: &EncoderParams<f64>, config: &EncoderConfig, seed: u64) -> Vec<PreparedExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = StepSettings { mask_rate: 0.3, pooling: Pooling::Cls, objective: Objective::Joint, seed };
    loop {
        let batch: Vec<PreparedExample> = (0..3)
            .map(|i| {
                let len = rng.gen_range(8..14);
                let ids: Vec<u32> = (0..len).map(|_| rng.gen_range(5..config.vocab_size as u32)).collect();
                let spans = vec![Span::new(2, 3), Span::new(5, 5 + rng.gen_range(1..3))];
                let ex = TrainingExample { seq: EncodedSequence::new(ids), annotation: SpanAnnotation { spans } };
                prepare_example(&ex, params, config, &settings, seed * 31 + i).unwrap()
            })
            .collect();
        if batch.iter().any(|e| e.misad.is_some()) && batch.iter().any(|e| !e.s.positions.is_empty()) {
            return batch;
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GradCheck {
    pub tensors: usize,
    pub entries: usize,
    pub violations: Vec<String>,
    /// Largest |analytic - numeric| / (atol + rtol * |numeric|) seen.
    pub worst_ratio: f64,
    pub worst: String,
}

/// Compares analytic gradients of L_MiSAD, L_MLM and L_total with central
/// differences for every entry of every parameter tensor.
pub fn gradient_check(
    config: &EncoderConfig,
    pooling: Pooling,
    dropout_key: Option<u64>,
    eps: f64,
    rtol: f64,
    atol: f64,
) -> GradCheck {
    let params = perturbed_params(config);
    let batch = gradient_batch(&params, config, config.seed + 1);
    let grads = |scales: LossScales| {
        batch_loss_and_gradients(&params, config, &batch, pooling, scales, dropout_key, true).unwrap().1.unwrap()
    };
    let g_misad = grads(LossScales { misad: 1.0, mlm: 0.0 });
    let g_mlm = grads(LossScales { misad: 0.0, mlm: 1.0 });
    let g_total = grads(LossScales { misad: 1.0, mlm: 1.0 });
    let loss = |p: &EncoderParams<f64>| -> LossReport {
        batch_loss_and_gradients(p, config, &batch, pooling, LossScales::default(), dropout_key, false).unwrap().0
    };

    let mut out = GradCheck::default();
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let analytic = |g: &EncoderParams<f64>, t: usize, i: usize| g.named_tensors()[t].1.data[i];
    let mut probe = params.clone();
    for (t, name) in names.iter().enumerate() {
        out.tensors += 1;
        let len = params.named_tensors()[t].1.data.len();
        for i in 0..len {
            let orig = probe.named_tensors()[t].1.data[i];
            probe.named_tensors_mut()[t].1.data[i] = orig + eps;
            let plus = loss(&probe);
            probe.named_tensors_mut()[t].1.data[i] = orig - eps;
            let minus = loss(&probe);
            probe.named_tensors_mut()[t].1.data[i] = orig;
            out.entries += 1;
            let checks = [
                ("L_MiSAD", analytic(&g_misad, t, i), (plus.l_misad - minus.l_misad) / (2.0 * eps)),
                ("L_MLM", analytic(&g_mlm, t, i), (plus.l_mlm - minus.l_mlm) / (2.0 * eps)),
                ("L_total", analytic(&g_total, t, i), (plus.l_total - minus.l_total) / (2.0 * eps)),
            ];
            for (which, a, n) in checks {
                let ratio = (a - n).abs() / (atol + rtol * n.abs());
                if ratio > out.worst_ratio {
                    out.worst_ratio = ratio;
                    out.worst = format!("{which} {name}[{i}]: analytic {a:.6e} numeric {n:.6e}");
                }
                if ratio > 1.0 {
                    out.violations.push(format!("{which} {name}[{i}]: analytic {a:.6e} numeric {n:.6e}"));
                }
            }
        }
    }
    out
}
