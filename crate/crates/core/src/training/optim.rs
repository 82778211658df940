//! Adam with a linear warmup / linear decay schedule.

use crate::encoder::{EncoderConfig, EncoderParams, Scalar};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const DEFAULT_PEAK_LR: f64 = 5e-5;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<F> {
    pub m: EncoderParams<F>,
    pub v: EncoderParams<F>,
    /// Number of updates applied so far.
    pub step: u64,
    pub peak_lr: f64,
    pub total_steps: u64,
    pub warmup_fraction: f64,
}

impl<F: Scalar> OptimizerState<F> {
    pub fn new(config: &EncoderConfig, peak_lr: f64, total_steps: u64, warmup_fraction: f64) -> Result<Self> {
        if !(peak_lr.is_finite() && peak_lr >= 0.0) {
            return Err(Error::InvalidConfig(format!("peak_lr must be finite and >= 0, got {peak_lr}")));
        }
        if !(0.0..=1.0).contains(&warmup_fraction) {
            return Err(Error::InvalidConfig(format!("warmup_fraction must be in [0, 1], got {warmup_fraction}")));
        }
        Ok(OptimizerState {
            m: EncoderParams::zeros(config),
            v: EncoderParams::zeros(config),
            step: 0,
            peak_lr,
            total_steps,
            warmup_fraction,
        })
    }

    pub fn warmup_steps(&self) -> u64 {
        (self.warmup_fraction * self.total_steps as f64).round() as u64
    }
}

/// Learning rate for update number `step`: rises linearly from 0 to the
/// peak over the warmup steps, then falls linearly to 0 at `total_steps`.
pub fn lr_at<F>(step: u64, state: &OptimizerState<F>) -> f64 {
    let total = state.total_steps;
    let warmup = (state.warmup_fraction * total as f64).round() as u64;
    if step > total {
        0.0
    } else if step <= warmup && warmup > 0 {
        state.peak_lr * step as f64 / warmup as f64
    } else if total > warmup {
        state.peak_lr * (total - step) as f64 / (total - warmup) as f64
    } else {
        0.0
    }
}

/// One Adam update with bias correction. The step counter is advanced first
/// and the schedule is evaluated at the new value, so the first update uses
/// `lr_at(1)`.
pub fn adam_step<F: Scalar>(params: &mut EncoderParams<F>, grads: &EncoderParams<F>, state: &mut OptimizerState<F>) -> Result<f64> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let lr = lr_at(state.step, state);
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    let (b1, b2, eps) = (F::c(BETA1), F::c(BETA2), F::c(EPSILON));
    let (step_size, inv_sqrt_bc2) = (F::c(lr / bc1), F::c(1.0 / bc2.sqrt()));
    let groups = params
        .named_tensors_mut()
        .into_iter()
        .zip(grads.named_tensors())
        .zip(state.m.named_tensors_mut())
        .zip(state.v.named_tensors_mut());
    for ((((_, p), (_, g)), (_, m)), (_, v)) in groups {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (F::one() - b1) * gi;
            v.data[i] = b2 * v.data[i] + (F::one() - b2) * gi * gi;
            p.data[i] -= step_size * m.data[i] / (v.data[i].sqrt() * inv_sqrt_bc2 + eps);
        }
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EncoderConfig {
        EncoderConfig { vocab_size: 10, d_model: 4, n_heads: 1, n_layers: 1, d_ff: 4, max_len: 4, dropout: 0.0, seed: 1 }
    }

    fn state(total: u64) -> OptimizerState<f64> {
        OptimizerState::new(&cfg(), DEFAULT_PEAK_LR, total, DEFAULT_WARMUP_FRACTION).unwrap()
    }

    #[test]
    fn schedule_shape() {
        let s = state(1000);
        assert_eq!(lr_at(0, &s), 0.0);
        assert_eq!(lr_at(100, &s), 5e-5);
        assert!((lr_at(50, &s) - 2.5e-5).abs() < 1e-18);
        assert!((lr_at(550, &s) - 2.5e-5).abs() < 1e-18);
        assert_eq!(lr_at(1000, &s), 0.0);
        assert_eq!(lr_at(1001, &s), 0.0);
        for t in 1..=1000 {
            let lr = lr_at(t, &s);
            assert!((0.0..=5e-5).contains(&lr));
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let c = cfg();
        let mut p = EncoderParams::<f64>::init(&c).unwrap();
        let before = p.clone();
        let mut s = state(10);
        adam_step(&mut p, &EncoderParams::zeros(&c), &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn single_step_closed_form() {
        let c = cfg();
        let mut p = EncoderParams::<f64>::zeros(&c);
        let mut g = EncoderParams::<f64>::zeros(&c);
        g.pooler_b.data[0] = 1.0;
        let mut s = state(10);
        let lr = adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(lr, lr_at(1, &s));
        // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps)
        let expect = -lr / (1.0 + EPSILON);
        assert!((p.pooler_b.data[0] - expect).abs() < 1e-20);
        assert!((p.pooler_b.data[0] + lr).abs() < 1e-12);
        assert_eq!(p.pooler_b.data[1], 0.0);
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let c = cfg();
        let mut p = EncoderParams::<f32>::zeros(&c);
        let mut g = EncoderParams::<f32>::zeros(&c);
        g.mlm_b.data[2] = f32::NAN;
        let mut s = OptimizerState::new(&c, 1e-3, 10, 0.1).unwrap();
        let err = adam_step(&mut p, &g, &mut s).unwrap_err().to_string();
        assert!(err.contains("mlm.transform.bias"), "{err}");
        assert_eq!(s.step, 0);
    }
}
