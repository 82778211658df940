//! The outer training loop and its metrics log.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optim::OptimizerState;
use super::step::{train_step, LossReport, StepSettings, TrainingExample, DEFAULT_BATCH_SIZE};
use crate::encoder::{EncoderConfig, EncoderParams, Scalar};
use crate::error::{Error, Result};
use crate::rng;

pub const METRICS_HEADER: &str = "step\tl_misad\tl_mlm\tl_total\tlr";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub step: StepSettings,
    pub peak_lr: f64,
    pub total_steps: u64,
    pub warmup_fraction: f64,
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            step: StepSettings::default(),
            peak_lr: super::optim::DEFAULT_PEAK_LR,
            total_steps: 1000,
            warmup_fraction: super::optim::DEFAULT_WARMUP_FRACTION,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub report: LossReport,
    pub lr: f64,
}

impl MetricsRow {
    pub fn tsv(&self) -> String {
        let r = &self.report;
        format!("{}\t{:.8e}\t{:.8e}\t{:.8e}\t{:.8e}", self.step, r.l_misad, r.l_mlm, r.l_total, self.lr)
    }
}

pub fn write_metrics(mut out: impl Write, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.tsv())?;
    }
    Ok(())
}

/// Yields batches of example indices: each epoch is a fresh permutation
/// seeded by (seed, epoch), consumed in order across step boundaries.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    n: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSchedule {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut s = BatchSchedule { n, seed, epoch: 0, order: Vec::new(), cursor: 0 };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        self.order = (0..self.n).collect();
        let mut r = ChaCha8Rng::seed_from_u64(rng::hash_key(&[self.seed, 0x5348_5546, self.epoch]));
        self.order.shuffle(&mut r);
        self.cursor = 0;
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size.min(self.n) {
            if self.cursor == self.order.len() {
                self.epoch += 1;
                self.shuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Runs `settings.total_steps` optimizer steps, calling `on_step` after
/// each one.
pub fn train<F: Scalar>(
    data: &[TrainingExample],
    params: &mut EncoderParams<F>,
    config: &EncoderConfig,
    settings: &TrainSettings,
    mut on_step: impl FnMut(&MetricsRow),
) -> Result<Vec<MetricsRow>> {
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if settings.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&settings.step.mask_rate) {
        return Err(Error::InvalidConfig(format!("mask_rate must be in [0, 1], got {}", settings.step.mask_rate)));
    }
    let mut state = OptimizerState::new(config, settings.peak_lr, settings.total_steps, settings.warmup_fraction)?;
    let mut schedule = BatchSchedule::new(data.len(), settings.step.seed);
    let mut rows = Vec::with_capacity(settings.total_steps as usize);
    let mut batch = Vec::with_capacity(settings.batch_size);
    for _ in 0..settings.total_steps {
        batch.clear();
        batch.extend(schedule.next_batch(settings.batch_size).into_iter().map(|i| data[i].clone()));
        let out = train_step(&batch, params, config, &mut state, &settings.step)?;
        let row = MetricsRow { step: state.step, report: out.report, lr: out.lr };
        on_step(&row);
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EncodedSequence;
    use crate::ngram::SpanAnnotation;

    #[test]
    fn schedule_covers_each_epoch() {
        let mut s = BatchSchedule::new(10, 3);
        let mut seen: Vec<usize> = (0..5).flat_map(|_| s.next_batch(2)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert_eq!(s.next_batch(30).len(), 10);
    }

    #[test]
    fn ten_steps_ten_rows() {
        let c = EncoderConfig { vocab_size: 12, d_model: 8, n_heads: 2, n_layers: 1, d_ff: 8, max_len: 8, dropout: 0.1, seed: 2 };
        let mut p = EncoderParams::<f32>::init(&c).unwrap();
        let data: Vec<TrainingExample> = (0..4)
            .map(|i| TrainingExample { seq: EncodedSequence::new(vec![5 + i, 6, 7]), annotation: SpanAnnotation::default() })
            .collect();
        let settings = TrainSettings { total_steps: 10, batch_size: 3, peak_lr: 1e-3, ..Default::default() };
        let mut calls = 0;
        let rows = train(&data, &mut p, &c, &settings, |_| calls += 1).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(calls, 10);
        assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        let mut buf = Vec::new();
        write_metrics(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with(METRICS_HEADER));
    }
}
