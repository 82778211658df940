//! Joint MiSAD + MLM training.
//!
//! For every visit of a sequence S, the marked n-gram whose tokens the
//! current model finds hardest to recover (lowest mean probability with the
//! span masked) becomes w, and R is S with w cut out. The pooled embeddings
//! must compose: E^w + E^R should equal E^S after unit normalization. MLM
//! runs on S at the same time, never masking inside w.

pub mod ops;
pub mod optim;
pub mod run;
pub mod step;

pub use ops::{
    mask_for_mlm, misad_loss, misad_loss_and_grad, mlm_loss, score_spans, select_span, split_sequence, MaskedInput,
    SplitInputs,
};
pub use optim::{adam_step, lr_at, OptimizerState};
pub use run::{train, write_metrics, BatchSchedule, MetricsRow, TrainSettings, METRICS_HEADER};
pub use step::{
    batch_loss_and_gradients, composition_error, prepare_example, train_step, LossReport, LossScales, Objective,
    PreparedExample, StepOutcome, StepSettings, TrainingExample,
};
