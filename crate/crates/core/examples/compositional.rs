//! Runs the synthetic compositional experiment and prints both models'
//! held-out composition error and analogy accuracy.
//!
//!     cargo run --release -p ulr-core --example compositional [steps [peak_lr [dropout [warm_start_steps]]]]

use ulr_core::synthetic::{run_compositional_experiment, ExperimentConfig};

fn main() -> Result<(), ulr_core::Error> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut cfg = ExperimentConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| -> Result<Option<f64>, ulr_core::Error> {
        args.get(i).map(|s| s.parse().map_err(|_| ulr_core::Error::Invalid(format!("bad argument {s:?}")))).transpose()
    };
    if let Some(steps) = arg(0)? {
        cfg.train.total_steps = steps as u64;
    }
    if let Some(lr) = arg(1)? {
        cfg.train.peak_lr = lr;
    }
    if let Some(warm) = arg(3)? {
        cfg.warm_start_steps = warm as u64;
    }
    if let Some(dropout) = arg(2)? {
        cfg.encoder.dropout = dropout as f32;
    }
    let out = run_compositional_experiment(&cfg)?;
    println!("vocab {} table {} marked {:.3}", out.vocab_size, out.table_size, out.marked_fraction);
    for m in [&out.mlm, &out.joint] {
        println!("{:<5} composition_error {:.6} ({:.0}s)", m.objective.to_string(), m.composition_error, m.seconds);
        for (form, pooling, acc) in &m.analogy {
            println!("      {form:<11} {pooling:<4} {acc:.3}");
        }
    }
    Ok(())
}
