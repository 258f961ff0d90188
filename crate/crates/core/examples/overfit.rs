//! Trains the full-size file-level network on a small generated corpus
//! until it fits the training split, printing the epoch log. The training
//! split doubles as the validation split, so the plateau schedule follows
//! the loss being fitted.
//!
//! cargo run --release --example overfit -- [n_per_class] [seed] [batch] [lr] [file|function] [checkpoint]

use std::time::Instant;

use deeptective::corpus::generate_synthetic_with;
use deeptective::frontend::{Granularity, KeepList};
use deeptective::model::{train_classifier, ArchitectureConfig, TrainConfig};
use deeptective::nn::AdamConfig;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let n: usize = arg(0, "15").parse()?;
    let seed: u64 = arg(1, "7").parse()?;
    let batch: usize = arg(2, "64").parse()?;
    let lr: f64 = arg(3, "1e-5").parse()?;
    let g = match arg(4, "file").as_str() {
        "function" => Granularity::Function,
        _ => Granularity::File,
    };

    let train = generate_synthetic_with(n, seed, g);
    let tc = TrainConfig {
        batch_size: batch,
        seed,
        adam: AdamConfig { lr, ..AdamConfig::default() },
        stop_at_train_accuracy: Some(0.95),
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let trained = train_classifier(&train, &train, g, ArchitectureConfig::full, &KeepList::default(), &tc, &mut |r| {
        println!(
            "epoch {:>3}  batch_loss {:.4}  loss {:.4}  acc {:.3}  lr {:.0e}  {:>6.1}s",
            r.epoch,
            r.train_loss,
            r.val_loss,
            r.train_acc,
            r.lr,
            start.elapsed().as_secs_f64()
        );
    })?;
    println!("vocabulary {} ids, best epoch {}", trained.classifier.vocab.len(), trained.best_epoch);
    if let Some(out) = args.get(5) {
        trained.classifier.save(std::path::Path::new(out))?;
    }
    Ok(())
}
