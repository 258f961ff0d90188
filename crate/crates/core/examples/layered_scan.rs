//! Scan a project with a file-level and a function-level checkpoint, or
//! with freshly trained small models when none are given.
//!
//! cargo run --release --example layered_scan -- [dir] [file.ckpt func.ckpt]

use std::path::{Path, PathBuf};

use deeptective::corpus::generate_synthetic_with;
use deeptective::frontend::{Granularity, KeepList};
use deeptective::model::{train_classifier, ArchitectureConfig, Classifier, TrainConfig};
use deeptective::nn::AdamConfig;
use deeptective::scanner::{render_text, scan, ScanOptions};

fn quick_model(g: Granularity) -> anyhow::Result<Classifier> {
    let samples = generate_synthetic_with(20, 5, g);
    let tc = TrainConfig {
        epochs: 30,
        batch_size: 16,
        seed: 5,
        adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() },
        ..TrainConfig::default()
    };
    let small = |g: Granularity, v: usize| ArchitectureConfig {
        embed_dim: 16,
        gru_hidden: 16,
        gcn_dims: vec![320, 64, 64, 64],
        fc_dims: vec![64, 32, 4],
        ..ArchitectureConfig::full(g, v)
    };
    Ok(train_classifier(&samples, &samples, g, small, &KeepList::default(), &tc, &mut |_| {})?.classifier)
}

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args
        .first()
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scan_project"));
    let (file_model, func_model) = match (args.get(1), args.get(2)) {
        (Some(f), Some(g)) => (Classifier::load(f.as_ref())?, Classifier::load(g.as_ref())?),
        _ => (quick_model(Granularity::File)?, quick_model(Granularity::Function)?),
    };
    let result = scan(&dir, &file_model, &func_model, &ScanOptions::default())?;
    print!("{}", render_text(&result));
    Ok(())
}
