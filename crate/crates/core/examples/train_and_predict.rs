//! Train a small classifier on generated samples, save it, reload it and
//! classify the bundled figure samples.
//!
//! cargo run --release --example train_and_predict -- [epochs]

use deeptective::corpus::{generate_synthetic, split, SplitSpec};
use deeptective::frontend::{Granularity, KeepList};
use deeptective::metrics::{confusion, render_table, TableFormat};
use deeptective::model::{train_classifier, ArchitectureConfig, Classifier, TrainConfig};
use deeptective::nn::AdamConfig;

fn main() -> anyhow::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(40), |a| a.parse())?;
    let samples = generate_synthetic(40, 3);
    let (tr, va, te) = split(&samples, &SplitSpec { fractions: [0.8, 0.1, 0.1], seed: 3 })?;
    let tc = TrainConfig {
        epochs,
        batch_size: 16,
        seed: 3,
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
    let trained = train_classifier(&tr, &va, Granularity::File, small, &KeepList::default(), &tc, &mut |r| {
        if r.epoch % 5 == 0 {
            println!("epoch {:>3} val_loss {:.4} val_acc {:.3}", r.epoch, r.val_loss, r.val_acc);
        }
    })?;
    let path = std::env::temp_dir().join("small_file_model.ckpt");
    trained.classifier.save(&path)?;
    let model = Classifier::load(&path)?;
    println!("{} parameters, best epoch {}, saved to {}", model.params.count(), trained.best_epoch, path.display());

    let truth: Vec<_> = te.iter().map(|s| s.label).collect();
    let pred: Vec<_> = te.iter().map(|s| model.predict(&s.code).map(|p| p.label)).collect::<Result<_, _>>()?;
    print!("{}", render_table(&[("test", &confusion(&truth, &pred)?)], TableFormat::Text));

    for name in ["fig2_xss.php", "fig5_sqli.php", "fig6_xss.php"] {
        let code =
            std::fs::read_to_string(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name))?;
        let p = model.predict(&code)?;
        println!("{name:<14} {:<5} {:.3?}", p.label, p.probs);
    }
    Ok(())
}
