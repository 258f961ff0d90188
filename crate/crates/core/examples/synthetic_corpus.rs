//! Generate a labelled corpus, write it as JSON lines, and split it.
//!
//! cargo run --example synthetic_corpus -- [n_per_class] [seed] [out.jsonl]

use deeptective::corpus::{dataset_stats, generate_synthetic_with, read_jsonl, split, write_jsonl, SplitSpec};
use deeptective::frontend::Granularity;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(20), |a| a.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(1), |a| a.parse())?;
    let out =
        args.get(2).cloned().unwrap_or_else(|| std::env::temp_dir().join("synthetic.jsonl").display().to_string());

    let mut samples = generate_synthetic_with(n, seed, Granularity::File);
    samples.extend(generate_synthetic_with(n, seed, Granularity::Function));
    write_jsonl(out.as_ref(), &samples)?;
    let back = read_jsonl(out.as_ref())?;
    assert_eq!(back, samples);
    println!("{} samples in {out}\n{}", back.len(), dataset_stats(&back));

    let first = &samples[0];
    println!("{} ({}, {}):\n{}", first.id, first.label, first.granularity, first.code);

    let files: Vec<_> = samples.into_iter().filter(|s| s.granularity == Granularity::File).collect();
    let (tr, va, te) = split(&files, &SplitSpec { fractions: [0.8, 0.1, 0.1], seed })?;
    println!("file split: {} / {} / {}", tr.len(), va.len(), te.len());
    Ok(())
}
