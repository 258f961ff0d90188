use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use deeptective::corpus::{self, review, CommitFilter, Sample, SplitSpec};
use deeptective::frontend::{Granularity, KeepList};
use deeptective::metrics::{confusion, render_table, TableFormat};
use deeptective::model::{ArchitectureConfig, Classifier, TrainConfig};
use deeptective::scanner::{self, ReportFormat, ScanOptions};

#[derive(Parser)]
#[command(name = "deeptective", version, about = "PHP vulnerability detection with a GRU + GCN classifier")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build, split and inspect labelled corpora.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Train, apply and evaluate classifiers.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Layered file then function scan of a project.
    Scan(ScanArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GranArg {
    File,
    Function,
}

impl From<GranArg> for Granularity {
    fn from(g: GranArg) -> Self {
        match g {
            GranArg::File => Granularity::File,
            GranArg::Function => Granularity::Function,
        }
    }
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Mine vulnerability-fixing commits of a local git repository.
    Mine {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_files: usize,
        /// `LABEL phrase` per line, replacing the defaults.
        #[arg(long)]
        keywords: Option<PathBuf>,
        /// Cap on untouched files taken as Safe per commit.
        #[arg(long)]
        max_safe: Option<usize>,
    },
    /// Generate labelled synthetic samples.
    Gen {
        /// Samples per class.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "file")]
        granularity: GranArg,
    },
    /// Stratified train/val/test split into `<stem>.{train,val,test}.jsonl`.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        frac: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Import a directory of labelled files with a `path,label` manifest.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class counts by granularity.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Interactively review a random share of vulnerable samples.
    Review {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Full,
    Tiny,
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Train on a JSONL corpus split 80/10/10, reporting test metrics.
    Train(TrainArgs),
    /// Classify a PHP file or every PHP file under a directory.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Score a checkpoint on a labelled corpus.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    granularity: GranArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-epoch CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 150)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-5)]
    lr: f64,
    #[arg(long, value_enum, default_value = "full")]
    arch: ArchArg,
    #[arg(long)]
    class_weights: bool,
    /// Function names kept verbatim, one per line.
    #[arg(long)]
    keep: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    file_model: PathBuf,
    #[arg(long)]
    func_model: PathBuf,
    #[arg(long)]
    json: bool,
    /// Print the control-flow graph of every file.
    #[arg(long)]
    dump_cfg: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Corpus(c) => corpus_cmd(c).map(|()| ExitCode::SUCCESS),
        Cmd::Model(m) => model_cmd(m).map(|()| ExitCode::SUCCESS),
        Cmd::Scan(s) => scan_cmd(s),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<Vec<Sample>> {
    corpus::read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

fn save(path: &Path, samples: &[Sample]) -> Result<()> {
    corpus::write_jsonl(path, samples).with_context(|| format!("writing {}", path.display()))
}

fn parse_frac(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => bail!("--frac needs three comma-separated numbers"),
    }
}

fn corpus_cmd(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Mine { repo, out, max_files, keywords, max_safe } => {
            let mut filter =
                CommitFilter { max_files_changed: max_files, max_safe_files: max_safe, ..CommitFilter::default() };
            if let Some(k) = keywords {
                filter.keywords = CommitFilter::parse_keywords(&std::fs::read_to_string(&k)?)?;
            }
            let mined = corpus::mine_repo(&repo, &filter)?;
            let mut all = mined.files;
            all.extend(mined.functions);
            save(&out, &all)?;
            let r = &mined.report;
            println!(
                "{} commits scanned, {} used, {} excluded",
                r.commits_scanned,
                r.commits_used.len(),
                r.excluded.len()
            );
            for (sha, why) in &r.excluded {
                println!("  skip {} {why}", &sha[..sha.len().min(10)]);
            }
            print!("{}", corpus::dataset_stats(&all));
        }
        CorpusCmd::Gen { n, seed, out, granularity } => {
            let s = corpus::generate_synthetic_with(n, seed, granularity.into());
            save(&out, &s)?;
            println!("wrote {} samples to {}", s.len(), out.display());
        }
        CorpusCmd::Split { input, seed, frac, out_dir } => {
            let spec = SplitSpec::new(parse_frac(&frac)?, seed)?;
            let (tr, va, te) = corpus::split(&load(&input)?, &spec)?;
            let dir = out_dir.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
            for (part, s) in [("train", &tr), ("val", &va), ("test", &te)] {
                let p = dir.join(format!("{stem}.{part}.jsonl"));
                save(&p, s)?;
                println!("{part}: {} -> {}", s.len(), p.display());
            }
        }
        CorpusCmd::Ingest { dir, manifest, out } => {
            let s = corpus::ingest_synthetic(&dir, &manifest)?;
            save(&out, &s)?;
            print!("{}", corpus::dataset_stats(&s));
        }
        CorpusCmd::Stats { input } => print!("{}", corpus::dataset_stats(&load(&input)?)),
        CorpusCmd::Review { input, out, fraction, seed } => {
            let samples = load(&input)?;
            let picked = review::select(&samples, fraction, seed);
            let records = review::run(&picked, &mut io::stdin().lock(), &mut io::stdout())?;
            review::write_records(&out, &records)?;
            println!("{} verdicts written to {}", records.len(), out.display());
        }
    }
    Ok(())
}

fn model_cmd(cmd: ModelCmd) -> Result<()> {
    match cmd {
        ModelCmd::Train(a) => train_cmd(a),
        ModelCmd::Predict { ckpt, input } => {
            let c = Classifier::load(&ckpt)?;
            let files = if input.is_dir() { scanner::discover(&input)? } else { vec![input] };
            let mut out = io::stdout().lock();
            for f in files {
                let code = std::fs::read_to_string(&f)?;
                match c.predict(&code) {
                    Ok(p) => {
                        let probs: Vec<String> = p.probs.iter().map(|x| format!("{x:.4}")).collect();
                        writeln!(out, "{}\t{}\t{}", f.display(), p.label, probs.join(" "))?;
                    }
                    Err(e) => writeln!(out, "{}\terror\t{e}", f.display())?,
                }
            }
            Ok(())
        }
        ModelCmd::Eval { ckpt, corpus: path, csv } => {
            let c = Classifier::load(&ckpt)?;
            let samples: Vec<Sample> = load(&path)?.into_iter().filter(|s| s.granularity == c.granularity()).collect();
            let name = ckpt.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
            let report = score(&c, &samples)?;
            let fmt = if csv { TableFormat::Csv } else { TableFormat::Text };
            print!("{}", render_table(&[(&name, &report)], fmt));
            Ok(())
        }
    }
}

fn score(c: &Classifier, samples: &[Sample]) -> Result<deeptective::metrics::ConfusionReport> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    let mut skipped = 0;
    for s in samples {
        match c.predict(&s.code) {
            Ok(p) => {
                truth.push(s.label);
                pred.push(p.label);
            }
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("{skipped} samples failed to lex and were not scored");
    }
    Ok(confusion(&truth, &pred)?)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let g: Granularity = a.granularity.into();
    let samples: Vec<Sample> = load(&a.corpus)?.into_iter().filter(|s| s.granularity == g).collect();
    if samples.is_empty() {
        bail!("no {g}-level samples in {}", a.corpus.display());
    }
    let (tr, va, te) = corpus::split(&samples, &SplitSpec { fractions: [0.8, 0.1, 0.1], seed: a.seed })?;
    let keep = match &a.keep {
        Some(p) => KeepList::load(p)?,
        None => KeepList::default(),
    };
    let mut tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        class_weights: a.class_weights,
        ..TrainConfig::default()
    };
    tc.adam.lr = a.lr;
    let make_arch = match a.arch {
        ArchArg::Full => ArchitectureConfig::full,
        ArchArg::Tiny => ArchitectureConfig::tiny,
    };
    println!("train {} / val {} / test {}", tr.len(), va.len(), te.len());
    let trained = deeptective::model::train_classifier(&tr, &va, g, make_arch, &keep, &tc, &mut |r| {
        println!(
            "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  train_acc {:.3}  val_acc {:.3}  lr {:e}",
            r.epoch, r.train_loss, r.val_loss, r.train_acc, r.val_acc, r.lr
        );
    })?;
    trained.classifier.save(&a.out)?;
    if let Some(p) = &a.log {
        std::fs::write(p, deeptective::model::log_csv(&trained.log))?;
    }
    println!("best epoch {}, checkpoint {}", trained.best_epoch, a.out.display());
    if !trained.skipped.is_empty() {
        println!("{} samples skipped (lex errors)", trained.skipped.len());
    }
    if !te.is_empty() {
        let report = score(&trained.classifier, &te)?;
        print!("{}", render_table(&[("test", &report)], TableFormat::Text));
    }
    Ok(())
}

fn scan_cmd(a: ScanArgs) -> Result<ExitCode> {
    let opts = ScanOptions { threads: a.threads.max(1), dump_cfg: a.dump_cfg };
    let res = scanner::scan_with_checkpoints(&a.dir, &a.file_model, &a.func_model, &opts)?;
    let fmt = if a.json { ReportFormat::Json } else { ReportFormat::Text };
    let mut out = io::stdout().lock();
    if a.dump_cfg && fmt == ReportFormat::Text {
        for (path, dump) in &res.cfg_dumps {
            writeln!(out, "# {path}\n{dump}")?;
        }
    }
    match fmt {
        ReportFormat::Json => writeln!(out, "{}", scanner::render_json(&res))?,
        ReportFormat::Text => write!(out, "{}", scanner::render_text(&res))?,
    }
    Ok(if res.findings.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
