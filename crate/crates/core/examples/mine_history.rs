//! Mine a git repository for vulnerability-fixing commits. Without an
//! argument a two-commit demo repository is built in a temp directory.
//!
//! cargo run --example mine_history -- [/path/to/repo]

use std::path::Path;
use std::process::Command;

use deeptective::corpus::{dataset_stats, mine_repo, CommitFilter};

fn git(dir: &Path, args: &[&str]) -> anyhow::Result<()> {
    let ok = Command::new("git").arg("-C").arg(dir).args(args).status()?.success();
    anyhow::ensure!(ok, "git {args:?} failed");
    Ok(())
}

fn demo(dir: &Path) -> anyhow::Result<()> {
    git(dir, &["init", "-q"])?;
    git(dir, &["config", "user.email", "dev@example.com"])?;
    git(dir, &["config", "user.name", "dev"])?;
    let vuln = "<?php\nfunction show_name() {\n    $name = $_GET['name'];\n    echo $name;\n}\n";
    std::fs::write(dir.join("app.php"), vuln)?;
    git(dir, &["add", "-A"])?;
    git(dir, &["commit", "-q", "-m", "import"])?;
    std::fs::write(dir.join("app.php"), vuln.replace("echo $name;", "echo htmlspecialchars($name);"))?;
    git(dir, &["commit", "-q", "-am", "Fix XSS in name display"])?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let repo = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            demo(tmp.path())?;
            tmp.path().to_path_buf()
        }
    };
    let mined = mine_repo(&repo, &CommitFilter::default())?;
    let r = &mined.report;
    println!("{} commits, {} used", r.commits_scanned, r.commits_used.len());
    for (sha, why) in &r.excluded {
        println!("excluded {}: {why}", &sha[..12.min(sha.len())]);
    }
    for s in mined.files.iter().chain(&mined.functions).filter(|s| s.label.is_unsafe()) {
        println!("{:<5} {:<8} {}", s.label, s.granularity, s.provenance.origin);
    }
    let mut all = mined.files.clone();
    all.extend(mined.functions.iter().cloned());
    print!("{}", dataset_stats(&all));
    Ok(())
}
