//! Vulnerability-fixing commits from a local git history.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::process::Command;

use super::{CorpusError, Label, Provenance, ProvenanceKind, Sample};
use crate::frontend::{extract_functions, Granularity, IntervalTree};

#[derive(Debug, Clone, PartialEq)]
pub struct CommitFilter {
    /// Lowercase phrases and the class each one signals.
    pub keywords: Vec<(Label, String)>,
    pub max_files_changed: usize,
    pub drop_delete_only: bool,
    pub multi_label_exclude: bool,
    /// Upper bound on untouched files taken as Safe per commit.
    pub max_safe_files: Option<usize>,
}

const DEFAULT_KEYWORDS: &str = "\
XSS xss
XSS cross-site scripting
XSS cross site scripting
XSS cross-site
SQLi sqli
SQLi sql injection
SQLi sql-injection
OSCI command injection
OSCI command-injection
OSCI shell injection
OSCI os command
OSCI osci
";

impl Default for CommitFilter {
    fn default() -> Self {
        CommitFilter {
            keywords: Self::parse_keywords(DEFAULT_KEYWORDS).expect("default keywords parse"),
            max_files_changed: 20,
            drop_delete_only: true,
            multi_label_exclude: true,
            max_safe_files: None,
        }
    }
}

impl CommitFilter {
    /// One `LABEL phrase` per line; `#` starts a comment.
    pub fn parse_keywords(text: &str) -> Result<Vec<(Label, String)>, CorpusError> {
        let mut out = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (l, phrase) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| CorpusError::Filter(format!("no phrase in {line:?}")))?;
            let label: Label = l.parse().map_err(CorpusError::Filter)?;
            if label == Label::Safe {
                return Err(CorpusError::Filter("keywords must name a vulnerability class".into()));
            }
            out.push((label, phrase.trim().to_lowercase()));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.keywords.is_empty() {
            return Err(CorpusError::Filter("keyword list is empty".into()));
        }
        if self.max_files_changed == 0 {
            return Err(CorpusError::Filter("max_files_changed must be positive".into()));
        }
        Ok(())
    }

    /// Classes whose keywords occur in `message`.
    pub fn classify(&self, message: &str) -> BTreeSet<Label> {
        let msg = message.to_lowercase();
        self.keywords.iter().filter(|(_, k)| contains_phrase(&msg, k)).map(|(l, _)| *l).collect()
    }
}

/// Substring match that must start at a word boundary; single-word phrases
/// must also end at one.
fn contains_phrase(hay: &str, phrase: &str) -> bool {
    let whole_word = !phrase.contains([' ', '-']);
    let bytes = hay.as_bytes();
    let mut from = 0;
    while let Some(pos) = hay[from..].find(phrase) {
        let start = from + pos;
        let end = start + phrase.len();
        let left_ok = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let right_ok = !whole_word || end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if left_ok && right_ok {
            return true;
        }
        from = start + 1;
        while !hay.is_char_boundary(from) {
            from += 1;
        }
    }
    false
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MineReport {
    pub commits_scanned: usize,
    pub commits_used: Vec<String>,
    /// `(commit, reason)` for every keyword match that was dropped.
    pub excluded: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct MinedCorpus {
    pub files: Vec<Sample>,
    pub functions: Vec<Sample>,
    pub report: MineReport,
}

fn git(repo: &Path, args: &[&str]) -> Result<Vec<u8>, CorpusError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| CorpusError::Git(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(CorpusError::Git(format!(
            "git {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(out.stdout)
}

fn show(repo: &Path, rev: &str, path: &str) -> Result<String, CorpusError> {
    let bytes = git(repo, &["show", &format!("{rev}:{path}")])?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn is_php(path: &str) -> bool {
    path.rsplit('.').next().is_some_and(|e| e.eq_ignore_ascii_case("php"))
}

/// Old-side lines touched by each hunk of a zero-context diff, and whether
/// any hunk adds lines.
pub fn patched_lines(diff: &str) -> (BTreeSet<usize>, bool) {
    let mut lines = BTreeSet::new();
    let mut adds = false;
    for l in diff.lines().filter(|l| l.starts_with("@@ ")) {
        let mut parts = l.split_whitespace().skip(1);
        let (Some(old), Some(new)) = (parts.next(), parts.next()) else { continue };
        let range = |s: &str| -> (usize, usize) {
            let s = &s[1..];
            match s.split_once(',') {
                Some((a, b)) => (a.parse().unwrap_or(0), b.parse().unwrap_or(0)),
                None => (s.parse().unwrap_or(0), 1),
            }
        };
        let (a, b) = range(old);
        let (_, d) = range(new);
        adds |= d > 0;
        if b > 0 {
            lines.extend(a..a + b);
        } else {
            // pure insertion after old line `a`
            lines.insert(a.max(1));
        }
    }
    (lines, adds)
}

struct Commit {
    sha: String,
    parents: Vec<String>,
    message: String,
}

fn commits(repo: &Path) -> Result<Vec<Commit>, CorpusError> {
    let raw = git(repo, &["log", "--reverse", "--format=%H%x00%P%x00%B%x1e", "HEAD"])?;
    let text = String::from_utf8_lossy(&raw);
    let mut out = Vec::new();
    for rec in text.split('\x1e') {
        let rec = rec.trim_start_matches('\n');
        if rec.is_empty() {
            continue;
        }
        let mut f = rec.splitn(3, '\0');
        let sha = f.next().unwrap_or("").to_string();
        let parents = f.next().unwrap_or("").split_whitespace().map(String::from).collect();
        let message = f.next().unwrap_or("").to_string();
        out.push(Commit { sha, parents, message });
    }
    Ok(out)
}

/// Vulnerable pre-patch files and functions from fixing commits, with
/// untouched files of the same tree as Safe.
pub fn mine_repo(repo: &Path, filter: &CommitFilter) -> Result<MinedCorpus, CorpusError> {
    filter.validate()?;
    let repo_name = repo
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| repo.display().to_string());
    let mut corpus = MinedCorpus::default();
    let mut file_index: HashMap<String, usize> = HashMap::new();
    let mut func_index: HashMap<String, usize> = HashMap::new();

    for c in commits(repo)? {
        corpus.report.commits_scanned += 1;
        let labels = filter.classify(&c.message);
        if labels.is_empty() {
            continue;
        }
        let exclude = |corpus: &mut MinedCorpus, why: String| corpus.report.excluded.push((c.sha.clone(), why));
        if c.parents.len() != 1 {
            exclude(&mut corpus, if c.parents.is_empty() { "root commit".into() } else { "merge commit".into() });
            continue;
        }
        if labels.len() > 1 && filter.multi_label_exclude {
            let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
            exclude(&mut corpus, format!("matches several classes: {}", names.join(", ")));
            continue;
        }
        let label = *labels.iter().next().expect("non-empty");
        let parent = &c.parents[0];

        let raw = git(repo, &["diff", "--name-status", "--no-renames", "-z", parent, &c.sha])?;
        let fields: Vec<String> =
            raw.split(|&b| b == 0).filter(|f| !f.is_empty()).map(|f| String::from_utf8_lossy(f).into_owned()).collect();
        let changes: Vec<(&str, &str)> =
            fields.chunks(2).filter(|p| p.len() == 2).map(|p| (p[0].as_str(), p[1].as_str())).collect();
        if changes.len() > filter.max_files_changed {
            exclude(&mut corpus, format!("changes {} files", changes.len()));
            continue;
        }
        let touched: HashSet<&str> = changes.iter().map(|(_, p)| *p).collect();

        let mut file_pos = Vec::new();
        let mut func_samples = Vec::new();
        for &(status, path) in &changes {
            if !is_php(path) || !status.starts_with('M') {
                continue;
            }
            let diff = String::from_utf8_lossy(&git(
                repo,
                &["diff", "-U0", "--no-renames", "--no-color", parent, &c.sha, "--", path],
            )?)
            .into_owned();
            let (lines, adds) = patched_lines(&diff);
            if lines.is_empty() || (filter.drop_delete_only && !adds) {
                continue;
            }
            let code = show(repo, parent, path)?;
            let origin = format!("{repo_name}@{parent}:{path}");
            let prov = |o: String| Provenance { kind: ProvenanceKind::GitMined, origin: o };
            match Sample::new(code.clone(), Granularity::File, label, prov(origin.clone())) {
                Ok(s) => file_pos.push(s),
                Err(_) => continue,
            }
            let Ok(funcs) = extract_functions(&code) else { continue };
            let tree = IntervalTree::new(funcs.iter().enumerate().map(|(i, f)| (f.lines(), i)));
            let mut hit = vec![false; funcs.len()];
            for &l in &lines {
                for (_, &i) in tree.stab(l) {
                    hit[i] = true;
                }
            }
            for (f, h) in funcs.iter().zip(hit) {
                let lbl = if h { label } else { Label::Safe };
                if let Ok(s) =
                    Sample::new(f.body.clone(), Granularity::Function, lbl, prov(format!("{origin}#{}", f.name)))
                {
                    func_samples.push(s);
                }
            }
        }
        if file_pos.is_empty() {
            exclude(&mut corpus, "no modified PHP file with added lines".into());
            continue;
        }

        let mut file_neg = Vec::new();
        let tree = git(repo, &["ls-tree", "-r", "-z", "--name-only", parent])?;
        let untouched = tree
            .split(|&b| b == 0)
            .map(|f| String::from_utf8_lossy(f).into_owned())
            .filter(|p| is_php(p) && !touched.contains(p.as_str()))
            .take(filter.max_safe_files.unwrap_or(usize::MAX));
        for path in untouched {
            let code = show(repo, parent, &path)?;
            let prov = Provenance { kind: ProvenanceKind::GitMined, origin: format!("{repo_name}@{parent}:{path}") };
            if let Ok(s) = Sample::new(code, Granularity::File, Label::Safe, prov) {
                file_neg.push(s);
            }
        }

        corpus.report.commits_used.push(c.sha.clone());
        for s in file_pos.into_iter().chain(file_neg) {
            merge(&mut corpus.files, &mut file_index, s);
        }
        for s in func_samples {
            merge(&mut corpus.functions, &mut func_index, s);
        }
    }
    if corpus.files.is_empty() && corpus.functions.is_empty() {
        return Err(CorpusError::NoMatches);
    }
    Ok(corpus)
}

/// Insert unless already present; a vulnerable label replaces a Safe one.
fn merge(out: &mut Vec<Sample>, index: &mut HashMap<String, usize>, s: Sample) {
    match index.get(&s.id) {
        Some(&i) => {
            if out[i].label == Label::Safe && s.label != Label::Safe {
                out[i] = s;
            }
        }
        None => {
            index.insert(s.id.clone(), out.len());
            out.push(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_boundaries() {
        let f = CommitFilter::default();
        assert_eq!(f.classify("Fix XSS in search"), BTreeSet::from([Label::Xss]));
        assert_eq!(f.classify("prevent SQL injections"), BTreeSet::from([Label::Sqli]));
        assert!(f.classify("add xssfilter dependency").is_empty());
        assert!(f.classify("bump noxss").is_empty());
        assert_eq!(f.classify("fix xss and sqli").len(), 2);
        assert_eq!(f.classify("OS command injection in backup"), BTreeSet::from([Label::Osci]));
    }

    #[test]
    fn keyword_file_format() {
        let k = CommitFilter::parse_keywords("# c\nXSS  html injection\n\nSQLi blind sql\n").unwrap();
        assert_eq!(k, vec![(Label::Xss, "html injection".into()), (Label::Sqli, "blind sql".into())]);
        assert!(CommitFilter::parse_keywords("Safe nothing").is_err());
        let empty = CommitFilter { keywords: vec![], ..CommitFilter::default() };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn hunk_lines() {
        let d = "@@ -15 +15 @@\n-a\n+b\n@@ -30,0 +31,2 @@\n+x\n+y\n@@ -40,2 +42,0 @@\n-p\n-q\n";
        let (l, adds) = patched_lines(d);
        assert_eq!(l.into_iter().collect::<Vec<_>>(), vec![15, 30, 40, 41]);
        assert!(adds);
        let (_, adds) = patched_lines("@@ -3,2 +2,0 @@\n-a\n-b\n");
        assert!(!adds);
    }
}
