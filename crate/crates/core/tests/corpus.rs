use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::process::Command;

use deeptective::corpus::generate::sanitizes;
use deeptective::corpus::{
    dataset_stats, generate_synthetic, generate_synthetic_with, ingest_synthetic, mine_repo, split, CommitFilter,
    CorpusError, Label, SplitSpec,
};
use deeptective::frontend::Granularity;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn git(dir: &Path, args: &[&str]) {
    let out = Command::new("git").arg("-C").arg(dir).args(args).output().unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn init_repo(dir: &Path) {
    git(dir, &["init", "-q"]);
    git(dir, &["config", "user.email", "dev@example.org"]);
    git(dir, &["config", "user.name", "dev"]);
    git(dir, &["config", "commit.gpgsign", "false"]);
}

fn commit(dir: &Path, files: &[(&str, &str)], message: &str) {
    for (p, text) in files {
        let path = dir.join(p);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, text).unwrap();
    }
    git(dir, &["add", "-A"]);
    git(dir, &["commit", "-q", "--allow-empty", "-m", message]);
}

/// Nine preamble lines, then one function on lines 10..=20.
fn app_php(line15: &str) -> String {
    let mut lines = vec!["<?php".to_string()];
    for i in 2..10 {
        lines.push(format!("// header {i}"));
    }
    lines.push("function show_name() {".into());
    for i in 11..20 {
        lines.push(if i == 15 { line15.to_string() } else { format!("    $v{i} = {i};") });
    }
    lines.push("}".into());
    lines.push("show_name();".into());
    lines.join("\n") + "\n"
}

#[test]
fn mining_single_fix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init_repo(d);
    let vulnerable = app_php("    echo $_GET['name'];");
    commit(
        d,
        &[("app.php", &vulnerable), ("lib/util.php", "<?php\nfunction util() { return 1; }\n"), ("README", "x")],
        "initial import",
    );
    commit(d, &[("app.php", &app_php("    echo htmlspecialchars($_GET['name']);"))], "Fix XSS in name display");

    let mined = mine_repo(d, &CommitFilter::default()).unwrap();
    let pos: Vec<_> = mined.files.iter().filter(|s| s.label.is_unsafe()).collect();
    assert_eq!(pos.len(), 1);
    assert_eq!(pos[0].label, Label::Xss);
    assert_eq!(pos[0].code, vulnerable);
    let safe: Vec<_> = mined.files.iter().filter(|s| s.label == Label::Safe).collect();
    assert_eq!(safe.len(), 1);
    assert!(safe[0].provenance.origin.ends_with(":lib/util.php"));
    assert_eq!(mined.functions.len(), 1);
    assert_eq!(mined.functions[0].label, Label::Xss);
    assert!(mined.functions[0].code.starts_with("function show_name()"));
    assert_eq!(mined.report.commits_used.len(), 1);
}

#[test]
fn mining_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init_repo(d);
    let many: Vec<(String, String)> =
        (0..25).map(|i| (format!("m/f{i}.php"), format!("<?php\necho $_GET['a{i}'];\n"))).collect();
    let refs: Vec<(&str, &str)> = many.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    commit(d, &refs, "initial");
    commit(d, &[("a.php", "<?php\n$q = $_GET['id'];\nmysql_query(\"SELECT $q\");\n")], "add a");
    let fixed: Vec<(String, String)> =
        (0..25).map(|i| (format!("m/f{i}.php"), format!("<?php\necho intval($_GET['a{i}']);\n"))).collect();
    let refs: Vec<(&str, &str)> = fixed.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    commit(d, &refs, "fix sqli everywhere");
    commit(d, &[("a.php", "<?php\n$q = intval($_GET['id']);\nmysql_query(\"SELECT $q\");\n")], "fix xss and sqli");
    commit(d, &[("a.php", "<?php\n$q = intval($_GET['id']);\n")], "fix sql injection by removing the query");

    let err = mine_repo(d, &CommitFilter::default()).unwrap_err();
    assert!(matches!(err, CorpusError::NoMatches), "{err}");

    // the same history with the multi-class exclusion switched off yields the a.php fix
    let lax = CommitFilter { multi_label_exclude: false, ..CommitFilter::default() };
    let mined = mine_repo(d, &lax).unwrap();
    assert_eq!(mined.files.iter().filter(|s| s.label.is_unsafe()).count(), 1);
}

#[test]
fn mining_reports_excluded_commits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init_repo(d);
    commit(d, &[("a.php", "<?php\necho $_GET['x'];\necho 1;\n")], "start");
    commit(d, &[("a.php", "<?php\necho $_GET['x'];\n")], "xss: drop line");
    commit(d, &[("a.php", "<?php\necho strip_tags($_GET['x']);\n")], "xss fix");
    let mined = mine_repo(d, &CommitFilter::default()).unwrap();
    assert_eq!(mined.report.commits_used.len(), 1);
    assert_eq!(mined.report.excluded.len(), 1);
    assert!(mined.report.excluded[0].1.contains("added lines"));
}

/// Random function layouts and patch points; every function positive must
/// span a patched line, every negative must not.
#[test]
fn mining_soundness_on_random_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init_repo(d);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut spans = Vec::new();
    let mut lines = vec!["<?php".to_string()];
    for f in 0..6 {
        for _ in 0..rng.random_range(0..3) {
            lines.push("$top = 1;".into());
        }
        let start = lines.len() + 1;
        lines.push(format!("function f{f}($a) {{"));
        for k in 0..rng.random_range(1..6) {
            lines.push(format!("    $a{k} = $a + {k};"));
        }
        lines.push("}".into());
        spans.push((format!("f{f}"), start, lines.len()));
    }
    let text = lines.join("\n") + "\n";
    commit(d, &[("x.php", &text)], "import");
    let mut current = lines.clone();
    let mut expected: Vec<(String, BTreeSet<usize>)> = Vec::new();
    for round in 0..4 {
        let before = current.clone();
        let target = rng.random_range(2..=current.len());
        current[target - 1] = format!("{} // patched {round}", current[target - 1]);
        commit(d, &[("x.php", &(current.join("\n") + "\n"))], &format!("fix xss #{round}"));
        let hit: BTreeSet<usize> = BTreeSet::from([target]);
        expected.push((before.join("\n") + "\n", hit));
    }
    let mined = mine_repo(d, &CommitFilter::default()).unwrap();
    for s in mined.functions.iter().filter(|s| s.label.is_unsafe()) {
        let explained = expected.iter().any(|(code, hit)| {
            let file_lines: Vec<&str> = code.lines().collect();
            spans.iter().any(|(_, start, end)| {
                file_lines[start - 1..*end].join("\n") == s.code && hit.iter().any(|l| (start..=end).contains(&l))
            })
        });
        assert!(explained, "positive without a patched line:\n{}", s.code);
    }
    // brute force over each round: positives are exactly the functions whose span holds the patched line
    let positives: HashSet<&str> =
        mined.functions.iter().filter(|s| s.label.is_unsafe()).map(|s| s.code.as_str()).collect();
    for (code, hit) in &expected {
        let file_lines: Vec<&str> = code.lines().collect();
        for (_, start, end) in &spans {
            let body = file_lines[start - 1..*end].join("\n");
            let want = hit.iter().any(|l| (start..=end).contains(&l));
            if want {
                assert!(positives.contains(body.as_str()), "missing positive for lines {start}..={end}");
            }
        }
    }
}

#[test]
fn ingest_dedups_markup_variants() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let body = "<?php\n$tainted = $_GET['userData'];\necho $tainted ;\n?>";
    std::fs::write(d.join("a_style.php"), format!("<html><head><style>{body}</style></head></html>\n")).unwrap();
    std::fs::write(d.join("b_script.php"), format!("<html><head><script>{body}</script></head></html>\n")).unwrap();
    std::fs::write(d.join("m.csv"), "path,label\na_style.php,XSS\nb_script.php,XSS\n").unwrap();
    let out = ingest_synthetic(d, &d.join("m.csv")).unwrap();
    assert_eq!(out.len(), 1);
    assert!(out[0].code.contains("<style>"));
    assert_eq!(out[0].granularity, Granularity::File);
}

#[test]
fn ingest_counts_and_errors() {
    let empty = tempfile::tempdir().unwrap();
    std::fs::write(empty.path().join("m.csv"), "path,label\n").unwrap();
    assert!(ingest_synthetic(empty.path(), &empty.path().join("m.csv")).unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("php");
    std::fs::create_dir_all(&d).unwrap();
    let mut manifest = String::from("path,label\n");
    for i in 0..10 {
        // three of the ten repeat an earlier file; the rest differ in structure
        let k = if i >= 7 { i - 7 } else { i };
        std::fs::write(d.join(format!("f{i}.php")), format!("<?php\n{}", "echo $_GET['k'];\n".repeat(k + 1))).unwrap();
        manifest.push_str(&format!("f{i}.php,XSS\n"));
    }
    let m = dir.path().join("m.csv");
    std::fs::write(&m, &manifest).unwrap();
    assert_eq!(ingest_synthetic(&d, &m).unwrap().len(), 7);

    std::fs::write(&m, manifest.replace("f3.php,XSS\n", "") + "gone.php,Safe\n").unwrap();
    match ingest_synthetic(&d, &m).unwrap_err() {
        CorpusError::ManifestMismatch { unlabeled, missing } => {
            assert_eq!(unlabeled, vec!["f3.php"]);
            assert_eq!(missing, vec!["gone.php"]);
        }
        e => panic!("{e}"),
    }
}

/// Straight-line taint walk: which variables carry user input, and which
/// sanitizer (if any) was last applied to them.
fn walk_label(code: &str) -> Label {
    let mut taint: HashMap<String, Option<String>> = HashMap::new();
    let vars = |s: &str| -> Vec<String> {
        let mut out = Vec::new();
        let b = s.as_bytes();
        let mut i = 0;
        while i < b.len() {
            if b[i] == b'$' {
                let j = (i + 1..b.len()).find(|&j| !(b[j].is_ascii_alphanumeric() || b[j] == b'_')).unwrap_or(b.len());
                out.push(s[i..j].to_string());
                i = j;
            } else {
                i += 1;
            }
        }
        out
    };
    let mut verdict = None;
    for line in code.lines().map(str::trim) {
        let flow = |rhs: &str, taint: &HashMap<String, Option<String>>| -> Option<Option<String>> {
            let mut state: Option<Option<String>> = None;
            for v in vars(rhs) {
                if v.starts_with("$_") {
                    state = Some(None);
                } else if let Some(s) = taint.get(&v) {
                    state = Some(s.clone());
                }
            }
            let call = rhs.split('(').next().unwrap_or("").trim();
            match state {
                Some(_)
                    if rhs.contains('(')
                        && [
                            "htmlspecialchars",
                            "htmlentities",
                            "strip_tags",
                            "intval",
                            "mysql_real_escape_string",
                            "mysqli_real_escape_string",
                            "addslashes",
                            "escapeshellarg",
                            "escapeshellcmd",
                        ]
                        .contains(&call) =>
                {
                    Some(Some(call.to_string()))
                }
                other => other,
            }
        };
        let sink = if line.starts_with("echo") || line.starts_with("print") {
            Some((Label::Xss, line.to_string()))
        } else if line.contains("query(") {
            Some((Label::Sqli, line.to_string()))
        } else if ["exec(", "system(", "shell_exec(", "passthru("].iter().any(|s| line.contains(s)) {
            Some((Label::Osci, line.to_string()))
        } else {
            None
        };
        if let Some((class, text)) = sink {
            let arg = text.split_once('(').map_or(text.trim_start_matches("echo").to_string(), |(_, a)| a.to_string());
            if let Some(state) = flow(&arg, &taint) {
                let ok = state.is_some_and(|san| sanitizes(&san, class));
                verdict = Some(if ok { Label::Safe } else { class });
            } else {
                verdict.get_or_insert(Label::Safe);
            }
            continue;
        }
        if let Some((lhs, rhs)) = line.split_once(" = ") {
            let target = lhs.trim().trim_end_matches("[]").to_string();
            match flow(rhs, &taint) {
                Some(s) => {
                    taint.insert(target, s);
                }
                None if !lhs.contains("[]") => {
                    taint.remove(&target);
                }
                None => {}
            }
        }
    }
    verdict.expect("every sample has a sink")
}

#[test]
fn generator_labels_match_taint_walk() {
    for g in [Granularity::File, Granularity::Function] {
        for s in generate_synthetic_with(60, 5, g) {
            assert_eq!(walk_label(&s.code), s.label, "{}", s.code);
        }
    }
}

#[test]
fn generator_examples() {
    let echo = "<?php\n$tainted = $_GET['userData'];\necho $tainted ;\n?>";
    assert_eq!(walk_label(echo), Label::Xss);
    let stripped = "<?php\n$tainted = $_GET['userData'];\n$sanitized = strip_tags($tainted);\n$tainted = $sanitized;\necho $tainted ;\n?>";
    assert_eq!(walk_label(stripped), Label::Safe);
    let a = serde_json::to_string(&generate_synthetic(15, 7)).unwrap();
    let b = serde_json::to_string(&generate_synthetic(15, 7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stats_examples() {
    let st = dataset_stats(&[]);
    assert_eq!(st.totals(), [0; 4]);
    let st = dataset_stats(&generate_synthetic(10, 3));
    assert_eq!(st.totals(), [10; 4]);
    assert_eq!(st.count(Granularity::File, Label::Osci), 10);
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sard_sharp_manifest.csv");
    let labels = deeptective::corpus::read_manifest(&manifest).unwrap();
    let st = deeptective::corpus::DatasetStats::from_labels(Granularity::File, labels.values());
    assert_eq!(st.totals(), [2928, 960, 288, 250]);
}

#[test]
fn split_examples() {
    let mut c = generate_synthetic(100, 2);
    c.retain(|s| matches!(s.label, Label::Safe | Label::Xss));
    for seed in [0, 9] {
        let (tr, va, te) = split(&c, &SplitSpec::new([0.8, 0.1, 0.1], seed).unwrap()).unwrap();
        for l in [Label::Safe, Label::Xss] {
            let n = |v: &[deeptective::corpus::Sample]| v.iter().filter(|s| s.label == l).count();
            assert_eq!((n(&tr), n(&va), n(&te)), (80, 10, 10));
        }
    }
    let spec = SplitSpec::new([0.8, 0.1, 0.1], 4).unwrap();
    assert_eq!(split(&c, &spec).unwrap(), split(&c, &spec).unwrap());
    let two: Vec<_> = generate_synthetic(2, 1);
    assert!(matches!(split(&two, &spec), Err(CorpusError::ClassTooSmall { count: 2, .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_partitions_and_stratifies(n in 3usize..40, seed in any::<u64>(), a in 1u32..8, b in 1u32..8, c in 1u32..8) {
        let total = (a + b + c) as f64;
        let fr = [a as f64 / total, b as f64 / total, 1.0 - a as f64 / total - b as f64 / total];
        let spec = SplitSpec::new(fr, seed).unwrap();
        let corpus = generate_synthetic(n, seed % 5);
        let (tr, va, te) = split(&corpus, &spec).unwrap();
        let mut ids: Vec<&str> = tr.iter().chain(&va).chain(&te).map(|s| s.id.as_str()).collect();
        prop_assert_eq!(ids.len(), corpus.len());
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), corpus.len());
        for l in Label::ALL {
            for (k, part) in [&tr, &va, &te].into_iter().enumerate() {
                let got = part.iter().filter(|s| s.label == l).count() as f64;
                prop_assert!((got - n as f64 * fr[k]).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn sample_ids_are_content_hashes(code in "[ -~]{1,60}") {
        let p = deeptective::corpus::Provenance { kind: deeptective::corpus::ProvenanceKind::Fixture, origin: "x".into() };
        prop_assume!(!code.trim().is_empty());
        let a = deeptective::corpus::Sample::new(code.clone(), Granularity::File, Label::Safe, p.clone()).unwrap();
        let b = deeptective::corpus::Sample::new(code.clone(), Granularity::File, Label::Osci, p).unwrap();
        prop_assert_eq!(&a.id, &b.id);
        prop_assert_eq!(a.id, deeptective::corpus::sample_id(&code, Granularity::File));
    }
}
