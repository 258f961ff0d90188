//! Synthetic test-suite style samples.
//!
//! Every sample is one data flow: a user-controlled source is read,
//! optionally transformed, optionally passed through a sanitizer, then
//! handed to one sink. The flow may sit under an isset guard, inside a
//! function or inside a class method. A sample is Safe exactly when the
//! sanitizer suits the sink's class.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sample::{Label, Provenance, ProvenanceKind, Sample};
use crate::frontend::Granularity;

const SOURCES: &[&str] = &["$_GET", "$_POST", "$_REQUEST", "$_COOKIE", "$_FILES"];
const KEYS: &[&str] = &["userData", "id", "name", "q", "file"];
const TRANSFORMS: &[&str] = &["http_build_query", "trim", "stripslashes", "urldecode"];
const WRAPPERS: &[(&str, &str)] = &[
    ("", ""),
    ("<!DOCTYPE html><html>\n<head><style>", "</style></head>\n<body><h1>Hello World!</h1></body>\n</html>\n"),
    ("<!DOCTYPE html><html>\n<head><script>", "</script></head>\n<body><h1>Hello World!</h1></body>\n</html>\n"),
    ("<!DOCTYPE html><html>\n<body>", "</body>\n</html>\n"),
];

/// Sanitizer call templates; `{}` is the argument.
pub fn sanitizers(class: Label) -> &'static [&'static str] {
    match class {
        Label::Xss => &["htmlspecialchars({})", "htmlentities({}, ENT_QUOTES)", "strip_tags({})", "intval({})"],
        Label::Sqli => {
            &["mysql_real_escape_string({})", "mysqli_real_escape_string($conn, {})", "addslashes({})", "intval({})"]
        }
        Label::Osci => &["escapeshellarg({})", "escapeshellcmd({})", "intval({})"],
        Label::Safe => &[],
    }
}

/// Whether sanitizer `name` neutralizes input for sinks of `class`.
pub fn sanitizes(name: &str, class: Label) -> bool {
    sanitizers(class).iter().any(|t| t.split('(').next() == Some(name))
}

fn sink(rng: &mut ChaCha8Rng, class: Label, var: &str) -> Vec<String> {
    match class {
        Label::Xss => {
            let forms = [
                format!("echo {var} ;"),
                format!("print({var});"),
                format!("print_r({var});"),
                format!("printf(\"%s\", {var});"),
                format!("echo \"<div>\" . {var} . \"</div>\";"),
            ];
            vec![forms.choose(rng).unwrap().clone()]
        }
        Label::Sqli => {
            let query = [
                format!("$query = \"SELECT * FROM users WHERE id='\" . {var} . \"'\";"),
                format!("$query = \"SELECT name FROM student WHERE name='\" . {var} . \"' LIMIT 1\";"),
                format!("$query = 'DELETE FROM sessions WHERE token = ' . {var};"),
            ];
            let exec =
                ["$res = mysql_query($query);", "$res = mysqli_query($conn, $query);", "$res = $conn->query($query);"];
            vec![query.choose(rng).unwrap().clone(), exec.choose(rng).unwrap().to_string()]
        }
        Label::Osci => {
            let cmd = [
                format!("$cmd = 'ls ' . {var};"),
                format!("$cmd = \"cat /tmp/\" . {var};"),
                format!("$cmd = 'ping -c 1 ' . {var};"),
            ];
            let exec = ["exec($cmd, $output);", "system($cmd);", "$out = shell_exec($cmd);", "passthru($cmd);"];
            vec![cmd.choose(rng).unwrap().clone(), exec.choose(rng).unwrap().to_string()]
        }
        Label::Safe => unreachable!("sinks have a vulnerability class"),
    }
}

/// Body lines (source read, optional transform, optional sanitizer, sink)
/// and the source expression.
fn body(rng: &mut ChaCha8Rng, label: Label) -> (Vec<String>, String) {
    let sink_class =
        if label == Label::Safe { *[Label::Xss, Label::Sqli, Label::Osci].choose(rng).unwrap() } else { label };
    let src = match *SOURCES.choose(rng).unwrap() {
        "$_FILES" => format!("$_FILES['{}']['name']", KEYS.choose(rng).unwrap()),
        s => format!("{s}['{}']", KEYS.choose(rng).unwrap()),
    };
    let mut lines = Vec::new();
    if rng.random_bool(0.5) {
        lines.push("$array = array();".to_string());
        lines.push("$array[] = 'safe' ;".to_string());
        lines.push(format!("$array[] = {src} ;"));
        lines.push("$array[] = 'safe' ;".to_string());
        lines.push("$tainted = $array[1] ;".to_string());
    } else if rng.random_bool(0.5) {
        lines.push(format!("$tainted = isset({src}) ? {src} : '';"));
    } else {
        lines.push(format!("$tainted = {src};"));
    }
    if rng.random_bool(0.5) {
        lines.push(format!("$tainted = {}($tainted);", TRANSFORMS.choose(rng).unwrap()));
    }
    let sanitizer = if label == Label::Safe {
        Some(*sanitizers(sink_class).choose(rng).unwrap())
    } else if rng.random_bool(0.5) {
        // a sanitizer for some other class leaves this sink exploitable
        let others: Vec<&str> = [Label::Xss, Label::Sqli, Label::Osci]
            .into_iter()
            .filter(|&c| c != sink_class)
            .flat_map(|c| sanitizers(c).iter().copied())
            .filter(|t| !t.starts_with("intval") && !sanitizers(sink_class).iter().any(|s| s == t))
            .filter(|t| !(sink_class == Label::Xss && t.starts_with("strip_tags")))
            .collect();
        Some(*others.choose(rng).unwrap())
    } else {
        None
    };
    if let Some(s) = sanitizer {
        lines.push(format!("$sanitized = {};", s.replace("{}", "$tainted")));
        lines.push("$tainted = $sanitized;".to_string());
    }
    lines.extend(sink(rng, sink_class, "$tainted"));
    (lines, src)
}

fn indent(lines: Vec<String>) -> Vec<String> {
    lines.into_iter().map(|l| format!("    {l}")).collect()
}

fn guarded(lines: Vec<String>, src: &str) -> Vec<String> {
    let mut out = vec![format!("if (isset({src})) {{")];
    out.extend(indent(lines));
    out.push("}".to_string());
    out
}

const FUNCTION_NAMES: &[&str] = &["handle_request", "render_page", "process_input", "run_task", "load_record"];
const CLASS_NAMES: &[&str] = &["Page", "Settings", "Controller", "Widget", "Handler"];
const METHOD_NAMES: &[&str] = &["save", "render", "init", "display", "update"];

fn render(rng: &mut ChaCha8Rng, label: Label, granularity: Granularity, serial: usize) -> String {
    let (mut lines, src) = body(rng, label);
    if rng.random_bool(0.3) {
        lines = guarded(lines, &src);
    }
    let function = format!("{}_{serial}", FUNCTION_NAMES.choose(rng).unwrap());
    match granularity {
        Granularity::File => {
            lines = match rng.random_range(0..3) {
                0 => lines,
                1 => {
                    let mut out = vec![format!("function {function}() {{")];
                    out.extend(indent(lines));
                    out.push("}".to_string());
                    out.push(format!("{function}();"));
                    out
                }
                _ => {
                    let class = format!("{}_{serial}", CLASS_NAMES.choose(rng).unwrap());
                    let method = METHOD_NAMES.choose(rng).unwrap();
                    let mut out = vec![format!("class {class} {{"), format!("    public function {method}() {{")];
                    out.extend(indent(indent(lines)));
                    out.push("    }".to_string());
                    out.push("}".to_string());
                    out.push(format!("$obj = new {class}();"));
                    out.push(format!("$obj->{method}();"));
                    out
                }
            };
            let (open, close) = WRAPPERS.choose(rng).unwrap();
            let mut out = String::new();
            out.push_str(open);
            out.push_str("<?php\n");
            for l in &lines {
                out.push_str(l);
                out.push('\n');
            }
            out.push_str("?>");
            if close.is_empty() {
                out.push('\n');
            } else {
                out.push_str(close);
            }
            out
        }
        Granularity::Function => {
            let prefix = ["function", "public function", "private static function"].choose(rng).unwrap();
            let mut out = format!("{prefix} {function}() {{\n");
            for l in &lines {
                out.push_str("    ");
                out.push_str(l);
                out.push('\n');
            }
            out.push_str("}\n");
            out
        }
    }
}

/// `n_per_class` distinct file-level samples per label.
pub fn generate_synthetic(n_per_class: usize, seed: u64) -> Vec<Sample> {
    generate_synthetic_with(n_per_class, seed, Granularity::File)
}

pub fn generate_synthetic_with(n_per_class: usize, seed: u64, granularity: Granularity) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(4 * n_per_class);
    for label in Label::ALL {
        let mut made = 0;
        let mut serial = 0;
        while made < n_per_class {
            serial += 1;
            let code = render(&mut rng, label, granularity, serial);
            let origin = format!("generator seed={seed} {label}#{serial}");
            let s = Sample::new(code, granularity, label, Provenance { kind: ProvenanceKind::Synthetic, origin })
                .expect("generated code is non-empty");
            if seen.insert(s.id.clone()) {
                out.push(s);
                made += 1;
            }
        }
    }
    out
}
