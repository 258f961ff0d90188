//! Two-stage project scan: a file-level model picks candidate files, a
//! function-level model localizes findings inside them.

mod report;

pub use report::{render_json, render_text, ReportFormat};

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::corpus::Label;
use crate::frontend::{extract_functions, Granularity};
use crate::model::{encode_unit, Classifier, Encoded, ModelError, Prediction};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("{0} is a {1}-level model")]
    WrongGranularity(String, &'static str),
    #[error("no .php files under {0}")]
    NoPhpFiles(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    pub threads: usize,
    pub dump_cfg: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { threads: 1, dump_cfg: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    /// Relative to the scanned directory, `/`-separated.
    pub path: String,
    pub granularity: Granularity,
    pub function: Option<String>,
    /// Inclusive 1-based line span.
    pub span: (usize, usize),
    pub label: Label,
    pub probs: [f64; 4],
    /// Stage-one verdict on the enclosing file.
    pub file_label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub path: String,
    pub reason: String,
}

/// Size and timing of one scan; times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub size_bytes: u64,
    pub php_files: usize,
    pub loc: usize,
    pub processing_secs: f64,
    pub inference_secs: f64,
    pub time_per_loc: f64,
    pub time_per_file: f64,
}

impl PerfReport {
    pub fn new(size_bytes: u64, php_files: usize, loc: usize, processing_secs: f64, inference_secs: f64) -> Self {
        let total = processing_secs + inference_secs;
        let per = |n: usize| if n == 0 { 0.0 } else { total / n as f64 };
        PerfReport {
            size_bytes,
            php_files,
            loc,
            processing_secs,
            inference_secs,
            time_per_loc: per(loc),
            time_per_file: per(php_files),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub findings: Vec<Finding>,
    pub perf: PerfReport,
    /// Files the first stage marked as vulnerable, with its verdict.
    pub flagged: Vec<(String, Label)>,
    pub files_scanned: usize,
    /// Files that could not be read or lexed.
    pub skipped: Vec<Skip>,
    /// Functions of flagged files that could not be encoded.
    pub skipped_functions: Vec<Skip>,
    /// `(path, dump)` per scanned file when requested.
    pub cfg_dumps: Vec<(String, String)>,
    pub wall_secs: f64,
}

/// `.php` files (any case) below `dir`, sorted, symlinks not followed.
pub fn discover(dir: &Path) -> Result<Vec<PathBuf>, ScanError> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).follow_links(false).sort_by_file_name() {
        let entry = entry.map_err(|e| ScanError::Io(e.into()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e.eq_ignore_ascii_case("php")) {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

/// Physical lines, blank ones included; a final line without a newline
/// still counts.
pub fn count_loc(path: &Path) -> std::io::Result<usize> {
    Ok(count_lines(&std::fs::read(path)?))
}

pub fn count_lines(bytes: &[u8]) -> usize {
    let newlines = bytes.iter().filter(|&&b| b == b'\n').count();
    newlines + usize::from(bytes.last().is_some_and(|&b| b != b'\n'))
}

fn rel(dir: &Path, p: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

struct FileOutcome {
    rel: String,
    bytes: u64,
    loc: usize,
    code: String,
    result: Result<(Prediction, Option<String>), String>,
    processing: Duration,
    inference: Duration,
}

fn classify_file(dir: &Path, path: &Path, model: &Classifier, dump: bool) -> FileOutcome {
    let rel = rel(dir, path);
    let mut out = FileOutcome {
        rel,
        bytes: 0,
        loc: 0,
        code: String::new(),
        result: Err(String::new()),
        processing: Duration::ZERO,
        inference: Duration::ZERO,
    };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            out.result = Err(format!("read failed: {e}"));
            return out;
        }
    };
    out.bytes = bytes.len() as u64;
    out.loc = count_lines(&bytes);
    out.code = String::from_utf8_lossy(&bytes).into_owned();
    let t0 = Instant::now();
    let encoded = encode_unit(&out.code, Granularity::File, model.arch.seq_len, &model.keep, &model.vocab);
    out.processing = t0.elapsed();
    let (seq, cfg) = match encoded {
        Ok(x) => x,
        Err(e) => {
            out.result = Err(e.to_string());
            return out;
        }
    };
    let enc = Encoded::new(&seq, &cfg);
    let t1 = Instant::now();
    let pred = model.predict_encoded(&[&enc]);
    out.inference = t1.elapsed();
    out.result = match pred {
        Ok(mut p) => Ok((p.remove(0), dump.then(|| cfg.dump()))),
        Err(e) => Err(e.to_string()),
    };
    out
}

/// Run both stages over every PHP file below `dir`.
pub fn scan(
    dir: &Path,
    file_model: &Classifier,
    func_model: &Classifier,
    opts: &ScanOptions,
) -> Result<ScanResult, ScanError> {
    if file_model.granularity() != Granularity::File {
        return Err(ScanError::WrongGranularity("file model".into(), file_model.granularity().as_str()));
    }
    if func_model.granularity() != Granularity::Function {
        return Err(ScanError::WrongGranularity("function model".into(), func_model.granularity().as_str()));
    }
    let wall = Instant::now();
    let files = discover(dir)?;
    if files.is_empty() {
        return Err(ScanError::NoPhpFiles(dir.display().to_string()));
    }

    let threads = opts.threads.max(1).min(files.len());
    let outcomes: Vec<FileOutcome> = if threads == 1 {
        files.iter().map(|p| classify_file(dir, p, file_model, opts.dump_cfg)).collect()
    } else {
        let chunk = files.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = files
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter().map(|p| classify_file(dir, p, file_model, opts.dump_cfg)).collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("scan worker panicked")).collect()
        })
    };

    let mut processing = Duration::ZERO;
    let mut inference = Duration::ZERO;
    let (mut size, mut loc) = (0u64, 0usize);
    let mut result = ScanResult {
        findings: Vec::new(),
        perf: PerfReport::new(0, 0, 0, 0.0, 0.0),
        flagged: Vec::new(),
        files_scanned: 0,
        skipped: Vec::new(),
        skipped_functions: Vec::new(),
        cfg_dumps: Vec::new(),
        wall_secs: 0.0,
    };
    let mut stage_two = Vec::new();
    for o in outcomes {
        size += o.bytes;
        loc += o.loc;
        processing += o.processing;
        inference += o.inference;
        match o.result {
            Err(reason) => result.skipped.push(Skip { path: o.rel, reason }),
            Ok((pred, dump)) => {
                result.files_scanned += 1;
                if let Some(d) = dump {
                    result.cfg_dumps.push((o.rel.clone(), d));
                }
                if pred.label.is_unsafe() {
                    result.flagged.push((o.rel.clone(), pred.label));
                    stage_two.push((o.rel, o.code, o.loc, pred));
                }
            }
        }
    }

    for (path, code, lines, file_pred) in stage_two {
        let functions = extract_functions(&code).unwrap_or_default();
        if functions.is_empty() {
            result.findings.push(Finding {
                path,
                granularity: Granularity::File,
                function: None,
                span: (1, lines.max(1)),
                label: file_pred.label,
                probs: file_pred.probs,
                file_label: file_pred.label,
            });
            continue;
        }
        for f in functions {
            let t0 = Instant::now();
            let encoded = encode_unit(
                &f.body,
                Granularity::Function,
                func_model.arch.seq_len,
                &func_model.keep,
                &func_model.vocab,
            );
            processing += t0.elapsed();
            let enc = match encoded {
                Ok((seq, cfg)) => Encoded::new(&seq, &cfg),
                Err(e) => {
                    result.skipped_functions.push(Skip { path: format!("{path}#{}", f.name), reason: e.to_string() });
                    continue;
                }
            };
            let t1 = Instant::now();
            let pred = func_model.predict_encoded(&[&enc])?.remove(0);
            inference += t1.elapsed();
            if pred.label.is_unsafe() {
                result.findings.push(Finding {
                    path: path.clone(),
                    granularity: Granularity::Function,
                    function: Some(f.name.clone()),
                    span: (f.start_line, f.end_line),
                    label: pred.label,
                    probs: pred.probs,
                    file_label: file_pred.label,
                });
            }
        }
    }
    result.findings.sort_by(|a, b| (&a.path, a.span.0).cmp(&(&b.path, b.span.0)));
    result.perf = PerfReport::new(size, files.len(), loc, processing.as_secs_f64(), inference.as_secs_f64());
    result.wall_secs = wall.elapsed().as_secs_f64();
    Ok(result)
}

/// Load both checkpoints and scan.
pub fn scan_with_checkpoints(
    dir: &Path,
    file_ckpt: &Path,
    func_ckpt: &Path,
    opts: &ScanOptions,
) -> Result<ScanResult, ScanError> {
    let load = |p: &Path| match Classifier::load(p) {
        Err(ModelError::MissingCheckpoint(m)) => Err(ScanError::MissingCheckpoint(m)),
        other => other.map_err(ScanError::from),
    };
    let file_model = load(file_ckpt)?;
    let func_model = load(func_ckpt)?;
    scan(dir, &file_model, &func_model, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_counts() {
        assert_eq!(count_lines(b""), 0);
        assert_eq!(count_lines(b"a\nb\n"), 2);
        assert_eq!(count_lines(b"a\nb"), 2);
        assert_eq!(count_lines(b"\n\n"), 2);
    }

    #[test]
    fn perf_derivations() {
        let p = PerfReport::new(100, 4, 50, 1.5, 0.5);
        assert_eq!(p.time_per_loc, 2.0 / 50.0);
        assert_eq!(p.time_per_file, 0.5);
        assert_eq!(PerfReport::new(0, 0, 0, 0.0, 0.0).time_per_loc, 0.0);
    }
}
