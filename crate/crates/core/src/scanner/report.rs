use std::fmt::Write as _;

use super::ScanResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

fn sorted(r: &ScanResult) -> ScanResult {
    let mut r = r.clone();
    r.findings.sort_by(|a, b| (&a.path, a.span.0).cmp(&(&b.path, b.span.0)));
    r
}

/// Findings ordered by path, then first line.
pub fn render_json(r: &ScanResult) -> String {
    serde_json::to_string_pretty(&sorted(r)).expect("scan results serialize")
}

/// Findings table followed by the performance row.
pub fn render_text(r: &ScanResult) -> String {
    let r = &sorted(r);
    let mut out = String::new();
    let _ = writeln!(out, "{:<40} {:<9} {:<30} {:>11} {:<6} {:>6}", "path", "level", "function", "lines", "label", "p");
    for f in &r.findings {
        let p = f.probs[f.label.index()];
        let _ = writeln!(
            out,
            "{:<40} {:<9} {:<30} {:>11} {:<6} {:>6.3}",
            f.path,
            f.granularity.as_str(),
            f.function.as_deref().unwrap_or("-"),
            format!("{}-{}", f.span.0, f.span.1),
            f.label.as_str(),
            p
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>12} {:>8} {:>10} {:>16} {:>15} {:>12} {:>12}",
        "size (B)", "files", "LoC", "processing (s)", "inference (s)", "time/LoC", "time/file"
    );
    let p = &r.perf;
    let _ = writeln!(
        out,
        "{:>12} {:>8} {:>10} {:>16.4} {:>15.4} {:>12.3e} {:>12.3e}",
        p.size_bytes, p.php_files, p.loc, p.processing_secs, p.inference_secs, p.time_per_loc, p.time_per_file
    );
    let _ = writeln!(
        out,
        "{} scanned, {} skipped, {} flagged in stage one, {} findings",
        r.files_scanned,
        r.skipped.len(),
        r.flagged.len(),
        r.findings.len()
    );
    for s in &r.skipped {
        let _ = writeln!(out, "skipped {}: {}", s.path, s.reason);
    }
    out
}
