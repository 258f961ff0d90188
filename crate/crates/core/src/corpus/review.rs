//! Manual inspection of a random share of vulnerable samples. Verdicts are
//! recorded next to the corpus; labels are never rewritten.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index::sample as pick;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Rejected,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub id: String,
    pub label: String,
    pub origin: String,
    pub verdict: Verdict,
}

/// `ceil(fraction * positives)` vulnerable samples, in corpus order.
pub fn select(samples: &[Sample], fraction: f64, seed: u64) -> Vec<&Sample> {
    let pos: Vec<&Sample> = samples.iter().filter(|s| s.label.is_unsafe()).collect();
    let k = ((pos.len() as f64) * fraction.clamp(0.0, 1.0)).ceil() as usize;
    let mut idx = pick(&mut ChaCha8Rng::seed_from_u64(seed), pos.len(), k.min(pos.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pos[i]).collect()
}

/// Shows each sample and reads `y`, `n` or anything else (skip).
pub fn run(
    picked: &[&Sample],
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Vec<ReviewRecord>, CorpusError> {
    let mut out = Vec::with_capacity(picked.len());
    for (n, s) in picked.iter().enumerate() {
        writeln!(output, "== [{}/{}] {} {} ({})", n + 1, picked.len(), s.id, s.label, s.provenance.origin)?;
        writeln!(output, "{}", s.code)?;
        write!(output, "is this {}? [y/n/s] ", s.label)?;
        output.flush()?;
        let mut line = String::new();
        input.read_line(&mut line)?;
        let verdict = match line.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" => Verdict::Confirmed,
            "n" | "no" => Verdict::Rejected,
            _ => Verdict::Skipped,
        };
        out.push(ReviewRecord {
            id: s.id.clone(),
            label: s.label.to_string(),
            origin: s.provenance.origin.clone(),
            verdict,
        });
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[ReviewRecord]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic;

    #[test]
    fn selects_tenth_of_positives() {
        let c = generate_synthetic(10, 1);
        let p = select(&c, 0.1, 4);
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|s| s.label.is_unsafe()));
        assert_eq!(p, select(&c, 0.1, 4));
    }

    #[test]
    fn verdicts_recorded_labels_untouched() {
        let c = generate_synthetic(2, 1);
        let p = select(&c, 1.0, 0);
        let mut input = std::io::Cursor::new("y\nn\n\ny\nmaybe\nyes\n");
        let mut shown = Vec::new();
        let recs = run(&p, &mut input, &mut shown).unwrap();
        assert_eq!(recs.len(), 6);
        assert_eq!(recs[0].verdict, Verdict::Confirmed);
        assert_eq!(recs[1].verdict, Verdict::Rejected);
        assert_eq!(recs[2].verdict, Verdict::Skipped);
        assert_eq!(recs[4].verdict, Verdict::Skipped);
        assert_eq!(c, generate_synthetic(2, 1));
        let dir = tempfile::tempdir().unwrap();
        write_records(&dir.path().join("r.csv"), &recs).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(text.starts_with("id,label,origin,verdict\n"));
    }
}
