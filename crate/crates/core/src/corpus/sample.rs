use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorpusError;
use crate::frontend::Granularity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Safe = 0,
    #[serde(rename = "XSS")]
    Xss = 1,
    #[serde(rename = "SQLi")]
    Sqli = 2,
    #[serde(rename = "OSCI")]
    Osci = 3,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Safe, Label::Xss, Label::Sqli, Label::Osci];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn is_unsafe(self) -> bool {
        self != Label::Safe
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Safe => "Safe",
            Label::Xss => "XSS",
            Label::Sqli => "SQLi",
            Label::Osci => "OSCI",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "safe" | "0" => Ok(Label::Safe),
            "xss" | "cwe-79" | "1" => Ok(Label::Xss),
            "sqli" | "cwe-89" | "2" => Ok(Label::Sqli),
            "osci" | "cwe-78" | "3" => Ok(Label::Osci),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProvenanceKind {
    Synthetic,
    GitMined,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    /// `repo@commit:path`, a generator seed, or a file path.
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub granularity: Granularity,
    pub label: Label,
    pub provenance: Provenance,
    pub code: String,
}

impl Sample {
    pub fn new(
        code: impl Into<String>,
        granularity: Granularity,
        label: Label,
        provenance: Provenance,
    ) -> Result<Self, CorpusError> {
        let code = code.into();
        if code.trim().is_empty() {
            return Err(CorpusError::EmptyCode(provenance.origin));
        }
        Ok(Sample { id: sample_id(&code, granularity), granularity, label, provenance, code })
    }
}

/// Content hash of `(granularity, code)`.
pub fn sample_id(code: &str, granularity: Granularity) -> String {
    let mut h = Sha256::new();
    h.update(granularity.as_str().as_bytes());
    h.update([0u8]);
    h.update(code.as_bytes());
    hex::encode(&h.finalize()[..16])
}

pub fn write_jsonl(path: &Path, samples: &[Sample]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(|e| CorpusError::Json { line: 0, message: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Sample>, CorpusError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Json { line: n + 1, message: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance { kind: ProvenanceKind::Fixture, origin: "t".into() }
    }

    #[test]
    fn id_depends_on_code_and_granularity() {
        let a = Sample::new("<?php echo 1;", Granularity::File, Label::Safe, prov()).unwrap();
        let b = Sample::new("<?php echo 1;", Granularity::File, Label::Xss, prov()).unwrap();
        let c = Sample::new("<?php echo 1;", Granularity::Function, Label::Safe, prov()).unwrap();
        assert_eq!(a.id, b.id);
        assert_ne!(a.id, c.id);
        assert_eq!(a.id.len(), 32);
    }

    #[test]
    fn empty_code_rejected() {
        assert!(Sample::new("  \n", Granularity::File, Label::Safe, prov()).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_field_order() {
        let s = Sample::new("<?php\necho \"é\";", Granularity::File, Label::Sqli, prov()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        write_jsonl(&p, &[s.clone(), s.clone()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("{\"id\":"));
        assert!(text.lines().next().unwrap().contains("\"label\":\"SQLi\""));
        assert_eq!(read_jsonl(&p).unwrap(), vec![s.clone(), s]);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("xss".parse::<Label>().unwrap(), Label::Xss);
        assert_eq!("SQLi".parse::<Label>().unwrap(), Label::Sqli);
        assert!("csrf".parse::<Label>().is_err());
        assert_eq!(Label::from_index(3), Some(Label::Osci));
    }
}
