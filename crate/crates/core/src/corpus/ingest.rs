use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::{CorpusError, Label, Provenance, ProvenanceKind, Sample};
use crate::frontend::{lex, normalize, AbstractionBudget, Granularity, KeepList};

/// `path,label` rows keyed by path relative to the corpus directory.
pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, Label>, CorpusError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CorpusError::Manifest(e.to_string()))?;
        let (Some(p), Some(l)) = (row.get(0), row.get(1)) else {
            return Err(CorpusError::Manifest(format!("short row {row:?}")));
        };
        let label = l.parse::<Label>().map_err(CorpusError::Manifest)?;
        out.insert(p.trim().replace('\\', "/"), label);
    }
    Ok(out)
}

/// Hash of the normalized token stream, so markup-only differences collide.
pub fn normalized_hash(code: &str, keep: &KeepList) -> String {
    let mut h = Sha256::new();
    match lex(code) {
        Ok(toks) => {
            for t in normalize(&toks, keep, AbstractionBudget::for_granularity(Granularity::File)) {
                h.update(t.surface.as_bytes());
                h.update([0u8]);
            }
        }
        Err(_) => h.update(code.as_bytes()),
    }
    hex::encode(h.finalize())
}

/// File-level samples for every `.php` file under `dir`, first occurrence of
/// each normalized duplicate kept in path order.
pub fn ingest_synthetic(dir: &Path, manifest: &Path) -> Result<Vec<Sample>, CorpusError> {
    let labels = read_manifest(manifest)?;
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io(e.into()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "php") {
            let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
            files.push((rel.to_string_lossy().replace('\\', "/"), entry.into_path()));
        }
    }
    let present: HashSet<&str> = files.iter().map(|(r, _)| r.as_str()).collect();
    let unlabeled: Vec<String> =
        files.iter().filter(|(r, _)| !labels.contains_key(r)).map(|(r, _)| r.clone()).collect();
    let missing: Vec<String> = labels.keys().filter(|k| !present.contains(k.as_str())).cloned().collect();
    if !unlabeled.is_empty() || !missing.is_empty() {
        return Err(CorpusError::ManifestMismatch { unlabeled, missing });
    }
    let keep = KeepList::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (rel, path) in files {
        let bytes = std::fs::read(&path)?;
        let code = String::from_utf8_lossy(&bytes).into_owned();
        if code.trim().is_empty() || !seen.insert(normalized_hash(&code, &keep)) {
            continue;
        }
        let prov = Provenance { kind: ProvenanceKind::Synthetic, origin: rel.clone() };
        out.push(Sample::new(code, Granularity::File, labels[&rel], prov)?);
    }
    Ok(out)
}
