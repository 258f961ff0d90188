//! Token vocabulary and fixed-length sequence encoding.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::normalize::{Granularity, NormalizedToken};

pub const PAD: &str = "<PAD>";
pub const UNK: &str = "<UNK>";
pub const PAD_ID: u32 = 0;
const HEADER: &str = "VOCAB v1";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("malformed vocabulary file at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Injective map from token surface to a dense id. Id 0 is padding, the
/// last id is the unknown-token bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, u32>,
    version: String,
}

impl Vocabulary {
    fn from_surfaces(surfaces: Vec<String>) -> Self {
        let index = surfaces.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let mut hasher = Sha256::new();
        for s in &surfaces {
            hasher.update(s.as_bytes());
            hasher.update([0u8]);
        }
        let version = hex::encode(&hasher.finalize()[..8]);
        Vocabulary { surfaces, index, version }
    }

    /// Build from the training corpus; ids follow first-seen order.
    pub fn build<I, S>(corpus: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[NormalizedToken]>,
    {
        Self::build_from_surfaces(
            corpus.into_iter().map(|doc| doc.as_ref().iter().map(|t| t.surface.clone()).collect::<Vec<_>>()),
        )
    }

    pub fn build_from_surfaces<I, D, S>(corpus: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut surfaces = vec![PAD.to_string()];
        let mut seen: HashMap<String, ()> = HashMap::new();
        let mut docs = 0usize;
        for doc in corpus {
            docs += 1;
            for s in doc {
                let s = s.as_ref();
                if s == PAD || s == UNK || seen.contains_key(s) {
                    continue;
                }
                seen.insert(s.to_string(), ());
                surfaces.push(s.to_string());
            }
        }
        if docs == 0 {
            return Err(VocabError::EmptyCorpus);
        }
        surfaces.push(UNK.to_string());
        Ok(Self::from_surfaces(surfaces))
    }

    /// Number of ids including PAD and UNK.
    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unk_id(&self) -> u32 {
        (self.surfaces.len() - 1) as u32
    }

    /// Content-derived tag used to match checkpoints with vocabularies.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn id(&self, surface: &str) -> u32 {
        self.index.get(surface).copied().unwrap_or_else(|| self.unk_id())
    }

    pub fn get(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.surfaces.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for (s, id) in self.iter() {
            let _ = writeln!(out, "{s}\t{id}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(VocabError::Malformed { line: 1, message: format!("expected {HEADER:?}") });
        }
        let mut surfaces = Vec::new();
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            let (surface, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| VocabError::Malformed { line: lineno, message: "expected surface<TAB>id".into() })?;
            let id: usize =
                id.parse().map_err(|_| VocabError::Malformed { line: lineno, message: format!("bad id {id:?}") })?;
            if id != surfaces.len() {
                return Err(VocabError::Malformed {
                    line: lineno,
                    message: format!("ids must be dense, expected {}", surfaces.len()),
                });
            }
            surfaces.push(surface.to_string());
        }
        if surfaces.len() < 2 || surfaces[0] != PAD || surfaces.last().map(String::as_str) != Some(UNK) {
            return Err(VocabError::Malformed { line: 0, message: "missing PAD/UNK entries".into() });
        }
        Ok(Self::from_surfaces(surfaces))
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.surfaces.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let surfaces = Vec::<String>::deserialize(deserializer)?;
        if surfaces.len() < 2 {
            return Err(serde::de::Error::custom("vocabulary needs PAD and UNK"));
        }
        Ok(Self::from_surfaces(surfaces))
    }
}

/// Fixed-length id vector for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub true_len: usize,
    pub granularity: Granularity,
}

impl TokenSequence {
    /// The non-padding prefix.
    pub fn tokens(&self) -> &[u32] {
        &self.ids[..self.true_len]
    }
}

/// Map surfaces to ids, keeping the last `len` tokens and zero-padding.
pub fn encode_ids<S: AsRef<str>>(surfaces: &[S], vocab: &Vocabulary, len: usize) -> (Vec<u32>, usize) {
    let start = surfaces.len().saturating_sub(len);
    let kept = &surfaces[start..];
    let mut ids: Vec<u32> = kept.iter().map(|s| vocab.id(s.as_ref())).collect();
    let true_len = ids.len();
    ids.resize(len, PAD_ID);
    (ids, true_len)
}

pub fn encode(tokens: &[NormalizedToken], vocab: &Vocabulary, len: usize, granularity: Granularity) -> TokenSequence {
    let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
    let (ids, true_len) = encode_ids(&surfaces, vocab, len);
    TokenSequence { ids, true_len, granularity }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(surfaces: &[&str]) -> Vec<NormalizedToken> {
        surfaces.iter().map(|s| NormalizedToken { surface: s.to_string(), origin_line: 1 }).collect()
    }

    #[test]
    fn build_by_definition() {
        let v = Vocabulary::build([toks(&["echo", "VAR0"])]).unwrap();
        let pairs: Vec<_> = v.iter().collect();
        assert_eq!(pairs, [(PAD, 0), ("echo", 1), ("VAR0", 2), (UNK, 3)]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: Vec<Vec<NormalizedToken>> = vec![];
        assert!(matches!(Vocabulary::build(empty), Err(VocabError::EmptyCorpus)));
    }

    #[test]
    fn disjoint_corpora_get_disjoint_ranges() {
        let v = Vocabulary::build([toks(&["a", "b"]), toks(&["c", "d"])]).unwrap();
        assert_eq!((v.id("a"), v.id("b"), v.id("c"), v.id("d")), (1, 2, 3, 4));
    }

    #[test]
    fn rebuild_is_identical() {
        let c = [toks(&["x", "y", "x"]), toks(&["z"])];
        assert_eq!(Vocabulary::build(c.clone()).unwrap(), Vocabulary::build(c).unwrap());
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::build([toks(&["echo", "VAR0", "$_GET", "'a\\tb'"])]).unwrap();
        let text = v.to_text();
        assert!(text.starts_with("VOCAB v1\n"));
        assert_eq!(Vocabulary::parse(&text).unwrap(), v);
    }

    #[test]
    fn unseen_maps_to_unk() {
        let v = Vocabulary::build([toks(&["echo"])]).unwrap();
        assert_eq!(v.id("never"), v.unk_id());
    }

    #[test]
    fn padding_case() {
        let v = Vocabulary::build([toks(&["a", "b", "c"])]).unwrap();
        let s = encode(&toks(&["a", "b", "c"]), &v, 200, Granularity::Function);
        assert_eq!(s.true_len, 3);
        assert_eq!(s.ids.len(), 200);
        assert!(s.ids[3..].iter().all(|&i| i == 0));
        assert_eq!(&s.ids[..3], &[1, 2, 3]);
    }

    #[test]
    fn truncation_keeps_the_tail() {
        let names: Vec<String> = (0..250).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let v = Vocabulary::build([toks(&refs)]).unwrap();
        let s = encode(&toks(&refs), &v, 200, Granularity::Function);
        assert_eq!(s.true_len, 200);
        let expected: Vec<u32> = (50..250).map(|i| v.id(&format!("t{i}"))).collect();
        assert_eq!(s.ids, expected);
    }
}
