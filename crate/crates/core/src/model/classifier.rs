use super::arch::{ArchitectureConfig, NUM_CLASSES};
use super::checkpoint::Classifier;
use super::forward::{argmax, logits_batch, Encoded};
use super::train::{train_with, EpochLog, Example, TrainConfig};
use super::ModelError;
use crate::cfg::{build_cfg_or_fallback, lex_unit, Cfg, CfgError};
use crate::corpus::{Label, Sample};
use crate::frontend::{
    encode, normalize, AbstractionBudget, Granularity, KeepList, NormalizedToken, TokenSequence, Vocabulary,
};
use crate::nn::softmax;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub probs: [f64; NUM_CLASSES],
}

impl Prediction {
    /// Softmax probabilities; ties go to the lower class index.
    pub fn from_logits(logits: &[f64]) -> Self {
        let p = softmax(logits);
        let mut probs = [0.0; NUM_CLASSES];
        probs.copy_from_slice(&p[..NUM_CLASSES]);
        Prediction { label: Label::from_index(argmax(logits)).expect("four classes"), probs }
    }
}

/// Lex and normalize one unit.
pub fn normalize_unit(
    code: &str,
    granularity: Granularity,
    keep: &KeepList,
) -> Result<Vec<NormalizedToken>, ModelError> {
    let raw = lex_unit(code, granularity)?;
    Ok(normalize(&raw, keep, AbstractionBudget::for_granularity(granularity)))
}

/// Token sequence and graph of one unit. A unit that lexes but does not
/// parse gets a single-node graph.
pub fn encode_unit(
    code: &str,
    granularity: Granularity,
    seq_len: usize,
    keep: &KeepList,
    vocab: &Vocabulary,
) -> Result<(TokenSequence, Cfg), ModelError> {
    let tokens = normalize_unit(code, granularity, keep)?;
    let seq = encode(&tokens, vocab, seq_len, granularity);
    let cfg = match build_cfg_or_fallback(code, granularity, keep, vocab) {
        Ok(g) => g,
        Err(CfgError::Parse(_)) => Cfg::single_node(&tokens, vocab),
        Err(e) => return Err(e.into()),
    };
    Ok((seq, cfg))
}

impl Classifier {
    pub fn granularity(&self) -> Granularity {
        self.arch.granularity
    }

    pub fn encode(&self, code: &str) -> Result<Encoded, ModelError> {
        let (seq, cfg) = encode_unit(code, self.arch.granularity, self.arch.seq_len, &self.keep, &self.vocab)?;
        Ok(Encoded::new(&seq, &cfg))
    }

    pub fn predict(&self, code: &str) -> Result<Prediction, ModelError> {
        let enc = self.encode(code)?;
        Ok(self.predict_encoded(&[&enc])?.remove(0))
    }

    pub fn predict_encoded(&self, batch: &[&Encoded]) -> Result<Vec<Prediction>, ModelError> {
        Ok(logits_batch(&self.params, &self.arch, batch)?.iter().map(|l| Prediction::from_logits(l)).collect())
    }

    pub fn logits(&self, enc: &Encoded) -> Result<Vec<f64>, ModelError> {
        Ok(logits_batch(&self.params, &self.arch, &[enc])?.remove(0))
    }
}

/// Result of [`train_classifier`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub classifier: Classifier,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    /// Ids of samples that failed to lex and were left out.
    pub skipped: Vec<String>,
}

/// Freeze a vocabulary from the training split, encode both splits and
/// train. `make_arch` receives the granularity and vocabulary size.
pub fn train_classifier(
    train: &[Sample],
    val: &[Sample],
    granularity: Granularity,
    make_arch: impl Fn(Granularity, usize) -> ArchitectureConfig,
    keep: &KeepList,
    tc: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<Trained, ModelError> {
    if let Some(s) = train.iter().chain(val).find(|s| s.granularity != granularity) {
        return Err(ModelError::ConfigMismatch(format!(
            "sample {} is {}-level, expected {}",
            s.id,
            s.granularity.as_str(),
            granularity.as_str()
        )));
    }
    let mut skipped = Vec::new();
    let mut docs = Vec::new();
    for s in train {
        match normalize_unit(&s.code, granularity, keep) {
            Ok(t) => docs.push(t),
            Err(_) => skipped.push(s.id.clone()),
        }
    }
    let vocab = Vocabulary::build(&docs)?;
    let arch = make_arch(granularity, vocab.len());
    arch.validate()?;
    let mut encode_all = |samples: &[Sample]| -> Vec<Example> {
        samples
            .iter()
            .filter_map(|s| match encode_unit(&s.code, granularity, arch.seq_len, keep, &vocab) {
                Ok((seq, cfg)) => Some(Example { enc: Encoded::new(&seq, &cfg), label: s.label }),
                Err(_) => {
                    if !skipped.contains(&s.id) {
                        skipped.push(s.id.clone());
                    }
                    None
                }
            })
            .collect()
    };
    let train_ex = encode_all(train);
    let out = if std::ptr::eq(train, val) {
        train_with(&train_ex, &train_ex, &arch, tc, on_epoch)?
    } else {
        let val_ex = encode_all(val);
        train_with(&train_ex, &val_ex, &arch, tc, on_epoch)?
    };
    Ok(Trained {
        classifier: Classifier { arch, vocab, keep: keep.clone(), params: out.params },
        log: out.log,
        best_epoch: out.best_epoch,
        skipped,
    })
}
