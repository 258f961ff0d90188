use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{ArchitectureConfig, NUM_CLASSES};
use super::forward::{argmax, forward_batch, logits_batch, Encoded};
use super::params::ModelParams;
use super::ModelError;
use crate::corpus::Label;
use crate::nn::{adam_step, AdamConfig, AdamState, Plateau, PlateauConfig, Tape, Tensor};

/// An encoded unit with its ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub enc: Encoded,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub plateau: PlateauConfig,
    /// Inverse-frequency class weights in the loss.
    pub class_weights: bool,
    /// Stop once a clean pass over the training split reaches this accuracy.
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 150,
            seed: 0,
            adam: AdamConfig::default(),
            plateau: PlateauConfig::default(),
            class_weights: false,
            stop_at_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::ConfigMismatch("batch_size and epochs must be at least 1".into()));
        }
        if self.adam.lr.is_nan() || self.adam.lr <= 0.0 {
            return Err(ModelError::ConfigMismatch("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training-mode batch loss.
    pub train_loss: f64,
    /// Accuracy of an inference-mode pass over the training split.
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams<Tensor>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

/// Loss and accuracy in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<Label>,
}

pub fn inverse_frequency_weights(examples: &[Example]) -> [f64; NUM_CLASSES] {
    let mut counts = [0usize; NUM_CLASSES];
    for e in examples {
        counts[e.label.index()] += 1;
    }
    let n = examples.len() as f64;
    counts.map(|c| if c == 0 { 1.0 } else { n / (NUM_CLASSES as f64 * c as f64) })
}

pub fn evaluate(
    params: &ModelParams<Tensor>,
    arch: &ArchitectureConfig,
    examples: &[Example],
    batch_size: usize,
    weights: Option<&[f64]>,
) -> Result<Evaluation, ModelError> {
    let mut total = 0.0;
    let mut norm = 0.0;
    let mut predictions = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let encs: Vec<&Encoded> = chunk.iter().map(|e| &e.enc).collect();
        for (row, e) in logits_batch(params, arch, &encs)?.iter().zip(chunk) {
            let l = e.label.index();
            let w = weights.map_or(1.0, |w| w[l]);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += w * (lse - row[l]);
            norm += w;
            predictions.push(Label::from_index(argmax(row)).expect("four logits"));
        }
    }
    let correct = predictions.iter().zip(examples).filter(|(p, e)| **p == e.label).count();
    let n = examples.len().max(1) as f64;
    Ok(Evaluation { loss: if norm > 0.0 { total / norm } else { 0.0 }, accuracy: correct as f64 / n, predictions })
}

/// One optimizer step on `batch`; returns the batch loss before the step.
pub fn train_step(
    params: &mut ModelParams<Tensor>,
    arch: &ArchitectureConfig,
    batch: &[&Example],
    state: &mut AdamState,
    adam: &AdamConfig,
    weights: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let vars = params.map(|t| tape.param(t.clone()));
    let encs: Vec<&Encoded> = batch.iter().map(|e| &e.enc).collect();
    let labels: Vec<usize> = batch.iter().map(|e| e.label.index()).collect();
    let logits = forward_batch(&mut tape, &vars, arch, &encs, true, rng)?;
    let loss = tape.cross_entropy(logits, &labels, weights)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Ok(value);
    }
    let mut grads = tape.backward(loss);
    let gs: Vec<Option<Vec<f64>>> = vars.tensors().into_iter().map(|&v| grads.take(v)).collect();
    // release the tape's references so the update happens in place
    drop(grads);
    drop(tape);
    let mut data: Vec<&mut [f64]> = params.tensors_mut().into_iter().map(|t| t.data_mut()).collect();
    let refs: Vec<Option<&[f64]>> = gs.iter().map(|g| g.as_deref()).collect();
    adam_step(&mut data, &refs, state, adam);
    Ok(value)
}

pub fn train(
    train: &[Example],
    val: &[Example],
    arch: &ArchitectureConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    train_with(train, val, arch, tc, &mut |_| {})
}

/// Mini-batch Adam with a plateau schedule on validation loss, keeping the
/// parameters with the best validation loss. `on_epoch` sees each log row.
pub fn train_with(
    train: &[Example],
    val: &[Example],
    arch: &ArchitectureConfig,
    tc: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome, ModelError> {
    arch.validate()?;
    tc.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    let weights = tc.class_weights.then(|| inverse_frequency_weights(train));
    let weights = weights.as_ref().map(|w| w.as_slice());

    let mut params = ModelParams::init(arch, tc.seed);
    let mut state = AdamState::new(params.tensors().iter().map(|t| t.len()));
    let mut adam = tc.adam;
    let mut plateau = Plateau::new(tc.plateau);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, ModelParams<Tensor>)> = None;
    let mut log = Vec::with_capacity(tc.epochs);
    // validating on the training split itself needs only one pass
    let same = std::ptr::eq(train, val);

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let loss = train_step(&mut params, arch, &batch, &mut state, &adam, weights, &mut rng)?;
            if !loss.is_finite() {
                let last_good = best.map(|b| b.2).unwrap_or(params);
                return Err(ModelError::DivergenceDetected { epoch, last_good: Box::new(last_good) });
            }
            total += loss;
            batches += 1;
        }
        let va = evaluate(&params, arch, val, tc.batch_size, weights)?;
        let tr = if same { va.clone() } else { evaluate(&params, arch, train, tc.batch_size, weights)? };
        let row = EpochLog {
            epoch,
            train_loss: total / batches as f64,
            train_acc: tr.accuracy,
            val_loss: va.loss,
            val_acc: va.accuracy,
            lr: adam.lr,
        };
        on_epoch(&row);
        log.push(row);
        if !va.loss.is_finite() {
            let last_good = best.map(|b| b.2).unwrap_or(params);
            return Err(ModelError::DivergenceDetected { epoch, last_good: Box::new(last_good) });
        }
        if best.as_ref().is_none_or(|b| va.loss < b.0) {
            best = Some((va.loss, epoch, params.clone()));
        }
        adam.lr = plateau.step(va.loss, adam.lr);
        if tc.stop_at_train_accuracy.is_some_and(|t| tr.accuracy >= t) {
            break;
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, log, best_epoch })
}

/// `epoch,train_loss,val_loss,lr,train_acc,val_acc` rows.
pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,lr,train_acc,val_acc\n");
    for r in log {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.lr, r.train_acc, r.val_acc));
    }
    out
}
