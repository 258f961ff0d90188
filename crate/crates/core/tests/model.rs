use deeptective::corpus::{generate_synthetic, generate_synthetic_with, Label};
use deeptective::frontend::{Granularity, KeepList, TokenSequence};
use deeptective::model::{
    argmax, encode_unit, evaluate, forward, logits_batch, train, train_classifier, train_step, ArchitectureConfig,
    Classifier, Encoded, Example, ModelError, ModelParams, Prediction, TrainConfig,
};
use deeptective::nn::{AdamConfig, AdamState};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 40;

fn random_encoded(rng: &mut ChaCha8Rng, node_len: usize) -> Encoded {
    let nodes = rng.random_range(1..9);
    let mut edges = Vec::new();
    for _ in 0..rng.random_range(0..2 * nodes) {
        let (a, b) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        if a != b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    edges.sort_unstable();
    Encoded {
        tokens: (0..rng.random_range(0..25)).map(|_| rng.random_range(0..VOCAB as u32)).collect(),
        node_ids: (0..nodes * node_len).map(|_| rng.random_range(0..VOCAB as u32)).collect(),
        nodes,
        edges,
    }
}

fn permute(e: &Encoded, perm: &[usize], node_len: usize) -> Encoded {
    // perm[old] = new
    let mut node_ids = vec![0; e.node_ids.len()];
    for (old, &new) in perm.iter().enumerate() {
        node_ids[new * node_len..(new + 1) * node_len]
            .copy_from_slice(&e.node_ids[old * node_len..(old + 1) * node_len]);
    }
    let mut edges: Vec<_> = e.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    edges.sort_unstable();
    Encoded { tokens: e.tokens.clone(), node_ids, nodes: e.nodes, edges }
}

fn tiny() -> (ArchitectureConfig, ModelParams<deeptective::nn::Tensor>) {
    let arch = ArchitectureConfig::tiny(Granularity::File, VOCAB);
    let params = ModelParams::init(&arch, 3);
    (arch, params)
}

#[test]
fn logits_have_four_entries_and_inference_is_deterministic() {
    let (arch, params) = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch: Vec<Encoded> = (0..6).map(|_| random_encoded(&mut rng, arch.node_len)).collect();
    let refs: Vec<&Encoded> = batch.iter().collect();
    let a = logits_batch(&params, &arch, &refs).unwrap();
    let b = logits_batch(&params, &arch, &refs).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.len() == 4));
    // batching does not mix samples
    for (e, row) in batch.iter().zip(&a) {
        let single = logits_batch(&params, &arch, &[e]).unwrap().remove(0);
        for (x, y) in single.iter().zip(row) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn empty_sequence_and_graph_still_classify() {
    let (arch, params) = tiny();
    let e = Encoded { tokens: vec![], node_ids: vec![], nodes: 0, edges: vec![] };
    assert_eq!(logits_batch(&params, &arch, &[&e]).unwrap()[0].len(), 4);
}

#[test]
fn node_permutation_leaves_logits_unchanged() {
    let (arch, params) = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let e = random_encoded(&mut rng, arch.node_len);
        let mut perm: Vec<usize> = (0..e.nodes).collect();
        perm.shuffle(&mut rng);
        let p = permute(&e, &perm, arch.node_len);
        let a = logits_batch(&params, &arch, &[&e]).unwrap().remove(0);
        let b = logits_batch(&params, &arch, &[&p]).unwrap().remove(0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn granularity_mismatch_is_rejected() {
    let (arch, params) = tiny();
    let seq = TokenSequence { ids: vec![1, 2, 0], true_len: 2, granularity: Granularity::Function };
    let keep = KeepList::default();
    let vocab = deeptective::frontend::Vocabulary::build_from_surfaces([["echo"]]).unwrap();
    let (_, cfg) = encode_unit("<?php echo 1;", Granularity::File, 10, &keep, &vocab).unwrap();
    assert!(matches!(forward(&seq, &cfg, &params, &arch), Err(ModelError::ConfigMismatch(_))));
    let seq = TokenSequence { granularity: Granularity::File, ..seq };
    assert_eq!(forward(&seq, &cfg, &params, &arch).unwrap().len(), 4);
}

#[test]
fn prediction_rules() {
    let p = Prediction::from_logits(&[0.0; 4]);
    assert_eq!(p.label, Label::Safe);
    assert_eq!(p.probs, [0.25; 4]);
    assert_eq!(Prediction::from_logits(&[0.0, 2.0, 2.0, 1.0]).label, Label::Xss);
    assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
}

proptest! {
    #[test]
    fn probabilities_sum_to_one(l in proptest::array::uniform4(-50.0f64..50.0)) {
        let p = Prediction::from_logits(&l);
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.probs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn label_invariant_under_positive_affine_maps(l in proptest::array::uniform4(-50.0f64..50.0), c in 0.01f64..100.0, k in -100.0f64..100.0) {
        let scaled: Vec<f64> = l.iter().map(|x| c * x + k).collect();
        // exact ties can be broken by rounding, so only compare strict winners
        let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(l.iter().filter(|&&x| top - x < 1e-6).count() == 1);
        prop_assert_eq!(Prediction::from_logits(&l).label, Prediction::from_logits(&scaled).label);
    }
}

fn examples(arch: &ArchitectureConfig, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Example { enc: random_encoded(&mut rng, arch.node_len), label: Label::from_index(i % 4).unwrap() })
        .collect()
}

#[test]
fn repeated_batch_loss_decreases() {
    let (arch, mut params) = tiny();
    let ex = examples(&arch, 8, 4);
    let batch: Vec<&Example> = ex.iter().collect();
    let mut state = AdamState::new(params.tensors().iter().map(|t| t.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let adam = AdamConfig::default();
    let mut prev = evaluate(&params, &arch, &ex, 64, None).unwrap().loss;
    for step in 0..5 {
        train_step(&mut params, &arch, &batch, &mut state, &adam, None, &mut rng).unwrap();
        let now = evaluate(&params, &arch, &ex, 64, None).unwrap().loss;
        assert!(now < prev, "step {step}: {now} >= {prev}");
        prev = now;
    }
}

#[test]
fn training_is_seeded() {
    let (arch, _) = tiny();
    let tr = examples(&arch, 12, 5);
    let va = examples(&arch, 4, 6);
    let tc = TrainConfig {
        epochs: 3,
        batch_size: 5,
        seed: 9,
        adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() },
        ..TrainConfig::default()
    };
    let a = train(&tr, &va, &arch, &tc).unwrap();
    let b = train(&tr, &va, &arch, &tc).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.params, b.params);
    assert_eq!(a.log.len(), 3);
    assert!(matches!(train(&tr, &[], &arch, &tc), Err(ModelError::EmptySplit)));
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let train_set = generate_synthetic(3, 1);
    let tc = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let trained = train_classifier(
        &train_set,
        &train_set,
        Granularity::File,
        ArchitectureConfig::tiny,
        &KeepList::default(),
        &tc,
        &mut |_| {},
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    trained.classifier.save(&path).unwrap();
    let back = Classifier::load(&path).unwrap();
    assert_eq!(back, trained.classifier);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let e = random_encoded(&mut rng, back.arch.node_len);
        let e = Encoded {
            tokens: e.tokens.iter().map(|t| t % back.vocab.len() as u32).collect(),
            node_ids: e.node_ids.iter().map(|t| t % back.vocab.len() as u32).collect(),
            ..e
        };
        let a = trained.classifier.logits(&e).unwrap();
        let b = back.logits(&e).unwrap();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(Classifier::load(&path).is_err());
    std::fs::write(&path, b"not a model").unwrap();
    assert!(matches!(Classifier::load(&path), Err(ModelError::Checkpoint(_))));
    assert!(matches!(Classifier::load(&dir.path().join("absent")), Err(ModelError::MissingCheckpoint(_))));
}

#[test]
fn classifier_handles_unparsable_and_unlexable_code() {
    let train_set = generate_synthetic_with(3, 1, Granularity::Function);
    let tc = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let c = train_classifier(
        &train_set,
        &train_set,
        Granularity::Function,
        ArchitectureConfig::tiny,
        &KeepList::default(),
        &tc,
        &mut |_| {},
    )
    .unwrap()
    .classifier;
    // unbalanced braces: no parse, single-node graph
    let enc = c.encode("function f() { echo $_GET['a']; ").unwrap();
    assert_eq!(enc.nodes, 1);
    assert!(c.predict("function f() { echo $_GET['a']; ").is_ok());
    // an unterminated string does not lex
    assert!(matches!(c.predict("echo 'abc"), Err(ModelError::Lex(_))));
}
