use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureConfig;
use super::params::ModelParams;
use super::ModelError;
use crate::cfg::Cfg;
use crate::frontend::TokenSequence;
use crate::nn::{GraphBatch, NormAdj, Tape, Tensor, Var};

/// Model-ready form of one unit: the unpadded token ids and the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub tokens: Vec<u32>,
    /// Row-major `nodes × node_len` ids.
    pub node_ids: Vec<u32>,
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Encoded {
    pub fn new(seq: &TokenSequence, cfg: &Cfg) -> Self {
        Encoded {
            tokens: seq.tokens().to_vec(),
            node_ids: cfg.node_matrix(),
            nodes: cfg.len(),
            edges: cfg.edges.clone(),
        }
    }
}

/// Logits (`batch × 4`) for a batch. Dropout is active only when
/// `training` is set.
pub fn forward_batch<R: Rng + ?Sized>(
    tape: &mut Tape,
    p: &ModelParams<Var>,
    arch: &ArchitectureConfig,
    batch: &[&Encoded],
    training: bool,
    rng: &mut R,
) -> Result<Var, ModelError> {
    let b = batch.len();
    let mut seq_feats = Vec::with_capacity(b);
    for e in batch {
        let x = tape.embedding(p.embed_tokens, &e.tokens)?;
        seq_feats.push(tape.gru_forward(x, &p.gru, arch.gru_dropout, training, rng)?);
    }
    let seq = tape.stack_rows(&seq_feats)?;

    let mut graph = GraphBatch { segment: Vec::new(), edges: Vec::new(), graphs: 0 };
    let mut ids = Vec::new();
    for e in batch {
        if e.node_ids.len() != e.nodes * arch.node_len {
            return Err(ModelError::ConfigMismatch(format!(
                "graph has {} node ids for {} nodes of width {}",
                e.node_ids.len(),
                e.nodes,
                arch.node_len
            )));
        }
        graph.push(e.nodes, &e.edges);
        ids.extend_from_slice(&e.node_ids);
    }
    let gcn_out = *arch.gcn_dims.last().expect("validated");
    let pooled = if graph.nodes() == 0 {
        tape.constant(Tensor::zeros(&[b, gcn_out]))
    } else {
        let x = tape.embedding(p.embed_nodes, &ids)?;
        let mut h = tape.reshape(x, &[graph.nodes(), arch.node_len * arch.embed_dim])?;
        for (conv, pool) in p.gcn.iter().zip(&p.pool) {
            let adj = NormAdj::new(graph.nodes(), &graph.edges, arch.directed_gcn);
            h = tape.gcn_conv(h, &adj, conv)?;
            h = tape.relu(h);
            let (next, g, _) = tape.edge_pool(h, &graph, pool)?;
            h = next;
            graph = g;
        }
        tape.segment_max_pool(h, &graph.segment, b)?
    };

    let mut h = tape.concat_cols(&[seq, pooled])?;
    for (i, l) in p.fc.iter().enumerate() {
        h = tape.linear(h, l.w, l.b)?;
        if i + 1 < p.fc.len() {
            h = tape.dropout(h, arch.fc_dropout, training, rng);
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// Inference logits for a batch, one row per input.
pub fn logits_batch(
    params: &ModelParams<Tensor>,
    arch: &ArchitectureConfig,
    batch: &[&Encoded],
) -> Result<Vec<Vec<f64>>, ModelError> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let vars = params.map(|t| tape.constant(t.clone()));
    let out = forward_batch(&mut tape, &vars, arch, batch, false, &mut ChaCha8Rng::seed_from_u64(0))?;
    let t = tape.value(out);
    Ok((0..t.rows()).map(|r| t.row(r).to_vec()).collect())
}

/// Logits of one unit. The sequence must match the architecture's
/// granularity.
pub fn forward(
    seq: &TokenSequence,
    cfg: &Cfg,
    params: &ModelParams<Tensor>,
    arch: &ArchitectureConfig,
) -> Result<Vec<f64>, ModelError> {
    if seq.granularity != arch.granularity {
        return Err(ModelError::ConfigMismatch(format!(
            "{} sequence given to a {} model",
            seq.granularity.as_str(),
            arch.granularity.as_str()
        )));
    }
    let enc = Encoded::new(seq, cfg);
    Ok(logits_batch(params, arch, &[&enc])?.remove(0))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}
