use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::cfg::NODE_LEN;
use crate::frontend::Granularity;

pub const NUM_CLASSES: usize = 4;

/// Layer sizes of the hybrid recurrent + graph classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub granularity: Granularity,
    pub seq_len: usize,
    pub node_len: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub gru_layers: usize,
    pub gru_hidden: usize,
    pub gru_dropout: f64,
    /// Input width followed by each layer's output width.
    pub gcn_dims: Vec<usize>,
    /// Output width of each fully connected layer; the last is the class count.
    pub fc_dims: Vec<usize>,
    pub fc_dropout: f64,
    pub directed_gcn: bool,
}

impl ArchitectureConfig {
    /// Full-size network: 100-wide embeddings, 3×2 GRU with H=100,
    /// GCN 2000→2000→4000→4000, FC 4600→1000→500→4.
    pub fn full(granularity: Granularity, vocab_size: usize) -> Self {
        ArchitectureConfig {
            granularity,
            seq_len: granularity.sequence_len(),
            node_len: NODE_LEN,
            vocab_size,
            embed_dim: 100,
            gru_layers: 3,
            gru_hidden: 100,
            gru_dropout: 0.0,
            gcn_dims: vec![2000, 2000, 4000, 4000],
            fc_dims: vec![1000, 500, NUM_CLASSES],
            fc_dropout: 0.3,
            directed_gcn: false,
        }
    }

    /// Same topology with small widths, for tests and quick experiments.
    pub fn tiny(granularity: Granularity, vocab_size: usize) -> Self {
        ArchitectureConfig {
            embed_dim: 4,
            gru_hidden: 3,
            gcn_dims: vec![NODE_LEN * 4, 8, 12, 12],
            fc_dims: vec![10, 6, NUM_CLASSES],
            ..Self::full(granularity, vocab_size)
        }
    }

    pub fn gru_width(&self) -> usize {
        2 * self.gru_layers * self.gru_hidden
    }

    pub fn fc_input(&self) -> usize {
        self.gru_width() + self.gcn_dims.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::ConfigMismatch(m));
        if self.vocab_size < 2 || self.embed_dim == 0 || self.gru_layers == 0 || self.gru_hidden == 0 {
            return bad("vocabulary, embedding and GRU sizes must be positive".into());
        }
        if self.gcn_dims.len() < 2 || self.gcn_dims.contains(&0) {
            return bad(format!("gcn_dims {:?} needs an input and at least one layer", self.gcn_dims));
        }
        if self.gcn_dims[0] != self.node_len * self.embed_dim {
            return bad(format!(
                "gcn input {} != node_len·embed_dim {}",
                self.gcn_dims[0],
                self.node_len * self.embed_dim
            ));
        }
        if self.fc_dims.last() != Some(&NUM_CLASSES) || self.fc_dims.contains(&0) {
            return bad(format!("fc_dims {:?} must end in {NUM_CLASSES}", self.fc_dims));
        }
        if !(0.0..1.0).contains(&self.fc_dropout) || !(0.0..1.0).contains(&self.gru_dropout) {
            return bad("dropout must lie in [0, 1)".into());
        }
        if self.seq_len == 0 || self.node_len == 0 {
            return bad("sequence lengths must be positive".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_widths() {
        let a = ArchitectureConfig::full(Granularity::File, 500);
        a.validate().unwrap();
        assert_eq!(a.gru_width(), 600);
        assert_eq!(a.fc_input(), 4600);
        assert_eq!(a.seq_len, 3000);
        assert_eq!(ArchitectureConfig::full(Granularity::Function, 500).seq_len, 200);
        ArchitectureConfig::tiny(Granularity::File, 50).validate().unwrap();
    }

    #[test]
    fn invariants_enforced() {
        let mut a = ArchitectureConfig::full(Granularity::File, 500);
        a.gcn_dims[0] = 1999;
        assert!(a.validate().is_err());
        let mut b = ArchitectureConfig::full(Granularity::File, 500);
        b.fc_dims = vec![1000, 3];
        assert!(b.validate().is_err());
        let c = ArchitectureConfig::full(Granularity::File, 501);
        assert_ne!(c.hash(), ArchitectureConfig::full(Granularity::File, 500).hash());
    }
}
