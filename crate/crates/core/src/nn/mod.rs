//! Reverse-mode numeric core: tensors, a gradient tape, the layers the
//! classifier needs, Adam, and a finite-difference checker.

pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use gradcheck::check_gradients;
pub use layers::{
    softmax, Direction, EdgePoolParams, GcnLayerParams, GraphBatch, GruLayerParams, LinearParams, NormAdj,
};
pub use optim::{adam_step, AdamConfig, AdamState, Plateau, PlateauConfig};
pub use tape::{Grads, Tape, Var};
pub use tensor::{NnError, Tensor};
