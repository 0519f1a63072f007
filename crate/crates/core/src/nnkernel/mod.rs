//! Small dense numeric kernel: parameters, a reverse-mode tape, recurrent
//! cells, an SGD optimiser and finite-difference gradient checking.

mod cells;
mod gradcheck;
mod graph;
mod layers;
mod optim;
mod params;

pub use cells::{
    forward_sequence, forward_sequence_values, gru_step, lstm_step, rnn_step, Cell, CellKind, CellState, GruCell,
    GruStep, LstmCell, LstmStep, NodeState, RnnCell, RnnStep,
};
pub use gradcheck::{gradcheck, gradcheck_params, GradcheckReport, GRADCHECK_MAX_PARAMS};
pub use graph::{sigmoid, softmax, Graph, NodeId};
pub use layers::{combine_losses, Activation, Dense};
pub use optim::{Sgd, SgdConfig};
pub use params::{Checkpoint, Gradients, NamedArray, ParamId, ParamStore, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("padding rows must precede real rows (row {0} is padding after a real row)")]
    InterleavedPadding(usize),
    #[error("gradient check limited to {limit} parameters, model has {count}")]
    TooManyParams { count: usize, limit: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
