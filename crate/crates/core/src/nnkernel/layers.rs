use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore, Tensor};
use super::KernelError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
}

/// Fully connected layer `act(W·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
}

impl Dense {
    pub fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let w = store.add(format!("{prefix}.W"), Tensor::glorot(output, input, rng));
        let b = store.add(format!("{prefix}.b"), Tensor::zeros(output, 1));
        Dense {
            input,
            output,
            w,
            b,
            activation,
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId, KernelError> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        let wx = g.matvec(w, x)?;
        let a = g.add(wx, b)?;
        Ok(match self.activation {
            Activation::Identity => a,
            Activation::Tanh => g.tanh(a),
            Activation::Sigmoid => g.sigmoid(a),
            Activation::Relu => g.relu(a),
        })
    }
}

/// Unweighted sum of per-task losses.
pub fn combine_losses<S: Scalar>(losses: &[S]) -> Result<S, KernelError> {
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(KernelError::NonFinite(format!("task loss {i}")));
    }
    Ok(losses.iter().copied().sum())
}
