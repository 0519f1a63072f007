use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore, Tensor};
use super::KernelError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Global L2 norm above which gradients are rescaled; `None` disables.
    pub clip_norm: Option<f64>,
    /// Multiplicative learning-rate decay applied by [`Sgd::end_epoch`].
    pub lr_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 0.01,
            momentum: 0.9,
            clip_norm: Some(5.0),
            lr_decay: 1.0,
        }
    }
}

/// SGD with classical momentum: `v ← μv − η g`, `θ ← θ + v`.
#[derive(Debug, Clone)]
pub struct Sgd<S> {
    pub config: SgdConfig,
    lr: f64,
    velocity: Vec<Tensor<S>>,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(config: SgdConfig, store: &ParamStore<S>) -> Self {
        Sgd {
            config,
            lr: config.lr,
            velocity: store
                .ids()
                .map(|id| {
                    let t = store.get(id);
                    Tensor::zeros(t.rows, t.cols)
                })
                .collect(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Applies one update. Returns the gradient norm before clipping.
    pub fn step(&mut self, store: &mut ParamStore<S>, grads: &mut Gradients<S>) -> Result<f64, KernelError> {
        let norm = grads.l2_norm().to_f64_lossy();
        if !norm.is_finite() {
            return Err(KernelError::NonFinite("gradient".into()));
        }
        if let Some(max) = self.config.clip_norm {
            if norm > max {
                grads.scale(S::from_f64_lossy(max / norm));
            }
        }
        let mu = S::from_f64_lossy(self.config.momentum);
        let lr = S::from_f64_lossy(self.lr);
        for (k, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = &grads.get(id).data;
            let v = &mut self.velocity[k].data;
            let p = &mut store.get_mut(id).data;
            for j in 0..p.len() {
                v[j] = mu * v[j] - lr * g[j];
                p[j] += v[j];
            }
        }
        Ok(norm)
    }

    pub fn end_epoch(&mut self) {
        self.lr *= self.config.lr_decay;
    }
}
