//! Benchmark toolbox for predictive process monitoring.
//!
//! Reads event logs, splits them chronologically, encodes prefixes, trains
//! next-activity/next-time predictors (an n-gram baseline and small neural
//! models on a built-in reverse-mode kernel), decodes suffixes and scores
//! everything with a common protocol. [`bench`] runs whole model/dataset
//! matrices from a TOML config.
//!
//! The neural code is generic over [`Scalar`]; `f32` is the training
//! precision and `f64` the gradient-check precision. The aliases below pin
//! the common types to one of them.

pub mod bench;
pub mod encoding;
pub mod eventlog;
pub mod inference;
pub mod metrics;
pub mod models;
pub mod nnkernel;
pub mod scalar;
pub mod splitting;

pub use eventlog::{Event, EventLog, Trace, EOC};
pub use models::{AnyModel, ModelSpec, Prediction, Predictor};
pub use scalar::Scalar;

pub type ParamStore32 = nnkernel::ParamStore<f32>;
pub type ParamStore64 = nnkernel::ParamStore<f64>;
pub type Tensor32 = nnkernel::Tensor<f32>;
pub type Tensor64 = nnkernel::Tensor<f64>;
pub type NeuralPredictor32 = models::NeuralPredictor<f32>;
pub type NeuralPredictor64 = models::NeuralPredictor<f64>;
