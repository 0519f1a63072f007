//! Next-activity / next-time predictors behind one interface.

mod check;
mod markov;
mod neural;
mod search;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use check::{gradcheck_architecture, small_spec, CHECKED_ARCHITECTURES};
pub use markov::{MarkovConfig, MarkovModel};
pub use neural::{Architecture, MlpInput, ModelSpec, NeuralPredictor, Precision, TrainConfig};
pub use search::{random_search, SearchOutcome, SearchSpace};

use crate::encoding::EncodingError;
use crate::eventlog::{Event, EventLog, Vocabulary};
use crate::nnkernel::KernelError;
use crate::splitting::SplitLog;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("layer {layer}: hidden size {hidden} must be smaller than its input {input}")]
    Undercomplete { layer: usize, hidden: usize, input: usize },
    #[error("model is not fitted")]
    NotFitted,
    #[error("training log must be EOC-augmented")]
    NotAugmented,
    #[error("training log yields no samples")]
    NoSamples,
    #[error("model output is not a distribution (sum {0})")]
    NotDistribution(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output of a predictor for one prefix. Times are in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Distribution over the model vocabulary (end marker included).
    pub probs: Vec<f64>,
    pub next_delta: Option<f64>,
    pub remaining: Option<f64>,
}

impl Prediction {
    /// Index of the most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn check_distribution(&self) -> Result<(), ModelError> {
        let sum: f64 = self.probs.iter().sum();
        if self.probs.is_empty() || (sum - 1.0).abs() > 1e-6 || self.probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(ModelError::NotDistribution(sum));
        }
        Ok(())
    }
}

/// Per-epoch learning curves. Equality ignores wall-clock time.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
    /// Final-epoch reconstruction loss of each layerwise pretraining stage.
    pub pretrain_losses: Vec<f64>,
    pub wall_clock_secs: f64,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.train_losses == other.train_losses
            && self.val_losses == other.val_losses
            && self.best_epoch == other.best_epoch
            && self.pretrain_losses == other.pretrain_losses
    }
}

impl TrainReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.val_losses.get(self.best_epoch).copied()
    }
}

pub trait Predictor: Send + Sync {
    /// Label space of [`Prediction::probs`].
    fn vocab(&self) -> &Vocabulary;

    fn predict(&self, prefix: &[Event]) -> Result<Prediction, ModelError>;

    fn fit(&mut self, train: &EventLog, validation: &EventLog) -> Result<TrainReport, ModelError>;

    /// Whether [`Prediction::remaining`] is populated.
    fn predicts_remaining(&self) -> bool {
        false
    }

    /// Whether [`Prediction::next_delta`] is populated.
    fn predicts_time(&self) -> bool {
        false
    }

    /// Longest trace seen in training, end marker included.
    fn max_trace_len(&self) -> Option<usize> {
        None
    }
}

/// Fits `model` on the train part, validating on the validation part.
pub fn train<P: Predictor + ?Sized>(model: &mut P, split: &SplitLog) -> Result<TrainReport, ModelError> {
    model.fit(&split.train, &split.validation)
}

pub fn vocab_hash(vocab: &Vocabulary) -> String {
    let mut h = Sha256::new();
    for label in vocab.iter() {
        h.update(label.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Any concrete model, as built from a [`ModelSpec`].
#[derive(Debug, Clone)]
pub enum AnyModel {
    Markov(MarkovModel),
    Neural32(NeuralPredictor<f32>),
    Neural64(NeuralPredictor<f64>),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            AnyModel::Markov($m) => $e,
            AnyModel::Neural32($m) => $e,
            AnyModel::Neural64($m) => $e,
        }
    };
}

impl AnyModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        Ok(match (&spec.arch, spec.precision) {
            (Architecture::Markov(cfg), _) => AnyModel::Markov(MarkovModel::new(*cfg)?),
            (_, Precision::F32) => AnyModel::Neural32(NeuralPredictor::new(spec.clone())?),
            (_, Precision::F64) => AnyModel::Neural64(NeuralPredictor::new(spec.clone())?),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir)?;
        match self {
            AnyModel::Markov(m) => {
                let text = serde_json::to_string(m).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
                std::fs::write(dir.join(MARKOV_FILE), text)?;
                Ok(())
            }
            AnyModel::Neural32(m) => m.save(dir),
            AnyModel::Neural64(m) => m.save(dir),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let markov = dir.join(MARKOV_FILE);
        if markov.exists() {
            let text = std::fs::read_to_string(markov)?;
            let m = serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
            return Ok(AnyModel::Markov(m));
        }
        match neural::sidecar_precision(dir)? {
            Precision::F32 => Ok(AnyModel::Neural32(NeuralPredictor::load(dir)?)),
            Precision::F64 => Ok(AnyModel::Neural64(NeuralPredictor::load(dir)?)),
        }
    }
}

const MARKOV_FILE: &str = "markov.json";

impl Predictor for AnyModel {
    fn vocab(&self) -> &Vocabulary {
        delegate!(self, m => m.vocab())
    }

    fn predict(&self, prefix: &[Event]) -> Result<Prediction, ModelError> {
        delegate!(self, m => m.predict(prefix))
    }

    fn fit(&mut self, train: &EventLog, validation: &EventLog) -> Result<TrainReport, ModelError> {
        delegate!(self, m => m.fit(train, validation))
    }

    fn predicts_remaining(&self) -> bool {
        delegate!(self, m => m.predicts_remaining())
    }

    fn predicts_time(&self) -> bool {
        delegate!(self, m => m.predicts_time())
    }

    fn max_trace_len(&self) -> Option<usize> {
        delegate!(self, m => m.max_trace_len())
    }
}
