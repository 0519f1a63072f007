use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EncodingError;
use crate::eventlog::{Event, Vocabulary};

/// Binary indicator vector with a single 1.0 at the label's index.
pub fn onehot(label: &str, vocab: &Vocabulary) -> Result<Vec<f64>, EncodingError> {
    let idx = vocab
        .index_of(label)
        .ok_or_else(|| EncodingError::UnknownLabel(label.to_owned()))?;
    let mut v = vec![0.0; vocab.len()];
    v[idx] = 1.0;
    Ok(v)
}

/// Count of each vocabulary label in `prefix`.
pub fn frequency_encode<'a, I>(prefix: I, vocab: &Vocabulary) -> Result<Vec<f64>, EncodingError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut v = vec![0.0; vocab.len()];
    for label in prefix {
        let idx = vocab
            .index_of(label)
            .ok_or_else(|| EncodingError::UnknownLabel(label.to_owned()))?;
        v[idx] += 1.0;
    }
    Ok(v)
}

/// Number of per-event time features produced by [`time_features`].
pub const TIME_FEATURES: usize = 4;

/// Per event: seconds since the previous event (0 for the first), seconds
/// since the case start, seconds since UTC midnight, and weekday (Monday = 0).
pub fn time_features(prefix: &[Event]) -> Vec<[f64; TIME_FEATURES]> {
    let Some(first) = prefix.first() else {
        return Vec::new();
    };
    let start = first.timestamp;
    let mut prev = start;
    prefix
        .iter()
        .map(|e| {
            let row = [
                e.timestamp.secs_since(prev),
                e.timestamp.secs_since(start),
                e.timestamp.secs_since_midnight(),
                e.timestamp.weekday() as f64,
            ];
            prev = e.timestamp;
            row
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    MinMax,
    /// `ln(1 + x)` followed by min-max scaling of the logged values.
    Log,
    ZScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// A continuous-variable normaliser. Statistics are fitted once, from
/// training data, and then applied unchanged to every split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub method: NormMethod,
    pub stats: Option<NormStats>,
}

impl Normalizer {
    pub fn unfitted(method: NormMethod) -> Self {
        Normalizer { method, stats: None }
    }

    /// Fits on `values`. An empty input leaves the normaliser unfitted.
    pub fn fit(method: NormMethod, values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::unfitted(method);
        }
        let pre: Vec<f64> = values.iter().map(|&x| Self::pre(method, x)).collect();
        let n = pre.len() as f64;
        let min = pre.iter().copied().fold(f64::INFINITY, f64::min);
        let max = pre.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = pre.iter().sum::<f64>() / n;
        let var = pre.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Normalizer {
            method,
            stats: Some(NormStats {
                min,
                max,
                mean,
                std: var.sqrt(),
            }),
        }
    }

    fn pre(method: NormMethod, x: f64) -> f64 {
        match method {
            NormMethod::Log => x.max(0.0).ln_1p(),
            _ => x,
        }
    }

    fn stats(&self) -> Result<&NormStats, EncodingError> {
        self.stats.as_ref().ok_or(EncodingError::Unfitted)
    }

    /// Values outside the fitted range map outside `[0, 1]`; nothing is clipped.
    pub fn transform(&self, x: f64) -> Result<f64, EncodingError> {
        let s = self.stats()?;
        let x = Self::pre(self.method, x);
        Ok(match self.method {
            NormMethod::MinMax | NormMethod::Log => {
                if s.max > s.min {
                    (x - s.min) / (s.max - s.min)
                } else {
                    0.0
                }
            }
            NormMethod::ZScore => {
                if s.std > 0.0 {
                    (x - s.mean) / s.std
                } else {
                    0.0
                }
            }
        })
    }

    pub fn inverse(&self, y: f64) -> Result<f64, EncodingError> {
        let s = self.stats()?;
        let x = match self.method {
            NormMethod::MinMax | NormMethod::Log => s.min + y * (s.max - s.min),
            NormMethod::ZScore => s.mean + y * s.std,
        };
        Ok(match self.method {
            NormMethod::Log => x.exp_m1(),
            _ => x,
        })
    }
}

/// Applies a fitted normaliser to a whole sequence.
pub fn normalize(values: &[f64], normalizer: &Normalizer) -> Result<Vec<f64>, EncodingError> {
    values.iter().map(|&v| normalizer.transform(v)).collect()
}

/// Dense `categories × dims` lookup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub rows: usize,
    pub dims: usize,
    pub weights: Vec<f64>,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// One row per vocabulary entry, uniform in `[-scale, scale]`.
    pub fn random<R: Rng>(vocab: &Vocabulary, dims: usize, scale: f64, trainable: bool, rng: &mut R) -> Self {
        let rows = vocab.len();
        let weights = (0..rows * dims).map(|_| rng.gen_range(-scale..=scale)).collect();
        EmbeddingTable {
            rows,
            dims,
            weights,
            trainable,
        }
    }

    pub fn lookup(&self, index: usize) -> Result<&[f64], EncodingError> {
        if index >= self.rows {
            return Err(EncodingError::IndexOutOfRange { index, len: self.rows });
        }
        Ok(&self.weights[index * self.dims..(index + 1) * self.dims])
    }
}
