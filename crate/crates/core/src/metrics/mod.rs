//! Accuracy, multiclass Brier score, restricted Damerau-Levenshtein
//! similarity and mean absolute error.

mod protocol;

pub use protocol::{evaluate_protocol, MetricsReport, ProtocolError, RemainingPathway, Tasks};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::EOC;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions, {1} truths")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
    #[error("prediction {index} is not a distribution (sum {sum})")]
    NotDistribution { index: usize, sum: f64 },
    #[error("truth index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(predictions: &[T], truths: &[T]) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), truths.len())?;
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truths.len() as f64)
}

/// `(1/N) Σ_t Σ_i (f_ti − o_ti)²` with `o` the one-hot truth.
pub fn brier(probs: &[Vec<f64>], truths: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(probs.len(), truths.len())?;
    let mut total = 0.0;
    for (index, (p, &t)) in probs.iter().zip(truths).enumerate() {
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || p.iter().any(|v| *v < 0.0) {
            return Err(MetricsError::NotDistribution { index, sum });
        }
        if t >= p.len() {
            return Err(MetricsError::ClassOutOfRange {
                index: t,
                classes: p.len(),
            });
        }
        total += p
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let o = if i == t { 1.0 } else { 0.0 };
                (f - o) * (f - o)
            })
            .sum::<f64>();
    }
    Ok(total / probs.len() as f64)
}

/// Optimal-string-alignment (restricted Damerau-Levenshtein) distance.
pub fn dl_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (d[(i - 1) * w + j] + 1)
                .min(d[i * w + j - 1] + 1)
                .min(d[(i - 1) * w + j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[(i - 2) * w + j - 2] + 1);
            }
            d[i * w + j] = v;
        }
    }
    d[n * w + m]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlNormalization {
    MaxLength,
    MeanLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuffixComparison {
    pub strip_eoc: bool,
    pub normalization: DlNormalization,
}

impl Default for SuffixComparison {
    fn default() -> Self {
        SuffixComparison {
            strip_eoc: true,
            normalization: DlNormalization::MaxLength,
        }
    }
}

/// `1 − D / max(|pred|, |truth|)` after stripping [`EOC`]; two empty
/// sequences are identical.
pub fn dl_similarity<S: AsRef<str>>(predicted: &[S], truth: &[S]) -> f64 {
    dl_similarity_with(predicted, truth, SuffixComparison::default())
}

pub fn dl_similarity_with<S: AsRef<str>>(predicted: &[S], truth: &[S], cmp: SuffixComparison) -> f64 {
    let keep = |s: &&S| !(cmp.strip_eoc && s.as_ref() == EOC);
    let p: Vec<&str> = predicted.iter().filter(keep).map(AsRef::as_ref).collect();
    let t: Vec<&str> = truth.iter().filter(keep).map(AsRef::as_ref).collect();
    let denom = match cmp.normalization {
        DlNormalization::MaxLength => p.len().max(t.len()) as f64,
        DlNormalization::MeanLength => (p.len() + t.len()) as f64 / 2.0,
    };
    if denom == 0.0 {
        return 1.0;
    }
    (1.0 - dl_distance(&p, &t) as f64 / denom).max(0.0)
}

/// Mean absolute error of second-valued series, reported in days.
pub fn mae_days(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), truths.len())?;
    let total: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / truths.len() as f64 / SECONDS_PER_DAY)
}
