use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, brier, dl_similarity_with, mae_days, MetricsError, SuffixComparison};
use crate::eventlog::EventLog;
use crate::inference::{decode_suffix, remaining_time_direct, DecodeConfig, InferenceError};
use crate::models::Predictor;
use crate::splitting::make_prefix_samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemainingPathway {
    /// Sum of the decoded suffix's deltas.
    #[default]
    Recursive,
    /// The model's remaining-time head.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tasks {
    pub next_activity: bool,
    pub next_time: bool,
    pub suffix: bool,
    pub remaining: Option<RemainingPathway>,
    pub comparison: SuffixComparison,
}

impl Default for Tasks {
    fn default() -> Self {
        Tasks {
            next_activity: true,
            next_time: true,
            suffix: true,
            remaining: Some(RemainingPathway::Recursive),
            comparison: SuffixComparison::default(),
        }
    }
}

/// Test-set metrics. Absent metrics were not requested or not supported by
/// the model; MAEs are in days.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub brier: Option<f64>,
    pub dl_similarity: Option<f64>,
    pub mae_next: Option<f64>,
    pub mae_remaining: Option<f64>,
    pub n_next: usize,
    pub n_suffix: usize,
    pub n_remaining: usize,
}

impl MetricsReport {
    /// `(task, metric, value, n)` rows for every reported metric.
    pub fn rows(&self) -> Vec<(&'static str, &'static str, f64, usize)> {
        let mut out = Vec::new();
        let mut push = |task, metric, v: Option<f64>, n| {
            if let Some(v) = v {
                out.push((task, metric, v, n));
            }
        };
        push("next_activity", "accuracy", self.accuracy, self.n_next);
        push("next_activity", "brier", self.brier, self.n_next);
        push("next_time", "mae_days", self.mae_next, self.n_next);
        push("suffix", "dl_similarity", self.dl_similarity, self.n_suffix);
        push("remaining_time", "mae_days", self.mae_remaining, self.n_remaining);
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

struct SampleOutcome {
    predicted: usize,
    truth: usize,
    probs: Vec<f64>,
    next_delta: Option<f64>,
    dl: Option<f64>,
    remaining: Option<f64>,
}

/// Evaluates `model` on every prefix sample of the EOC-augmented `test` log.
pub fn evaluate_protocol<P: Predictor + ?Sized>(
    model: &P,
    test: &EventLog,
    decode: &DecodeConfig,
    tasks: &Tasks,
) -> Result<MetricsReport, ProtocolError> {
    let samples = make_prefix_samples(test, 1);
    if samples.is_empty() {
        return Err(MetricsError::Empty.into());
    }
    let vocab = model.vocab();
    let need_decode = tasks.suffix || tasks.remaining == Some(RemainingPathway::Recursive);
    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<SampleOutcome, ProtocolError> {
            let p = model.predict(&s.prefix).map_err(InferenceError::from)?;
            p.check_distribution().map_err(InferenceError::from)?;
            let truth = vocab.index_of(&s.next_activity).unwrap_or(usize::MAX);
            let suffix = if need_decode {
                let cfg = DecodeConfig {
                    seed: decode.seed ^ i as u64,
                    ..*decode
                };
                Some(decode_suffix(model, &s.prefix, &cfg)?)
            } else {
                None
            };
            let dl = match (&suffix, tasks.suffix) {
                (Some(sp), true) => Some(dl_similarity_with(
                    &sp.activities,
                    &s.suffix_activities,
                    tasks.comparison,
                )),
                _ => None,
            };
            let remaining = match tasks.remaining {
                Some(RemainingPathway::Recursive) if model.predicts_time() => {
                    suffix.as_ref().map(|sp| sp.remaining_time)
                }
                Some(RemainingPathway::Direct) if model.predicts_remaining() => {
                    Some(remaining_time_direct(model, &s.prefix)?)
                }
                _ => None,
            };
            Ok(SampleOutcome {
                predicted: p.argmax(),
                truth,
                next_delta: p.next_delta,
                probs: p.probs,
                dl,
                remaining,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut report = MetricsReport::default();
    if tasks.next_activity {
        let preds: Vec<usize> = outcomes.iter().map(|o| o.predicted).collect();
        let truths: Vec<usize> = outcomes.iter().map(|o| o.truth).collect();
        report.accuracy = Some(accuracy(&preds, &truths)?);
        let probs: Vec<Vec<f64>> = outcomes.iter().map(|o| o.probs.clone()).collect();
        report.brier = Some(brier(&probs, &truths)?);
        report.n_next = outcomes.len();
    }
    if tasks.next_time && model.predicts_time() {
        let preds: Vec<f64> = outcomes.iter().map(|o| o.next_delta.unwrap_or(0.0)).collect();
        let truths: Vec<f64> = samples.iter().map(|s| s.next_time_delta).collect();
        report.mae_next = Some(mae_days(&preds, &truths)?);
        report.n_next = outcomes.len();
    }
    if tasks.suffix {
        let dls: Vec<f64> = outcomes.iter().filter_map(|o| o.dl).collect();
        report.dl_similarity = Some(dls.iter().sum::<f64>() / dls.len() as f64);
        report.n_suffix = dls.len();
    }
    let rem: Vec<(f64, f64)> = outcomes
        .iter()
        .zip(&samples)
        .filter_map(|(o, s)| o.remaining.map(|r| (r, s.remaining_time)))
        .collect();
    if !rem.is_empty() {
        let (p, t): (Vec<f64>, Vec<f64>) = rem.into_iter().unzip();
        report.mae_remaining = Some(mae_days(&p, &t)?);
        report.n_remaining = p.len();
    }
    Ok(report)
}
