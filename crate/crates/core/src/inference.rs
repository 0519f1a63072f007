//! Suffix decoding and remaining-time estimation on top of a [`Predictor`].

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{Event, Timestamp, EOC};
use crate::models::{ModelError, Predictor};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error("model vocabulary has no {EOC} class")]
    NoEndMarker,
    #[error("model has no remaining-time head")]
    NoRemainingHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Argmax,
    Random,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub beam_width: usize,
    /// Cap on predicted activities; `None` uses the model's longest
    /// training trace.
    pub max_len: Option<usize>,
    pub seed: u64,
    /// Rank beam hypotheses by mean instead of summed log-probability.
    pub length_normalize: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: Strategy::Argmax,
            beam_width: 3,
            max_len: None,
            seed: 0,
            length_normalize: false,
        }
    }
}

impl DecodeConfig {
    pub fn argmax() -> Self {
        DecodeConfig::default()
    }

    pub fn beam(width: usize) -> Self {
        DecodeConfig {
            strategy: Strategy::Beam,
            beam_width: width,
            ..Default::default()
        }
    }

    pub fn random(seed: u64) -> Self {
        DecodeConfig {
            strategy: Strategy::Random,
            seed,
            ..Default::default()
        }
    }

    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Argmax => "argmax".into(),
            Strategy::Random => "random".into(),
            Strategy::Beam => format!("beam{}", self.beam_width),
        }
    }

    fn validate(&self) -> Result<(), InferenceError> {
        if self.beam_width == 0 {
            return Err(InferenceError::Config("beam_width must be >= 1".into()));
        }
        if self.max_len == Some(0) {
            return Err(InferenceError::Config("max_len must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffixPrediction {
    pub activities: Vec<String>,
    /// Seconds, one per predicted activity.
    pub time_deltas: Vec<f64>,
    pub remaining_time: f64,
    pub cumulative_log_prob: f64,
    /// Set when `max_len` was reached before the end marker.
    pub truncated: bool,
}

/// Fallback cap when neither the config nor the model provides one.
const DEFAULT_MAX_LEN: usize = 100;

#[derive(Debug, Clone)]
struct Hypothesis {
    events: Vec<Event>,
    classes: Vec<usize>,
    deltas: Vec<f64>,
    log_prob: f64,
    done: bool,
}

impl Hypothesis {
    fn score(&self, normalize: bool) -> f64 {
        if normalize && !self.classes.is_empty() {
            self.log_prob / self.classes.len() as f64
        } else {
            self.log_prob
        }
    }

    fn into_prediction(self, vocab: &crate::eventlog::Vocabulary, max_len: usize) -> SuffixPrediction {
        let activities: Vec<String> = self
            .classes
            .iter()
            .map(|c| vocab.label(*c).unwrap_or_default().to_owned())
            .collect();
        let truncated = !self.done && activities.len() >= max_len;
        SuffixPrediction {
            remaining_time: self.deltas.iter().sum(),
            activities,
            time_deltas: self.deltas,
            cumulative_log_prob: self.log_prob,
            truncated,
        }
    }
}

fn extend(events: &[Event], origin: &[Event], label: &str, delta: f64) -> Event {
    let template = events.last().or(origin.last());
    let case = template.map(|e| e.case_id.clone()).unwrap_or_default();
    let ts = template
        .map(|e| e.timestamp)
        .unwrap_or(Timestamp::from_millis(0))
        .add_secs(delta);
    let mut e = Event::new(label, case, ts);
    if let Some(t) = template {
        for name in t.attributes.keys() {
            e = e.with_attribute(name.clone(), None);
        }
    }
    e
}

fn step<P: Predictor + ?Sized>(model: &P, events: &[Event]) -> Result<(Vec<f64>, f64), InferenceError> {
    let p = model.predict(events)?;
    p.check_distribution()?;
    Ok((p.probs, p.next_delta.unwrap_or(0.0).max(0.0)))
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

fn sequential<P: Predictor + ?Sized>(
    model: &P,
    prefix: &[Event],
    eoc: usize,
    max_len: usize,
    mut choose: impl FnMut(&[f64]) -> usize,
) -> Result<Hypothesis, InferenceError> {
    let vocab = model.vocab();
    let mut h = Hypothesis {
        events: prefix.to_vec(),
        classes: Vec::new(),
        deltas: Vec::new(),
        log_prob: 0.0,
        done: false,
    };
    while !h.done && h.classes.len() < max_len {
        let (probs, delta) = step(model, &h.events)?;
        let c = choose(&probs);
        let label = vocab.label(c).unwrap_or_default().to_owned();
        let e = extend(&h.events, prefix, &label, delta);
        h.events.push(e);
        h.classes.push(c);
        h.deltas.push(delta);
        h.log_prob += probs[c].ln();
        h.done = c == eoc;
    }
    Ok(h)
}

fn beam<P: Predictor + ?Sized>(
    model: &P,
    prefix: &[Event],
    eoc: usize,
    max_len: usize,
    cfg: &DecodeConfig,
) -> Result<Hypothesis, InferenceError> {
    let vocab = model.vocab();
    let mut beam = vec![Hypothesis {
        events: prefix.to_vec(),
        classes: Vec::new(),
        deltas: Vec::new(),
        log_prob: 0.0,
        done: false,
    }];
    while beam.iter().any(|h| !h.done && h.classes.len() < max_len) {
        let mut next = Vec::new();
        for h in beam {
            if h.done || h.classes.len() >= max_len {
                next.push(h);
                continue;
            }
            let (probs, delta) = step(model, &h.events)?;
            for (c, p) in probs.iter().enumerate() {
                if *p <= 0.0 {
                    continue;
                }
                let label = vocab.label(c).unwrap_or_default().to_owned();
                let mut child = h.clone();
                let e = extend(&child.events, prefix, &label, delta);
                child.events.push(e);
                child.classes.push(c);
                child.deltas.push(delta);
                child.log_prob += p.ln();
                child.done = c == eoc;
                next.push(child);
            }
        }
        // Stable: ties keep expansion order, i.e. lowest class index first.
        next.sort_by(|a, b| b.score(cfg.length_normalize).total_cmp(&a.score(cfg.length_normalize)));
        next.truncate(cfg.beam_width);
        beam = next;
    }
    let best = beam
        .into_iter()
        .reduce(|a, b| {
            if b.score(cfg.length_normalize) > a.score(cfg.length_normalize) {
                b
            } else {
                a
            }
        })
        .expect("beam is never empty");
    if cfg.length_normalize || cfg.beam_width == 1 {
        return Ok(best);
    }
    // A wide beam can prune the greedy path; never return anything worse.
    let greedy = sequential(model, prefix, eoc, max_len, argmax)?;
    Ok(if greedy.log_prob > best.log_prob { greedy } else { best })
}

/// Predicts the activity suffix of `prefix` step by step, feeding each
/// predicted event back into the model.
pub fn decode_suffix<P: Predictor + ?Sized>(
    model: &P,
    prefix: &[Event],
    cfg: &DecodeConfig,
) -> Result<SuffixPrediction, InferenceError> {
    cfg.validate()?;
    let vocab = model.vocab();
    let eoc = vocab.index_of(EOC).ok_or(InferenceError::NoEndMarker)?;
    let max_len = cfg.max_len.or(model.max_trace_len()).unwrap_or(DEFAULT_MAX_LEN).max(1);
    let h = match cfg.strategy {
        Strategy::Argmax => sequential(model, prefix, eoc, max_len, argmax)?,
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut bad = None;
            let h = sequential(model, prefix, eoc, max_len, |probs| match WeightedIndex::new(probs) {
                Ok(d) => d.sample(&mut rng),
                Err(e) => {
                    bad = Some(e.to_string());
                    argmax(probs)
                }
            })?;
            if let Some(e) = bad {
                return Err(InferenceError::Config(format!("cannot sample: {e}")));
            }
            h
        }
        Strategy::Beam => beam(model, prefix, eoc, max_len, cfg)?,
    };
    Ok(h.into_prediction(vocab, max_len))
}

/// Decodes many prefixes in parallel; prefix `i` uses seed `cfg.seed ^ i`.
pub fn decode_many<P: Predictor + ?Sized>(
    model: &P,
    prefixes: &[&[Event]],
    cfg: &DecodeConfig,
) -> Result<Vec<SuffixPrediction>, InferenceError> {
    prefixes
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let c = DecodeConfig {
                seed: cfg.seed ^ i as u64,
                ..*cfg
            };
            decode_suffix(model, p, &c)
        })
        .collect()
}

/// Sum of predicted deltas, the end-marker step included.
pub fn remaining_time_recursive(pred: &SuffixPrediction) -> f64 {
    pred.time_deltas.iter().sum()
}

/// Output of the model's remaining-time head, clamped at zero.
pub fn remaining_time_direct<P: Predictor + ?Sized>(model: &P, prefix: &[Event]) -> Result<f64, InferenceError> {
    let p = model.predict(prefix)?;
    p.remaining.map(|r| r.max(0.0)).ok_or(InferenceError::NoRemainingHead)
}
