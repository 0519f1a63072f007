use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ModelError, Prediction, Predictor, TrainReport};
use crate::eventlog::{Event, EventLog, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkovConfig {
    pub order: usize,
    pub alpha: f64,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        MarkovConfig { order: 3, alpha: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ContextStats {
    counts: Vec<u64>,
    total: u64,
    delta_sum: f64,
    remaining_sum: f64,
}

/// Order-`k` n-gram model over activity sequences.
///
/// `P(a | ctx) = (count(ctx, a) + α) / (count(ctx) + α|A|)` for the last
/// `min(k, len)` activities. With `α = 0` an unseen context backs off to
/// successively shorter ones; with `α > 0` the smoothed formula already
/// covers it. Time estimates are context means with the same backoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub config: MarkovConfig,
    vocab: Vocabulary,
    /// Keyed by comma-joined activity indices; `""` is the empty context.
    table: BTreeMap<String, ContextStats>,
    max_len: usize,
}

fn key(ctx: &[usize]) -> String {
    ctx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

impl MarkovModel {
    pub fn new(config: MarkovConfig) -> Result<Self, ModelError> {
        if !(config.alpha >= 0.0) || !config.alpha.is_finite() {
            return Err(ModelError::Config(format!(
                "smoothing must be >= 0, got {}",
                config.alpha
            )));
        }
        Ok(MarkovModel {
            config,
            vocab: Vocabulary::new(),
            table: BTreeMap::new(),
            max_len: 0,
        })
    }

    /// Builds the count table from every transition of `log`.
    pub fn fit_log(&mut self, log: &EventLog) -> Result<(), ModelError> {
        if !log.is_eoc_augmented() {
            return Err(ModelError::NotAugmented);
        }
        self.vocab = log.activity_vocab.clone();
        self.table.clear();
        self.max_len = log.max_trace_len();
        let n_classes = self.vocab.len();
        for trace in &log.traces {
            let acts: Vec<usize> = trace
                .activities()
                .map(|a| self.vocab.index_of(a).expect("log vocabulary covers its activities"))
                .collect();
            let end = trace.last_timestamp();
            for t in 1..acts.len() {
                let delta = trace.events[t].timestamp.secs_since(trace.events[t - 1].timestamp);
                let remaining = end.secs_since(trace.events[t - 1].timestamp);
                for j in 0..=self.config.order.min(t) {
                    let s = self.table.entry(key(&acts[t - j..t])).or_default();
                    if s.counts.is_empty() {
                        s.counts = vec![0; n_classes];
                    }
                    s.counts[acts[t]] += 1;
                    s.total += 1;
                    s.delta_sum += delta;
                    s.remaining_sum += remaining;
                }
            }
        }
        if self.table.is_empty() {
            return Err(ModelError::NoSamples);
        }
        Ok(())
    }

    fn context(&self, prefix: &[Event]) -> Vec<usize> {
        let start = prefix.len().saturating_sub(self.config.order);
        prefix[start..]
            .iter()
            .map(|e| self.vocab.index_of(&e.activity).unwrap_or(usize::MAX))
            .collect()
    }

    /// Longest seen suffix of `ctx`.
    fn backoff(&self, ctx: &[usize]) -> Option<&ContextStats> {
        (0..=ctx.len()).find_map(|drop| self.table.get(&key(&ctx[drop..])))
    }

    pub fn distribution(&self, prefix: &[Event]) -> Result<Vec<f64>, ModelError> {
        if self.table.is_empty() {
            return Err(ModelError::NotFitted);
        }
        let ctx = self.context(prefix);
        let n = self.vocab.len() as f64;
        let alpha = self.config.alpha;
        if alpha > 0.0 {
            let (counts, total) = match self.table.get(&key(&ctx)) {
                Some(s) => (Some(&s.counts), s.total as f64),
                None => (None, 0.0),
            };
            return Ok((0..self.vocab.len())
                .map(|a| (counts.map_or(0.0, |c| c[a] as f64) + alpha) / (total + alpha * n))
                .collect());
        }
        let s = self.backoff(&ctx).ok_or(ModelError::NotFitted)?;
        Ok(s.counts.iter().map(|c| *c as f64 / s.total as f64).collect())
    }
}

impl Predictor for MarkovModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn predict(&self, prefix: &[Event]) -> Result<Prediction, ModelError> {
        let probs = self.distribution(prefix)?;
        let s = self.backoff(&self.context(prefix)).ok_or(ModelError::NotFitted)?;
        let n = s.total as f64;
        Ok(Prediction {
            probs,
            next_delta: Some(s.delta_sum / n),
            remaining: Some(s.remaining_sum / n),
        })
    }

    fn fit(&mut self, train: &EventLog, _validation: &EventLog) -> Result<TrainReport, ModelError> {
        let started = std::time::Instant::now();
        self.fit_log(train)?;
        Ok(TrainReport {
            wall_clock_secs: started.elapsed().as_secs_f64(),
            ..Default::default()
        })
    }

    fn predicts_remaining(&self) -> bool {
        true
    }

    fn predicts_time(&self) -> bool {
        true
    }

    fn max_trace_len(&self) -> Option<usize> {
        Some(self.max_len)
    }
}
