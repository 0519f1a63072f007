#![allow(dead_code)]

use std::collections::HashMap;

use ppmbench::eventlog::{augment_eoc, deterministic_log, Event, EventLog, Timestamp, Trace, Vocabulary, EOC};
use ppmbench::models::{Architecture, ModelError, ModelSpec, Prediction, Predictor, TrainReport};
use ppmbench::nnkernel::CellKind;
use ppmbench::splitting::{temporal_split, SplitFractions, SplitLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LETTERS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

/// Random raw log: first events scattered over a month (ties possible),
/// gaps of up to a day, one categorical attribute.
pub fn random_log(rng: &mut impl Rng, n_traces: usize, alphabet: usize, max_len: usize) -> EventLog {
    let traces = (0..n_traces)
        .map(|i| {
            let case = format!("case{i}");
            let mut t = rng.gen_range(0..30) * 86_400_000i64;
            let len = rng.gen_range(1..=max_len);
            let events = (0..len)
                .map(|_| {
                    t += rng.gen_range(0..86_400_000i64);
                    let a = LETTERS[rng.gen_range(0..alphabet)];
                    let res = ["r1", "r2"][rng.gen_range(0..2)];
                    Event::new(a, case.clone(), Timestamp::from_millis(t)).with_attribute("res", Some(res.into()))
                })
                .collect();
            Trace::new(case, events).unwrap()
        })
        .collect();
    EventLog::from_traces(traces).unwrap()
}

/// Restricted Damerau-Levenshtein (optimal string alignment) by memoised
/// recursion over suffixes. Deliberately unlike the library's prefix DP.
pub fn osa_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let mut best = go(a, b, i + 1, j, memo) + 1;
        best = best.min(go(a, b, i, j + 1, memo) + 1);
        best = best.min(go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]));
        if i + 1 < a.len() && j + 1 < b.len() && a[i] == b[j + 1] && a[i + 1] == b[j] {
            best = best.min(go(a, b, i + 2, j + 2, memo) + 1);
        }
        memo.insert((i, j), best);
        best
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Plain Levenshtein distance, two-row DP.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + usize::from(x != y));
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn random_word(rng: &mut impl Rng, alphabet: usize, max_len: usize) -> Vec<&'static str> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| LETTERS[rng.gen_range(0..alphabet)]).collect()
}

/// A predictor whose next-activity distribution is a seeded pseudo-random
/// function of the prefix activities.
#[derive(Debug, Clone)]
pub struct TableModel {
    pub seed: u64,
    pub vocab: Vocabulary,
    pub max_len: usize,
}

impl TableModel {
    pub fn new(seed: u64, n_activities: usize) -> Self {
        let mut labels: Vec<&str> = LETTERS[..n_activities].to_vec();
        labels.push(EOC);
        TableModel {
            seed,
            vocab: Vocabulary::from_labels(labels),
            max_len: 8,
        }
    }

    fn rng_for(&self, prefix: &[Event]) -> ChaCha8Rng {
        let mut h: u64 = self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ prefix.len() as u64;
        for e in prefix {
            for b in e.activity.bytes() {
                h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
            }
            h = h.rotate_left(17) ^ 0xff;
        }
        ChaCha8Rng::seed_from_u64(h)
    }
}

impl Predictor for TableModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn predict(&self, prefix: &[Event]) -> Result<Prediction, ModelError> {
        let mut rng = self.rng_for(prefix);
        let w: Vec<f64> = (0..self.vocab.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        Ok(Prediction {
            probs: w.iter().map(|x| x / total).collect(),
            next_delta: Some(rng.gen_range(0.0..3600.0)),
            remaining: Some(rng.gen_range(0.0..86_400.0)),
        })
    }

    fn fit(&mut self, _train: &EventLog, _validation: &EventLog) -> Result<TrainReport, ModelError> {
        Ok(TrainReport::default())
    }

    fn predicts_time(&self) -> bool {
        true
    }

    fn max_trace_len(&self) -> Option<usize> {
        Some(self.max_len)
    }
}

pub fn prefix_of(acts: &[&str]) -> Vec<Event> {
    acts.iter()
        .enumerate()
        .map(|(i, a)| Event::new(*a, "p", Timestamp::from_millis(i as i64 * 60_000)))
        .collect()
}

/// A→B→C→D with one-day gaps, 200 traces, end-marked and split 64/16/20.
pub fn chain_split() -> SplitLog {
    let raw = deterministic_log(&["A", "B", "C", "D"], 200, 86_400.0).unwrap();
    temporal_split(&augment_eoc(&raw).unwrap(), SplitFractions::default()).unwrap()
}

/// GRU settings that learn the chain log, including its time targets.
pub fn chain_gru_spec() -> ModelSpec {
    let mut spec = ModelSpec::new(Architecture::Recurrent {
        cell: CellKind::Gru,
        hidden: 32,
        layers: 1,
        embedding_dim: 8,
    });
    spec.training.epochs = 200;
    spec.training.patience = 0;
    spec.training.sgd.lr = 0.01;
    spec.training.sgd.lr_decay = 0.98;
    spec.training.seed = 0;
    spec
}
