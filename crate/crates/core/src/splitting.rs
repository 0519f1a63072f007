//! Chronological train/validation/test splits and prefix sample generation.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eventlog::{Event, EventLog, Trace, EOC};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("cannot split an empty log")]
    Empty,
    #[error("invalid split fractions ({train}, {val}): need 0 < train, val and train + val < 1")]
    Fractions { train: f64, val: f64 },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Train and validation fractions; the test part takes the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.64, val: 0.16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Validation,
    Test,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Validation => "validation",
            Part::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Part> {
        match s {
            "train" => Some(Part::Train),
            "validation" => Some(Part::Validation),
            "test" => Some(Part::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitLog {
    pub train: EventLog,
    pub validation: EventLog,
    pub test: EventLog,
}

/// Orders traces by first-event timestamp (stable) and cuts at
/// `floor(train·n)` and `floor((train+val)·n)`.
pub fn temporal_split(log: &EventLog, fractions: SplitFractions) -> Result<SplitLog, SplitError> {
    let SplitFractions { train, val } = fractions;
    if !(train > 0.0 && val > 0.0 && train + val < 1.0) {
        return Err(SplitError::Fractions { train, val });
    }
    let n = log.num_traces();
    if n == 0 {
        return Err(SplitError::Empty);
    }
    let mut order: Vec<&Trace> = log.traces.iter().collect();
    order.sort_by_key(|t| t.first_timestamp());
    let (a, b) = cut_points(n, fractions);
    let part = |r: std::ops::Range<usize>| log.subset(order[r].iter().map(|t| (*t).clone()).collect());
    Ok(SplitLog {
        train: part(0..a),
        validation: part(a..b),
        test: part(b..n),
    })
}

fn cut_points(n: usize, f: SplitFractions) -> (usize, usize) {
    let a = (f.train * n as f64).floor() as usize;
    let b = ((f.train + f.val) * n as f64).floor() as usize;
    (a.min(n), b.clamp(a.min(n), n))
}

impl SplitLog {
    /// `(case_id, part)` rows in train, validation, test order.
    pub fn assignments(&self) -> Vec<(&str, Part)> {
        let mut out = Vec::new();
        for (log, part) in [
            (&self.train, Part::Train),
            (&self.validation, Part::Validation),
            (&self.test, Part::Test),
        ] {
            out.extend(log.traces.iter().map(|t| (t.case_id.as_str(), part)));
        }
        out
    }

    pub fn write_manifest<W: Write>(&self, sink: W) -> Result<(), SplitError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["case_id", "part"])?;
        for (case, part) in self.assignments() {
            w.write_record([case, part.as_str()])?;
        }
        w.flush().map_err(|e| SplitError::Manifest(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 of the manifest bytes.
    pub fn manifest_hash(&self) -> String {
        let mut buf = Vec::new();
        self.write_manifest(&mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    /// Rebuilds a split of `log` from a previously written manifest.
    pub fn from_manifest<R: Read>(log: &EventLog, manifest: R) -> Result<SplitLog, SplitError> {
        let mut reader = csv::Reader::from_reader(manifest);
        let mut parts: HashMap<String, Part> = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let case = rec.get(0).unwrap_or_default().to_owned();
            let part = rec
                .get(1)
                .and_then(Part::parse)
                .ok_or_else(|| SplitError::Manifest(format!("bad part for case {case:?}")))?;
            if parts.insert(case.clone(), part).is_some() {
                return Err(SplitError::Manifest(format!("case {case:?} listed twice")));
            }
            order.push(case);
        }
        let by_case: HashMap<&str, &Trace> = log.traces.iter().map(|t| (t.case_id.as_str(), t)).collect();
        if by_case.len() != parts.len() {
            return Err(SplitError::Manifest(format!(
                "manifest lists {} cases, log has {}",
                parts.len(),
                by_case.len()
            )));
        }
        let mut buckets: [Vec<Trace>; 3] = Default::default();
        for case in &order {
            let trace = by_case
                .get(case.as_str())
                .ok_or_else(|| SplitError::Manifest(format!("unknown case {case:?}")))?;
            let slot = match parts[case] {
                Part::Train => 0,
                Part::Validation => 1,
                Part::Test => 2,
            };
            buckets[slot].push((*trace).clone());
        }
        let [train, validation, test] = buckets;
        Ok(SplitLog {
            train: log.subset(train),
            validation: log.subset(validation),
            test: log.subset(test),
        })
    }
}

/// A prefix of a trace with its supervision targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixSample {
    pub case_id: String,
    pub prefix: Vec<Event>,
    pub next_activity: String,
    /// Seconds from the last prefix event to the next event.
    pub next_time_delta: f64,
    /// Remaining activities, ending with [`EOC`].
    pub suffix_activities: Vec<String>,
    /// Seconds from the last prefix event to the end of the case.
    pub remaining_time: f64,
}

impl PrefixSample {
    pub fn k(&self) -> usize {
        self.prefix.len()
    }

    pub fn prefix_activities(&self) -> impl Iterator<Item = &str> {
        self.prefix.iter().map(|e| e.activity.as_str())
    }
}

/// Emits one sample per prefix length `k = min_k ..= n-1` of every trace.
///
/// The log must be EOC-augmented, so the final event (the end marker) is
/// never the last event of a prefix. Traces too short for `min_k` yield no
/// samples.
pub fn make_prefix_samples(log: &EventLog, min_k: usize) -> Vec<PrefixSample> {
    let min_k = min_k.max(1);
    let mut out = Vec::new();
    for trace in &log.traces {
        out.extend(trace_samples(trace, min_k));
    }
    out
}

fn trace_samples(trace: &Trace, min_k: usize) -> impl Iterator<Item = PrefixSample> + '_ {
    let n = trace.len();
    let end = trace.last_timestamp();
    (min_k..n).map(move |k| {
        let last = &trace.events[k - 1];
        let next = &trace.events[k];
        PrefixSample {
            case_id: trace.case_id.clone(),
            prefix: trace.events[..k].to_vec(),
            next_activity: next.activity.clone(),
            next_time_delta: next.timestamp.secs_since(last.timestamp),
            suffix_activities: trace.events[k..].iter().map(|e| e.activity.clone()).collect(),
            remaining_time: end.secs_since(last.timestamp),
        }
    })
}

/// True when the sample's suffix is terminated by the end marker.
pub fn suffix_is_terminated(sample: &PrefixSample) -> bool {
    sample.suffix_activities.last().is_some_and(|a| a == EOC)
}
