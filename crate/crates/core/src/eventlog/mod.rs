//! Event logs: events, traces, vocabularies, CSV ingestion and log statistics.

mod parse;
mod stats;
mod synthetic;
mod timestamp;

use std::collections::HashSet;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_csv, write_csv, CsvSchema};
pub use stats::{compute_stats, LogStats};
pub use synthetic::deterministic_log;
pub use timestamp::Timestamp;

/// Activity label appended to every trace to mark the end of the case.
pub const EOC: &str = "[EOC]";

/// Reserved label for a missing attribute value. Always index 0 of an
/// attribute vocabulary.
pub const MISSING: &str = "⟨missing⟩";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("row {row}: cannot parse timestamp {value:?}")]
    Timestamp { row: u64, value: String },
    #[error("row {row}: missing required column {column:?}")]
    MissingValue { row: u64, column: String },
    #[error("header has no column named {0:?}")]
    MissingColumn(String),
    #[error("event log is empty")]
    Empty,
    #[error("duplicate event (activity {activity:?}, case {case_id:?}, timestamp {timestamp})")]
    Duplicate {
        activity: String,
        case_id: String,
        timestamp: Timestamp,
    },
    #[error("log already contains the {EOC} activity")]
    EocConflict,
    #[error("invalid trace {case_id:?}: {reason}")]
    InvalidTrace { case_id: String, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// An ordered set of labels with contiguous indices starting at 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    labels: IndexSet<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Attribute vocabulary with [`MISSING`] pre-registered at index 0.
    pub fn with_missing() -> Self {
        let mut v = Self::new();
        v.insert(MISSING);
        v
    }

    pub fn from_labels<I, L>(labels: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: Into<String>,
    {
        Vocabulary {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// Inserts `label` if absent and returns its index.
    pub fn insert(&mut self, label: &str) -> usize {
        if let Some(i) = self.labels.get_index_of(label) {
            return i;
        }
        self.labels.insert_full(label.to_owned()).0
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.get_index_of(label)
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get_index(index).map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }
}

/// A single recorded event.
///
/// `attributes` maps attribute names to a label, `None` being the missing
/// marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub case_id: String,
    pub timestamp: Timestamp,
    pub attributes: IndexMap<String, Option<String>>,
}

impl Event {
    pub fn new(activity: impl Into<String>, case_id: impl Into<String>, timestamp: Timestamp) -> Self {
        Event {
            activity: activity.into(),
            case_id: case_id.into(),
            timestamp,
            attributes: IndexMap::new(),
        }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: Option<String>) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }

    /// Attribute label with the missing marker substituted for `None`.
    pub fn attribute_label(&self, name: &str) -> &str {
        match self.attributes.get(name) {
            Some(Some(v)) => v.as_str(),
            _ => MISSING,
        }
    }
}

/// The events of one case, ordered by timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    /// Builds a trace, checking it is non-empty, single-case and time-ordered.
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Result<Self, LogError> {
        let case_id = case_id.into();
        if events.is_empty() {
            return Err(LogError::InvalidTrace {
                case_id,
                reason: "trace has no events".into(),
            });
        }
        if let Some(e) = events.iter().find(|e| e.case_id != case_id) {
            return Err(LogError::InvalidTrace {
                reason: format!("event belongs to case {:?}", e.case_id),
                case_id,
            });
        }
        if events.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(LogError::InvalidTrace {
                case_id,
                reason: "timestamps decrease".into(),
            });
        }
        Ok(Trace { case_id, events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.activity.as_str())
    }

    pub fn first_timestamp(&self) -> Timestamp {
        self.events[0].timestamp
    }

    pub fn last_timestamp(&self) -> Timestamp {
        self.events[self.events.len() - 1].timestamp
    }

    pub fn ends_with_eoc(&self) -> bool {
        self.events.last().is_some_and(|e| e.activity == EOC)
    }
}

/// A set of traces with the vocabularies of their activity and attribute labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub activity_vocab: Vocabulary,
    pub attribute_vocabs: IndexMap<String, Vocabulary>,
}

impl EventLog {
    /// Builds a log and derives vocabularies in first-appearance order.
    pub fn from_traces(traces: Vec<Trace>) -> Result<Self, LogError> {
        Self::with_vocabularies(traces, Vocabulary::new(), IndexMap::new())
    }

    /// Builds a log that extends existing vocabularies. Sub-logs of a split use
    /// this to keep the parent's indices.
    pub fn with_vocabularies(
        traces: Vec<Trace>,
        mut activity_vocab: Vocabulary,
        mut attribute_vocabs: IndexMap<String, Vocabulary>,
    ) -> Result<Self, LogError> {
        let mut seen = HashSet::new();
        for trace in &traces {
            for e in &trace.events {
                if !seen.insert((&e.activity, &e.case_id, e.timestamp)) {
                    return Err(LogError::Duplicate {
                        activity: e.activity.clone(),
                        case_id: e.case_id.clone(),
                        timestamp: e.timestamp,
                    });
                }
                activity_vocab.insert(&e.activity);
                for (name, value) in &e.attributes {
                    let vocab = attribute_vocabs
                        .entry(name.clone())
                        .or_insert_with(Vocabulary::with_missing);
                    vocab.insert(value.as_deref().unwrap_or(MISSING));
                }
            }
        }
        Ok(EventLog {
            traces,
            activity_vocab,
            attribute_vocabs,
        })
    }

    /// A log over a subset of traces sharing this log's vocabularies.
    pub fn subset(&self, traces: Vec<Trace>) -> EventLog {
        EventLog {
            traces,
            activity_vocab: self.activity_vocab.clone(),
            attribute_vocabs: self.attribute_vocabs.clone(),
        }
    }

    pub fn num_traces(&self) -> usize {
        self.traces.len()
    }

    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attribute_vocabs.keys().map(String::as_str)
    }

    pub fn max_trace_len(&self) -> usize {
        self.traces.iter().map(Trace::len).max().unwrap_or(0)
    }

    pub fn is_eoc_augmented(&self) -> bool {
        !self.traces.is_empty() && self.traces.iter().all(Trace::ends_with_eoc)
    }
}

/// Appends an [`EOC`] event to every trace.
///
/// The end event repeats the trace's last timestamp and carries missing values
/// for every attribute.
pub fn augment_eoc(log: &EventLog) -> Result<EventLog, LogError> {
    if log.activity_vocab.contains(EOC) || log.traces.iter().any(|t| t.activities().any(|a| a == EOC)) {
        return Err(LogError::EocConflict);
    }
    let names: Vec<String> = log.attribute_vocabs.keys().cloned().collect();
    let traces = log
        .traces
        .iter()
        .map(|t| {
            let mut events = t.events.clone();
            let mut end = Event::new(EOC, t.case_id.clone(), t.last_timestamp());
            for name in &names {
                end.attributes.insert(name.clone(), None);
            }
            events.push(end);
            Trace {
                case_id: t.case_id.clone(),
                events,
            }
        })
        .collect();
    let mut activity_vocab = log.activity_vocab.clone();
    activity_vocab.insert(EOC);
    Ok(EventLog {
        traces,
        activity_vocab,
        attribute_vocabs: log.attribute_vocabs.clone(),
    })
}
