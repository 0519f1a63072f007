use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::event::{onehot, time_features, NormMethod, Normalizer, TIME_FEATURES};
use super::EncodingError;
use crate::eventlog::{Event, EventLog, Vocabulary, EOC};
use crate::splitting::PrefixSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Indicator columns of one categorical variable.
    OneHot,
    /// A single column holding a category index for an embedding lookup.
    Index { cardinality: usize },
    /// Dense real-valued columns.
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub name: String,
    pub start: usize,
    pub width: usize,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub groups: Vec<ColumnGroup>,
    /// Set when older events were dropped to fit the row budget.
    pub truncated: bool,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.groups.last().map(|g| g.start + g.width).unwrap_or(0)
    }

    fn push(&mut self, name: &str, width: usize, kind: ColumnKind) {
        let start = self.width();
        self.groups.push(ColumnGroup {
            name: name.to_owned(),
            start,
            width,
            kind,
        });
    }

    pub fn group(&self, name: &str) -> Option<&ColumnGroup> {
        self.groups.iter().find(|g| g.name == name)
    }
}

/// Row-major `(T, F)` feature array plus a per-row validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub layout: FeatureLayout,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, layout: FeatureLayout) -> Self {
        let cols = layout.width();
        FeatureMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            mask: vec![false; rows],
            layout,
        }
    }

    /// A single always-valid row.
    pub fn from_row(values: Vec<f64>, layout: FeatureLayout) -> Self {
        FeatureMatrix {
            rows: 1,
            cols: values.len(),
            values,
            mask: vec![true],
            layout,
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn real_rows(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// How many of the most recent events a padded encoding keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Recent(usize),
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityEncoding {
    OneHot,
    /// Emit the vocabulary index; the model owns the embedding table.
    Index,
}

/// Which per-event variables are encoded and how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventEncoding {
    pub activity: ActivityEncoding,
    /// Attribute names encoded one-hot.
    pub attributes: Vec<String>,
    pub time_features: bool,
}

impl Default for EventEncoding {
    fn default() -> Self {
        EventEncoding {
            activity: ActivityEncoding::OneHot,
            attributes: Vec::new(),
            time_features: true,
        }
    }
}

/// Event encoder with vocabularies and time normalisers fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixEncoder {
    pub config: EventEncoding,
    pub activity_vocab: Vocabulary,
    pub attribute_vocabs: IndexMap<String, Vocabulary>,
    /// Normalisers for the four time features, in [`time_features`] order.
    pub time_norms: Vec<Normalizer>,
}

const TIME_METHODS: [NormMethod; TIME_FEATURES] =
    [NormMethod::Log, NormMethod::Log, NormMethod::MinMax, NormMethod::MinMax];

impl PrefixEncoder {
    /// Fits time statistics on every prefix event of `train`. Vocabularies are
    /// taken from the log so indices agree across splits.
    pub fn fit(train: &EventLog, config: EventEncoding) -> Result<Self, EncodingError> {
        let mut attribute_vocabs = IndexMap::new();
        for name in &config.attributes {
            let vocab = train
                .attribute_vocabs
                .get(name)
                .ok_or_else(|| EncodingError::UnknownAttribute(name.clone()))?;
            attribute_vocabs.insert(name.clone(), vocab.clone());
        }
        let mut columns: [Vec<f64>; TIME_FEATURES] = Default::default();
        for trace in &train.traces {
            let events: Vec<Event> = trace.events.iter().filter(|e| e.activity != EOC).cloned().collect();
            for row in time_features(&events) {
                for (c, v) in row.iter().enumerate() {
                    columns[c].push(*v);
                }
            }
        }
        let time_norms = TIME_METHODS
            .iter()
            .zip(columns.iter())
            .map(|(m, vals)| Normalizer::fit(*m, vals))
            .collect();
        Ok(PrefixEncoder {
            config,
            activity_vocab: train.activity_vocab.clone(),
            attribute_vocabs,
            time_norms,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        let mut layout = FeatureLayout::default();
        match self.config.activity {
            ActivityEncoding::OneHot => layout.push("activity", self.activity_vocab.len(), ColumnKind::OneHot),
            ActivityEncoding::Index => layout.push(
                "activity",
                1,
                ColumnKind::Index {
                    cardinality: self.activity_vocab.len(),
                },
            ),
        }
        for (name, vocab) in &self.attribute_vocabs {
            layout.push(name, vocab.len(), ColumnKind::OneHot);
        }
        if self.config.time_features {
            layout.push("time", TIME_FEATURES, ColumnKind::Real);
        }
        layout
    }

    pub fn width(&self) -> usize {
        self.layout().width()
    }

    /// Encodes every event of `prefix` as one row.
    pub fn encode_events(&self, prefix: &[Event]) -> Result<Vec<Vec<f64>>, EncodingError> {
        let times = time_features(prefix);
        prefix
            .iter()
            .zip(times)
            .map(|(e, t)| self.encode_event(e, &t))
            .collect()
    }

    fn encode_event(&self, e: &Event, time: &[f64; TIME_FEATURES]) -> Result<Vec<f64>, EncodingError> {
        let mut row = Vec::with_capacity(self.width());
        match self.config.activity {
            ActivityEncoding::OneHot => row.extend(onehot(&e.activity, &self.activity_vocab)?),
            ActivityEncoding::Index => {
                let idx = self
                    .activity_vocab
                    .index_of(&e.activity)
                    .ok_or_else(|| EncodingError::UnknownLabel(e.activity.clone()))?;
                row.push(idx as f64);
            }
        }
        for (name, vocab) in &self.attribute_vocabs {
            row.extend(onehot(e.attribute_label(name), vocab)?);
        }
        if self.config.time_features {
            for (v, norm) in time.iter().zip(&self.time_norms) {
                row.push(norm.transform(*v).unwrap_or(0.0));
            }
        }
        Ok(row)
    }
}

/// Left-padded encoding of the most recent events of a prefix.
///
/// Keeps the last `min(len, window)` events; if that still exceeds `t_max`
/// only the `t_max` most recent are kept and the layout's `truncated` flag is
/// set. Padding rows are zero with a false mask.
pub fn encode_prefix_events(
    prefix: &[Event],
    window: Window,
    encoder: &PrefixEncoder,
    t_max: usize,
) -> Result<FeatureMatrix, EncodingError> {
    if t_max == 0 {
        return Err(EncodingError::ZeroLength);
    }
    let mut layout = encoder.layout();
    let keep = match window {
        Window::Recent(w) => prefix.len().min(w),
        Window::All => prefix.len(),
    };
    if keep > t_max {
        layout.truncated = true;
    }
    let keep = keep.min(t_max);
    let rows = encoder.encode_events(prefix)?;
    let mut m = FeatureMatrix::zeros(t_max, layout);
    let offset = t_max - keep;
    for (i, row) in rows[rows.len() - keep..].iter().enumerate() {
        m.row_mut(offset + i).copy_from_slice(row);
        m.mask[offset + i] = true;
    }
    Ok(m)
}

/// [`encode_prefix_events`] applied to a sample's prefix.
pub fn encode_prefixes_padded(
    sample: &PrefixSample,
    window: Window,
    encoder: &PrefixEncoder,
    t_max: usize,
) -> Result<FeatureMatrix, EncodingError> {
    encode_prefix_events(&sample.prefix, window, encoder, t_max)
}

/// One-row encoding of the last event of a prefix.
pub fn encode_single_event(prefix: &[Event], encoder: &PrefixEncoder) -> Result<FeatureMatrix, EncodingError> {
    encode_prefix_events(prefix, Window::Recent(1), encoder, 1)
}

/// A token of the continuous encoding; `None` is the padding token.
pub type Token = Option<usize>;

/// Concatenates all traces into one activity stream and cuts it into
/// consecutive windows of `w` tokens. Each target window is the input window
/// shifted one token to the left; positions past the stream end are padding.
pub fn encode_continuous_windows(log: &EventLog, w: usize) -> Result<Vec<(Vec<Token>, Vec<Token>)>, EncodingError> {
    if w == 0 {
        return Err(EncodingError::ZeroLength);
    }
    let mut stream = Vec::with_capacity(log.num_events());
    for trace in &log.traces {
        for a in trace.activities() {
            let idx = log
                .activity_vocab
                .index_of(a)
                .ok_or_else(|| EncodingError::UnknownLabel(a.to_owned()))?;
            stream.push(idx);
        }
    }
    let at = |i: usize| stream.get(i).copied();
    let windows = stream.len().div_ceil(w);
    Ok((0..windows)
        .map(|k| {
            let input = (0..w).map(|j| at(k * w + j)).collect();
            let target = (0..w).map(|j| at(k * w + j + 1)).collect();
            (input, target)
        })
        .collect())
}
