//! Event and sequence encodings: one-hot, frequency, time features,
//! normalisation, padded prefixes, continuous windows, hashed n-grams and the
//! Petri-net timed state.

mod event;
mod ngram;
mod petri;
mod sequence;

use thiserror::Error;

pub use event::{
    frequency_encode, normalize, onehot, time_features, EmbeddingTable, NormMethod, NormStats, Normalizer,
    TIME_FEATURES,
};
pub use ngram::{hash_labels, ngram_count, ngram_hash_encode, ngram_universe_size};
pub use petri::{replay_timed_state, NetArc, PetriNet, TimedStateEncoder, TimedStateVector, Transition};
pub use sequence::{
    encode_continuous_windows, encode_prefix_events, encode_prefixes_padded, encode_single_event, ActivityEncoding,
    ColumnGroup, ColumnKind, EventEncoding, FeatureLayout, FeatureMatrix, PrefixEncoder, Token, Window,
};

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("label {0:?} is not in the vocabulary")]
    UnknownLabel(String),
    #[error("log has no attribute named {0:?}")]
    UnknownAttribute(String),
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("normaliser used before fitting")]
    Unfitted,
    #[error("length must be at least 1")]
    ZeroLength,
    #[error("decay horizon must be positive and finite, got {0}")]
    InvalidDecay(f64),
    #[error("invalid Petri net: {0}")]
    InvalidNet(String),
}
