use super::neural::{Architecture, MlpInput, ModelSpec, NeuralPredictor, Precision};
use super::ModelError;
use crate::encoding::ActivityEncoding;
use crate::eventlog::{augment_eoc, deterministic_log};
use crate::nnkernel::CellKind;

/// Architectures accepted by [`gradcheck_architecture`].
pub const CHECKED_ARCHITECTURES: [&str; 5] = ["mlp", "rnn", "lstm", "gru", "autoencoder"];

/// Desk-scale spec for a named architecture: hidden sizes 4 to 8, prefixes of
/// at most four events.
pub fn small_spec(name: &str) -> Result<ModelSpec, ModelError> {
    let recurrent = |cell| Architecture::Recurrent {
        cell,
        hidden: 4,
        layers: 1,
        embedding_dim: 3,
    };
    let arch = match name {
        "mlp" => Architecture::Mlp {
            hidden: vec![6, 4],
            input: MlpInput::PrefixesPadded,
        },
        "rnn" => recurrent(CellKind::Rnn),
        "lstm" => recurrent(CellKind::Lstm),
        "gru" => recurrent(CellKind::Gru),
        "autoencoder" => Architecture::Autoencoder {
            hidden: vec![8, 4],
            ngram: 2,
            dim: 12,
            pretrain_epochs: 0,
            freeze_epochs: 0,
            hash_seed: 7,
        },
        other => {
            return Err(ModelError::Config(format!(
                "unknown architecture {other:?}; expected one of {}",
                CHECKED_ARCHITECTURES.join(", ")
            )))
        }
    };
    let mut spec = ModelSpec::new(arch);
    spec.precision = Precision::F64;
    if name == "lstm" || name == "gru" {
        spec.encoding.activity = ActivityEncoding::Index;
    }
    Ok(spec)
}

/// Max relative gradient error of the full training objective for a freshly
/// initialised model of the named architecture.
pub fn gradcheck_architecture(name: &str, seed: u64) -> Result<f64, ModelError> {
    let mut spec = small_spec(name)?;
    spec.training.seed = seed;
    let log =
        augment_eoc(&deterministic_log(&["A", "B", "C", "D"], 3, 3_600.0).map_err(to_config)?).map_err(to_config)?;
    let model = NeuralPredictor::<f64>::untrained(spec, &log)?;
    model.gradcheck(&log, 6, 1e-5)
}

fn to_config(e: crate::eventlog::LogError) -> ModelError {
    ModelError::Config(e.to_string())
}
