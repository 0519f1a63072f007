use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::neural::{Architecture, ModelSpec};
use super::ModelError;

/// Candidate values sampled independently per trial. Empty lists keep the
/// base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub hidden: Vec<usize>,
    pub layers: Vec<usize>,
    pub batch_size: Vec<usize>,
    /// Log-uniform learning-rate range.
    pub lr: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: ModelSpec,
    pub best_score: f64,
    /// Every sampled spec with its score, in trial order.
    pub trials: Vec<(ModelSpec, f64)>,
}

fn sample(base: &ModelSpec, space: &SearchSpace, rng: &mut ChaCha8Rng) -> ModelSpec {
    let mut spec = base.clone();
    if let Some(h) = space.hidden.choose(rng) {
        match &mut spec.arch {
            Architecture::Recurrent { hidden, .. } => *hidden = *h,
            Architecture::Mlp { hidden, .. } => hidden.iter_mut().for_each(|x| *x = *h),
            _ => {}
        }
    }
    if let (Some(l), Architecture::Recurrent { layers, .. }) = (space.layers.choose(rng), &mut spec.arch) {
        *layers = *l;
    }
    if let Some(b) = space.batch_size.choose(rng) {
        spec.training.batch_size = *b;
    }
    if let Some((lo, hi)) = space.lr {
        spec.training.sgd.lr = rng.gen_range(lo.ln()..=hi.ln()).exp();
    }
    spec
}

/// Seeded random search minimising `score` over `trials` sampled specs.
pub fn random_search<F>(
    base: &ModelSpec,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    mut score: F,
) -> Result<SearchOutcome, ModelError>
where
    F: FnMut(&ModelSpec) -> Result<f64, ModelError>,
{
    if trials == 0 {
        return Err(ModelError::Config("random search needs at least one trial".into()));
    }
    if let Some((lo, hi)) = space.lr {
        if !(lo > 0.0 && hi >= lo) {
            return Err(ModelError::Config(format!("bad learning-rate range ({lo}, {hi})")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(ModelSpec, f64)> = Vec::with_capacity(trials);
    for _ in 0..trials {
        let spec = sample(base, space, &mut rng);
        spec.validate()?;
        let s = score(&spec)?;
        out.push((spec, s));
    }
    let (best, best_score) = out
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(s, v)| (s.clone(), *v))
        .expect("at least one trial");
    Ok(SearchOutcome {
        best,
        best_score,
        trials: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkernel::CellKind;

    #[test]
    fn seeded_and_picks_minimum() {
        let base = ModelSpec::new(Architecture::Recurrent {
            cell: CellKind::Gru,
            hidden: 8,
            layers: 1,
            embedding_dim: 4,
        });
        let space = SearchSpace {
            hidden: vec![4, 8, 16],
            layers: vec![1, 2],
            batch_size: vec![8, 16],
            lr: Some((1e-3, 1e-1)),
        };
        let score = |s: &ModelSpec| Ok((s.training.sgd.lr - 0.01).abs());
        let a = random_search(&base, &space, 6, 42, score).unwrap();
        let b = random_search(&base, &space, 6, 42, score).unwrap();
        assert_eq!(a, b);
        assert!(a.trials.iter().all(|(_, v)| *v >= a.best_score));
        assert!(a.trials.iter().all(|(s, _)| (1e-3..=1e-1).contains(&s.training.sgd.lr)));
        assert!(random_search(&base, &space, 0, 1, score).is_err());
    }
}
