mod common;

use std::collections::HashMap;

use ppmbench::eventlog::{augment_eoc, EventLog};
use ppmbench::models::{
    small_spec, train, AnyModel, Architecture, MarkovConfig, MarkovModel, ModelSpec, Precision, Predictor,
    CHECKED_ARCHITECTURES,
};
use ppmbench::splitting::{make_prefix_samples, temporal_split, SplitFractions, SplitLog};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_split(seed: u64) -> SplitLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log = augment_eoc(&common::random_log(&mut rng, 30, 4, 6)).unwrap();
    temporal_split(&log, SplitFractions::default()).unwrap()
}

/// Next-activity frequencies after `ctx`, counted over every position.
fn enumerate(log: &EventLog, ctx: &[&str]) -> HashMap<String, f64> {
    let mut counts: HashMap<String, f64> = HashMap::new();
    let mut total = 0.0;
    for t in &log.traces {
        let acts: Vec<&str> = t.activities().collect();
        for pos in ctx.len().max(1)..acts.len() {
            if acts[pos - ctx.len()..pos] == *ctx {
                *counts.entry(acts[pos].to_owned()).or_default() += 1.0;
                total += 1.0;
            }
        }
    }
    counts.values_mut().for_each(|c| *c /= total);
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn markov_reproduces_enumerated_frequencies(seed in any::<u64>(), n in 1usize..50, order in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = augment_eoc(&common::random_log(&mut rng, n, 4, 6)).unwrap();
        let mut m = MarkovModel::new(MarkovConfig { order, alpha: 0.0 }).unwrap();
        m.fit_log(&log).unwrap();
        for s in make_prefix_samples(&log, 1) {
            let acts: Vec<&str> = s.prefix_activities().collect();
            let ctx = &acts[acts.len().saturating_sub(order)..];
            let want = enumerate(&log, ctx);
            let p = m.predict(&s.prefix).unwrap();
            for (i, label) in m.vocab().iter().enumerate() {
                let w = want.get(label).copied().unwrap_or(0.0);
                prop_assert!((p.probs[i] - w).abs() < 1e-12, "{:?} -> {}: {} vs {}", ctx, label, p.probs[i], w);
            }
        }
    }
}

#[test]
fn smoothed_markov_matches_the_formula() {
    let split = random_split(9);
    let alpha = 0.5;
    let mut m = MarkovModel::new(MarkovConfig { order: 1, alpha }).unwrap();
    m.fit_log(&split.train).unwrap();
    let n = m.vocab().len() as f64;
    for s in make_prefix_samples(&split.train, 1).iter().take(20) {
        let last = s.prefix.last().unwrap().activity.as_str();
        let want = enumerate(&split.train, &[last]);
        let total = split
            .train
            .traces
            .iter()
            .map(|t| {
                t.activities()
                    .collect::<Vec<_>>()
                    .windows(2)
                    .filter(|w| w[0] == last)
                    .count()
            })
            .sum::<usize>() as f64;
        let p = m.predict(&s.prefix).unwrap();
        for (i, label) in m.vocab().iter().enumerate() {
            let count = want.get(label).copied().unwrap_or(0.0) * total;
            let expected = (count + alpha) / (total + alpha * n);
            assert!((p.probs[i] - expected).abs() < 1e-12);
        }
    }
}

fn quick(name: &str) -> ModelSpec {
    let mut spec = small_spec(name).unwrap();
    spec.training.epochs = 3;
    spec.training.batch_size = 8;
    spec.precision = Precision::F32;
    if let Architecture::Autoencoder {
        pretrain_epochs,
        freeze_epochs,
        ..
    } = &mut spec.arch
    {
        *pretrain_epochs = 2;
        *freeze_epochs = 1;
    }
    spec
}

fn all_specs() -> Vec<ModelSpec> {
    let mut specs = vec![ModelSpec::new(Architecture::Markov(MarkovConfig::default()))];
    specs.extend(CHECKED_ARCHITECTURES.iter().map(|n| quick(n)));
    specs
}

#[test]
fn every_model_outputs_distributions_over_the_vocabulary() {
    let split = random_split(1);
    for spec in all_specs() {
        let mut m = AnyModel::from_spec(&spec).unwrap();
        train(&mut m, &split).unwrap();
        let n = m.vocab().len();
        assert_eq!(n, split.train.activity_vocab.len(), "{}", spec.kind_name());
        for s in make_prefix_samples(&split.test, 1) {
            let p = m.predict(&s.prefix).unwrap();
            assert_eq!(p.probs.len(), n);
            assert!(p.probs.iter().all(|x| *x >= 0.0));
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            if let Some(d) = p.next_delta {
                assert!(d >= 0.0);
            }
        }
    }
}

#[test]
fn retraining_with_the_same_seed_is_bit_identical() {
    let split = random_split(2);
    for spec in all_specs() {
        let fit = || {
            let mut m = AnyModel::from_spec(&spec).unwrap();
            let r = train(&mut m, &split).unwrap();
            (r, m)
        };
        let (r1, m1) = fit();
        let (r2, m2) = fit();
        assert_eq!(r1, r2, "{}", spec.kind_name());
        let prefix = &split.test.traces[0].events[..1];
        assert_eq!(m1.predict(prefix).unwrap(), m2.predict(prefix).unwrap());
    }
}

#[test]
fn checkpoints_reload_without_retraining() {
    let split = random_split(3);
    let dir = tempfile::tempdir().unwrap();
    for (i, mut spec) in all_specs().into_iter().enumerate() {
        if i % 2 == 0 {
            spec.precision = Precision::F64;
        }
        let mut m = AnyModel::from_spec(&spec).unwrap();
        train(&mut m, &split).unwrap();
        let path = dir.path().join(format!("m{i}"));
        m.save(&path).unwrap();
        let back = AnyModel::load(&path).unwrap();
        for s in make_prefix_samples(&split.test, 1) {
            assert_eq!(
                m.predict(&s.prefix).unwrap(),
                back.predict(&s.prefix).unwrap(),
                "{}",
                spec.kind_name()
            );
        }
    }
}

#[test]
fn undercomplete_autoencoder_is_enforced() {
    let spec: ModelSpec = toml::from_str("kind = \"autoencoder\"\ndim = 16\nhidden = [16]").unwrap();
    assert!(AnyModel::from_spec(&spec).is_err());
}

#[test]
fn layerwise_reconstruction_loss_does_not_increase() {
    for seed in 0..4 {
        let split = random_split(seed);
        for hidden in [vec![32, 16], vec![48, 24, 12]] {
            let mut spec: ModelSpec = toml::from_str("kind = \"autoencoder\"").unwrap();
            if let Architecture::Autoencoder { hidden: h, .. } = &mut spec.arch {
                *h = hidden.clone();
            }
            spec.training.epochs = 2;
            spec.training.seed = seed;
            let mut m = AnyModel::from_spec(&spec).unwrap();
            let r = train(&mut m, &split).unwrap();
            assert_eq!(r.pretrain_losses.len(), hidden.len());
            assert!(
                r.pretrain_losses.windows(2).all(|w| w[1] <= w[0]),
                "seed {seed} {hidden:?}: {:?}",
                r.pretrain_losses
            );
        }
    }
}
