mod common;

use ppmbench::encoding::{
    encode_prefix_events, frequency_encode, ngram_count, ngram_hash_encode, ngram_universe_size, onehot,
    replay_timed_state, EventEncoding, NormMethod, Normalizer, PetriNet, PrefixEncoder, Window,
};
use ppmbench::eventlog::{augment_eoc, Event, Timestamp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three-place chain p0 -A-> p1 -B-> p2, with C returning the token to p0.
fn three_place_net() -> PetriNet {
    PetriNet::from_json(
        r#"{
          "places": ["p0", "p1", "p2"],
          "transitions": [{"id": "tA", "label": "A"}, {"id": "tB", "label": "B"}, {"id": "tC", "label": "C"}],
          "arcs": [{"from": "p0", "to": "tA"}, {"from": "tA", "to": "p1"},
                   {"from": "p1", "to": "tB"}, {"from": "tB", "to": "p2"},
                   {"from": "p2", "to": "tC"}, {"from": "tC", "to": "p0"}],
          "initial_marking": {"p0": 1}
        }"#,
    )
    .unwrap()
}

fn random_prefix(rng: &mut impl Rng, len: usize) -> Vec<Event> {
    let mut t = 0i64;
    (0..len)
        .map(|_| {
            t += rng.gen_range(0..3_600_000);
            Event::new(
                ["A", "B", "C", "D"][rng.gen_range(0..4)],
                "c",
                Timestamp::from_millis(t),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn timed_state_is_bounded_and_decays(seed in any::<u64>(), len in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = three_place_net();
        let prefix = random_prefix(&mut rng, len);
        let end = prefix.last().map(|e| e.timestamp).unwrap_or(Timestamp::from_millis(0));
        let decay = 7_200.0;
        let mut prev: Option<Vec<f64>> = None;
        for step in 0..10 {
            let at = end.add_secs(step as f64 * 900.0);
            let s = replay_timed_state(&net, &prefix, at, decay).unwrap();
            prop_assert!(s.f.iter().all(|f| (0.0..=1.0).contains(f)));
            prop_assert!(s.m.iter().all(|m| *m >= 0.0));
            prop_assert_eq!(s.m.iter().sum::<f64>(), 1.0);
            if let Some(p) = &prev {
                prop_assert!(s.f.iter().zip(p).all(|(now, before)| now <= before));
            }
            prev = Some(s.f);
        }
    }

    #[test]
    fn hashed_ngrams_are_deterministic_and_bounded(seed in any::<u64>(), k in 1usize..4, dim in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let word = common::random_word(&mut rng, 4, 8);
        let v = ngram_hash_encode(&word, k, dim, seed);
        prop_assert_eq!(&v, &ngram_hash_encode(&word, k, dim, seed));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm <= ngram_count(word.len(), k) as f64 + 1e-12);
    }

    #[test]
    fn onehot_and_frequency_sums(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = augment_eoc(&common::random_log(&mut rng, 5, 5, 6)).unwrap();
        let vocab = &log.activity_vocab;
        for (i, label) in vocab.iter().enumerate() {
            let v = onehot(label, vocab).unwrap();
            prop_assert_eq!(v.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(v[i], 1.0);
        }
        let t = &log.traces[0];
        let f = frequency_encode(t.activities(), vocab).unwrap();
        prop_assert_eq!(f.iter().sum::<f64>(), t.len() as f64);
    }

    #[test]
    fn padded_mask_counts_real_rows(seed in any::<u64>(), len in 1usize..10, window in 1usize..8, t_max in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = augment_eoc(&common::random_log(&mut rng, 6, 4, 6)).unwrap();
        let enc = PrefixEncoder::fit(&log, EventEncoding::default()).unwrap();
        let seen = log.traces[0].events[0].activity.clone();
        let prefix: Vec<Event> = common::prefix_of(&vec![seen.as_str(); len]);
        let m = encode_prefix_events(&prefix, Window::Recent(window), &enc, t_max).unwrap();
        prop_assert_eq!(m.mask.iter().filter(|x| **x).count(), len.min(window).min(t_max));
    }

    #[test]
    fn minmax_maps_train_extremes_exactly(values in proptest::collection::vec(-1e6f64..1e6, 2..40)) {
        let n = Normalizer::fit(NormMethod::MinMax, &values);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi > lo);
        prop_assert_eq!(n.transform(lo).unwrap(), 0.0);
        prop_assert_eq!(n.transform(hi).unwrap(), 1.0);
    }
}

#[test]
fn empty_prefix_marks_initial_places() {
    let s = replay_timed_state(&three_place_net(), &[], Timestamp::from_millis(0), 60.0).unwrap();
    assert_eq!(s.m, vec![1.0, 0.0, 0.0]);
    assert_eq!(s.c, vec![1.0, 0.0, 0.0]);
    assert_eq!(s.f, vec![1.0, 0.0, 0.0]);
}

#[test]
fn ngram_universe_and_single_gram() {
    assert_eq!(ngram_universe_size(2, 2), Some(6));
    let v = ngram_hash_encode(&["A"], 3, 8, 42);
    assert_eq!(v.iter().filter(|x| **x != 0.0).count(), 1);
    assert_eq!(v.iter().map(|x| x.abs()).sum::<f64>(), 1.0);
    assert!(ngram_hash_encode(&[], 2, 8, 42).iter().all(|x| *x == 0.0));
}
