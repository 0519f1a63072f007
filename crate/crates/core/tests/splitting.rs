mod common;

use std::collections::HashSet;

use ppmbench::eventlog::{augment_eoc, deterministic_log};
use ppmbench::splitting::{make_prefix_samples, temporal_split, SplitFractions, SplitLog};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sizes(s: &SplitLog) -> (usize, usize, usize) {
    (s.train.num_traces(), s.validation.num_traces(), s.test.num_traces())
}

#[test]
fn default_fraction_sizes() {
    for (n, want) in [(100, (64, 16, 20)), (10, (6, 2, 2)), (1, (0, 0, 1))] {
        let log = deterministic_log(&["A"], n, 60.0).unwrap();
        assert_eq!(
            sizes(&temporal_split(&log, SplitFractions::default()).unwrap()),
            want,
            "n = {n}"
        );
    }
}

#[test]
fn manifest_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let log = augment_eoc(&common::random_log(&mut rng, 40, 4, 6)).unwrap();
    let split = temporal_split(&log, SplitFractions::default()).unwrap();
    let mut buf = Vec::new();
    split.write_manifest(&mut buf).unwrap();
    let back = SplitLog::from_manifest(&log, buf.as_slice()).unwrap();
    assert_eq!(back, split);
    assert_eq!(back.manifest_hash(), split.manifest_hash());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_is_a_chronological_partition(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = common::random_log(&mut rng, n, 3, 5);
        let split = temporal_split(&log, SplitFractions::default()).unwrap();
        let (a, b, c) = sizes(&split);
        prop_assert_eq!(a + b + c, n);

        let ids = |l: &ppmbench::EventLog| l.traces.iter().map(|t| t.case_id.clone()).collect::<HashSet<_>>();
        let (tr, va, te) = (ids(&split.train), ids(&split.validation), ids(&split.test));
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        let union: HashSet<_> = tr.union(&va).chain(te.iter()).cloned().collect();
        prop_assert_eq!(union, ids(&log));

        let firsts: Vec<_> = [&split.train, &split.validation, &split.test]
            .iter()
            .flat_map(|l| l.traces.iter().map(|t| t.first_timestamp()))
            .collect();
        prop_assert!(firsts.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(temporal_split(&log, SplitFractions::default()).unwrap(), split);
    }

    #[test]
    fn prefix_samples_rebuild_their_trace(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = augment_eoc(&common::random_log(&mut rng, 10, 4, 7)).unwrap();
        let samples = make_prefix_samples(&log, 1);
        let expected: usize = log.traces.iter().map(|t| t.len() - 1).sum();
        prop_assert_eq!(samples.len(), expected);
        for s in &samples {
            let trace = log.traces.iter().find(|t| t.case_id == s.case_id).unwrap();
            let mut acts: Vec<&str> = s.prefix_activities().collect();
            acts.extend(s.suffix_activities.iter().map(String::as_str));
            prop_assert_eq!(acts, trace.activities().collect::<Vec<_>>());
            prop_assert_eq!(s.next_activity.as_str(), s.suffix_activities[0].as_str());
            prop_assert!(s.remaining_time >= s.next_time_delta && s.next_time_delta >= 0.0);
        }
    }
}
