mod common;

use std::path::Path;

use ppmbench::eventlog::{augment_eoc, compute_stats, parse_csv, write_csv, CsvSchema, EventLog, EOC};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn excerpt() -> EventLog {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/helpdesk_excerpt.csv");
    let file = std::fs::File::open(path).unwrap();
    parse_csv(file, &CsvSchema::new("Case ID", "Activity", "Timestamp")).unwrap()
}

#[test]
fn excerpt_fixture_counts() {
    let log = excerpt();
    let stats = compute_stats(&log).unwrap();
    assert_eq!(stats.num_cases, 2);
    assert_eq!(stats.num_events, 9);
    assert_eq!(stats.num_activities, 5);
    assert_eq!(stats.max_case_length, 5);
    assert_eq!(stats.num_variants, 2);
    let aug = augment_eoc(&log).unwrap();
    assert_eq!(aug.activity_vocab.len(), 6);
    assert_eq!(aug.num_events(), 11);
    // Resource is kept as a categorical attribute.
    assert_eq!(log.attribute_names().collect::<Vec<_>>(), vec!["Resource"]);
}

#[test]
fn excerpt_traces_are_time_ordered() {
    let log = excerpt();
    for t in &log.traces {
        assert!(t.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }
}

fn roundtrip(log: &EventLog) -> EventLog {
    let mut buf = Vec::new();
    write_csv(log, &mut buf).unwrap();
    parse_csv(buf.as_slice(), &CsvSchema::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = common::random_log(&mut rng, n, 4, 6);
        let back = roundtrip(&log);
        prop_assert_eq!(back, log);
    }

    #[test]
    fn augmentation_ends_every_trace(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = augment_eoc(&common::random_log(&mut rng, n, 4, 6)).unwrap();
        for t in &log.traces {
            prop_assert_eq!(t.events.last().unwrap().activity.as_str(), EOC);
            prop_assert!(t.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }
    }

    #[test]
    fn stats_are_bit_identical_on_recompute(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = common::random_log(&mut rng, 15, 5, 8);
        let a = compute_stats(&log).unwrap();
        let b = compute_stats(&log).unwrap();
        prop_assert_eq!(a.avg_event_duration.to_bits(), b.avg_event_duration.to_bits());
        prop_assert_eq!(a, b);
    }
}
