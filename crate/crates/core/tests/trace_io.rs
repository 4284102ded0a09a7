mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specmine_core::contract_sim::{rps_ledger, token_ledger};
use specmine_core::trace_model::{parse_trace_str, serialize_trace, TraceError, TraceLedger};

fn with_seed(ledger: TraceLedger) -> TraceLedger {
    let seed = ledger.transactions().first().map(|t| t.id.clone());
    TraceLedger::new(ledger.transactions().to_vec(), seed).unwrap()
}

proptest! {
    #[test]
    fn serialization_round_trips(seed in any::<u64>(), keep_seed in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ledger = common::random_ledger(&mut rng, 8, 4);
        if keep_seed {
            ledger = with_seed(ledger);
        }
        let text = serialize_trace(&ledger);
        prop_assert_eq!(parse_trace_str(&text).unwrap(), ledger);
    }

    #[test]
    fn ghosts_are_never_serialized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ledger = common::random_ledger(&mut rng, 8, 4);
        let ghosted = ledger.insert_ghosts().unwrap();
        let blocks: std::collections::BTreeSet<u64> =
            ledger.transactions().iter().map(|t| t.block_number).collect();
        prop_assert_eq!(ghosted.len(), ledger.len() + blocks.len());
        prop_assert!(matches!(ghosted.insert_ghosts(), Err(TraceError::AlreadyGhosted)));
        prop_assert_eq!(parse_trace_str(&serialize_trace(&ghosted)).unwrap(), ledger);
    }
}

#[test]
fn fixtures_round_trip() {
    for ledger in [rps_ledger(), token_ledger()] {
        assert_eq!(parse_trace_str(&serialize_trace(&ledger)).unwrap(), ledger);
    }
}

#[test]
fn malformed_input_is_rejected_with_its_line() {
    let good = serialize_trace(&rps_ledger());
    let mut lines: Vec<&str> = good.lines().collect();
    lines.insert(3, "{\"type\":\"tx\",\"id\":\"x\"}");
    let err = parse_trace_str(&lines.join("\n")).unwrap_err();
    assert!(
        matches!(err, TraceError::MalformedRecord { line: 4, .. }),
        "{err}"
    );

    let backwards = "{\"type\":\"tx\",\"id\":\"1\",\"block\":5,\"events\":[{\"caller\":\"u\",\"callee\":\"c\",\"sig\":\"f\",\"status\":\"ok\"}]}\n\
                     {\"type\":\"tx\",\"id\":\"2\",\"block\":4,\"events\":[{\"caller\":\"u\",\"callee\":\"c\",\"sig\":\"f\",\"status\":\"ok\"}]}";
    assert!(matches!(
        parse_trace_str(backwards),
        Err(TraceError::NonMonotonicBlockNumber {
            previous: 5,
            found: 4,
            ..
        })
    ));
}
