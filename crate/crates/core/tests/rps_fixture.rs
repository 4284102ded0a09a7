use specmine_core::contract_sim::{rps_ledger, CONTRACT_CREATION};
use specmine_core::dependency::{build_graph, filter_graph, EdgeKind};
use specmine_core::pipeline::{mine, MiningOptions};
use specmine_core::sessions::final_transactions;
use specmine_core::trace_model::Status;

fn ids(raw: &str) -> Vec<String> {
    raw.split_whitespace().map(String::from).collect()
}

#[test]
fn sessions_match_the_fixture() {
    let mined = mine(&rps_ledger(), &MiningOptions::default()).unwrap();
    assert_eq!(final_transactions(&mined.filtered), ["7", "9", "11", "16"]);
    let orderings: Vec<Vec<String>> = mined.sessions().map(|s| s.members.clone()).collect();
    assert_eq!(
        orderings,
        vec![
            ids("1 2 B11 5 B12 6 B13 7"),
            ids("1 2 B10 3 4 B14 9"),
            ids("1 2 B10 3 B14 8 B15 10 11"),
            ids("1 2 B10 3 B14 8 B16 12 B17 13 14 B20 15 16"),
        ]
    );
    assert!(mined.session_sets.iter().all(|s| !s.truncated));
}

#[test]
fn histories_replace_transactions_by_events() {
    let mined = mine(&rps_ledger(), &MiningOptions::default()).unwrap();
    let sigs: Vec<Vec<&str>> = mined
        .histories
        .iter()
        .map(|h| h.events.iter().map(|e| e.signature.as_str()).collect())
        .collect();
    assert_eq!(
        sigs[0],
        [CONTRACT_CREATION, "StartGame", "Bet", "Bet", "Claim"]
    );
    assert_eq!(
        sigs[1],
        [CONTRACT_CREATION, "StartGame", "StartGame", "Bet", "Claim"]
    );
    let last = mined.histories[3].events.last().unwrap();
    assert_eq!(last.signature, "Claim");
    assert_eq!(last.status, Status::Error);
}

#[test]
fn dependency_examples() {
    let ledger = rps_ledger()
        .insert_ghosts()
        .unwrap()
        .slice_from_seed("1")
        .unwrap();
    let graph = build_graph(&ledger);
    assert!(graph.has_edge("5", "6", EdgeKind::Strong));
    assert!(graph.has_edge("13", "14", EdgeKind::Weak));
    assert!(graph.has_edge("9", "B15", EdgeKind::Weak));

    let filtered = filter_graph(&graph, "1").unwrap();
    assert!(filtered.index_of("B11").is_ok());
    assert!(filtered.index_of("B7").is_err());
    assert!(filtered.index_of("B9").is_err());
    let strong_from_seed = specmine_core::dependency::strong_reachable(&graph, "1").unwrap();
    assert!(!strong_from_seed.contains("B11"));
}
