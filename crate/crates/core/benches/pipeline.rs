use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmine_core::abstraction::{identity_recipe, Recipe};
use specmine_core::automaton::{apply_recipe, merge_same_future};
use specmine_core::contract_sim::{rps_ledger, token_ledger};
use specmine_core::dependency::build_graph_with;
use specmine_core::pipeline::{mine, MiningOptions};
use specmine_core::trace_model::{
    AccessMode, EventRecord, Location, Status, TraceLedger, TransactionRecord,
};
use specmine_core::tuner::{compute_cost, CostConfig};
use specmine_core::Parallelism;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn synthetic_ledger(transactions: usize, locations: usize) -> TraceLedger {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let txs = (0..transactions)
        .map(|i| {
            let accesses: Vec<(AccessMode, Location)> = (0..rng.random_range(1..12))
                .map(|_| {
                    let mode = if rng.random_bool(0.6) {
                        AccessMode::Read
                    } else {
                        AccessMode::Write
                    };
                    (
                        mode,
                        Location::storage(format!("s{}", rng.random_range(0..locations))),
                    )
                })
                .collect();
            let event = EventRecord {
                caller: format!("0xU{}", i % 5),
                callee: "0xC".into(),
                signature: "f".into(),
                inputs: vec![],
                output: None,
                value: 0,
                status: Status::Success,
            };
            TransactionRecord::new((i + 1).to_string(), 1 + i as u64 / 4, accesses, vec![event])
        })
        .collect();
    TraceLedger::new(txs, None).expect("synthetic ledger is block-ordered")
}

fn dependency_graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_graph");
    for size in [500, 4000] {
        let ledger = synthetic_ledger(size, size / 10);
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, size), &ledger, |b, l| {
                b.iter(|| build_graph_with(black_box(l), mode))
            });
        }
    }
    group.finish();
}

fn mining(c: &mut Criterion) {
    let mut group = c.benchmark_group("mine");
    for (fixture, ledger) in [("rps", rps_ledger()), ("token", token_ledger())] {
        for (name, mode) in MODES {
            let opts = MiningOptions {
                parallelism: mode,
                ..MiningOptions::default()
            };
            group.bench_with_input(BenchmarkId::new(name, fixture), &ledger, |b, l| {
                b.iter(|| mine(black_box(l), &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn cost(c: &mut Criterion) {
    let histories = mine(&rps_ledger(), &MiningOptions::default())
        .unwrap()
        .histories;
    let fixture: Recipe =
        Recipe::from_json(include_str!("../fixtures/rps_shaped.recipe.json")).unwrap();
    let (tree, _) = apply_recipe(&histories, &identity_recipe());
    let collapsed = merge_same_future(&tree, 0);
    let (shaped, _) = apply_recipe(&histories, &fixture);
    let cases = [
        ("tree", tree, identity_recipe()),
        ("collapsed", collapsed, identity_recipe()),
        ("shaped", shaped, fixture),
    ];
    let mut group = c.benchmark_group("cost");
    for (case, automaton, recipe) in &cases {
        for (name, mode) in MODES {
            let cfg = CostConfig {
                k_eval: 6,
                parallelism: mode,
                ..CostConfig::default()
            };
            group.bench_function(BenchmarkId::new(name, case), |b| {
                b.iter(|| compute_cost(black_box(automaton), &histories, recipe, &cfg))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, dependency_graph, mining, cost);
criterion_main!(benches);
