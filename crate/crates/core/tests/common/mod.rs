//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use specmine_core::abstraction::{abstract_histories, Field, FieldAbstraction, FieldKey, Recipe};
use specmine_core::automaton::Move;
use specmine_core::dependency::EdgeKind;
use specmine_core::sessions::History;
use specmine_core::trace_model::{
    AccessMode, EventRecord, Location, Scalar, Status, TraceLedger, TransactionRecord,
};

pub fn event(sig: &str, caller: &str, inputs: Vec<Scalar>, output: Option<Scalar>) -> EventRecord {
    EventRecord {
        caller: caller.into(),
        callee: "0xC".into(),
        signature: sig.into(),
        inputs,
        output,
        value: 0,
        status: Status::Success,
    }
}

/// A ledger of up to `max_tx` transactions over at most `max_loc` storage
/// locations, with block attributes, balances and reverts mixed in.
pub fn random_ledger(rng: &mut impl Rng, max_tx: usize, max_loc: usize) -> TraceLedger {
    let count = rng.random_range(1..=max_tx);
    let mut block = 1u64;
    let mut txs = Vec::with_capacity(count);
    for i in 0..count {
        block += rng.random_range(0..2);
        let accesses: Vec<(AccessMode, Location)> = (0..rng.random_range(0..6))
            .map(|_| {
                let mode = if rng.random_bool(0.5) {
                    AccessMode::Read
                } else {
                    AccessMode::Write
                };
                let location = match rng.random_range(0..10) {
                    0 => Location::balance(format!("0xU{}", rng.random_range(0..2))),
                    1 => Location::block("block.number"),
                    _ => Location::storage(format!("l{}", rng.random_range(0..max_loc))),
                };
                (mode, location)
            })
            .collect();
        let mut e = event("f", "0xU", vec![], None);
        if rng.random_bool(0.2) {
            e.status = Status::Error;
        }
        txs.push(TransactionRecord::new(
            (i + 1).to_string(),
            block,
            accesses,
            vec![e],
        ));
    }
    TraceLedger::new(txs, None).expect("generated ledgers are valid")
}

/// Edges recomputed straight from the definitions, quadratic in the ledger
/// length and cubic in the masking check.
pub fn oracle_edges(ledger: &TraceLedger) -> BTreeSet<(String, String, EdgeKind)> {
    let txs = ledger.transactions();
    let effect = |t: &TransactionRecord| {
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        let mut touched = BTreeSet::new();
        let reverted = t.events.first().is_some_and(|e| e.status == Status::Error);
        for a in &t.accesses {
            if a.location.is_balance() {
                continue;
            }
            if a.mode == AccessMode::Read && !touched.contains(&a.location) {
                reads.insert(a.location.clone());
            }
            if a.mode == AccessMode::Write && !reverted {
                writes.insert(a.location.clone());
            }
            touched.insert(a.location.clone());
        }
        (reads, writes)
    };
    let fx: Vec<_> = txs.iter().map(effect).collect();
    let mut out = BTreeSet::new();
    for i in 0..txs.len() {
        for j in i + 1..txs.len() {
            let between: BTreeSet<&Location> = (i + 1..j).flat_map(|k| &fx[k].1).collect();
            let unmasked = |a: &BTreeSet<Location>, b: &BTreeSet<Location>| {
                a.intersection(b).any(|l| !between.contains(l))
            };
            let strong = unmasked(&fx[i].1, &fx[j].0);
            let weak = unmasked(&fx[i].1, &fx[j].1) || unmasked(&fx[i].0, &fx[j].1);
            let kind = if strong {
                Some(EdgeKind::Strong)
            } else if weak {
                Some(EdgeKind::Weak)
            } else {
                None
            };
            if let Some(kind) = kind {
                out.insert((txs[i].id.clone(), txs[j].id.clone(), kind));
            }
        }
    }
    out
}

const SIGS: [&str; 3] = ["a", "b", "c"];
const CALLERS: [&str; 3] = ["0xU1", "0xU2", "0xU3"];

/// A handful of short histories over a small alphabet, so that prefixes,
/// equal tails and equal variable values all occur.
pub fn random_corpus(rng: &mut impl Rng) -> Vec<History> {
    (0..rng.random_range(1..=4))
        .map(|h| {
            let events = (0..rng.random_range(1..=5))
                .map(|_| {
                    let sig = *SIGS.choose(rng).unwrap();
                    let caller = *CALLERS.choose(rng).unwrap();
                    let inputs = (0..rng.random_range(0..=2))
                        .map(|_| Scalar::Int(rng.random_range(0..3)))
                        .collect();
                    let mut e = event(sig, caller, inputs, None);
                    if rng.random_bool(0.15) {
                        e.status = Status::Error;
                    } else if rng.random_bool(0.5) {
                        e.output = Some(Scalar::Int(rng.random_range(0..3)));
                    }
                    e
                })
                .collect();
            History {
                events,
                origin: (String::new(), h),
            }
        })
        .collect()
}

pub fn random_move(rng: &mut impl Rng, vars: &[String]) -> Move {
    match rng.random_range(0..3) {
        0 => Move::MergeSameFuture {
            k: rng.random_range(0..=8),
        },
        1 => Move::MergeSimilarFuture {
            k: rng.random_range(0..=8),
        },
        _ if vars.len() >= 2 => {
            let pair: Vec<&String> = vars.choose_multiple(rng, 2).collect();
            Move::MergeVars {
                keep: pair[0].clone(),
                replace: pair[1].clone(),
            }
        }
        _ => Move::MergeSameFuture {
            k: rng.random_range(0..=8),
        },
    }
}

/// Random abstractions over `keys`, then up to `max_moves` moves. About half
/// of the moves merge two variables that the abstraction produces.
pub fn random_recipe(
    rng: &mut impl Rng,
    histories: &[History],
    keys: &[FieldKey],
    max_moves: usize,
) -> Recipe {
    let mut recipe = Recipe::default();
    for key in keys {
        let a = *FieldAbstraction::ALL.choose(rng).unwrap();
        recipe.set_abstraction(key.clone(), a);
    }
    let corpus = abstract_histories(histories, &recipe);
    let vars: Vec<String> = corpus.side_table.variables().map(str::to_owned).collect();
    for _ in 0..rng.random_range(0..=max_moves) {
        let m = if rng.random_bool(0.5) && vars.len() >= 2 {
            let pair: Vec<&String> = vars.choose_multiple(rng, 2).collect();
            Move::MergeVars {
                keep: pair[0].clone(),
                replace: pair[1].clone(),
            }
        } else {
            random_move(rng, &vars)
        };
        recipe.moves.push(m);
    }
    recipe
}

/// Variables on approve callers and on the owner argument of transferFrom,
/// all merged into the first one.
pub fn relational_recipe(histories: &[History]) -> Recipe {
    let base = Recipe::default()
        .with_abstraction("approve", Field::Caller, FieldAbstraction::Variable)
        .with_abstraction("transferFrom", Field::Input(0), FieldAbstraction::Variable);
    let corpus = abstract_histories(histories, &base);
    let vars: Vec<String> = corpus.side_table.variables().map(str::to_owned).collect();
    let mut recipe = base;
    for v in vars.iter().filter(|v| *v != "v0") {
        recipe.moves.push(Move::MergeVars {
            keep: "v0".into(),
            replace: v.clone(),
        });
    }
    recipe
}
