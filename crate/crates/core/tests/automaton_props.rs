mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmine_core::abstraction::{abstract_histories, field_keys, AbstractEvent};
use specmine_core::automaton::{
    accepts, apply_moves, apply_recipe, bounded_language, build_automaton, merge_same_future,
    Automaton, Move,
};

fn deterministic(a: &Automaton) -> bool {
    let pairs: BTreeSet<(usize, &AbstractEvent)> =
        a.transitions().iter().map(|t| (t.from, &t.label)).collect();
    pairs.len() == a.transitions().len()
}

fn reachable(a: &Automaton) -> bool {
    let mut seen = BTreeSet::from([a.initial()]);
    let mut stack = vec![a.initial()];
    while let Some(q) = stack.pop() {
        for t in a.outgoing(q) {
            if seen.insert(t.to) {
                stack.push(t.to);
            }
        }
    }
    seen.len() == a.state_count()
}

/// All label sequences readable from the initial state, for acyclic
/// automata.
fn all_words(a: &Automaton) -> BTreeSet<Vec<AbstractEvent>> {
    bounded_language(a, a.initial(), a.state_count()).unwrap()
}

proptest! {
    #[test]
    fn move_soundness(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng);
        let keys: Vec<_> = field_keys(&corpus).into_iter().collect();
        let recipe = common::random_recipe(&mut rng, &corpus, &keys, 3);
        let (a, abs) = apply_recipe(&corpus, &recipe);
        let vars: Vec<String> = a.variables().into_iter().collect();
        let m = common::random_move(&mut rng, &vars);
        let b = apply_moves(&a, std::slice::from_ref(&m), &abs.side_table);
        prop_assert!(deterministic(&b) && reachable(&b));
        for h in &corpus {
            prop_assert!(accepts(&a, &h.events, &recipe));
            prop_assert!(accepts(&b, &h.events, &recipe), "{:?} lost a history", m);
        }
        if !matches!(m, Move::MergeVars { .. }) {
            for h in common::random_corpus(&mut rng) {
                if accepts(&a, &h.events, &recipe) {
                    prop_assert!(accepts(&b, &h.events, &recipe));
                }
            }
        }
    }

    #[test]
    fn tree_accepts_exactly_the_prefixes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng);
        let keys: Vec<_> = field_keys(&corpus).into_iter().collect();
        let recipe = common::random_recipe(&mut rng, &corpus, &keys, 0);
        let abs = abstract_histories(&corpus, &recipe);
        let tree = build_automaton(&abs.histories);
        let prefixes: BTreeSet<Vec<AbstractEvent>> = abs
            .histories
            .iter()
            .flat_map(|h| (0..=h.len()).map(move |n| h[..n].to_vec()))
            .collect();
        prop_assert_eq!(all_words(&tree), prefixes);
        prop_assert_eq!(tree.transitions().len() + 1, tree.state_count());
        prop_assert!(deterministic(&tree) && reachable(&tree));
    }

    #[test]
    fn same_future_is_canonical(seed in any::<u64>(), k in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng);
        let abs = abstract_histories(&corpus, &Default::default());
        let mut shuffled = abs.histories.clone();
        let n = shuffled.len();
        shuffled.swap(0, rng.random_range(0..n));
        let a = merge_same_future(&build_automaton(&abs.histories), k);
        let b = merge_same_future(&build_automaton(&shuffled), k);
        let strip = |x: &Automaton| -> Vec<(usize, AbstractEvent, usize)> {
            x.transitions().iter().map(|t| (t.from, t.label.clone(), t.to)).collect()
        };
        prop_assert_eq!(strip(&a), strip(&b));
        prop_assert_eq!(a.state_count(), b.state_count());
        let again = merge_same_future(&a, k);
        prop_assert!(again.state_count() <= a.state_count());
    }
}

#[test]
fn k_zero_is_single_state_with_one_loop_per_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let corpus = common::random_corpus(&mut rng);
        let abs = abstract_histories(&corpus, &Default::default());
        let labels: BTreeSet<&AbstractEvent> = abs.histories.iter().flatten().collect();
        let a = merge_same_future(&build_automaton(&abs.histories), 0);
        assert_eq!(a.state_count(), 1);
        assert_eq!(a.transitions().len(), labels.len());
    }
}
