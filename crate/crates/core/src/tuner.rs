//! Simulated-annealing search over recipes.
//!
//! Each step builds the candidate automaton, scores it, and decides by Metropolis acceptance whether the next mutation starts from
//! the candidate or from the last accepted recipe.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    abstract_histories, field_keys, identity_recipe, AbstractCorpus, AbstractEvent,
    FieldAbstraction, FieldKey, Recipe,
};
use crate::automaton::{accepts, apply_move, apply_recipe, build_automaton, Automaton, Move};
use crate::par::{self, Parallelism};
use crate::sessions::History;

/// Largest `k` drawn for appended state merges.
pub const MAX_MERGE_K: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TunerError {
    #[error("cannot tune over an empty corpus")]
    EmptyCorpus,
    #[error("unknown preset {0:?} (expected default, general or precise)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub w_size: f64,
    pub w_precision: f64,
    pub w_generality: f64,
    pub k_eval: usize,
    pub t0: f64,
    pub cooling: f64,
    pub bound: usize,
    pub rng_seed: u64,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self::with_weights(1.0, 5.0, 1.0)
    }
}

impl CostConfig {
    fn with_weights(w_size: f64, w_precision: f64, w_generality: f64) -> Self {
        Self {
            w_size,
            w_precision,
            w_generality,
            k_eval: 4,
            t0: 10.0,
            cooling: 0.999,
            bound: 10_000,
            rng_seed: 42,
            parallelism: Parallelism::default(),
        }
    }

    /// Favors automata that generalize beyond the observed histories.
    pub fn general() -> Self {
        Self::with_weights(1.0, 1.0, 5.0)
    }

    /// Favors automata that accept little beyond the observed histories.
    pub fn precise() -> Self {
        Self::with_weights(0.2, 10.0, 0.0)
    }

    pub fn preset(name: &str) -> Result<Self, TunerError> {
        match name {
            "default" => Ok(Self::default()),
            "general" => Ok(Self::general()),
            "precise" => Ok(Self::precise()),
            other => Err(TunerError::UnknownPreset(other.to_owned())),
        }
    }

    pub fn validate(&self) -> Result<(), TunerError> {
        let weights = [self.w_size, self.w_precision, self.w_generality];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(TunerError::InvalidConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(TunerError::InvalidConfig("t0 must be positive".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(TunerError::InvalidConfig(
                "cooling must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Temperature at `step`.
    pub fn temperature(&self, step: usize) -> f64 {
        self.t0 * self.cooling.powf(step as f64)
    }
}

/// The terms of the cost function for one automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub size: usize,
    /// Distinct label sequences of length at most `k_eval` (variable names
    /// and freshness erased).
    pub language: u64,
    /// Distinct observed abstract-history prefixes of length at most
    /// `k_eval`, including the empty one.
    pub observed: u64,
    pub novel: u64,
    pub all_accepted: bool,
    pub cost: f64,
}

/// Erased labels interned to dense ids.
#[derive(Default)]
struct Interner {
    ids: BTreeMap<AbstractEvent, usize>,
}

impl Interner {
    fn id(&mut self, label: &AbstractEvent) -> usize {
        let shape = label.shape();
        let next = self.ids.len();
        *self.ids.entry(shape).or_insert(next)
    }
}

/// Prefix trie of observed words, one map of children per node.
struct Trie {
    children: Vec<BTreeMap<usize, usize>>,
}

impl Trie {
    fn new(words: impl Iterator<Item = Vec<usize>>, depth: usize) -> Self {
        let mut children = vec![BTreeMap::new()];
        for word in words {
            let mut node = 0;
            for &symbol in word.iter().take(depth) {
                node = match children[node].get(&symbol) {
                    Some(&child) => child,
                    None => {
                        children.push(BTreeMap::new());
                        let child = children.len() - 1;
                        children[node].insert(symbol, child);
                        child
                    }
                };
            }
        }
        Trie { children }
    }
}

/// State set, remaining depth and trie node.
type CountKey = (Vec<usize>, usize, Option<usize>);

struct LanguageCounter<'a> {
    out: &'a [Vec<(usize, usize)>],
    trie: &'a Trie,
    memo: HashMap<CountKey, (u64, u64)>,
}

impl LanguageCounter<'_> {
    /// `(words, words also observed)` of length at most `depth` readable
    /// from the state set.
    fn count(&mut self, states: &[usize], depth: usize, node: Option<usize>) -> (u64, u64) {
        let observed = u64::from(node.is_some());
        if depth == 0 {
            return (1, observed);
        }
        let key = (states.to_vec(), depth, node);
        if let Some(&hit) = self.memo.get(&key) {
            return hit;
        }
        let mut total = 1u64;
        let mut seen = observed;
        for (symbol, next) in successors(self.out, states) {
            let child = node.and_then(|n| self.trie.children[n].get(&symbol).copied());
            let (t, s) = self.count(&next, depth - 1, child);
            total = total.saturating_add(t);
            seen = seen.saturating_add(s);
        }
        self.memo.insert(key, (total, seen));
        (total, seen)
    }
}

fn successors(out: &[Vec<(usize, usize)>], states: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &q in states {
        for &(symbol, to) in &out[q] {
            groups.entry(symbol).or_default().insert(to);
        }
    }
    groups
        .into_iter()
        .map(|(s, set)| (s, set.into_iter().collect()))
        .collect()
}

/// Scores `a`, which should have been built from `histories` under
/// `recipe`.
pub fn cost_breakdown(
    a: &Automaton,
    histories: &[History],
    recipe: &Recipe,
    cfg: &CostConfig,
) -> CostBreakdown {
    let all_accepted = par::all(histories, cfg.parallelism, |h| {
        accepts(a, &h.events, recipe)
    });

    let mut interner = Interner::default();
    let mut out = vec![Vec::new(); a.state_count()];
    for t in a.transitions() {
        out[t.from].push((interner.id(&t.label), t.to));
    }
    let corpus = abstract_histories(histories, recipe);
    let words: Vec<Vec<usize>> = corpus
        .histories
        .iter()
        .map(|h| h.iter().map(|e| interner.id(e)).collect())
        .collect();
    let trie = Trie::new(words.into_iter(), cfg.k_eval);
    let observed = trie.children.len() as u64;

    let (language, seen) = if cfg.k_eval == 0 {
        (1, 1)
    } else {
        let first: Vec<(usize, Vec<usize>)> =
            successors(&out, &[a.initial()]).into_iter().collect();
        let parts = par::map(&first, cfg.parallelism, |(symbol, next)| {
            let mut counter = LanguageCounter {
                out: &out,
                trie: &trie,
                memo: HashMap::new(),
            };
            let child = trie.children[0].get(symbol).copied();
            counter.count(next, cfg.k_eval - 1, child)
        });
        parts.into_iter().fold((1u64, 1u64), |(t, s), (pt, ps)| {
            (t.saturating_add(pt), s.saturating_add(ps))
        })
    };
    let novel = language - seen;
    let size = a.size();
    let cost = if all_accepted {
        let novelty = novel as f64 / language.max(1) as f64;
        let coverage = (novel as f64 / observed as f64).min(1.0);
        (cfg.w_size * size as f64 + cfg.w_precision * novelty - cfg.w_generality * coverage)
            .max(0.0)
    } else {
        f64::INFINITY
    };
    CostBreakdown {
        size,
        language,
        observed,
        novel,
        all_accepted,
        cost,
    }
}

pub fn compute_cost(
    a: &Automaton,
    histories: &[History],
    recipe: &Recipe,
    cfg: &CostConfig,
) -> f64 {
    cost_breakdown(a, histories, recipe, cfg).cost
}

/// Metropolis acceptance with geometric cooling.
pub fn accept(c_cand: f64, c_lst: f64, step: usize, cfg: &CostConfig, rng: &mut impl Rng) -> bool {
    if c_cand <= c_lst {
        return true;
    }
    if !c_cand.is_finite() {
        return false;
    }
    let p = (-(c_cand - c_lst) / cfg.temperature(step)).exp();
    rng.random::<f64>() < p
}

/// A single recipe edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    SetAbstraction {
        key: FieldKey,
        abstraction: FieldAbstraction,
    },
    AppendMove(Move),
    DeleteMove(usize),
}

pub fn apply_mutation(recipe: &Recipe, mutation: &Mutation) -> Recipe {
    let mut out = recipe.clone();
    match mutation {
        Mutation::SetAbstraction { key, abstraction } => {
            out.set_abstraction(key.clone(), *abstraction)
        }
        Mutation::AppendMove(m) => out.moves.push(m.clone()),
        Mutation::DeleteMove(i) => {
            if *i < out.moves.len() {
                out.moves.remove(*i);
            }
        }
    }
    out
}

/// Draws one applicable mutation uniformly among the five kinds. `keys` are
/// the abstractable field keys of the corpus and `vars` the variables that
/// the recipe currently produces.
pub fn draw_mutation(
    recipe: &Recipe,
    keys: &[FieldKey],
    vars: &[String],
    rng: &mut impl Rng,
) -> Mutation {
    loop {
        match rng.random_range(0..5) {
            0 if !keys.is_empty() => {
                let key = keys[rng.random_range(0..keys.len())].clone();
                let current = recipe.abstraction(&key.signature, key.field);
                let choices: Vec<FieldAbstraction> = FieldAbstraction::ALL
                    .into_iter()
                    .filter(|a| *a != current)
                    .collect();
                let abstraction = choices[rng.random_range(0..choices.len())];
                return Mutation::SetAbstraction { key, abstraction };
            }
            1 => {
                let k = rng.random_range(0..=MAX_MERGE_K);
                return Mutation::AppendMove(Move::MergeSameFuture { k });
            }
            2 => {
                let k = rng.random_range(0..=MAX_MERGE_K);
                return Mutation::AppendMove(Move::MergeSimilarFuture { k });
            }
            3 if vars.len() >= 2 => {
                let i = rng.random_range(0..vars.len());
                let mut j = rng.random_range(0..vars.len() - 1);
                if j >= i {
                    j += 1;
                }
                return Mutation::AppendMove(Move::MergeVars {
                    keep: vars[i].clone(),
                    replace: vars[j].clone(),
                });
            }
            4 if !recipe.moves.is_empty() => {
                return Mutation::DeleteMove(rng.random_range(0..recipe.moves.len()));
            }
            _ => {}
        }
    }
}

pub fn modify_recipe(
    recipe: &Recipe,
    keys: &[FieldKey],
    vars: &[String],
    rng: &mut impl Rng,
) -> Recipe {
    let mutation = draw_mutation(recipe, keys, vars, rng);
    apply_mutation(recipe, &mutation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub cost: f64,
    pub accepted: bool,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TunerTrace {
    pub records: Vec<TraceRecord>,
}

impl TunerTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,cost,accepted,best_cost\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.step, r.cost, r.accepted, r.best_cost);
        }
        out
    }

    pub fn accepted_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let accepted = self.records.iter().filter(|r| r.accepted).count();
        accepted as f64 / self.records.len() as f64
    }

    /// Cost of the first evaluated candidate.
    pub fn initial_cost(&self) -> Option<f64> {
        self.records.first().map(|r| r.cost)
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub automaton: Automaton,
    pub recipe: Recipe,
    pub trace: TunerTrace,
}

/// The automaton after each prefix of a recipe's moves, so that a recipe
/// sharing abstractions and a move prefix with an earlier one only replays
/// the moves after the shared prefix.
struct Chain {
    corpus: Rc<AbstractCorpus>,
    states: Vec<Rc<Automaton>>,
}

impl Chain {
    fn build(histories: &[History], recipe: &Recipe, base: Option<(&Recipe, &Chain)>) -> Chain {
        let shared = base.filter(|(r, _)| r.abstractions() == recipe.abstractions());
        let (corpus, mut states, done) = match shared {
            Some((r, chain)) => {
                let common = r
                    .moves
                    .iter()
                    .zip(&recipe.moves)
                    .take_while(|(a, b)| a == b)
                    .count();
                (
                    chain.corpus.clone(),
                    chain.states[..=common].to_vec(),
                    common,
                )
            }
            None => {
                let corpus = abstract_histories(histories, recipe);
                let tree = build_automaton(&corpus.histories);
                (Rc::new(corpus), vec![Rc::new(tree)], 0)
            }
        };
        for m in &recipe.moves[done..] {
            let current = states.last().expect("chains start with the tree");
            let next = match apply_move(current, m, &corpus.side_table) {
                Some(a) => Rc::new(a),
                None => current.clone(),
            };
            states.push(next);
        }
        Chain { corpus, states }
    }

    fn last(&self) -> &Automaton {
        self.states.last().expect("chains start with the tree")
    }
}

pub fn tune(histories: &[History], cfg: &CostConfig) -> Result<Tuned, TunerError> {
    if histories.is_empty() {
        return Err(TunerError::EmptyCorpus);
    }
    cfg.validate()?;
    let keys: Vec<FieldKey> = field_keys(histories).into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut trace = TunerTrace::default();

    let mut recipe = identity_recipe();
    let (mut r_opt, mut c_opt) = (recipe.clone(), f64::INFINITY);
    let (mut r_lst, mut c_lst) = (recipe.clone(), f64::INFINITY);
    let mut vars_lst: Vec<String> = Vec::new();
    let mut chain_lst = Chain::build(histories, &recipe, None);
    for step in 0..cfg.bound.max(1) {
        let chain = Chain::build(histories, &recipe, Some((&r_lst, &chain_lst)));
        let automaton = chain.last();
        let cost = compute_cost(automaton, histories, &recipe, cfg);
        if cost < c_opt || step == 0 {
            c_opt = cost;
            r_opt = recipe.clone();
        }
        let accepted = accept(cost, c_lst, step, cfg, &mut rng);
        if accepted {
            c_lst = cost;
            vars_lst = automaton.variables().into_iter().collect();
            r_lst = recipe.clone();
            chain_lst = chain;
        }
        log::debug!("step {step}: cost {cost} accepted {accepted} best {c_opt}");
        trace.records.push(TraceRecord {
            step,
            cost,
            accepted,
            best_cost: c_opt,
        });
        recipe = modify_recipe(&r_lst, &keys, &vars_lst, &mut rng);
    }
    let (automaton, _) = apply_recipe(histories, &r_opt);
    Ok(Tuned {
        automaton,
        recipe: r_opt,
        trace,
    })
}
