//! Prefix-tree automata over abstract events, state and variable merges,
//! acceptance under variable bindings, and DOT export.
//!
//! Automata are kept in a canonical form: states are numbered in BFS order
//! from the initial state `0`, visiting outgoing transitions in label order,
//! and no state has two outgoing transitions with equal labels. Every state
//! is accepting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    abstract_histories, pattern, AbstractCorpus, AbstractEvent, AbstractValue, Field, Occurrence,
    PatternEvent, PatternValue, Recipe, SideTable,
};
use crate::sessions::History;
use crate::trace_model::{EventRecord, Scalar};
use crate::union_find::UnionFind;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error("variable {0:?} does not occur in any label")]
    UnknownVariable(String),
    #[error("cannot merge variable {0:?} with itself")]
    SameVariable(String),
}

/// A local rewrite of an automaton.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    MergeSameFuture { k: usize },
    MergeSimilarFuture { k: usize },
    MergeVars { keep: String, replace: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    pub label: AbstractEvent,
    pub to: usize,
    /// Corpus events that traverse this transition.
    pub provenance: BTreeSet<Occurrence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    states: usize,
    /// Sorted by `(from, label)`.
    transitions: Vec<Transition>,
}

impl Automaton {
    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// States plus transitions.
    pub fn size(&self) -> usize {
        self.states + self.transitions.len()
    }

    pub fn outgoing(&self, state: usize) -> &[Transition] {
        let lo = self.transitions.partition_point(|t| t.from < state);
        let hi = self.transitions.partition_point(|t| t.from <= state);
        &self.transitions[lo..hi]
    }

    pub fn step(&self, state: usize, label: &AbstractEvent) -> Option<usize> {
        let out = self.outgoing(state);
        out.binary_search_by(|t| t.label.cmp(label))
            .ok()
            .map(|i| out[i].to)
    }

    /// Variable names occurring in labels.
    pub fn variables(&self) -> BTreeSet<String> {
        self.transitions
            .iter()
            .flat_map(|t| t.label.variables())
            .map(str::to_owned)
            .collect()
    }

    /// `true` when the exact label sequence traces a path from the initial
    /// state.
    pub fn accepts_word(&self, word: &[AbstractEvent]) -> bool {
        let mut state = self.initial();
        for label in word {
            match self.step(state, label) {
                Some(next) => state = next,
                None => return false,
            }
        }
        true
    }

    fn check_state(&self, q: usize) -> Result<(), AutomatonError> {
        if q < self.states {
            Ok(())
        } else {
            Err(AutomatonError::UnknownState(q))
        }
    }

    /// Interned labels and per-state successor lists sorted by label id.
    fn interned(&self) -> Vec<Vec<(usize, usize)>> {
        let ids: BTreeMap<&AbstractEvent, usize> = self
            .transitions
            .iter()
            .map(|t| &t.label)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        let mut out = vec![Vec::new(); self.states];
        for t in &self.transitions {
            out[t.from].push((ids[&t.label], t.to));
        }
        out
    }
}

type RawEdge = (usize, AbstractEvent, usize, BTreeSet<Occurrence>);

/// Quotients `edges` by `uf`, merges targets of equal-labeled edges until
/// the result is deterministic, and renumbers canonically.
fn rebuild(states: usize, initial: usize, edges: Vec<RawEdge>, mut uf: UnionFind) -> Automaton {
    loop {
        let mut changed = false;
        let mut seen: HashMap<(usize, &AbstractEvent), usize> = HashMap::new();
        for (from, label, to, _) in &edges {
            let from = uf.find(*from);
            let to = uf.find(*to);
            match seen.get(&(from, label)) {
                Some(&other) if uf.find(other) != to => {
                    uf.union(other, to);
                    changed = true;
                }
                Some(_) => {}
                None => {
                    seen.insert((from, label), to);
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut merged: BTreeMap<(usize, AbstractEvent), (usize, BTreeSet<Occurrence>)> =
        BTreeMap::new();
    for (from, label, to, prov) in edges {
        let key = (uf.find(from), label);
        let to = uf.find(to);
        merged
            .entry(key)
            .or_insert_with(|| (to, BTreeSet::new()))
            .1
            .extend(prov);
    }

    let mut out: BTreeMap<usize, Vec<(&AbstractEvent, usize)>> = BTreeMap::new();
    for ((from, label), (to, _)) in &merged {
        out.entry(*from).or_default().push((label, *to));
    }
    let root = uf.find(initial.min(states.saturating_sub(1)));
    let mut number: HashMap<usize, usize> = HashMap::new();
    number.insert(root, 0);
    let mut queue = VecDeque::from([root]);
    while let Some(q) = queue.pop_front() {
        for &(_, to) in out.get(&q).map(Vec::as_slice).unwrap_or_default() {
            if !number.contains_key(&to) {
                number.insert(to, number.len());
                queue.push_back(to);
            }
        }
    }

    let mut transitions: Vec<Transition> = merged
        .into_iter()
        .filter_map(|((from, label), (to, provenance))| {
            Some(Transition {
                from: *number.get(&from)?,
                label,
                to: number[&to],
                provenance,
            })
        })
        .collect();
    transitions.sort_by(|a, b| (a.from, &a.label).cmp(&(b.from, &b.label)));
    Automaton {
        states: number.len().max(1),
        transitions,
    }
}

fn raw_edges(a: &Automaton) -> Vec<RawEdge> {
    a.transitions
        .iter()
        .map(|t| (t.from, t.label.clone(), t.to, t.provenance.clone()))
        .collect()
}

fn quotient(a: &Automaton, uf: UnionFind) -> Automaton {
    rebuild(a.states, a.initial(), raw_edges(a), uf)
}

/// The prefix-tree acceptor of `histories`. Event `j` of history `i` is
/// recorded as occurrence `(i, j)`.
pub fn build_automaton(histories: &[Vec<AbstractEvent>]) -> Automaton {
    let mut children: BTreeMap<(usize, AbstractEvent), usize> = BTreeMap::new();
    let mut provenance: BTreeMap<(usize, AbstractEvent), BTreeSet<Occurrence>> = BTreeMap::new();
    let mut states = 1;
    for (h, history) in histories.iter().enumerate() {
        let mut state = 0;
        for (p, event) in history.iter().enumerate() {
            let key = (state, event.clone());
            let next = *children.entry(key.clone()).or_insert_with(|| {
                states += 1;
                states - 1
            });
            provenance
                .entry(key)
                .or_default()
                .insert(Occurrence::new(h, p));
            state = next;
        }
    }
    let edges = children
        .into_iter()
        .map(|((from, label), to)| {
            let prov = provenance
                .remove(&(from, label.clone()))
                .unwrap_or_default();
            (from, label, to, prov)
        })
        .collect();
    rebuild(states, 0, edges, UnionFind::new(states))
}

/// Abstracts `histories` under the recipe's abstractions, builds the
/// prefix tree and applies the recipe's moves.
pub fn apply_recipe(histories: &[History], recipe: &Recipe) -> (Automaton, AbstractCorpus) {
    let corpus = abstract_histories(histories, recipe);
    let tree = build_automaton(&corpus.histories);
    let automaton = apply_moves(&tree, &recipe.moves, &corpus.side_table);
    (automaton, corpus)
}

/// Every label sequence of length at most `k` readable from `q`, including
/// the empty one.
pub fn bounded_language(
    a: &Automaton,
    q: usize,
    k: usize,
) -> Result<BTreeSet<Vec<AbstractEvent>>, AutomatonError> {
    a.check_state(q)?;
    let mut words = BTreeSet::new();
    let mut stack = vec![(q, Vec::new())];
    while let Some((state, word)) = stack.pop() {
        if word.len() < k {
            for t in a.outgoing(state) {
                let mut next = word.clone();
                next.push(t.label.clone());
                stack.push((t.to, next));
            }
        }
        words.insert(word);
    }
    Ok(words)
}

/// Merges states whose `k`-bounded futures coincide.
pub fn merge_same_future(a: &Automaton, k: usize) -> Automaton {
    match same_future_classes(a, k) {
        Some(uf) => quotient(a, uf),
        None => a.clone(),
    }
}

/// The partition by `k`-bounded future, or `None` when every class is a
/// singleton.
fn same_future_classes(a: &Automaton, k: usize) -> Option<UnionFind> {
    let out = a.interned();
    let mut class = vec![0usize; a.states];
    let mut classes = 1;
    for _ in 0..k {
        if classes == a.states {
            return None;
        }
        let mut ids: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
        let next: Vec<usize> = (0..a.states)
            .map(|q| {
                let signature: Vec<(usize, usize)> =
                    out[q].iter().map(|&(l, to)| (l, class[to])).collect();
                let fresh = ids.len();
                *ids.entry(signature).or_insert(fresh)
            })
            .collect();
        let stable = ids.len() == classes;
        class = next;
        classes = ids.len();
        if stable {
            break;
        }
    }
    if classes == a.states {
        return None;
    }
    let mut uf = UnionFind::new(a.states);
    let mut first: HashMap<usize, usize> = HashMap::new();
    for (q, c) in class.into_iter().enumerate() {
        match first.get(&c) {
            Some(&r) => {
                uf.union(r, q);
            }
            None => {
                first.insert(c, q);
            }
        }
    }
    Some(uf)
}

/// `sub[q][r]` holds when the `k`-bounded future of `q` is contained in
/// that of `r`.
fn subset_relation(a: &Automaton, k: usize) -> Vec<Vec<bool>> {
    let out = a.interned();
    let n = a.states;
    let mut sub = vec![vec![true; n]; n];
    for _ in 0..k {
        let next: Vec<Vec<bool>> = (0..n)
            .map(|q| {
                (0..n)
                    .map(|r| {
                        out[q].iter().all(|&(l, q2)| {
                            out[r]
                                .binary_search_by_key(&l, |&(l2, _)| l2)
                                .map(|i| sub[q2][out[r][i].1])
                                .unwrap_or(false)
                        })
                    })
                    .collect()
            })
            .collect();
        let stable = next == sub;
        sub = next;
        if stable {
            break;
        }
    }
    sub
}

/// Repeatedly merges the first pair of states (in canonical order) where
/// one `k`-bounded future strictly contains the other, until no such pair
/// remains.
pub fn merge_similar_future(a: &Automaton, k: usize) -> Automaton {
    similar_future_fold(a, k).unwrap_or_else(|| a.clone())
}

fn similar_future_fold(a: &Automaton, k: usize) -> Option<Automaton> {
    let mut current: Option<Automaton> = None;
    loop {
        let at = current.as_ref().unwrap_or(a);
        let sub = subset_relation(at, k);
        let n = at.states;
        let pair = (0..n)
            .flat_map(|q| (q + 1..n).map(move |r| (q, r)))
            .find(|&(q, r)| sub[q][r] != sub[r][q]);
        let Some((q, r)) = pair else {
            return current;
        };
        let mut uf = UnionFind::new(n);
        uf.union(q, r);
        current = Some(quotient(at, uf));
    }
}

/// Renames `replace` to `keep` and recomputes which occurrences of `keep`
/// are fresh by replaying every corpus history along its provenance path.
/// Transitions whose occurrences disagree on freshness are split.
pub fn merge_vars(
    a: &Automaton,
    keep: &str,
    replace: &str,
    side_table: &SideTable,
) -> Result<Automaton, AutomatonError> {
    if keep == replace {
        return Err(AutomatonError::SameVariable(keep.to_owned()));
    }
    let vars = a.variables();
    for v in [keep, replace] {
        if !vars.contains(v) {
            return Err(AutomatonError::UnknownVariable(v.to_owned()));
        }
    }

    let renamed: Vec<AbstractEvent> = a
        .transitions
        .iter()
        .map(|t| {
            let mut label = t.label.clone();
            for (_, v) in label.slots_mut() {
                if let AbstractValue::Var { name, .. } = v {
                    if name == replace {
                        *name = keep.to_owned();
                    }
                }
            }
            label
        })
        .collect();

    let mut path: BTreeMap<Occurrence, usize> = BTreeMap::new();
    for (i, t) in a.transitions.iter().enumerate() {
        for occ in &t.provenance {
            path.insert(*occ, i);
        }
    }

    let mut fresh_marks: HashMap<Occurrence, Vec<bool>> = HashMap::new();
    let mut binding: Option<&Scalar> = None;
    let mut history = usize::MAX;
    for (occ, &t) in &path {
        if occ.history != history {
            history = occ.history;
            binding = None;
        }
        let marks = renamed[t]
            .slots()
            .map(|(field, v)| match v {
                AbstractValue::Var { name, fresh } if name == keep => {
                    match side_table.value(*occ, field) {
                        Some(value) => {
                            let is_fresh = binding.is_some_and(|b| b != value);
                            binding = Some(value);
                            is_fresh
                        }
                        None => *fresh,
                    }
                }
                _ => false,
            })
            .collect();
        fresh_marks.insert(*occ, marks);
    }

    let mut edges = Vec::new();
    for (t, label) in a.transitions.iter().zip(&renamed) {
        let mut groups: BTreeMap<AbstractEvent, BTreeSet<Occurrence>> = BTreeMap::new();
        for occ in &t.provenance {
            groups
                .entry(with_fresh(label, keep, &fresh_marks[occ]))
                .or_default()
                .insert(*occ);
        }
        if groups.is_empty() {
            groups.insert(label.clone(), BTreeSet::new());
        }
        for (label, prov) in groups {
            edges.push((t.from, label, t.to, prov));
        }
    }
    Ok(rebuild(
        a.states,
        a.initial(),
        edges,
        UnionFind::new(a.states),
    ))
}

fn with_fresh(label: &AbstractEvent, var: &str, marks: &[bool]) -> AbstractEvent {
    let mut out = label.clone();
    for ((_, v), &mark) in out.slots_mut().zip(marks) {
        if let AbstractValue::Var { name, fresh } = v {
            if name == var {
                *fresh = mark;
            }
        }
    }
    out
}

/// Folds `moves` left to right. Variable merges that no longer apply are
/// skipped.
pub fn apply_moves(a: &Automaton, moves: &[Move], side_table: &SideTable) -> Automaton {
    let mut current = a.clone();
    for m in moves {
        if let Some(next) = apply_move(&current, m, side_table) {
            current = next;
        }
    }
    current
}

/// One move of a recipe, or `None` when it leaves `a` unchanged. A variable
/// merge naming a variable that no longer occurs is skipped with a warning.
pub fn apply_move(a: &Automaton, m: &Move, side_table: &SideTable) -> Option<Automaton> {
    match m {
        Move::MergeSameFuture { k } => same_future_classes(a, *k).map(|uf| quotient(a, uf)),
        Move::MergeSimilarFuture { k } => similar_future_fold(a, *k),
        Move::MergeVars { keep, replace } => match merge_vars(a, keep, replace, side_table) {
            Ok(next) => Some(next),
            Err(e) => {
                log::warn!("skipping variable merge: {e}");
                None
            }
        },
    }
}

type Env = BTreeMap<String, Scalar>;

fn match_label(label: &AbstractEvent, event: &PatternEvent, env: &Env) -> Option<Env> {
    if label.status != event.status || label.inputs.len() + 5 != event.slots.len() {
        return None;
    }
    let mut env = env.clone();
    for ((_, lv), pv) in label.slots().zip(&event.slots) {
        let concrete = match pv {
            PatternValue::Concrete(v) | PatternValue::Hole(v) => Some(v),
            PatternValue::Top => None,
        };
        match lv {
            AbstractValue::Top => {}
            AbstractValue::Concrete(c) => {
                if concrete != Some(c) {
                    return None;
                }
            }
            AbstractValue::Var { name, fresh } => {
                let value = concrete?;
                match env.get(name) {
                    Some(bound) if *fresh && bound == value => return None,
                    Some(bound) if !*fresh && bound != value => return None,
                    _ => {}
                }
                env.insert(name.clone(), value.clone());
            }
        }
    }
    Some(env)
}

/// `true` when the concrete history, abstracted per `recipe`, traces a path
/// from the initial state under variable-binding semantics.
pub fn accepts(a: &Automaton, history: &[EventRecord], recipe: &Recipe) -> bool {
    let events: Vec<PatternEvent> = history.iter().map(|e| pattern(e, recipe)).collect();
    let mut failed = HashSet::new();
    search(a, &events, a.initial(), 0, &Env::new(), &mut failed)
}

fn search(
    a: &Automaton,
    events: &[PatternEvent],
    state: usize,
    pos: usize,
    env: &Env,
    failed: &mut HashSet<(usize, usize, Env)>,
) -> bool {
    if pos == events.len() {
        return true;
    }
    if failed.contains(&(state, pos, env.clone())) {
        return false;
    }
    for t in a.outgoing(state) {
        if let Some(next) = match_label(&t.label, &events[pos], env) {
            if search(a, events, t.to, pos + 1, &next, failed) {
                return true;
            }
        }
    }
    failed.insert((state, pos, env.clone()));
    false
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn field_rows(label: &AbstractEvent) -> String {
    let mut rows = String::new();
    for (field, value) in label.slots() {
        if *value == AbstractValue::Top {
            continue;
        }
        let _ = write!(
            rows,
            "<tr><td>{}</td><td>{}</td></tr>",
            escape(&field.to_string()),
            escape(&value.to_string())
        );
    }
    let _ = write!(
        rows,
        "<tr><td>{}</td><td>{}</td></tr>",
        Field::Status,
        label.status
    );
    rows
}

/// Graphviz rendering with one field table per transition label.
pub fn to_dot(a: &Automaton) -> String {
    let mut dot = String::from("digraph automaton {\n  rankdir=LR;\n  node [shape=circle];\n");
    for q in 0..a.states {
        if q == a.initial() {
            let _ = writeln!(dot, "  {q} [penwidth=2];");
        } else {
            let _ = writeln!(dot, "  {q};");
        }
    }
    for t in &a.transitions {
        let _ = writeln!(
            dot,
            "  {} -> {} [label=<<table border=\"0\" cellborder=\"1\" cellspacing=\"0\">{}</table>>];",
            t.from,
            t.to,
            field_rows(&t.label)
        );
    }
    dot.push_str("}\n");
    dot
}
