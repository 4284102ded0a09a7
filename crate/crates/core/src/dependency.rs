//! Read/write effects, the strong/weak dependency graph, and filtering of
//! transactions unrelated to the seed.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::par::{self, Parallelism};
use crate::trace_model::{AccessMode, Location, TraceLedger, TransactionRecord};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DependencyError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

/// `reads` holds locations whose first access is a read; neither set holds
/// balance locations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EffectSets {
    pub reads: BTreeSet<Location>,
    pub writes: BTreeSet<Location>,
}

/// Writes of reverted transactions are dropped; their reads are kept.
pub fn effects(tx: &TransactionRecord) -> EffectSets {
    let reverted = tx.reverted();
    let mut seen: BTreeSet<&Location> = BTreeSet::new();
    let mut out = EffectSets::default();
    for access in &tx.accesses {
        if access.location.is_balance() {
            continue;
        }
        let first = seen.insert(&access.location);
        match access.mode {
            AccessMode::Read if first => {
                out.reads.insert(access.location.clone());
            }
            AccessMode::Write if !reverted => {
                out.writes.insert(access.location.clone());
            }
            _ => {}
        }
    }
    out
}

pub fn effects_all(ledger: &TraceLedger, mode: Parallelism) -> Vec<EffectSets> {
    par::map(ledger.transactions(), mode, effects)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub ghost: bool,
    pub label: String,
}

/// Nodes are indexed by blockchain position; every edge points forward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<Edge>,
    index: HashMap<String, usize>,
}

impl DependencyGraph {
    fn from_parts(nodes: Vec<Node>, edges: BTreeSet<Edge>) -> Self {
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        Self {
            nodes,
            edges,
            index,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, DependencyError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| DependencyError::UnknownNode(id.to_owned()))
    }

    pub fn id(&self, index: usize) -> &str {
        &self.nodes[index].id
    }

    pub fn has_edge(&self, from: &str, to: &str, kind: EdgeKind) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&from), Some(&to)) => self.edges.contains(&Edge { from, to, kind }),
            _ => false,
        }
    }

    /// Successor lists; `strong_only` restricts to strong edges.
    pub fn successors(&self, strong_only: bool) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if !strong_only || e.kind == EdgeKind::Strong {
                out[e.from].push(e.to);
            }
        }
        out
    }

    fn strong_predecessors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Strong) {
            out[e.to].push(e.from);
        }
        out
    }

    /// Indices reachable from `from` over one or more strong edges.
    pub fn strong_reachable_from(&self, from: usize) -> BTreeSet<usize> {
        reach(&self.successors(true), from)
    }

    /// Indices that reach `to` over one or more strong edges.
    pub fn strong_ancestors(&self, to: usize) -> BTreeSet<usize> {
        reach(&self.strong_predecessors(), to)
    }

    fn restrict(&self, keep: &BTreeSet<usize>) -> DependencyGraph {
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let nodes = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|e| {
                Some(Edge {
                    from: *remap.get(&e.from)?,
                    to: *remap.get(&e.to)?,
                    kind: e.kind,
                })
            })
            .collect();
        DependencyGraph::from_parts(nodes, edges)
    }

    /// DOT rendering. Edges implied by a longer path are left out of the
    /// picture; the graph itself keeps them.
    pub fn to_dot(&self) -> String {
        let succ = self.successors(false);
        let mut out = String::from("digraph dependencies {\n  node [shape=box];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let shape = if node.ghost { ", style=dashed" } else { "" };
            let _ = writeln!(out, "  n{i} [label=\"{}\"{shape}];", escape(&node.label));
        }
        let mut drawn: BTreeSet<(usize, usize)> = BTreeSet::new();
        for e in &self.edges {
            if !drawn.insert((e.from, e.to)) {
                continue;
            }
            if reachable_avoiding_direct(&succ, e.from, e.to) {
                continue;
            }
            let strong = self.edges.contains(&Edge {
                from: e.from,
                to: e.to,
                kind: EdgeKind::Strong,
            });
            let style = if strong { "" } else { " [style=dashed]" };
            let _ = writeln!(out, "  n{} -> n{}{style};", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn reach(adjacency: &[Vec<usize>], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<usize> = adjacency[start].iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if seen.insert(n) {
            queue.extend(adjacency[n].iter().copied());
        }
    }
    seen
}

/// Whether `to` is reachable from `from` through a path of length >= 2.
fn reachable_avoiding_direct(succ: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<usize> = succ[from].iter().copied().filter(|&n| n != to).collect();
    while let Some(n) = queue.pop_front() {
        if n == to {
            return true;
        }
        if n < to && seen.insert(n) {
            queue.extend(succ[n].iter().copied());
        }
    }
    false
}

#[derive(Default)]
struct LocationState {
    last_writer: Option<usize>,
    /// Readers not separated from the pending write by another writer.
    readers: Vec<usize>,
}

/// Builds the dependency graph of a ghosted ledger with a single forward
/// pass and a per-location last-writer index.
pub fn build_graph(ledger: &TraceLedger) -> DependencyGraph {
    build_graph_with(ledger, Parallelism::default())
}

pub fn build_graph_with(ledger: &TraceLedger, mode: Parallelism) -> DependencyGraph {
    let effects = effects_all(ledger, mode);
    let nodes = ledger
        .transactions()
        .iter()
        .map(|t| Node {
            id: t.id.clone(),
            ghost: t.ghost,
            label: t.label(),
        })
        .collect();
    let mut state: HashMap<&Location, LocationState> = HashMap::new();
    let mut strong: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut weak: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (j, fx) in effects.iter().enumerate() {
        for loc in &fx.reads {
            let entry = state.entry(loc).or_default();
            if let Some(i) = entry.last_writer {
                strong.insert((i, j));
            }
            entry.readers.push(j);
        }
        for loc in &fx.writes {
            let entry = state.entry(loc).or_default();
            if let Some(i) = entry.last_writer {
                weak.insert((i, j));
            }
            for &i in &entry.readers {
                if i != j {
                    weak.insert((i, j));
                }
            }
            entry.readers.clear();
            if fx.reads.contains(loc) {
                entry.readers.push(j);
            }
            entry.last_writer = Some(j);
        }
    }
    let mut edges: BTreeSet<Edge> = strong
        .iter()
        .map(|&(from, to)| Edge {
            from,
            to,
            kind: EdgeKind::Strong,
        })
        .collect();
    edges.extend(
        weak.iter()
            .filter(|pair| !strong.contains(pair))
            .map(|&(from, to)| Edge {
                from,
                to,
                kind: EdgeKind::Weak,
            }),
    );
    DependencyGraph::from_parts(nodes, edges)
}

/// Ids reachable from `from` over one or more strong edges.
pub fn strong_reachable(
    graph: &DependencyGraph,
    from: &str,
) -> Result<BTreeSet<String>, DependencyError> {
    let start = graph.index_of(from)?;
    Ok(graph
        .strong_reachable_from(start)
        .into_iter()
        .map(|i| graph.id(i).to_owned())
        .collect())
}

/// Keeps the seed, every node strongly reachable from it, and every node
/// that strongly reaches a node the seed strongly reaches and is reachable
/// from the seed along a path with at least one weak edge. Such paths only
/// pass through nodes that are kept themselves.
pub fn filter_graph(
    graph: &DependencyGraph,
    seed: &str,
) -> Result<DependencyGraph, DependencyError> {
    let seed = graph.index_of(seed)?;
    let strong_from_seed = graph.strong_reachable_from(seed);
    let mut out_edges = vec![Vec::new(); graph.len()];
    for e in &graph.edges {
        out_edges[e.from].push((e.to, e.kind == EdgeKind::Weak));
    }

    // Nodes that strongly reach some node in strong_from_seed.
    let preds = graph.strong_predecessors();
    let mut feeds = vec![false; graph.len()];
    let mut queue: VecDeque<usize> = strong_from_seed.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        for &p in &preds[n] {
            if !feeds[p] {
                feeds[p] = true;
                queue.push_back(p);
            }
        }
    }
    let candidate: Vec<bool> = (0..graph.len())
        .map(|n| n == seed || feeds[n] || strong_from_seed.contains(&n))
        .collect();

    // Paths from the seed through candidates, tracking whether a weak edge
    // has been used.
    let mut visited = vec![[false; 2]; graph.len()];
    let mut queue = VecDeque::from([(seed, false)]);
    while let Some((n, used_weak)) = queue.pop_front() {
        for &(m, weak) in &out_edges[n] {
            let next = used_weak || weak;
            if candidate[m] && !visited[m][next as usize] {
                visited[m][next as usize] = true;
                queue.push_back((m, next));
            }
        }
    }
    let weakly: Vec<bool> = visited.iter().map(|v| v[1]).collect();

    let keep: BTreeSet<usize> = (0..graph.len())
        .filter(|&n| n == seed || strong_from_seed.contains(&n) || (weakly[n] && feeds[n]))
        .collect();
    Ok(graph.restrict(&keep))
}
