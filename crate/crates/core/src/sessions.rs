//! Sessions and histories.
//!
//! A session collects every transaction that strongly reaches a final
//! transaction (a sink with respect to strong edges). Its member sequences
//! are the topological orderings admitted by the filtered graph; a history
//! is a session with each transaction replaced by its events.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::dependency::{DependencyError, DependencyGraph, EdgeKind};
use crate::par::{self, Parallelism};
use crate::trace_model::{EventRecord, TraceLedger};

pub const DEFAULT_ORDERING_CAP: usize = 16;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Dependency(#[from] DependencyError),
    #[error("ordering constraints of session {0:?} contain a cycle")]
    CycleDetected(String),
    #[error("unknown transaction {0:?}")]
    UnknownTransaction(String),
    #[error("malformed history on line {line}: {reason}")]
    MalformedHistory { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub final_id: String,
    /// Transaction ids in one admissible order.
    pub members: Vec<String>,
    /// Index of this ordering among those enumerated for `final_id`.
    pub ordering: usize,
}

/// All enumerated orderings for one final transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSet {
    pub final_id: String,
    pub sessions: Vec<Session>,
    /// More orderings exist beyond the cap.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub events: Vec<EventRecord>,
    /// `(final transaction, ordering index)` of the first session that
    /// produced this event sequence.
    pub origin: (String, usize),
}

/// Nodes without an outgoing strong edge, in blockchain order.
pub fn final_transactions(graph: &DependencyGraph) -> Vec<String> {
    let mut has_strong_out = vec![false; graph.len()];
    for e in graph.edges() {
        if e.kind == EdgeKind::Strong {
            has_strong_out[e.from] = true;
        }
    }
    (0..graph.len())
        .filter(|&i| !has_strong_out[i])
        .map(|i| graph.id(i).to_owned())
        .collect()
}

/// Enumerates the orderings of the session of `final_id` in lexicographic
/// order of blockchain positions, stopping after `cap` of them.
///
/// Two members are ordered whenever a strong or weak path joins them in the
/// filtered graph, including paths through transactions outside the session.
pub fn sessions_for(
    graph: &DependencyGraph,
    final_id: &str,
    cap: usize,
) -> Result<SessionSet, SessionError> {
    let final_index = graph.index_of(final_id)?;
    let mut members = graph.strong_ancestors(final_index);
    members.insert(final_index);
    let members: Vec<usize> = members.into_iter().collect();

    let succ = graph.successors(false);
    let member_set: HashSet<usize> = members.iter().copied().collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    let slot = |node: usize| members.binary_search(&node).ok();
    for (i, &m) in members.iter().enumerate() {
        for reached in reachable(&succ, m) {
            if member_set.contains(&reached) {
                let j = slot(reached).expect("member");
                preds[j].push(i);
            }
        }
    }

    let mut orderings = Vec::new();
    let mut placed = vec![false; members.len()];
    let mut current = Vec::with_capacity(members.len());
    let complete = enumerate(
        &preds,
        &mut placed,
        &mut current,
        &mut orderings,
        cap.saturating_add(1),
    );
    if !complete {
        return Err(SessionError::CycleDetected(final_id.to_owned()));
    }
    let truncated = orderings.len() > cap;
    orderings.truncate(cap);
    let sessions = orderings
        .into_iter()
        .enumerate()
        .map(|(ordering, order)| Session {
            final_id: final_id.to_owned(),
            members: order
                .into_iter()
                .map(|i| graph.id(members[i]).to_owned())
                .collect(),
            ordering,
        })
        .collect();
    Ok(SessionSet {
        final_id: final_id.to_owned(),
        sessions,
        truncated,
    })
}

fn reachable(succ: &[Vec<usize>], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<usize> = succ[start].iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if seen.insert(n) {
            queue.extend(succ[n].iter().copied());
        }
    }
    seen
}

/// Backtracking enumeration of topological orders. Returns `false` when the
/// constraints admit no complete order.
fn enumerate(
    preds: &[Vec<usize>],
    placed: &mut [bool],
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    limit: usize,
) -> bool {
    if current.len() == preds.len() {
        out.push(current.clone());
        return true;
    }
    let mut any = false;
    for i in 0..preds.len() {
        if out.len() >= limit {
            return true;
        }
        if placed[i] || preds[i].iter().any(|&p| !placed[p]) {
            continue;
        }
        placed[i] = true;
        current.push(i);
        any |= enumerate(preds, placed, current, out, limit);
        current.pop();
        placed[i] = false;
    }
    any
}

/// Sessions for every final transaction, computed independently.
pub fn all_sessions(
    graph: &DependencyGraph,
    cap: usize,
    mode: Parallelism,
) -> Result<Vec<SessionSet>, SessionError> {
    let finals = final_transactions(graph);
    par::map(&finals, mode, |f| sessions_for(graph, f, cap))
        .into_iter()
        .collect()
}

/// Concatenates member events in session order and drops duplicate event
/// sequences, keeping the first occurrence.
pub fn histories(ledger: &TraceLedger, sessions: &[Session]) -> Result<Vec<History>, SessionError> {
    let mut seen: HashSet<Vec<EventRecord>> = HashSet::new();
    let mut out = Vec::new();
    for session in sessions {
        let mut events = Vec::new();
        for id in &session.members {
            let tx = ledger
                .get(id)
                .ok_or_else(|| SessionError::UnknownTransaction(id.clone()))?;
            events.extend(tx.events.iter().cloned());
        }
        if seen.insert(events.clone()) {
            out.push(History {
                events,
                origin: (session.final_id.clone(), session.ordering),
            });
        }
    }
    Ok(out)
}

/// One JSON array of events per line.
pub fn write_histories(histories: &[History], mut out: impl Write) -> Result<(), SessionError> {
    for h in histories {
        let line = serde_json::to_string(&h.events).expect("events always serialize");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a histories file. Origins are not stored in the file; each history
/// gets `("", line index)`.
pub fn parse_histories(input: impl BufRead) -> Result<Vec<History>, SessionError> {
    let mut out = Vec::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let events: Vec<EventRecord> =
            serde_json::from_str(&line).map_err(|e| SessionError::MalformedHistory {
                line: index + 1,
                reason: e.to_string(),
            })?;
        if events.iter().any(|e| e.signature.is_empty()) {
            return Err(SessionError::MalformedHistory {
                line: index + 1,
                reason: "empty signature".into(),
            });
        }
        out.push(History {
            events,
            origin: (String::new(), out.len()),
        });
    }
    Ok(out)
}
