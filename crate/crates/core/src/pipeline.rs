//! History mining end to end: ghosts, seed slice, dependency graph,
//! filtering, sessions and histories.

use thiserror::Error;

use crate::dependency::{build_graph_with, filter_graph, DependencyError, DependencyGraph};
use crate::par::Parallelism;
use crate::sessions::{all_sessions, histories, History, Session, SessionError, SessionSet};
use crate::trace_model::{TraceError, TraceLedger};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Dependency(#[from] DependencyError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("the trace contains no transactions")]
    EmptyTrace,
}

#[derive(Debug, Clone)]
pub struct MiningOptions {
    /// Overrides the trace's own seed; the first transaction is used when
    /// neither is set.
    pub seed: Option<String>,
    pub ordering_cap: usize,
    pub parallelism: Parallelism,
}

impl Default for MiningOptions {
    fn default() -> Self {
        Self {
            seed: None,
            ordering_cap: crate::sessions::DEFAULT_ORDERING_CAP,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mined {
    pub seed: String,
    /// The seed slice with ghost transactions.
    pub ledger: TraceLedger,
    pub graph: DependencyGraph,
    pub filtered: DependencyGraph,
    pub session_sets: Vec<SessionSet>,
    pub histories: Vec<History>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningSummary {
    pub transactions: usize,
    pub finals: usize,
    pub sessions: usize,
    pub histories: usize,
    pub average_length: f64,
    pub truncated: bool,
}

impl Mined {
    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.session_sets.iter().flat_map(|s| &s.sessions)
    }

    pub fn summary(&self) -> MiningSummary {
        let events: usize = self.histories.iter().map(|h| h.events.len()).sum();
        MiningSummary {
            transactions: self
                .ledger
                .transactions()
                .iter()
                .filter(|t| !t.ghost)
                .count(),
            finals: self.session_sets.len(),
            sessions: self.sessions().count(),
            histories: self.histories.len(),
            average_length: if self.histories.is_empty() {
                0.0
            } else {
                events as f64 / self.histories.len() as f64
            },
            truncated: self.session_sets.iter().any(|s| s.truncated),
        }
    }
}

pub fn mine(ledger: &TraceLedger, options: &MiningOptions) -> Result<Mined, PipelineError> {
    let seed = options
        .seed
        .clone()
        .or_else(|| ledger.seed_id().map(str::to_owned))
        .or_else(|| {
            ledger
                .transactions()
                .iter()
                .find(|t| !t.ghost)
                .map(|t| t.id.clone())
        })
        .ok_or(PipelineError::EmptyTrace)?;
    let ghosted = if ledger.has_ghosts() {
        ledger.clone()
    } else {
        ledger.insert_ghosts()?
    };
    let slice = ghosted.slice_from_seed(&seed)?;
    let graph = build_graph_with(&slice, options.parallelism);
    let filtered = filter_graph(&graph, &seed)?;
    let session_sets = all_sessions(&filtered, options.ordering_cap, options.parallelism)?;
    let sessions: Vec<Session> = session_sets
        .iter()
        .flat_map(|s| s.sessions.iter().cloned())
        .collect();
    let histories = histories(&slice, &sessions)?;
    log::info!(
        "mined {} histories from {} finals",
        histories.len(),
        session_sets.len()
    );
    Ok(Mined {
        seed,
        ledger: slice,
        graph,
        filtered,
        session_sets,
        histories,
    })
}
