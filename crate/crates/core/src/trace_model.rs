//! Trace data model: locations, access logs, invocation events, transactions
//! and the ledger that orders them, plus the line-delimited JSON trace format.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Block attributes written by every ghost transaction.
pub const BLOCK_ATTRIBUTES: [&str; 2] = ["block.number", "block.timestamp"];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate transaction id {0:?}")]
    DuplicateTransactionId(String),
    #[error(
        "block number {found} of transaction {id:?} precedes its predecessor's block {previous}"
    )]
    NonMonotonicBlockNumber {
        id: String,
        previous: u64,
        found: u64,
    },
    #[error("ledger already contains ghost transactions")]
    AlreadyGhosted,
    #[error("ghost id {0:?} collides with an existing transaction id")]
    GhostIdConflict(String),
    #[error("unknown seed transaction {0:?}")]
    UnknownSeed(String),
    #[error("invalid transaction {id:?}: {reason}")]
    InvalidTransaction { id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocationKind {
    Storage,
    BlockAttribute,
    Balance,
}

impl LocationKind {
    fn tag(self) -> &'static str {
        match self {
            LocationKind::Storage => "storage",
            LocationKind::BlockAttribute => "block",
            LocationKind::Balance => "balance",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "storage" => Some(LocationKind::Storage),
            "block" => Some(LocationKind::BlockAttribute),
            "balance" => Some(LocationKind::Balance),
            _ => None,
        }
    }
}

/// A named piece of persistent state, e.g. `A.games[1].hA` or `block.number`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub kind: LocationKind,
    pub name: String,
}

impl Location {
    pub fn new(kind: LocationKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
        }
    }

    pub fn storage(name: impl Into<String>) -> Self {
        Self::new(LocationKind::Storage, name)
    }

    pub fn block(name: impl Into<String>) -> Self {
        Self::new(LocationKind::BlockAttribute, name)
    }

    pub fn balance(name: impl Into<String>) -> Self {
        Self::new(LocationKind::Balance, name)
    }

    pub fn is_balance(&self) -> bool {
        self.kind == LocationKind::Balance
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRecord {
    pub mode: AccessMode,
    pub location: Location,
    /// Position within the transaction's execution.
    pub ordinal: usize,
}

/// A scalar event argument: either an integer or an account/string id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Str(String),
}

impl Scalar {
    pub fn str(s: impl Into<String>) -> Self {
        Scalar::Str(s.into())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Str(v.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "ok")]
    Success,
    #[serde(rename = "error")]
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Success => "ok",
            Status::Error => "error",
        })
    }
}

/// One contract invocation observed during a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub caller: String,
    pub callee: String,
    #[serde(rename = "sig")]
    pub signature: String,
    #[serde(rename = "in", default)]
    pub inputs: Vec<Scalar>,
    #[serde(rename = "out", default)]
    pub output: Option<Scalar>,
    #[serde(default)]
    pub value: u64,
    pub status: Status,
}

impl EventRecord {
    fn validate(&self) -> Result<(), String> {
        if self.signature.is_empty() {
            return Err("empty signature".into());
        }
        if self.status == Status::Error && self.output.is_some() {
            return Err("error event carries an output".into());
        }
        if self.value > i64::MAX as u64 {
            return Err("value out of range".into());
        }
        Ok(())
    }

    /// `signature(arg, ...)`, the rendering used in dependency graph labels.
    pub fn call_string(&self) -> String {
        let args: Vec<String> = self.inputs.iter().map(|v| v.to_string()).collect();
        format!("{}({})", self.signature, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecord {
    pub id: String,
    pub block_number: u64,
    pub ghost: bool,
    pub accesses: Vec<AccessRecord>,
    pub events: Vec<EventRecord>,
}

impl TransactionRecord {
    /// Builds a non-ghost transaction, numbering accesses by position.
    pub fn new(
        id: impl Into<String>,
        block_number: u64,
        accesses: impl IntoIterator<Item = (AccessMode, Location)>,
        events: Vec<EventRecord>,
    ) -> Self {
        Self {
            id: id.into(),
            block_number,
            ghost: false,
            accesses: number_accesses(accesses),
            events,
        }
    }

    pub fn ghost(block_number: u64) -> Self {
        Self {
            id: ghost_id(block_number),
            block_number,
            ghost: true,
            accesses: number_accesses(
                BLOCK_ATTRIBUTES
                    .iter()
                    .map(|name| (AccessMode::Write, Location::block(*name))),
            ),
            events: Vec::new(),
        }
    }

    /// A transaction is reverted when its top-level invocation failed.
    pub fn reverted(&self) -> bool {
        self.events
            .first()
            .is_some_and(|e| e.status == Status::Error)
    }

    /// Short label for graph output: `id: signature(args)` or the ghost id.
    pub fn label(&self) -> String {
        match self.events.first() {
            Some(event) if !self.ghost => format!("{}: {}", self.id, event.call_string()),
            _ => self.id.clone(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        for pair in self.accesses.windows(2) {
            if pair[1].ordinal <= pair[0].ordinal {
                return Err("access ordinals must be strictly increasing".into());
            }
        }
        if self.accesses.iter().any(|a| a.location.name.is_empty()) {
            return Err("empty location name".into());
        }
        if self.ghost {
            if !self.events.is_empty() {
                return Err("ghost transaction with events".into());
            }
            let ok = self.accesses.iter().all(|a| {
                a.mode == AccessMode::Write && a.location.kind == LocationKind::BlockAttribute
            });
            if !ok {
                return Err("ghost transaction accesses must be block attribute writes".into());
            }
        } else if self.events.is_empty() {
            return Err("transaction without events".into());
        }
        for event in &self.events {
            event.validate()?;
        }
        Ok(())
    }
}

pub fn ghost_id(block_number: u64) -> String {
    format!("B{block_number}")
}

fn number_accesses(
    accesses: impl IntoIterator<Item = (AccessMode, Location)>,
) -> Vec<AccessRecord> {
    accesses
        .into_iter()
        .enumerate()
        .map(|(ordinal, (mode, location))| AccessRecord {
            mode,
            location,
            ordinal,
        })
        .collect()
}

/// Transactions in blockchain order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceLedger {
    transactions: Vec<TransactionRecord>,
    seed_id: Option<String>,
}

impl TraceLedger {
    /// Validates the ledger invariants: unique ids, non-decreasing block
    /// numbers, well-formed transactions.
    pub fn new(
        transactions: Vec<TransactionRecord>,
        seed_id: Option<String>,
    ) -> Result<Self, TraceError> {
        let mut seen = HashSet::new();
        let mut previous: Option<u64> = None;
        for tx in &transactions {
            tx.validate()
                .map_err(|reason| TraceError::InvalidTransaction {
                    id: tx.id.clone(),
                    reason,
                })?;
            if !seen.insert(tx.id.as_str()) {
                return Err(TraceError::DuplicateTransactionId(tx.id.clone()));
            }
            if let Some(prev) = previous {
                if tx.block_number < prev {
                    return Err(TraceError::NonMonotonicBlockNumber {
                        id: tx.id.clone(),
                        previous: prev,
                        found: tx.block_number,
                    });
                }
            }
            previous = Some(tx.block_number);
        }
        Ok(Self {
            transactions,
            seed_id,
        })
    }

    pub fn transactions(&self) -> &[TransactionRecord] {
        &self.transactions
    }

    pub fn seed_id(&self) -> Option<&str> {
        self.seed_id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TransactionRecord> {
        self.transactions.iter().find(|t| t.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.transactions.iter().position(|t| t.id == id)
    }

    pub fn has_ghosts(&self) -> bool {
        self.transactions.iter().any(|t| t.ghost)
    }

    /// Inserts one ghost transaction `B<b>` right before the first transaction
    /// of every populated block `b`.
    pub fn insert_ghosts(&self) -> Result<TraceLedger, TraceError> {
        if self.has_ghosts() {
            return Err(TraceError::AlreadyGhosted);
        }
        let blocks: BTreeSet<u64> = self.transactions.iter().map(|t| t.block_number).collect();
        for block in &blocks {
            let id = ghost_id(*block);
            if self.get(&id).is_some() {
                return Err(TraceError::GhostIdConflict(id));
            }
        }
        let mut out = Vec::with_capacity(self.transactions.len() + blocks.len());
        let mut current: Option<u64> = None;
        for tx in &self.transactions {
            if current != Some(tx.block_number) {
                out.push(TransactionRecord::ghost(tx.block_number));
                current = Some(tx.block_number);
            }
            out.push(tx.clone());
        }
        Ok(TraceLedger {
            transactions: out,
            seed_id: self.seed_id.clone(),
        })
    }

    /// Returns the suffix starting at the ghost of the seed's block, or at the
    /// seed itself when the ledger carries no ghosts.
    pub fn slice_from_seed(&self, seed_id: &str) -> Result<TraceLedger, TraceError> {
        let pos = self
            .transactions
            .iter()
            .position(|t| t.id == seed_id && !t.ghost)
            .ok_or_else(|| TraceError::UnknownSeed(seed_id.to_owned()))?;
        let block = self.transactions[pos].block_number;
        let ghost = ghost_id(block);
        let start = self.transactions[..pos]
            .iter()
            .rposition(|t| t.ghost && t.id == ghost)
            .unwrap_or(pos);
        Ok(TraceLedger {
            transactions: self.transactions[start..].to_vec(),
            seed_id: Some(seed_id.to_owned()),
        })
    }
}

// ---------------------------------------------------------------------------
// Line-delimited JSON format

#[derive(Serialize, Deserialize)]
struct AccessLine {
    m: String,
    k: String,
    loc: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum TraceLine {
    Tx {
        id: String,
        block: u64,
        #[serde(default)]
        accesses: Vec<AccessLine>,
        #[serde(default)]
        events: Vec<EventRecord>,
    },
    Meta {
        seed: Option<String>,
    },
}

fn access_from_line(line: AccessLine, ordinal: usize) -> Result<AccessRecord, String> {
    let mode = match line.m.as_str() {
        "r" => AccessMode::Read,
        "w" => AccessMode::Write,
        other => return Err(format!("unknown access mode {other:?}")),
    };
    let kind = LocationKind::from_tag(&line.k)
        .ok_or_else(|| format!("unknown access kind {:?}", line.k))?;
    if line.loc.is_empty() {
        return Err("empty location name".into());
    }
    Ok(AccessRecord {
        mode,
        location: Location::new(kind, line.loc),
        ordinal,
    })
}

/// Parses a trace file. Blank lines are ignored.
pub fn parse_trace(input: impl BufRead) -> Result<TraceLedger, TraceError> {
    let mut transactions: Vec<TransactionRecord> = Vec::new();
    let mut seed_id = None;
    let mut seen_meta = false;
    let mut ids = HashSet::new();
    for (index, line) in input.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| TraceError::MalformedRecord {
            line: line_no,
            reason,
        };
        let record: TraceLine =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        match record {
            TraceLine::Meta { seed } => {
                if seen_meta {
                    return Err(malformed("duplicate meta record".into()));
                }
                seen_meta = true;
                seed_id = seed;
            }
            TraceLine::Tx {
                id,
                block,
                accesses,
                events,
            } => {
                let accesses = accesses
                    .into_iter()
                    .enumerate()
                    .map(|(ordinal, a)| access_from_line(a, ordinal))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(&malformed)?;
                let tx = TransactionRecord {
                    id,
                    block_number: block,
                    ghost: false,
                    accesses,
                    events,
                };
                tx.validate().map_err(&malformed)?;
                if !ids.insert(tx.id.clone()) {
                    return Err(TraceError::DuplicateTransactionId(tx.id));
                }
                if let Some(prev) = transactions.last() {
                    if tx.block_number < prev.block_number {
                        return Err(TraceError::NonMonotonicBlockNumber {
                            id: tx.id,
                            previous: prev.block_number,
                            found: block,
                        });
                    }
                }
                transactions.push(tx);
            }
        }
    }
    Ok(TraceLedger {
        transactions,
        seed_id,
    })
}

pub fn parse_trace_str(input: &str) -> Result<TraceLedger, TraceError> {
    parse_trace(input.as_bytes())
}

/// Writes a ledger in the line-delimited trace format. Ghost transactions are
/// never written; they are re-derived on load.
pub fn write_trace(ledger: &TraceLedger, mut out: impl Write) -> Result<(), TraceError> {
    if let Some(seed) = &ledger.seed_id {
        let line = TraceLine::Meta {
            seed: Some(seed.clone()),
        };
        writeln!(out, "{}", to_json(&line))?;
    }
    for tx in ledger.transactions.iter().filter(|t| !t.ghost) {
        let line = TraceLine::Tx {
            id: tx.id.clone(),
            block: tx.block_number,
            accesses: tx
                .accesses
                .iter()
                .map(|a| AccessLine {
                    m: match a.mode {
                        AccessMode::Read => "r",
                        AccessMode::Write => "w",
                    }
                    .to_owned(),
                    k: a.location.kind.tag().to_owned(),
                    loc: a.location.name.clone(),
                })
                .collect(),
            events: tx.events.clone(),
        };
        writeln!(out, "{}", to_json(&line))?;
    }
    Ok(())
}

pub fn serialize_trace(ledger: &TraceLedger) -> String {
    let mut buf = Vec::new();
    write_trace(ledger, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace output is UTF-8")
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("trace records always serialize")
}
