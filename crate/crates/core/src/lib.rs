//! Specification mining for contract transaction traces.
//!
//! The pipeline runs in two halves. History mining turns a ledger of
//! transactions into self-contained event histories: ghost transactions
//! model block attributes ([`trace_model`]), a strong/weak dependency graph
//! relates transactions through the state they touch ([`dependency`]), and
//! sessions cluster everything that feeds a final transaction
//! ([`sessions`]). Automaton construction then abstracts the histories
//! ([`abstraction`]), folds them into a prefix tree, applies state and
//! variable merges ([`automaton`]), and searches for a low-cost recipe by
//! simulated annealing ([`tuner`]).
//!
//! [`contract_sim`] regenerates the fixture workloads deterministically.

pub mod abstraction;
pub mod automaton;
pub mod contract_sim;
pub mod dependency;
pub mod par;
pub mod pipeline;
pub mod sessions;
pub mod trace_model;
pub mod tuner;
mod union_find;

pub use par::Parallelism;
