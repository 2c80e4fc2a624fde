//! Deterministic discrete-event simulation of the pharos consensus stack.
//!
//! The harness owns everything the sans-IO library leaves to its driver: the
//! clock, the network (bounded random delays, partitions), timers, adversary
//! output filters, and external observers. A [`scenario::Scenario`] plus its
//! master seed fully determines the event trace; identical inputs produce
//! byte-identical metrics and reports.
//!
//! - [`scenario`]: the versioned JSON scenario schema and its validation.
//! - [`network`]: delay sampling from a hash-based stream and partition state.
//! - [`adversary`]: Byzantine behaviors as output transformers wrapped around
//!   unmodified replica state machines.
//! - [`runner`]: the event loop, ground-truth trace collection, and external
//!   observers.
//! - [`metrics`]: per-round CSV rows, run summary, observer chain exports.
//! - [`theorems`]: the bound checks evaluated over a finished trace, with
//!   hypothesis gating and a JSON report.

pub mod adversary;
pub mod metrics;
pub mod network;
pub mod runner;
pub mod scenario;
pub mod theorems;
