//! A desk-scale implementation of threshold-relay consensus.
//!
//! The protocol combines four layers, each its own module:
//!
//! - [`crypto`]: the hash, the hash-based PRG, and the seeded permutation that
//!   everything downstream draws determinism from.
//! - [`threshold`]: unique (t,n)-threshold signatures over a Schnorr group with
//!   Chaum-Pedersen share proofs, plus the Joint-Feldman key generation that
//!   produces group keys. Signature uniqueness is what makes the randomness
//!   beacon unbiasable: the group signature on a fixed message is one value no
//!   matter which t members contribute.
//! - [`committee`]: group sampling from the replica universe and the exact
//!   tail-probability bounds that size groups so an honest supermajority holds
//!   with failure probability below a configurable bound.
//! - [`chain`], [`replica`], [`finalizer`], [`registry`]: the block tree,
//!   the per-replica protocol state machine (beacon, proposing, notarization),
//!   the observer that turns notarization buckets into a finalized chain, and
//!   the epoch-based membership registry.
//!
//! The library is sans-IO: replicas and observers consume messages and timer
//! fires and return outputs (broadcasts, timer requests, telemetry). A harness
//! owns the clock and the network. See the `pharos-sim` crate for the
//! discrete-event simulator and CLI built on top.

pub mod chain;
pub mod committee;
pub mod crypto;
pub mod encoding;
pub mod finalizer;
pub mod registry;
pub mod replica;
pub mod setup;
pub mod threshold;
pub mod time;

/// Replica label. Labels are arbitrary distinct naturals; the genesis universe
/// conventionally uses 1..=N.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Label(pub u64);

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Protocol round number. Round 0 is the genesis round.
pub type Round = u64;
