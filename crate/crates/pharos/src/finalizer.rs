//! Observer-side finalization.
//!
//! An observer watches notarized blocks only; it needs no keys and never
//! signs. Blocks are bucketed by round. When the bucket for the observer's
//! current round first fills, the observer either schedules a finalization of
//! the previous round after a fixed delay (timer mode) or immediately
//! finalizes two rounds back (two-round mode, sound when the notarization
//! waiting period is at least two network delays). Finalizing round h takes
//! the longest common prefix of the chains ending in round-h notarized
//! blocks: everything that chain agrees on is final.
//!
//! The finalized chain should only ever grow. The observer records a prefix
//! violation if a finalization contradicts an earlier one instead of
//! extending it; under the protocol's hypotheses this never happens, and the
//! harness asserts the count stays zero.

use crate::chain::{Block, BlockPool};
use crate::crypto::Digest;
use crate::threshold::{GroupSignature, SchemeParams};
use crate::time::Time;
use crate::{Label, Round};

use std::collections::{BTreeMap, BTreeSet};

/// When an observer finalizes relative to observing a round's first
/// notarized block.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FinalizeMode {
    /// Schedule finalize(r-1) a fixed delay after round r's bucket first
    /// fills.
    Timer { delay: Time },
    /// Finalize(r-2) immediately when round r's bucket first fills.
    TwoRound,
}

/// What an ingest or finalize step produced. The caller owns timers: a
/// `ScheduleFinalize` must be fed back via `on_finalize_due` at the stated
/// time.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ObserverEvent {
    ScheduleFinalize { at: Time, round: Round },
    Finalized { round: Round, len: u64, head: Digest },
    PrefixViolation { round: Round },
    Rejected,
}

/// One finalized block, for export.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FinalizedEntry {
    pub round: Round,
    pub digest: Digest,
    pub owner: Option<Label>,
}

/// The observer state: buckets of notarized blocks per round and the
/// finalized chain so far. Round 0 holds genesis, which counts as notarized.
#[derive(Clone, Debug)]
pub struct ObserverState {
    params: SchemeParams,
    mode: FinalizeMode,
    pool: BlockPool,
    ingested: BTreeSet<Digest>,
    buckets: BTreeMap<Round, BTreeSet<Digest>>,
    pending: BTreeMap<Digest, Vec<(Block, GroupSignature)>>,
    current: Round,
    finalized: Vec<Digest>,
    violations: u64,
}

impl ObserverState {
    pub fn new(params: SchemeParams, mode: FinalizeMode) -> ObserverState {
        let pool = BlockPool::new(&params);
        let genesis = *pool.genesis();
        let mut buckets: BTreeMap<Round, BTreeSet<Digest>> = BTreeMap::new();
        buckets.entry(0).or_default().insert(genesis);
        ObserverState {
            params,
            mode,
            pool,
            ingested: [genesis].into_iter().collect(),
            buckets,
            pending: BTreeMap::new(),
            current: 1,
            finalized: vec![genesis],
            violations: 0,
        }
    }

    pub fn mode(&self) -> FinalizeMode {
        self.mode
    }

    pub fn current(&self) -> Round {
        self.current
    }

    /// The finalized chain as digests from genesis.
    pub fn finalized(&self) -> &[Digest] {
        &self.finalized
    }

    /// The highest finalized round; equals the non-genesis length of the
    /// finalized chain because rounds advance one block at a time.
    pub fn finalized_round(&self) -> Round {
        (self.finalized.len() - 1) as Round
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }

    pub fn bucket(&self, round: Round) -> impl Iterator<Item = &Digest> {
        self.buckets.get(&round).into_iter().flatten()
    }

    pub fn has_block(&self, digest: &Digest) -> bool {
        self.pool.contains(digest)
    }

    /// Ingest one notarized block. `verify` decides whether the notarization
    /// is acceptable for this block; the observer defers to its host for key
    /// material. Blocks whose predecessor is unknown wait until it arrives.
    pub fn ingest(
        &mut self,
        now: Time,
        block: Block,
        notarization: GroupSignature,
        verify: &mut impl FnMut(&Block, &GroupSignature) -> bool,
    ) -> Vec<ObserverEvent> {
        let mut events = Vec::new();
        let digest = block.digest(&self.params);
        if self.ingested.contains(&digest) {
            return events;
        }
        if !verify(&block, &notarization) {
            events.push(ObserverEvent::Rejected);
            return events;
        }
        match block.prev() {
            Some(prev) if !self.ingested.contains(prev) => {
                self.pending.entry(*prev).or_default().push((block, notarization));
                return events;
            }
            _ => {}
        }
        self.accept(now, digest, block, notarization, &mut events);
        // Accepting a block may unblock descendants, recursively.
        let mut ready = vec![digest];
        while let Some(d) = ready.pop() {
            let Some(waiters) = self.pending.remove(&d) else { continue };
            for (b, z) in waiters {
                let bd = b.digest(&self.params);
                if !self.ingested.contains(&bd) {
                    self.accept(now, bd, b, z, &mut events);
                    ready.push(bd);
                }
            }
        }
        events
    }

    fn accept(
        &mut self,
        now: Time,
        digest: Digest,
        block: Block,
        notarization: GroupSignature,
        events: &mut Vec<ObserverEvent>,
    ) {
        let round = block.round();
        self.ingested.insert(digest);
        self.pool.insert(&self.params, block);
        self.pool.set_notarized(digest, notarization);
        let bucket = self.buckets.entry(round).or_default();
        let first_fill = bucket.is_empty();
        bucket.insert(digest);
        if !first_fill || round < self.current {
            return;
        }
        // Dependency ordering means buckets fill strictly in round order.
        assert_eq!(round, self.current, "bucket filled out of order");
        match self.mode {
            FinalizeMode::Timer { delay } => {
                events.push(ObserverEvent::ScheduleFinalize {
                    at: now + delay,
                    round: self.current - 1,
                });
            }
            FinalizeMode::TwoRound => {
                if self.current >= 2 {
                    self.finalize(self.current - 2, events);
                }
            }
        }
        self.current += 1;
    }

    /// Timer-mode callback: the scheduled finalization is due.
    pub fn on_finalize_due(&mut self, round: Round) -> Vec<ObserverEvent> {
        let mut events = Vec::new();
        self.finalize(round, &mut events);
        events
    }

    /// Finalize round h: the finalized chain becomes the common prefix of the
    /// chains ending at round-h notarized blocks. h = 0 is a no-op.
    ///
    /// Every ingested block has complete local lineage and every chain has
    /// one block per round, so the common prefix head is found by walking
    /// bucket parents in lockstep until they coincide, and comparison with
    /// the standing finalized chain needs only the new tail. One digest
    /// position fixes everything below it, because parents are unique.
    fn finalize(&mut self, h: Round, events: &mut Vec<ObserverEvent>) {
        if h == 0 {
            return;
        }
        let mut frontier: BTreeSet<Digest> = self.bucket(h).copied().collect();
        assert!(!frontier.is_empty(), "finalize called for an empty bucket");
        let mut anchor_round = h;
        while frontier.len() > 1 {
            frontier = frontier.iter().map(|d| *self.parent_of(d)).collect();
            anchor_round -= 1;
        }
        let anchor = *frontier.first().expect("nonempty frontier");

        let fin_round = self.finalized_round();
        if anchor_round >= fin_round {
            let mut tail = Vec::with_capacity((anchor_round - fin_round) as usize);
            let mut cur = anchor;
            for _ in fin_round..anchor_round {
                tail.push(cur);
                cur = *self.parent_of(&cur);
            }
            if cur == *self.finalized.last().expect("chain contains genesis") {
                tail.reverse();
                self.finalized.extend(tail);
            } else {
                self.adopt(anchor, h, events);
            }
        } else if self.finalized[anchor_round as usize] != anchor {
            self.adopt(anchor, h, events);
        }
        events.push(ObserverEvent::Finalized {
            round: h,
            len: self.finalized_round(),
            head: *self.finalized.last().expect("chain contains genesis"),
        });
    }

    fn parent_of(&self, digest: &Digest) -> &Digest {
        self.pool
            .get(digest)
            .expect("ingested blocks are stored")
            .prev()
            .expect("only genesis lacks a parent")
    }

    /// A finalization that contradicts an earlier one: record the violation
    /// and adopt the new prefix wholesale.
    fn adopt(&mut self, anchor: Digest, h: Round, events: &mut Vec<ObserverEvent>) {
        self.violations += 1;
        events.push(ObserverEvent::PrefixViolation { round: h });
        self.finalized = self
            .pool
            .path_from_genesis(&anchor)
            .expect("ingested blocks always have complete lineage");
    }

    /// The finalized chain with block metadata, for export and diffing.
    pub fn export(&self) -> Vec<FinalizedEntry> {
        self.finalized
            .iter()
            .map(|d| {
                let b = self.pool.get(d).expect("finalized blocks are stored");
                FinalizedEntry { round: b.round(), digest: *d, owner: b.owner() }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::genesis_block;
    use num_bigint::BigUint;

    fn sig(tag: u64) -> GroupSignature {
        GroupSignature { value: BigUint::from(tag), contributors: vec![] }
    }

    fn block(prev: Digest, round: Round, owner: u64, salt: u8) -> Block {
        Block::Normal {
            prev,
            round,
            prev_notarization: sig(1),
            payload: vec![salt],
            owner: Label(owner),
        }
    }

    fn accept_all(_: &Block, _: &GroupSignature) -> bool {
        true
    }

    #[test]
    fn timer_mode_schedules_and_finalizes() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::Timer {
            delay: Time::from_int(2),
        });
        let g = genesis_block().digest(&params);

        let b1 = block(g, 1, 1, 0);
        let d1 = b1.digest(&params);
        let ev = obs.ingest(Time::from_int(5), b1, sig(2), &mut accept_all);
        assert_eq!(
            ev,
            vec![ObserverEvent::ScheduleFinalize { at: Time::from_int(7), round: 0 }]
        );
        assert_eq!(obs.current(), 2);

        // finalize(0) is a no-op.
        assert_eq!(obs.on_finalize_due(0), vec![]);
        assert_eq!(obs.finalized_round(), 0);

        // A second round-1 block does not reschedule.
        let b1b = block(g, 1, 2, 1);
        assert_eq!(obs.ingest(Time::from_int(6), b1b, sig(3), &mut accept_all), vec![]);

        // Round 2 arrives on top of the first block; finalize(1) then stops
        // at genesis because round 1 has two notarized blocks.
        let b2 = block(d1, 2, 3, 0);
        let ev = obs.ingest(Time::from_int(8), b2, sig(4), &mut accept_all);
        assert_eq!(
            ev,
            vec![ObserverEvent::ScheduleFinalize { at: Time::from_int(10), round: 1 }]
        );
        let ev = obs.on_finalize_due(1);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 1, len: 0, head: g }]);
        assert_eq!(obs.finalized_round(), 0);
        assert_eq!(obs.violations(), 0);
    }

    #[test]
    fn two_round_mode_finalizes_immediately() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::TwoRound);
        let g = genesis_block().digest(&params);

        let b1 = block(g, 1, 1, 0);
        let d1 = b1.digest(&params);
        assert_eq!(obs.ingest(Time::ZERO, b1, sig(2), &mut accept_all), vec![]);

        let b2 = block(d1, 2, 2, 0);
        let d2 = b2.digest(&params);
        assert_eq!(obs.ingest(Time::ZERO, b2, sig(3), &mut accept_all), vec![]);

        // Bucket 3 first fill finalizes round 1: singleton, extends to d1.
        let b3 = block(d2, 3, 3, 0);
        let ev = obs.ingest(Time::ZERO, b3, sig(4), &mut accept_all);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 1, len: 1, head: d1 }]);
        assert_eq!(obs.finalized(), &[g, d1]);
    }

    #[test]
    fn out_of_order_blocks_wait_for_their_predecessor() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::TwoRound);
        let g = genesis_block().digest(&params);

        let b1 = block(g, 1, 1, 0);
        let d1 = b1.digest(&params);
        let b2 = block(d1, 2, 2, 0);
        let d2 = b2.digest(&params);
        let b3 = block(d2, 3, 3, 0);

        // Rounds 3 and 2 arrive before round 1: nothing processes.
        assert_eq!(obs.ingest(Time::ZERO, b3, sig(4), &mut accept_all), vec![]);
        assert_eq!(obs.ingest(Time::ZERO, b2, sig(3), &mut accept_all), vec![]);
        assert_eq!(obs.current(), 1);

        // Round 1 unblocks the whole cascade, finalizing round 1.
        let ev = obs.ingest(Time::ZERO, b1, sig(2), &mut accept_all);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 1, len: 1, head: d1 }]);
        assert_eq!(obs.current(), 4);
    }

    #[test]
    fn rejected_notarization_is_not_ingested() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::TwoRound);
        let g = genesis_block().digest(&params);
        let b1 = block(g, 1, 1, 0);
        let mut reject = |_: &Block, _: &GroupSignature| false;
        assert_eq!(obs.ingest(Time::ZERO, b1, sig(2), &mut reject), vec![ObserverEvent::Rejected]);
        assert_eq!(obs.current(), 1);
    }

    #[test]
    fn repeated_finalize_is_idempotent_and_duplicates_ignored() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::Timer {
            delay: Time::ZERO,
        });
        let g = genesis_block().digest(&params);
        let b1 = block(g, 1, 1, 0);
        let d1 = b1.digest(&params);
        obs.ingest(Time::ZERO, b1.clone(), sig(2), &mut accept_all);
        assert_eq!(obs.ingest(Time::ZERO, b1, sig(2), &mut accept_all), vec![]);

        let b2 = block(d1, 2, 2, 0);
        obs.ingest(Time::ZERO, b2, sig(3), &mut accept_all);
        let first = obs.on_finalize_due(1);
        let again = obs.on_finalize_due(1);
        assert_eq!(first, again);
        assert_eq!(obs.finalized(), &[g, d1]);
        assert_eq!(obs.violations(), 0);
    }

    /// A round-1 twin whose notarization arrives after round 2 already
    /// filled. With no finalization delay the observer commits to the early
    /// twin immediately; when the chain settles on the late twin's branch,
    /// the commitment is contradicted and the violation is recorded.
    #[test]
    fn zero_delay_commits_early_and_late_twin_branch_violates() {
        let params = SchemeParams::toy();
        let mut obs =
            ObserverState::new(params.clone(), FinalizeMode::Timer { delay: Time::ZERO });
        let g = genesis_block().digest(&params);

        let a = block(g, 1, 1, 0);
        let da = a.digest(&params);
        let b = block(g, 1, 1, 1);
        let db = b.digest(&params);
        let c1 = block(da, 2, 2, 0);
        let c2 = block(db, 2, 3, 0);
        let dc2 = c2.digest(&params);
        let d = block(dc2, 3, 4, 0);
        let dd = d.digest(&params);
        let e = block(dd, 4, 5, 0);

        obs.ingest(Time::from_int(1), a, sig(2), &mut accept_all);
        assert_eq!(obs.on_finalize_due(0), vec![]);
        obs.ingest(Time::from_int(2), c1, sig(3), &mut accept_all);
        let ev = obs.on_finalize_due(1);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 1, len: 1, head: da }]);
        assert_eq!(obs.finalized(), &[g, da]);

        // The twin lands in the round-1 bucket after that round was already
        // finalized, then the chain grows on its branch.
        obs.ingest(Time::from_int(3), b, sig(4), &mut accept_all);
        obs.ingest(Time::from_int(3), c2, sig(5), &mut accept_all);
        obs.ingest(Time::from_int(4), d, sig(6), &mut accept_all);
        // Round 2 holds both children: the common prefix shrinks to genesis,
        // which contradicts nothing by itself.
        let ev = obs.on_finalize_due(2);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 2, len: 1, head: da }]);
        assert_eq!(obs.violations(), 0);

        obs.ingest(Time::from_int(5), e, sig(7), &mut accept_all);
        let ev = obs.on_finalize_due(3);
        assert!(ev.contains(&ObserverEvent::PrefixViolation { round: 3 }));
        assert_eq!(obs.violations(), 1);
        assert_eq!(obs.finalized(), &[g, db, dc2, dd]);
    }

    /// The same arrival order with a positive finalization delay: the twin
    /// arrives within the delay window, so round 1 is never committed and the
    /// switch to the twin's branch is an ordinary extension.
    #[test]
    fn positive_delay_tolerates_the_same_late_twin() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::Timer {
            delay: Time::from_int(2),
        });
        let g = genesis_block().digest(&params);

        let a = block(g, 1, 1, 0);
        let b = block(g, 1, 1, 1);
        let db = b.digest(&params);
        let c1 = block(a.digest(&params), 2, 2, 0);
        let c2 = block(db, 2, 3, 0);
        let dc2 = c2.digest(&params);
        let d = block(dc2, 3, 4, 0);
        let dd = d.digest(&params);
        let e = block(dd, 4, 5, 0);

        obs.ingest(Time::from_int(1), a, sig(2), &mut accept_all);
        obs.on_finalize_due(0);
        let ev = obs.ingest(Time::from_int(2), c1, sig(3), &mut accept_all);
        assert_eq!(
            ev,
            vec![ObserverEvent::ScheduleFinalize { at: Time::from_int(4), round: 1 }]
        );
        // The twin beats the scheduled finalize(1): both round-1 blocks are
        // in the bucket when it runs, so nothing past genesis is committed.
        obs.ingest(Time::from_int(3), b, sig(4), &mut accept_all);
        let ev = obs.on_finalize_due(1);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 1, len: 0, head: g }]);

        obs.ingest(Time::from_int(3), c2, sig(5), &mut accept_all);
        obs.ingest(Time::from_int(4), d, sig(6), &mut accept_all);
        obs.on_finalize_due(2);
        obs.ingest(Time::from_int(5), e, sig(7), &mut accept_all);
        let ev = obs.on_finalize_due(3);
        assert_eq!(ev, vec![ObserverEvent::Finalized { round: 3, len: 3, head: dd }]);
        assert_eq!(obs.violations(), 0);
        assert_eq!(obs.finalized(), &[g, db, dc2, dd]);
    }

    #[test]
    fn export_lists_rounds_and_owners() {
        let params = SchemeParams::toy();
        let mut obs = ObserverState::new(params.clone(), FinalizeMode::TwoRound);
        let g = genesis_block().digest(&params);
        let b1 = block(g, 1, 7, 0);
        let d1 = b1.digest(&params);
        obs.ingest(Time::ZERO, b1, sig(2), &mut accept_all);
        let b2 = block(d1, 2, 8, 0);
        let d2 = b2.digest(&params);
        obs.ingest(Time::ZERO, b2, sig(3), &mut accept_all);
        obs.ingest(Time::ZERO, block(d2, 3, 9, 0), sig(4), &mut accept_all);

        let entries = obs.export();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].round, 0);
        assert_eq!(entries[0].owner, None);
        assert_eq!(entries[1].round, 1);
        assert_eq!(entries[1].owner, Some(Label(7)));
    }
}
