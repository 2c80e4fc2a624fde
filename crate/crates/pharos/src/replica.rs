//! The per-replica protocol state machine.
//!
//! A replica is driven entirely by messages and timers; it performs no IO and
//! never reads a clock. Every handler takes the current time and returns the
//! outputs (broadcasts, directed sends, timer requests, telemetry) for the
//! caller to execute, so the same state machine runs under the simulator and
//! under tests with hand-fed events. All handlers execute in zero simulated
//! time.
//!
//! Round structure: a replica enters round r when it first sees a
//! notarization for round r-1. On entry it broadcasts its randomness share
//! for the round (if it sits on the round's committee) and starts the
//! BlockTime clock. When the round's randomness ξ_r is recovered it proposes
//! exactly one block extending the heaviest notarized chain. After BlockTime
//! it signs every valid current-round proposal of minimal rank, until a
//! notarization for the round appears. Aggregated signatures become
//! notarizations, which advance the round and are relayed to everyone.
//!
//! Relay policy: proposals and signatures are relayed only for the current
//! round; notarizations, notarized blocks, and recovered randomness relay for
//! any round; when a proposal is relayed its notarized predecessor is
//! re-broadcast alongside. Artifacts whose dependencies are missing (an
//! unknown predecessor block, an unknown round seed) queue until the
//! dependency arrives, and a missing predecessor triggers a directed lineage
//! pull from the artifact's sender.
//!
//! The simulated network authenticates senders; a proposal's owner field is
//! trusted the way a signed proposal would be. Byzantine behavior is modeled
//! by wrapping a replica's IO, never by forging another replica's identity.

use crate::chain::{
    beacon_message, genesis_seed, notary_message, ranking, Block, BlockPool, Ranking, Weight,
};
use crate::committee::{committee_select, Beta, Group};
use crate::crypto::{hash, Digest, Seed};
use crate::encoding::{DecodeError, Decoder, Encoder};
use crate::finalizer::{FinalizeMode, ObserverEvent, ObserverState};
use crate::threshold::{
    recover, sign_share, verify_group, verify_share, GroupSignature, SchemeParams,
    SecretKeyShare, SignatureShare, VerificationVector,
};
use crate::time::Time;
use crate::{Label, Round};

use num_bigint::BigUint;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Configuration errors caught before a replica starts.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("block time must be positive")]
    BadBlockTime,
    #[error("at least one group is required")]
    NoGroups,
    #[error("threshold {t} exceeds group {gid} size {n}")]
    ThresholdTooLarge { t: u32, gid: u64, n: usize },
    #[error("group {gid} member {member} is not in the universe")]
    UnknownMember { gid: u64, member: Label },
    #[error("epoch length must be positive")]
    BadEpochLength,
    #[error("universe labels must be distinct and non-empty")]
    BadUniverse,
    #[error("key share for group {gid} does not match the holder's index")]
    KeyMismatch { gid: u64 },
}

/// A registered group: its roster and the Feldman commitments of its key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupInfo {
    pub group: Group,
    pub vvec: VerificationVector,
}

/// What payloads a valid block may carry.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PayloadRule {
    Any,
    MaxLen(u64),
}

impl PayloadRule {
    pub fn allows(&self, payload: &[u8]) -> bool {
        match self {
            PayloadRule::Any => true,
            PayloadRule::MaxLen(n) => payload.len() as u64 <= *n,
        }
    }
}

/// System-wide protocol parameters, shared by every replica.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub params: SchemeParams,
    /// All registered replicas, the ranking domain.
    pub universe: Vec<Label>,
    /// Registered groups; `groups[j].group.id == j`.
    pub groups: Vec<GroupInfo>,
    /// Signature threshold t, one more than half the group size.
    pub threshold: u32,
    /// Advertised adversarial bound (at most 1/beta of the universe).
    pub beta: Beta,
    pub epoch_length: u64,
    pub block_time: Time,
    pub payload_rule: PayloadRule,
    pub finalize_mode: FinalizeMode,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.block_time > Time::ZERO) {
            return Err(ConfigError::BadBlockTime);
        }
        if self.epoch_length == 0 {
            return Err(ConfigError::BadEpochLength);
        }
        if self.groups.is_empty() {
            return Err(ConfigError::NoGroups);
        }
        let members: BTreeSet<Label> = self.universe.iter().copied().collect();
        if members.is_empty() || members.len() != self.universe.len() {
            return Err(ConfigError::BadUniverse);
        }
        for info in &self.groups {
            let gid = info.group.id;
            if (self.threshold as usize) > info.group.len() {
                return Err(ConfigError::ThresholdTooLarge {
                    t: self.threshold,
                    gid,
                    n: info.group.len(),
                });
            }
            for &m in &info.group.members {
                if !members.contains(&m) {
                    return Err(ConfigError::UnknownMember { gid, member: m });
                }
            }
        }
        Ok(())
    }

    pub fn group_count(&self) -> u64 {
        self.groups.len() as u64
    }

    /// The group serving a round, selected by the previous round's seed.
    pub fn committee_for(&self, prev_seed: &Seed) -> &GroupInfo {
        let idx = committee_select(prev_seed, self.group_count());
        &self.groups[idx as usize]
    }
}

/// The wire artifacts replicas exchange. Round numbers accompany digests so
/// artifacts verify without their block.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ProtocolMessage {
    /// A committee member's share of the round's randomness signature.
    BeaconShare { round: Round, share: SignatureShare },
    /// A proposed block.
    BlockProposal { block: Block },
    /// A committee member's notarization share for a block digest.
    BlockSignature { round: Round, digest: Digest, share: SignatureShare },
    /// An aggregated notarization for a block digest.
    Notarization { round: Round, digest: Digest, signature: GroupSignature },
    /// A block together with its own notarization.
    NotarizedBlock { block: Block, signature: GroupSignature },
    /// A recovered randomness signature, for catch-up after partitions.
    RandomnessOutput { round: Round, signature: GroupSignature },
}

const TAG_BEACON_SHARE: u8 = 0x10;
const TAG_BLOCK_PROPOSAL: u8 = 0x11;
const TAG_BLOCK_SIGNATURE: u8 = 0x12;
const TAG_NOTARIZATION: u8 = 0x13;
const TAG_NOTARIZED_BLOCK: u8 = 0x14;
const TAG_RANDOMNESS_OUTPUT: u8 = 0x15;

impl ProtocolMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolMessage::BeaconShare { .. } => "beacon-share",
            ProtocolMessage::BlockProposal { .. } => "block-proposal",
            ProtocolMessage::BlockSignature { .. } => "block-signature",
            ProtocolMessage::Notarization { .. } => "notarization",
            ProtocolMessage::NotarizedBlock { .. } => "notarized-block",
            ProtocolMessage::RandomnessOutput { .. } => "randomness-output",
        }
    }

    /// Canonical encoding: tag byte, then fields in declaration order.
    pub fn encode(&self, params: &SchemeParams) -> Vec<u8> {
        let mut e = Encoder::new();
        match self {
            ProtocolMessage::BeaconShare { round, share } => {
                e.u8(TAG_BEACON_SHARE).u64(*round).fixed(&share.encode(params));
            }
            ProtocolMessage::BlockProposal { block } => {
                e.u8(TAG_BLOCK_PROPOSAL).var(&block.encode(params));
            }
            ProtocolMessage::BlockSignature { round, digest, share } => {
                e.u8(TAG_BLOCK_SIGNATURE)
                    .u64(*round)
                    .digest(digest)
                    .fixed(&share.encode(params));
            }
            ProtocolMessage::Notarization { round, digest, signature } => {
                e.u8(TAG_NOTARIZATION)
                    .u64(*round)
                    .digest(digest)
                    .var(&signature.encode(params));
            }
            ProtocolMessage::NotarizedBlock { block, signature } => {
                e.u8(TAG_NOTARIZED_BLOCK)
                    .var(&block.encode(params))
                    .var(&signature.encode(params));
            }
            ProtocolMessage::RandomnessOutput { round, signature } => {
                e.u8(TAG_RANDOMNESS_OUTPUT).u64(*round).var(&signature.encode(params));
            }
        }
        e.finish()
    }

    pub fn decode(params: &SchemeParams, bytes: &[u8]) -> Result<ProtocolMessage, DecodeError> {
        let mut d = Decoder::new(bytes);
        let msg = match d.u8("message tag")? {
            TAG_BEACON_SHARE => ProtocolMessage::BeaconShare {
                round: d.u64("round")?,
                share: SignatureShare::decode(params, &mut d)?,
            },
            TAG_BLOCK_PROPOSAL => {
                let raw = d.var("block")?;
                ProtocolMessage::BlockProposal { block: Block::decode(params, raw)? }
            }
            TAG_BLOCK_SIGNATURE => ProtocolMessage::BlockSignature {
                round: d.u64("round")?,
                digest: d.digest("digest")?,
                share: SignatureShare::decode(params, &mut d)?,
            },
            TAG_NOTARIZATION => {
                let round = d.u64("round")?;
                let digest = d.digest("digest")?;
                let raw = d.var("signature")?;
                let mut sd = Decoder::new(raw);
                let signature = GroupSignature::decode(params, &mut sd)?;
                sd.finish()?;
                ProtocolMessage::Notarization { round, digest, signature }
            }
            TAG_NOTARIZED_BLOCK => {
                let braw = d.var("block")?;
                let block = Block::decode(params, braw)?;
                let sraw = d.var("signature")?;
                let mut sd = Decoder::new(sraw);
                let signature = GroupSignature::decode(params, &mut sd)?;
                sd.finish()?;
                ProtocolMessage::NotarizedBlock { block, signature }
            }
            TAG_RANDOMNESS_OUTPUT => {
                let round = d.u64("round")?;
                let raw = d.var("signature")?;
                let mut sd = Decoder::new(raw);
                let signature = GroupSignature::decode(params, &mut sd)?;
                sd.finish()?;
                ProtocolMessage::RandomnessOutput { round, signature }
            }
            tag => return Err(DecodeError::BadTag { field: "message tag", tag }),
        };
        d.finish()?;
        Ok(msg)
    }
}

/// Timers a replica asks its driver to schedule.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TimerKind {
    /// The BlockTime waiting period of a round has elapsed.
    Notarize { round: Round },
    /// The observer's delayed finalization is due.
    Finalize { round: Round },
}

/// Structured facts for the harness: ground truth for metrics and theorem
/// checking. Protocol behavior never depends on telemetry.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Telemetry {
    EnteredRound { round: Round },
    BeaconShareSent { round: Round },
    SeedRecovered { round: Round },
    Proposed { round: Round, digest: Digest, rank: u64 },
    Signed { round: Round, digest: Digest, rank: u64 },
    NotarizationAssembled { round: Round, digest: Digest },
    /// First local sighting of a notarization for this digest.
    NotarizationSeen { round: Round, digest: Digest },
    /// First local storage of a block body.
    BlockStored { round: Round, digest: Digest },
    NotarizedBlockStored { round: Round, digest: Digest },
    InvalidArtifact { kind: &'static str },
    Observer(ObserverEvent),
}

/// Everything a handler can ask of its driver.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Output {
    Broadcast(ProtocolMessage),
    Send { to: Label, message: ProtocolMessage },
    ScheduleTimer { at: Time, timer: TimerKind },
    /// Directed pull: ask `to` for the chain ending at `ancestor`.
    RequestLineage { to: Label, ancestor: Digest },
    Telemetry(Telemetry),
}

/// Relay dedup keys: each artifact is re-broadcast at most once.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum RelayKey {
    Beacon(Round, u64),
    Proposal(Digest),
    Signature(Digest, u64),
    Notarization(Digest),
    NotarizedBlock(Digest),
    Randomness(Round),
}

type Work = VecDeque<(Label, ProtocolMessage)>;

/// The replica state machine.
#[derive(Debug)]
pub struct ReplicaState {
    id: Label,
    config: ProtocolConfig,
    /// Secret key shares per group this replica belongs to.
    keys: BTreeMap<u64, SecretKeyShare>,
    round: Round,
    entered_at: Time,
    pool: BlockPool,
    /// ξ_r per round; round 0 holds the genesis seed.
    seeds: BTreeMap<Round, Seed>,
    /// The randomness group signatures behind the seeds, for catch-up.
    beacon_sigs: BTreeMap<Round, GroupSignature>,
    rankings: BTreeMap<Round, Ranking>,
    beacon_shares: BTreeMap<Round, BTreeMap<u64, SignatureShare>>,
    block_sigs: BTreeMap<Digest, BTreeMap<u64, SignatureShare>>,
    sig_round: BTreeMap<Digest, Round>,
    /// Digests this replica has signed; grows monotonically.
    signed: BTreeSet<Digest>,
    proposed: bool,
    own_proposal: Option<Digest>,
    beacon_emitted: bool,
    relayed: BTreeSet<RelayKey>,
    /// Notarizations already verified, keyed by (block digest, signature
    /// encoding hash).
    verified_notas: BTreeSet<(Digest, Digest)>,
    nota_seen_rounds: BTreeSet<Round>,
    nota_seen_digests: BTreeSet<Digest>,
    /// Cached public key shares per (group, index).
    pk_cache: BTreeMap<(u64, u64), BigUint>,
    queue_on_block: BTreeMap<Digest, Vec<(Label, ProtocolMessage)>>,
    queue_on_seed: BTreeMap<Round, Vec<(Label, ProtocolMessage)>>,
    queue_on_round: BTreeMap<Round, Vec<(Label, ProtocolMessage)>>,
    requested_lineage: BTreeSet<Digest>,
    observer: ObserverState,
    observer_fed: BTreeSet<Digest>,
    /// Cumulative chain weight per block whose lineage is fully ranked.
    /// Blocks and round seeds are immutable, so entries never invalidate.
    weight_cache: BTreeMap<Digest, Weight>,
}

impl ReplicaState {
    /// Build a replica. `keys` maps group id to this replica's secret share
    /// in that group; `genesis_notarization` is the bootstrap notarization of
    /// the genesis block produced at setup by the seed-zero committee.
    pub fn new(
        id: Label,
        config: ProtocolConfig,
        keys: BTreeMap<u64, SecretKeyShare>,
        genesis_notarization: GroupSignature,
    ) -> Result<ReplicaState, ConfigError> {
        config.validate()?;
        for (gid, key) in &keys {
            let ok = config
                .groups
                .get(*gid as usize)
                .and_then(|g| g.group.share_index(id))
                .map(|idx| idx == key.index)
                .unwrap_or(false);
            if !ok {
                return Err(ConfigError::KeyMismatch { gid: *gid });
            }
        }
        let pool = BlockPool::new(&config.params);
        let genesis = *pool.genesis();
        let observer = ObserverState::new(config.params.clone(), config.finalize_mode);
        let mut seeds = BTreeMap::new();
        seeds.insert(0, genesis_seed());
        let mut state = ReplicaState {
            id,
            config,
            keys,
            round: 0,
            entered_at: Time::ZERO,
            pool,
            seeds,
            beacon_sigs: BTreeMap::new(),
            rankings: BTreeMap::new(),
            beacon_shares: BTreeMap::new(),
            block_sigs: BTreeMap::new(),
            sig_round: BTreeMap::new(),
            signed: BTreeSet::new(),
            proposed: false,
            own_proposal: None,
            beacon_emitted: false,
            relayed: BTreeSet::new(),
            verified_notas: BTreeSet::new(),
            nota_seen_rounds: BTreeSet::new(),
            nota_seen_digests: BTreeSet::new(),
            pk_cache: BTreeMap::new(),
            queue_on_block: BTreeMap::new(),
            queue_on_seed: BTreeMap::new(),
            queue_on_round: BTreeMap::new(),
            requested_lineage: BTreeSet::new(),
            observer,
            observer_fed: BTreeSet::new(),
            weight_cache: BTreeMap::new(),
        };
        let sig_id = hash(&genesis_notarization.encode(&state.config.params));
        state.verified_notas.insert((genesis, sig_id));
        state.pool.set_notarized(genesis, genesis_notarization);
        Ok(state)
    }

    pub fn id(&self) -> Label {
        self.id
    }

    pub fn round(&self) -> Round {
        self.round
    }

    pub fn entered_at(&self) -> Time {
        self.entered_at
    }

    pub fn pool(&self) -> &BlockPool {
        &self.pool
    }

    pub fn seed(&self, round: Round) -> Option<&Seed> {
        self.seeds.get(&round)
    }

    pub fn observer(&self) -> &ObserverState {
        &self.observer
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn has_signed(&self, digest: &Digest) -> bool {
        self.signed.contains(digest)
    }

    /// Enter round 1. Call exactly once before feeding events.
    pub fn start(&mut self, now: Time) -> Vec<Output> {
        assert_eq!(self.round, 0, "start must be called once");
        let mut out = Vec::new();
        let mut work = Work::new();
        self.advance_to(now, 1, &mut out);
        self.post_step(now, &mut out, &mut work);
        self.run_work(now, &mut out, &mut work);
        out
    }

    /// Handle one delivered message.
    pub fn on_message(&mut self, now: Time, sender: Label, msg: ProtocolMessage) -> Vec<Output> {
        let mut out = Vec::new();
        let mut work = Work::new();
        work.push_back((sender, msg));
        self.run_work(now, &mut out, &mut work);
        out
    }

    /// Handle a due timer.
    pub fn on_timer(&mut self, now: Time, timer: TimerKind) -> Vec<Output> {
        let mut out = Vec::new();
        let mut work = Work::new();
        match timer {
            TimerKind::Notarize { round } => {
                if round == self.round {
                    self.post_step(now, &mut out, &mut work);
                    self.run_work(now, &mut out, &mut work);
                }
            }
            TimerKind::Finalize { round } => {
                let events = self.observer.on_finalize_due(round);
                self.emit_observer_events(events, &mut out);
            }
        }
        out
    }

    /// Answer a lineage pull: the full notarized chain ending at `ancestor`,
    /// interleaved with the randomness outputs needed to verify it in order.
    pub fn lineage_response(&self, requester: Label, ancestor: &Digest) -> Vec<Output> {
        let mut out = Vec::new();
        let Some(path) = self.pool.path_from_genesis(ancestor) else {
            return out;
        };
        let mut send = |message: ProtocolMessage| {
            out.push(Output::Send { to: requester, message });
        };
        for d in &path {
            let block = self.pool.get(d).expect("path blocks are stored");
            let round = block.round();
            if round == 0 {
                continue;
            }
            if round >= 2 {
                if let Some(sig) = self.beacon_sigs.get(&(round - 1)) {
                    send(ProtocolMessage::RandomnessOutput {
                        round: round - 1,
                        signature: sig.clone(),
                    });
                }
            }
            if let Some(z) = self.pool.notarization_of(d) {
                send(ProtocolMessage::NotarizedBlock {
                    block: block.clone(),
                    signature: z.clone(),
                });
            }
        }
        // The seed of the ancestor's own round, so the requester can verify
        // artifacts built on top of it.
        if let Some(block) = self.pool.get(ancestor) {
            if let Some(sig) = self.beacon_sigs.get(&block.round()) {
                send(ProtocolMessage::RandomnessOutput {
                    round: block.round(),
                    signature: sig.clone(),
                });
            }
        }
        out
    }

    /// Push current state after a partition heals: the own beacon share and
    /// proposal, the notarized heads of the previous round, and the
    /// randomness that ranks them.
    pub fn heal_rebroadcast(&mut self) -> Vec<Output> {
        let mut out = Vec::new();
        if self.beacon_emitted {
            if let Some(share) = self.own_beacon_share(self.round) {
                out.push(Output::Broadcast(ProtocolMessage::BeaconShare {
                    round: self.round,
                    share,
                }));
            }
        }
        if let Some(d) = self.own_proposal {
            if let Some(block) = self.pool.get(&d) {
                out.push(Output::Broadcast(ProtocolMessage::BlockProposal {
                    block: block.clone(),
                }));
            }
        }
        if self.round >= 1 {
            let prev_round = self.round - 1;
            if prev_round >= 1 {
                if let Some(sig) = self.beacon_sigs.get(&prev_round) {
                    out.push(Output::Broadcast(ProtocolMessage::RandomnessOutput {
                        round: prev_round,
                        signature: sig.clone(),
                    }));
                }
            }
            let heads: Vec<Digest> = self.pool.notarized_at(prev_round).copied().collect();
            for d in heads {
                if let Some(block) = self.pool.get(&d) {
                    let z = self.pool.notarization_of(&d).expect("head is notarized");
                    out.push(Output::Broadcast(ProtocolMessage::NotarizedBlock {
                        block: block.clone(),
                        signature: z.clone(),
                    }));
                }
            }
        }
        out
    }

    fn run_work(&mut self, now: Time, out: &mut Vec<Output>, work: &mut Work) {
        while let Some((sender, msg)) = work.pop_front() {
            self.handle(now, sender, msg, out, work);
            self.post_step(now, out, work);
        }
    }

    fn handle(
        &mut self,
        now: Time,
        sender: Label,
        msg: ProtocolMessage,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        match msg {
            ProtocolMessage::BeaconShare { round, share } => {
                self.on_beacon_share(now, sender, round, share, out, work)
            }
            ProtocolMessage::BlockProposal { block } => {
                self.on_proposal(now, sender, block, out, work)
            }
            ProtocolMessage::BlockSignature { round, digest, share } => {
                self.on_block_signature(now, sender, round, digest, share, out, work)
            }
            ProtocolMessage::Notarization { round, digest, signature } => {
                self.on_notarization(now, sender, round, digest, signature, out, work)
            }
            ProtocolMessage::NotarizedBlock { block, signature } => {
                self.on_notarized_block(now, sender, block, signature, out, work)
            }
            ProtocolMessage::RandomnessOutput { round, signature } => {
                self.on_randomness_output(now, sender, round, signature, out, work)
            }
        }
    }

    /// Steps whose preconditions may have just become true: emit the round's
    /// beacon share, propose, sign. Each is idempotent per round.
    fn post_step(&mut self, now: Time, out: &mut Vec<Output>, work: &mut Work) {
        self.try_emit_beacon_share(now, out, work);
        self.try_propose(out);
        self.notarization_step(now, out, work);
    }

    fn invalid(&self, kind: &'static str, out: &mut Vec<Output>) {
        out.push(Output::Telemetry(Telemetry::InvalidArtifact { kind }));
    }

    fn relay(&mut self, key: RelayKey, msg: ProtocolMessage, out: &mut Vec<Output>) {
        if self.relayed.insert(key) {
            out.push(Output::Broadcast(msg));
        }
    }

    /// The group serving round `round`, if its selecting seed is known.
    fn committee(&self, round: Round) -> Option<&GroupInfo> {
        let seed = self.seeds.get(&round.checked_sub(1)?)?;
        Some(self.config.committee_for(seed))
    }

    /// The group that notarizes blocks of `block_round`. Genesis is
    /// notarized by the seed-zero committee, like round 1.
    fn notary_group(&self, block_round: Round) -> Option<&GroupInfo> {
        let seed_round = block_round.saturating_sub(1);
        let seed = self.seeds.get(&seed_round)?;
        Some(self.config.committee_for(seed))
    }

    fn pk_share(&mut self, gid: u64, index: u64) -> BigUint {
        if let Some(pk) = self.pk_cache.get(&(gid, index)) {
            return pk.clone();
        }
        let pk = self.config.groups[gid as usize]
            .vvec
            .public_key_share(&self.config.params, index);
        self.pk_cache.insert((gid, index), pk.clone());
        pk
    }

    fn ranking_for(&mut self, round: Round) -> Option<&Ranking> {
        if !self.rankings.contains_key(&round) {
            let seed = self.seeds.get(&round)?;
            let r = ranking(&self.config.universe, seed).expect("universe is valid");
            self.rankings.insert(round, r);
        }
        self.rankings.get(&round)
    }

    fn rank_of(&mut self, round: Round, owner: Label) -> Option<u64> {
        self.ranking_for(round)?.rank_of(owner)
    }

    fn queue_on_seed(&mut self, seed_round: Round, sender: Label, msg: ProtocolMessage) {
        self.queue_on_seed.entry(seed_round).or_default().push((sender, msg));
    }

    fn unlock_seed(&mut self, seed_round: Round, work: &mut Work) {
        if let Some(list) = self.queue_on_seed.remove(&seed_round) {
            work.extend(list);
        }
    }

    fn unlock_block(&mut self, digest: &Digest, work: &mut Work) {
        if let Some(list) = self.queue_on_block.remove(digest) {
            work.extend(list);
        }
    }

    fn unlock_round(&mut self, round: Round, work: &mut Work) {
        if let Some(list) = self.queue_on_round.remove(&round) {
            work.extend(list);
        }
    }

    /// Request the chain behind `ancestor` from `sender`, once per digest.
    fn request_lineage(&mut self, sender: Label, ancestor: Digest, out: &mut Vec<Output>) {
        if self.requested_lineage.insert(ancestor) {
            out.push(Output::RequestLineage { to: sender, ancestor });
        }
    }

    fn own_beacon_share(&mut self, round: Round) -> Option<SignatureShare> {
        let prev_seed = *self.seeds.get(&round.checked_sub(1)?)?;
        let info = self.config.committee_for(&prev_seed);
        let gid = info.group.id;
        info.group.share_index(self.id)?;
        let key = self.keys.get(&gid)?.clone();
        let message = beacon_message(round, &prev_seed);
        Some(sign_share(&self.config.params, &message, &key))
    }

    fn try_emit_beacon_share(&mut self, now: Time, out: &mut Vec<Output>, work: &mut Work) {
        if self.beacon_emitted || self.round == 0 {
            return;
        }
        if !self.seeds.contains_key(&(self.round - 1)) {
            return;
        }
        self.beacon_emitted = true;
        let round = self.round;
        let Some(share) = self.own_beacon_share(round) else {
            return; // Not on this round's committee.
        };
        out.push(Output::Telemetry(Telemetry::BeaconShareSent { round }));
        out.push(Output::Broadcast(ProtocolMessage::BeaconShare {
            round,
            share: share.clone(),
        }));
        self.relayed.insert(RelayKey::Beacon(round, share.index));
        self.store_beacon_share(now, round, share, out, work);
    }

    /// Store a verified share; recover the round's randomness at threshold.
    fn store_beacon_share(
        &mut self,
        _now: Time,
        round: Round,
        share: SignatureShare,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        let shares = self.beacon_shares.entry(round).or_default();
        if shares.contains_key(&share.index) {
            return;
        }
        shares.insert(share.index, share);
        let t = self.config.threshold;
        if self.seeds.contains_key(&round) || (shares.len() as u32) < t {
            return;
        }
        let collected: Vec<SignatureShare> = shares.values().cloned().collect();
        let value = recover(&self.config.params, t, &collected)
            .expect("verified distinct shares at threshold recover");
        let contributors = collected.into_iter().take(t as usize).collect();
        let sig = GroupSignature { value, contributors };
        self.learn_randomness(round, sig, out, work);
    }

    fn learn_randomness(
        &mut self,
        round: Round,
        sig: GroupSignature,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        if self.seeds.contains_key(&round) {
            return;
        }
        let seed = crate::threshold::derive_randomness(&self.config.params, &sig.value);
        self.seeds.insert(round, seed);
        self.beacon_sigs.insert(round, sig);
        out.push(Output::Telemetry(Telemetry::SeedRecovered { round }));
        self.unlock_seed(round, work);
    }

    fn on_beacon_share(
        &mut self,
        now: Time,
        sender: Label,
        round: Round,
        share: SignatureShare,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        if round == 0 {
            return self.invalid("beacon-share", out);
        }
        if self.seeds.contains_key(&round) {
            return; // Already recovered; the share adds nothing.
        }
        if !self.seeds.contains_key(&(round - 1)) {
            let msg = ProtocolMessage::BeaconShare { round, share };
            return self.queue_on_seed(round - 1, sender, msg);
        }
        let (gid, member) = {
            let info = self.committee(round).expect("selecting seed is present");
            (info.group.id, info.group.member_at_index(share.index))
        };
        if member.is_none() {
            return self.invalid("beacon-share", out);
        }
        let prev_seed = self.seeds[&(round - 1)];
        let message = beacon_message(round, &prev_seed);
        let pk = self.pk_share(gid, share.index);
        if !verify_share(&self.config.params, &message, &pk, &share) {
            return self.invalid("beacon-share", out);
        }
        if round == self.round {
            self.relay(
                RelayKey::Beacon(round, share.index),
                ProtocolMessage::BeaconShare { round, share: share.clone() },
                out,
            );
        }
        self.store_beacon_share(now, round, share, out, work);
    }

    fn try_propose(&mut self, out: &mut Vec<Output>) {
        if self.proposed || self.round == 0 {
            return;
        }
        let round = self.round;
        if !self.seeds.contains_key(&round) {
            return; // The round's randomness has not been recovered yet.
        }
        let Some(head) = self.best_head(round - 1) else {
            return; // No extendable notarized chain yet; retried later.
        };
        let prev_notarization =
            self.pool.notarization_of(&head).expect("head is notarized").clone();
        let payload = format!("tx-r{}-p{}", round, self.id.0).into_bytes();
        let block = Block::Normal {
            prev: head,
            round,
            prev_notarization,
            payload,
            owner: self.id,
        };
        let digest = self.pool.insert(&self.config.params, block.clone());
        self.proposed = true;
        self.own_proposal = Some(digest);
        self.relayed.insert(RelayKey::Proposal(digest));
        let rank = self.rank_of(round, self.id).expect("replica is in the universe");
        out.push(Output::Telemetry(Telemetry::BlockStored { round, digest }));
        out.push(Output::Telemetry(Telemetry::Proposed { round, digest, rank }));
        out.push(Output::Broadcast(ProtocolMessage::BlockProposal { block }));
    }

    /// Fork choice among notarized round-`round` blocks whose whole lineage
    /// (blocks and round seeds) is locally known.
    fn best_head(&mut self, round: Round) -> Option<Digest> {
        let candidates: Vec<Digest> = self.pool.notarized_at(round).copied().collect();
        let mut best: Option<(Weight, Digest)> = None;
        for d in candidates {
            let Some(w) = self.chain_weight_cached(&d) else { continue };
            best = match best {
                None => Some((w, d)),
                Some((bw, bd)) => {
                    if w > bw || (w == bw && d < bd) {
                        Some((w, d))
                    } else {
                        Some((bw, bd))
                    }
                }
            };
        }
        best.map(|(_, d)| d)
    }

    /// Cumulative weight of the chain ending at `head`, memoized per block.
    /// `None` while an ancestor block or some round's ranking is still
    /// missing; nothing is cached past the gap, so a later call retries.
    /// Chains share prefixes, so the walk back stops at the nearest cached
    /// ancestor and each block's weight is computed once overall.
    fn chain_weight_cached(&mut self, head: &Digest) -> Option<Weight> {
        let mut suffix = Vec::new();
        let mut cur = *head;
        let mut acc = loop {
            if let Some(w) = self.weight_cache.get(&cur) {
                break w.clone();
            }
            let block = self.pool.get(&cur)?;
            match block.prev() {
                None => break Weight::zero(),
                Some(prev) => {
                    let owner = block.owner().expect("non-genesis blocks have owners");
                    suffix.push((cur, block.round(), owner));
                    cur = *prev;
                }
            }
        };
        while let Some((d, r, owner)) = suffix.pop() {
            let rank = self.rank_of(r, owner)?;
            acc.add_rank(rank);
            self.weight_cache.insert(d, acc.clone());
        }
        Some(acc)
    }

    fn on_proposal(
        &mut self,
        now: Time,
        sender: Label,
        block: Block,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        let round = block.round();
        if round == 0 {
            return self.invalid("block-proposal", out);
        }
        if round < self.round {
            return; // Old proposals are dropped.
        }
        if round > self.round {
            let msg = ProtocolMessage::BlockProposal { block };
            self.queue_on_round.entry(round).or_default().push((sender, msg));
            return;
        }
        let digest = block.digest(&self.config.params);
        if self.pool.contains(&digest) {
            return;
        }
        let (prev, owner, payload_ok) = match &block {
            Block::Normal { prev, owner, payload, .. } => {
                (*prev, *owner, self.config.payload_rule.allows(payload))
            }
            Block::Genesis { .. } => unreachable!("round 0 rejected above"),
        };
        if !payload_ok || !self.config.universe.contains(&owner) {
            return self.invalid("block-proposal", out);
        }
        let Some(prev_block) = self.pool.get(&prev) else {
            self.request_lineage(sender, prev, out);
            let msg = ProtocolMessage::BlockProposal { block };
            self.queue_on_block.entry(prev).or_default().push((sender, msg));
            return;
        };
        if prev_block.round() + 1 != round {
            return self.invalid("block-proposal", out);
        }
        let nota = block.prev_notarization().expect("normal blocks carry one").clone();
        if !self.check_notarization(round - 1, &prev, &nota, out) {
            return;
        }
        self.pool.insert(&self.config.params, block.clone());
        out.push(Output::Telemetry(Telemetry::BlockStored { round, digest }));
        self.unlock_block(&digest, work);
        self.accept_notarization(now, round - 1, prev, nota, out, work);
        // Relay the proposal and re-broadcast its notarized predecessor.
        self.relay(
            RelayKey::Proposal(digest),
            ProtocolMessage::BlockProposal { block },
            out,
        );
        if let Some(prev_block) = self.pool.get(&prev) {
            if prev_block.owner().is_some() {
                let z = self.pool.notarization_of(&prev).expect("just recorded").clone();
                self.relay(
                    RelayKey::NotarizedBlock(prev),
                    ProtocolMessage::NotarizedBlock { block: prev_block.clone(), signature: z },
                    out,
                );
            }
        }
    }

    /// Verify a notarization for a block digest of a given round, with a
    /// cache so the same signature bytes verify once.
    fn check_notarization(
        &mut self,
        block_round: Round,
        digest: &Digest,
        sig: &GroupSignature,
        out: &mut Vec<Output>,
    ) -> bool {
        let sig_id = hash(&sig.encode(&self.config.params));
        if self.verified_notas.contains(&(*digest, sig_id)) {
            return true;
        }
        let Some(info) = self.notary_group(block_round) else {
            // Callers queue on the seed before reaching here.
            self.invalid("notarization", out);
            return false;
        };
        let vvec = info.vvec.clone();
        let message = notary_message(digest);
        let ok = verify_group(&self.config.params, self.config.threshold, &vvec, &message, sig);
        if ok {
            self.verified_notas.insert((*digest, sig_id));
        } else {
            self.invalid("notarization", out);
        }
        ok
    }

    /// Record a verified notarization: store it, relay it, feed the observer,
    /// and advance the round if it ends the current one.
    fn accept_notarization(
        &mut self,
        now: Time,
        block_round: Round,
        digest: Digest,
        sig: GroupSignature,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        self.nota_seen_rounds.insert(block_round);
        if self.nota_seen_digests.insert(digest) && block_round > 0 {
            out.push(Output::Telemetry(Telemetry::NotarizationSeen { round: block_round, digest }));
        }
        if !self.pool.is_notarized(&digest) {
            self.pool.set_notarized(digest, sig.clone());
        }
        if block_round > 0 {
            self.relay(
                RelayKey::Notarization(digest),
                ProtocolMessage::Notarization { round: block_round, digest, signature: sig },
                out,
            );
        }
        self.maybe_store_notarized_block(now, &digest, out);
        if block_round == self.round {
            self.advance_to(now, block_round + 1, out);
            self.unlock_round(self.round, work);
        }
    }

    fn advance_to(&mut self, now: Time, round: Round, out: &mut Vec<Output>) {
        debug_assert_eq!(round, self.round + 1, "rounds advance one at a time");
        self.round = round;
        self.entered_at = now;
        self.proposed = false;
        self.own_proposal = None;
        self.beacon_emitted = false;
        out.push(Output::Telemetry(Telemetry::EnteredRound { round }));
        out.push(Output::ScheduleTimer {
            at: now + self.config.block_time,
            timer: TimerKind::Notarize { round },
        });
    }

    /// When a block and its notarization first coincide locally: tell the
    /// harness, re-broadcast the pair, and feed the embedded observer.
    fn maybe_store_notarized_block(&mut self, now: Time, digest: &Digest, out: &mut Vec<Output>) {
        if self.observer_fed.contains(digest) {
            return;
        }
        let Some(block) = self.pool.get(digest) else { return };
        let Some(sig) = self.pool.notarization_of(digest) else { return };
        if block.owner().is_none() {
            return; // Genesis is final by construction.
        }
        let block = block.clone();
        let sig = sig.clone();
        self.observer_fed.insert(*digest);
        out.push(Output::Telemetry(Telemetry::NotarizedBlockStored {
            round: block.round(),
            digest: *digest,
        }));
        self.relay(
            RelayKey::NotarizedBlock(*digest),
            ProtocolMessage::NotarizedBlock { block: block.clone(), signature: sig.clone() },
            out,
        );
        let events = self.observer.ingest(now, block, sig, &mut |_, _| true);
        self.emit_observer_events(events, out);
    }

    fn emit_observer_events(&mut self, events: Vec<ObserverEvent>, out: &mut Vec<Output>) {
        for ev in events {
            match ev {
                ObserverEvent::ScheduleFinalize { at, round } => {
                    out.push(Output::ScheduleTimer { at, timer: TimerKind::Finalize { round } });
                }
                other => out.push(Output::Telemetry(Telemetry::Observer(other))),
            }
        }
    }

    /// Sign every valid current-round proposal of minimal rank once the
    /// waiting period has elapsed, until the round has a notarization.
    fn notarization_step(&mut self, now: Time, out: &mut Vec<Output>, work: &mut Work) {
        let round = self.round;
        if round == 0
            || now < self.entered_at + self.config.block_time
            || self.nota_seen_rounds.contains(&round)
        {
            return;
        }
        if self.ranking_for(round).is_none() {
            return; // Cannot rank proposals without the round's randomness.
        }
        let candidates: Vec<(Digest, Label)> = self
            .pool
            .round_blocks(round)
            .filter_map(|d| self.pool.get(d).and_then(|b| b.owner().map(|o| (*d, o))))
            .collect();
        let mut min_rank = u64::MAX;
        let mut ranked: Vec<(Digest, u64)> = Vec::new();
        for (d, owner) in candidates {
            let rank = self.rank_of(round, owner).expect("owners are validated");
            min_rank = min_rank.min(rank);
            ranked.push((d, rank));
        }
        if ranked.is_empty() {
            return;
        }
        let Some(info) = self.committee(round) else { return };
        let gid = info.group.id;
        if info.group.share_index(self.id).is_none() {
            return; // Not a notary for this round.
        }
        let Some(key) = self.keys.get(&gid).cloned() else { return };
        for (digest, rank) in ranked {
            if rank != min_rank || self.signed.contains(&digest) {
                continue;
            }
            self.signed.insert(digest);
            let message = notary_message(&digest);
            let share = sign_share(&self.config.params, &message, &key);
            out.push(Output::Telemetry(Telemetry::Signed { round, digest, rank }));
            self.relayed.insert(RelayKey::Signature(digest, share.index));
            out.push(Output::Broadcast(ProtocolMessage::BlockSignature {
                round,
                digest,
                share: share.clone(),
            }));
            self.store_block_signature(now, round, digest, share, out, work);
        }
    }

    /// Store a verified notarization share; assemble at threshold.
    fn store_block_signature(
        &mut self,
        now: Time,
        round: Round,
        digest: Digest,
        share: SignatureShare,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        match self.sig_round.get(&digest) {
            Some(&r) if r != round => return self.invalid("block-signature", out),
            None => {
                self.sig_round.insert(digest, round);
            }
            _ => {}
        }
        let sigs = self.block_sigs.entry(digest).or_default();
        if sigs.contains_key(&share.index) {
            return;
        }
        sigs.insert(share.index, share);
        let t = self.config.threshold;
        if self.pool.is_notarized(&digest) || (sigs.len() as u32) < t {
            return;
        }
        let collected: Vec<SignatureShare> = sigs.values().cloned().collect();
        let value = recover(&self.config.params, t, &collected)
            .expect("verified distinct shares at threshold recover");
        let contributors: Vec<SignatureShare> =
            collected.into_iter().take(t as usize).collect();
        let sig = GroupSignature { value, contributors };
        let sig_id = hash(&sig.encode(&self.config.params));
        self.verified_notas.insert((digest, sig_id));
        out.push(Output::Telemetry(Telemetry::NotarizationAssembled { round, digest }));
        self.accept_notarization(now, round, digest, sig, out, work);
    }

    fn on_block_signature(
        &mut self,
        now: Time,
        sender: Label,
        round: Round,
        digest: Digest,
        share: SignatureShare,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        if round == 0 {
            return self.invalid("block-signature", out);
        }
        if round < self.round {
            return; // Old signatures are dropped.
        }
        if round > self.round {
            let msg = ProtocolMessage::BlockSignature { round, digest, share };
            self.queue_on_round.entry(round).or_default().push((sender, msg));
            return;
        }
        if !self.seeds.contains_key(&(round - 1)) {
            let msg = ProtocolMessage::BlockSignature { round, digest, share };
            return self.queue_on_seed(round - 1, sender, msg);
        }
        if let Some(block) = self.pool.get(&digest) {
            if block.round() != round {
                return self.invalid("block-signature", out);
            }
        }
        let (gid, member) = {
            let info = self.committee(round).expect("seed is present");
            (info.group.id, info.group.member_at_index(share.index))
        };
        if member.is_none() {
            return self.invalid("block-signature", out);
        }
        let pk = self.pk_share(gid, share.index);
        let message = notary_message(&digest);
        if !verify_share(&self.config.params, &message, &pk, &share) {
            return self.invalid("block-signature", out);
        }
        self.relay(
            RelayKey::Signature(digest, share.index),
            ProtocolMessage::BlockSignature { round, digest, share: share.clone() },
            out,
        );
        self.store_block_signature(now, round, digest, share, out, work);
    }

    fn on_notarization(
        &mut self,
        now: Time,
        sender: Label,
        round: Round,
        digest: Digest,
        signature: GroupSignature,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        if round == 0 {
            return;
        }
        if self.pool.is_notarized(&digest) {
            return;
        }
        if round > self.round {
            let msg = ProtocolMessage::Notarization { round, digest, signature };
            self.queue_on_round.entry(round).or_default().push((sender, msg));
            return;
        }
        if !self.seeds.contains_key(&(round - 1)) {
            let msg = ProtocolMessage::Notarization { round, digest, signature };
            return self.queue_on_seed(round - 1, sender, msg);
        }
        if let Some(block) = self.pool.get(&digest) {
            if block.round() != round {
                return self.invalid("notarization", out);
            }
        }
        if !self.check_notarization(round, &digest, &signature, out) {
            return;
        }
        self.accept_notarization(now, round, digest, signature, out, work);
    }

    fn on_notarized_block(
        &mut self,
        now: Time,
        sender: Label,
        block: Block,
        signature: GroupSignature,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        let round = block.round();
        if round == 0 {
            return; // Genesis needs no transport.
        }
        let digest = block.digest(&self.config.params);
        if self.pool.is_notarized(&digest) && self.pool.contains(&digest) {
            return;
        }
        let (prev, owner, payload_ok) = match &block {
            Block::Normal { prev, owner, payload, .. } => {
                (*prev, *owner, self.config.payload_rule.allows(payload))
            }
            Block::Genesis { .. } => unreachable!("round 0 returned above"),
        };
        if !payload_ok || !self.config.universe.contains(&owner) {
            return self.invalid("notarized-block", out);
        }
        // A missing predecessor means this replica is behind: pull the chain.
        if self.pool.get(&prev).is_none() {
            self.request_lineage(sender, prev, out);
        }
        if !self.seeds.contains_key(&round.saturating_sub(1)) {
            let msg = ProtocolMessage::NotarizedBlock { block, signature };
            return self.queue_on_seed(round - 1, sender, msg);
        }
        if !self.check_notarization(round, &digest, &signature, out) {
            return;
        }
        // The carried predecessor notarization verifies with the seed one
        // step earlier, which is known whenever this round's seed is.
        let nota = block.prev_notarization().expect("normal blocks carry one").clone();
        if round >= 2 && !self.seeds.contains_key(&(round - 2)) {
            let msg = ProtocolMessage::NotarizedBlock { block, signature };
            return self.queue_on_seed(round - 2, sender, msg);
        }
        if !self.check_notarization(round - 1, &prev, &nota, out) {
            return;
        }
        if !self.pool.contains(&digest) {
            self.pool.insert(&self.config.params, block.clone());
            out.push(Output::Telemetry(Telemetry::BlockStored { round, digest }));
        }
        self.unlock_block(&digest, work);
        self.accept_notarization(now, round - 1, prev, nota, out, work);
        self.accept_notarization(now, round, digest, signature, out, work);
    }

    fn on_randomness_output(
        &mut self,
        _now: Time,
        sender: Label,
        round: Round,
        signature: GroupSignature,
        out: &mut Vec<Output>,
        work: &mut Work,
    ) {
        if round == 0 {
            return self.invalid("randomness-output", out);
        }
        if self.seeds.contains_key(&round) {
            return;
        }
        if !self.seeds.contains_key(&(round - 1)) {
            let msg = ProtocolMessage::RandomnessOutput { round, signature };
            return self.queue_on_seed(round - 1, sender, msg);
        }
        let prev_seed = self.seeds[&(round - 1)];
        let info = self.config.committee_for(&prev_seed);
        let vvec = info.vvec.clone();
        let message = beacon_message(round, &prev_seed);
        if !verify_group(&self.config.params, self.config.threshold, &vvec, &message, &signature)
        {
            return self.invalid("randomness-output", out);
        }
        self.relay(
            RelayKey::Randomness(round),
            ProtocolMessage::RandomnessOutput { round, signature: signature.clone() },
            out,
        );
        self.learn_randomness(round, signature, out, work);
    }
}
