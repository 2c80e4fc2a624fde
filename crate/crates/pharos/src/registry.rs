//! Epoch segmentation and open participation with delayed activity.
//!
//! Rounds are segmented into non-overlapping epochs of length l. Replicas
//! and groups register through entries carried in block payloads; an entry
//! submitted in epoch e becomes active in epoch e+2, leaving a gap of at
//! least one full epoch between registration and activity. Groups expire
//! automatically after a configured number of epochs. Every query runs over
//! a finalized-chain snapshot and is a pure function of it, so all replicas
//! compute identical answers.
//!
//! Endorsements are opaque stubs checked through a pluggable validator hook:
//! the Sybil-resistance backend (stake, work, authority) is interchangeable
//! and none of its details are consensus-critical.

use crate::committee::{group_derive, Group};
use crate::crypto::{hash, Digest, Seed};
use crate::encoding::{DecodeError, Decoder, Encoder};
use crate::{Label, Round};

use std::collections::BTreeSet;

pub const DEFAULT_EPOCH_LENGTH: u64 = 20;
pub const DEFAULT_GROUP_LIFETIME: u64 = 4;
pub const DEFAULT_M_MAX: u64 = 4;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("registry not final: epoch key frame at round {needed} exceeds finalized round {finalized}")]
    NotFinal { needed: Round, finalized: Round },
    #[error("epoch length {l} must be at least growth constant {k} + 2")]
    EpochTooShort { l: u64, k: u64 },
    #[error("configuration values must be positive")]
    BadConfig,
}

/// Rejection reasons for a group registration.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("distributed key generation failed")]
    DkgFailed,
    #[error("candidate roster does not match the epoch's derivation")]
    WrongCandidate,
    #[error("candidate index {j} exceeds m_max {m_max}")]
    IndexTooLarge { j: u64, m_max: u64 },
    #[error("endorsement quorum missed: {got} of {need} required signers")]
    QuorumMissed { got: usize, need: usize },
    #[error("inclusion deadline passed: submitted in epoch {submitted}, included in epoch {included}")]
    DeadlinePassed { submitted: u64, included: u64 },
}

/// Epoch parameters: length l in rounds, group lifetime in epochs, and the
/// cap on candidate group indices.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EpochConfig {
    pub epoch_length: u64,
    pub group_lifetime: u64,
    pub m_max: u64,
}

impl Default for EpochConfig {
    fn default() -> EpochConfig {
        EpochConfig {
            epoch_length: DEFAULT_EPOCH_LENGTH,
            group_lifetime: DEFAULT_GROUP_LIFETIME,
            m_max: DEFAULT_M_MAX,
        }
    }
}

impl EpochConfig {
    /// The epoch length must clear the chain-growth constant with margin so
    /// a key frame is finalized before the epoch needing it begins.
    pub fn validate(&self, growth_k: u64) -> Result<(), RegistryError> {
        if self.epoch_length == 0 || self.group_lifetime == 0 || self.m_max == 0 {
            return Err(RegistryError::BadConfig);
        }
        if self.epoch_length < growth_k + 2 {
            return Err(RegistryError::EpochTooShort { l: self.epoch_length, k: growth_k });
        }
        Ok(())
    }

    pub fn epoch_of(&self, round: Round) -> u64 {
        round / self.epoch_length
    }

    /// The epoch's first round; its block is the epoch's key frame.
    pub fn start_round(&self, epoch: u64) -> Round {
        epoch * self.epoch_length
    }
}

/// Opaque Sybil-resistance evidence. Content is backend-specific.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Endorsement(pub Vec<u8>);

/// The hook deciding whether an endorsement is acceptable.
pub type EndorsementValidator<'a> = &'a dyn Fn(&Endorsement) -> bool;

/// The default stub backend: every endorsement is acceptable.
pub fn accept_all(_: &Endorsement) -> bool {
    true
}

/// A registration event carried in a block payload.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RegistryEntry {
    ReplicaJoin { label: Label, public_key: Vec<u8>, epoch: u64, endorsement: Endorsement },
    ReplicaLeave { label: Label, epoch: u64, endorsement: Endorsement },
    /// The registration tuple (e, j, pk_G) plus roster and the members that
    /// signed it.
    GroupJoin {
        epoch: u64,
        index: u64,
        group_key: Vec<u8>,
        members: Vec<Label>,
        endorsers: Vec<Label>,
        endorsement: Endorsement,
    },
}

impl RegistryEntry {
    /// The epoch the entry was submitted in; activity starts two later.
    pub fn epoch_submitted(&self) -> u64 {
        match self {
            RegistryEntry::ReplicaJoin { epoch, .. } => *epoch,
            RegistryEntry::ReplicaLeave { epoch, .. } => *epoch,
            RegistryEntry::GroupJoin { epoch, .. } => *epoch,
        }
    }

    pub fn activation_epoch(&self) -> u64 {
        self.epoch_submitted() + 2
    }
}

const TAG_REPLICA_JOIN: u8 = 0x20;
const TAG_REPLICA_LEAVE: u8 = 0x21;
const TAG_GROUP_JOIN: u8 = 0x22;

fn encode_labels(e: &mut Encoder, labels: &[Label]) {
    e.u64(labels.len() as u64);
    for l in labels {
        e.u64(l.0);
    }
}

fn decode_labels(d: &mut Decoder, field: &'static str) -> Result<Vec<Label>, DecodeError> {
    let n = d.u64(field)?;
    (0..n).map(|_| Ok(Label(d.u64(field)?))).collect()
}

/// Canonical encoding of an entry list for embedding in block payloads.
pub fn encode_entries(entries: &[RegistryEntry]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.u64(entries.len() as u64);
    for entry in entries {
        match entry {
            RegistryEntry::ReplicaJoin { label, public_key, epoch, endorsement } => {
                e.u8(TAG_REPLICA_JOIN)
                    .u64(label.0)
                    .u64(*epoch)
                    .var(public_key)
                    .var(&endorsement.0);
            }
            RegistryEntry::ReplicaLeave { label, epoch, endorsement } => {
                e.u8(TAG_REPLICA_LEAVE).u64(label.0).u64(*epoch).var(&endorsement.0);
            }
            RegistryEntry::GroupJoin {
                epoch,
                index,
                group_key,
                members,
                endorsers,
                endorsement,
            } => {
                e.u8(TAG_GROUP_JOIN).u64(*epoch).u64(*index).var(group_key);
                encode_labels(&mut e, members);
                encode_labels(&mut e, endorsers);
                e.var(&endorsement.0);
            }
        }
    }
    e.finish()
}

pub fn decode_entries(bytes: &[u8]) -> Result<Vec<RegistryEntry>, DecodeError> {
    let mut d = Decoder::new(bytes);
    let n = d.u64("entry count")?;
    let mut entries = Vec::new();
    for _ in 0..n {
        let entry = match d.u8("entry tag")? {
            TAG_REPLICA_JOIN => RegistryEntry::ReplicaJoin {
                label: Label(d.u64("label")?),
                epoch: d.u64("epoch")?,
                public_key: d.var("public key")?.to_vec(),
                endorsement: Endorsement(d.var("endorsement")?.to_vec()),
            },
            TAG_REPLICA_LEAVE => RegistryEntry::ReplicaLeave {
                label: Label(d.u64("label")?),
                epoch: d.u64("epoch")?,
                endorsement: Endorsement(d.var("endorsement")?.to_vec()),
            },
            TAG_GROUP_JOIN => RegistryEntry::GroupJoin {
                epoch: d.u64("epoch")?,
                index: d.u64("index")?,
                group_key: d.var("group key")?.to_vec(),
                members: decode_labels(&mut d, "members")?,
                endorsers: decode_labels(&mut d, "endorsers")?,
                endorsement: Endorsement(d.var("endorsement")?.to_vec()),
            },
            tag => return Err(DecodeError::BadTag { field: "entry tag", tag }),
        };
        entries.push(entry);
    }
    d.finish()?;
    Ok(entries)
}

/// The genesis-configured participants, active from epoch 0 and exempt from
/// expiry: rotation replaces them by registering successors.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct GenesisRegistry {
    pub replicas: Vec<Label>,
    pub groups: Vec<(u64, Vec<Label>)>,
}

/// A finalized prefix carrying registry entries: ascending (round, entries)
/// pairs for rounds whose blocks contained any, plus the highest finalized
/// round of the snapshot.
#[derive(Clone, Copy, Debug)]
pub struct ChainSnapshot<'a> {
    pub entries: &'a [(Round, Vec<RegistryEntry>)],
    pub finalized_through: Round,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActiveGroup {
    pub index: u64,
    pub members: Vec<Label>,
    pub group_key: Vec<u8>,
    /// First epoch of activity.
    pub activation_epoch: u64,
    /// First epoch of inactivity; genesis groups never expire.
    pub expires_epoch: Option<u64>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActiveSet {
    pub epoch: u64,
    pub replicas: Vec<Label>,
    pub groups: Vec<ActiveGroup>,
}

fn super_majority(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

/// Whether a group-join entry is well-formed: endorsers are distinct
/// members, meet the super-majority quorum, and the endorsement validates.
fn group_join_valid(
    members: &[Label],
    endorsers: &[Label],
    endorsement: &Endorsement,
    validate: EndorsementValidator,
) -> bool {
    if members.is_empty() || !validate(endorsement) {
        return false;
    }
    let roster: BTreeSet<Label> = members.iter().copied().collect();
    let distinct: BTreeSet<Label> = endorsers.iter().copied().collect();
    distinct.len() == endorsers.len()
        && distinct.iter().all(|l| roster.contains(l))
        && distinct.len() >= super_majority(members.len())
}

/// All replicas and groups active at round `round`: genesis participants
/// plus every registration submitted in an epoch at most e-2 that has not
/// been de-registered or expired. Fails when the chain is not finalized
/// through the key frame of `round`'s epoch. Entries included outside their
/// submission epoch are ignored (they missed the inclusion deadline).
pub fn active_set(
    config: &EpochConfig,
    genesis: &GenesisRegistry,
    chain: ChainSnapshot,
    round: Round,
    validate: EndorsementValidator,
) -> Result<ActiveSet, RegistryError> {
    let epoch = config.epoch_of(round);
    let key_frame = config.start_round(epoch);
    if chain.finalized_through < key_frame {
        return Err(RegistryError::NotFinal {
            needed: key_frame,
            finalized: chain.finalized_through,
        });
    }

    let mut replicas: BTreeSet<Label> = genesis.replicas.iter().copied().collect();
    let mut groups: Vec<ActiveGroup> = genesis
        .groups
        .iter()
        .map(|(index, members)| ActiveGroup {
            index: *index,
            members: members.clone(),
            group_key: Vec::new(),
            activation_epoch: 0,
            expires_epoch: None,
        })
        .collect();

    for (included_round, entries) in chain.entries {
        let included_epoch = config.epoch_of(*included_round);
        for entry in entries {
            if entry.epoch_submitted() != included_epoch {
                continue; // Missed the inclusion deadline; never valid.
            }
            if entry.activation_epoch() > epoch {
                continue; // Not yet active at the queried round.
            }
            match entry {
                RegistryEntry::ReplicaJoin { label, endorsement, .. } => {
                    if validate(endorsement) {
                        replicas.insert(*label);
                    }
                }
                RegistryEntry::ReplicaLeave { label, endorsement, .. } => {
                    if validate(endorsement) {
                        replicas.remove(label);
                    }
                }
                RegistryEntry::GroupJoin {
                    index,
                    group_key,
                    members,
                    endorsers,
                    endorsement,
                    ..
                } => {
                    if !group_join_valid(members, endorsers, endorsement, validate) {
                        continue;
                    }
                    let activation = entry.activation_epoch();
                    let expires = activation + config.group_lifetime;
                    if epoch < expires {
                        groups.push(ActiveGroup {
                            index: *index,
                            members: members.clone(),
                            group_key: group_key.clone(),
                            activation_epoch: activation,
                            expires_epoch: Some(expires),
                        });
                    }
                }
            }
        }
    }

    Ok(ActiveSet { epoch, replicas: replicas.into_iter().collect(), groups })
}

/// A candidate group's distilled key-generation outcome: the resulting
/// public key and the members willing to sign the registration tuple.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DkgSummary {
    pub succeeded: bool,
    pub group_key: Vec<u8>,
    pub endorsers: Vec<Label>,
}

/// Build the registration entry for candidate group `j` of epoch `epoch`.
/// `epoch_seed` is the randomness of the epoch's first round, which fixes
/// the candidate rosters; `universe` and `n` are the derivation inputs.
pub fn register_group(
    config: &EpochConfig,
    epoch_seed: &Seed,
    universe: &[Label],
    n: u32,
    j: u64,
    epoch: u64,
    candidate: &Group,
    dkg: &DkgSummary,
) -> Result<RegistryEntry, Rejection> {
    if j > config.m_max {
        return Err(Rejection::IndexTooLarge { j, m_max: config.m_max });
    }
    let expected = group_derive(epoch_seed, j, universe, n)
        .map_err(|_| Rejection::WrongCandidate)?;
    if expected != *candidate {
        return Err(Rejection::WrongCandidate);
    }
    if !dkg.succeeded {
        return Err(Rejection::DkgFailed);
    }
    let distinct: BTreeSet<Label> = dkg.endorsers.iter().copied().collect();
    let roster: BTreeSet<Label> = candidate.members.iter().copied().collect();
    let got = distinct.iter().filter(|l| roster.contains(l)).count();
    let need = super_majority(candidate.members.len());
    if got < need {
        return Err(Rejection::QuorumMissed { got, need });
    }
    Ok(RegistryEntry::GroupJoin {
        epoch,
        index: j,
        group_key: dkg.group_key.clone(),
        members: candidate.members.clone(),
        endorsers: dkg.endorsers.clone(),
        endorsement: Endorsement(Vec::new()),
    })
}

/// Check an entry against its inclusion round: valid only inside the epoch
/// it was submitted in.
pub fn validate_inclusion(
    config: &EpochConfig,
    entry: &RegistryEntry,
    included_round: Round,
) -> Result<(), Rejection> {
    let included = config.epoch_of(included_round);
    let submitted = entry.epoch_submitted();
    if included != submitted {
        return Err(Rejection::DeadlinePassed { submitted, included });
    }
    Ok(())
}

/// The key frame of an epoch: a digest-committed summary of every entry in
/// the preceding epoch's blocks. A deterministic function of the finalized
/// chain, so all replicas compute the same digest.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyFrame {
    pub epoch: u64,
    pub summary: Vec<(Round, RegistryEntry)>,
    pub digest: Digest,
}

pub fn build_key_frame(config: &EpochConfig, chain: ChainSnapshot, epoch: u64) -> KeyFrame {
    let mut summary: Vec<(Round, RegistryEntry)> = Vec::new();
    if epoch > 0 {
        let prev = epoch - 1;
        for (round, entries) in chain.entries {
            if config.epoch_of(*round) == prev {
                for entry in entries {
                    summary.push((*round, entry.clone()));
                }
            }
        }
    }
    let mut e = Encoder::new();
    e.u64(epoch);
    e.u64(summary.len() as u64);
    for (round, entry) in &summary {
        e.u64(*round);
        e.var(&encode_entries(std::slice::from_ref(entry)));
    }
    let digest = hash(&e.finish());
    KeyFrame { epoch, summary, digest }
}
