//! Blocks, chains, ranked weights, and fork choice.
//!
//! A round-r block references its predecessor by digest and carries the
//! predecessor's notarization, so possession of a block proves a notarized
//! lineage behind it. Chains are compared by total weight: a block proposed
//! by the rank-w replica of its round weighs `2^-w`, and a chain's weight is
//! the sum over its blocks. Fork choice picks the heaviest notarized chain,
//! breaking ties toward the smaller head digest.

use crate::crypto::{encode64, hash, permutation, CryptoError, Digest, Seed};
use crate::encoding::{DecodeError, Decoder, Encoder};
use crate::threshold::{GroupSignature, SchemeParams};
use crate::{Label, Round};

use num_bigint::BigUint;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};

/// Domain separator for beacon share messages.
pub const BEACON_DOMAIN: &[u8] = b"BEACON";
/// Domain separator for notarization share messages.
pub const NOTARY_DOMAIN: &[u8] = b"NOTARY";

/// Seed text for the round-0 randomness: the chain starts from a public
/// nothing-up-my-sleeve constant.
pub const GENESIS_SEED_TEXT: &[u8] = b"DFINITY";

const GENESIS_TAG: u8 = 0x00;
const NORMAL_TAG: u8 = 0x01;

/// The round-0 randomness seed.
pub fn genesis_seed() -> Seed {
    Seed::from(hash(GENESIS_SEED_TEXT))
}

/// The unique round-0 block.
pub fn genesis_block() -> Block {
    Block::Genesis { payload: b"genesis".to_vec() }
}

/// The message a committee signs to produce the round-r beacon output:
/// the round number bound to the previous seed.
pub fn beacon_message(round: Round, prev: &Seed) -> Vec<u8> {
    let mut m = Vec::with_capacity(BEACON_DOMAIN.len() + 8 + 32);
    m.extend_from_slice(BEACON_DOMAIN);
    m.extend_from_slice(&encode64(round));
    m.extend_from_slice(&prev.0);
    m
}

/// The message a committee signs to notarize a block.
pub fn notary_message(digest: &Digest) -> Vec<u8> {
    let mut m = Vec::with_capacity(NOTARY_DOMAIN.len() + 32);
    m.extend_from_slice(NOTARY_DOMAIN);
    m.extend_from_slice(&digest.0);
    m
}

/// A block. Normal blocks carry their predecessor's notarization; the genesis
/// block is notarized like any other, so every reference is backed by a real
/// group signature.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Block {
    Genesis {
        payload: Vec<u8>,
    },
    Normal {
        prev: Digest,
        round: Round,
        prev_notarization: GroupSignature,
        payload: Vec<u8>,
        owner: Label,
    },
}

impl Block {
    pub fn round(&self) -> Round {
        match self {
            Block::Genesis { .. } => 0,
            Block::Normal { round, .. } => *round,
        }
    }

    pub fn prev(&self) -> Option<&Digest> {
        match self {
            Block::Genesis { .. } => None,
            Block::Normal { prev, .. } => Some(prev),
        }
    }

    pub fn owner(&self) -> Option<Label> {
        match self {
            Block::Genesis { .. } => None,
            Block::Normal { owner, .. } => Some(*owner),
        }
    }

    pub fn payload(&self) -> &[u8] {
        match self {
            Block::Genesis { payload } => payload,
            Block::Normal { payload, .. } => payload,
        }
    }

    pub fn prev_notarization(&self) -> Option<&GroupSignature> {
        match self {
            Block::Genesis { .. } => None,
            Block::Normal { prev_notarization, .. } => Some(prev_notarization),
        }
    }

    /// Canonical encoding: tag byte, then fields in declaration order.
    pub fn encode(&self, params: &SchemeParams) -> Vec<u8> {
        let mut e = Encoder::new();
        match self {
            Block::Genesis { payload } => {
                e.u8(GENESIS_TAG).var(payload);
            }
            Block::Normal { prev, round, prev_notarization, payload, owner } => {
                e.u8(NORMAL_TAG)
                    .digest(prev)
                    .u64(*round)
                    .var(&prev_notarization.encode(params))
                    .var(payload)
                    .u64(owner.0);
            }
        }
        e.finish()
    }

    pub fn decode(params: &SchemeParams, bytes: &[u8]) -> Result<Block, DecodeError> {
        let mut d = Decoder::new(bytes);
        let block = match d.u8("block tag")? {
            GENESIS_TAG => Block::Genesis { payload: d.var("payload")?.to_vec() },
            NORMAL_TAG => {
                let prev = d.digest("prev")?;
                let round = d.u64("round")?;
                let nota_bytes = d.var("prev notarization")?;
                let mut nd = Decoder::new(nota_bytes);
                let prev_notarization = GroupSignature::decode(params, &mut nd)?;
                nd.finish()?;
                let payload = d.var("payload")?.to_vec();
                let owner = Label(d.u64("owner")?);
                Block::Normal { prev, round, prev_notarization, payload, owner }
            }
            tag => return Err(DecodeError::BadTag { field: "block tag", tag }),
        };
        d.finish()?;
        Ok(block)
    }

    /// The block's identity: the hash of its canonical encoding.
    pub fn digest(&self, params: &SchemeParams) -> Digest {
        hash(&self.encode(params))
    }
}

/// The round-r ranking of the universe: the permutation drawn from the round
/// seed. A replica's rank is its position; rank 0 proposes the heaviest
/// block.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ranking {
    order: Vec<Label>,
    ranks: BTreeMap<Label, u64>,
}

/// Rank the universe by the round seed.
pub fn ranking(universe: &[Label], xi: &Seed) -> Result<Ranking, CryptoError> {
    let perm = permutation(universe, xi)?;
    let order = perm.as_slice().to_vec();
    let ranks = order.iter().enumerate().map(|(i, &l)| (l, i as u64)).collect();
    Ok(Ranking { order, ranks })
}

impl Ranking {
    pub fn rank_of(&self, label: Label) -> Option<u64> {
        self.ranks.get(&label).copied()
    }

    pub fn label_at_rank(&self, rank: u64) -> Option<Label> {
        self.order.get(rank as usize).copied()
    }

    pub fn order(&self) -> &[Label] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// An exact dyadic rational `num / 2^shift`, closed under adding block
/// weights `2^-rank`. Kept normalized (numerator odd or zero) so equality is
/// structural.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Weight {
    num: BigUint,
    shift: u32,
}

impl Weight {
    pub fn zero() -> Weight {
        Weight { num: BigUint::zero(), shift: 0 }
    }

    /// Add `2^-rank`.
    pub fn add_rank(&mut self, rank: u64) {
        let rank = u32::try_from(rank).expect("rank exceeds weight range");
        let shift = self.shift.max(rank);
        let mut num = &self.num << (shift - self.shift);
        num += BigUint::from(1u32) << (shift - rank);
        *self = Weight { num, shift };
        self.normalize();
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.shift = 0;
            return;
        }
        while self.shift > 0 && self.num.trailing_zeros().unwrap_or(0) > 0 {
            self.num >>= 1;
            self.shift -= 1;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Weight) -> std::cmp::Ordering {
        (&self.num << other.shift).cmp(&(&other.num << self.shift))
    }
}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Weight) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.shift == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.shift)
        }
    }
}

/// The weight of a block proposed by the rank-w replica of its round.
pub fn block_weight(rank: u64) -> Weight {
    let mut w = Weight::zero();
    w.add_rank(rank);
    w
}

/// A store of blocks and their notarizations, keyed by digest. Insertion is
/// idempotent; validation is the caller's job (it needs round context the
/// pool does not have).
#[derive(Clone, Debug)]
pub struct BlockPool {
    genesis: Digest,
    blocks: BTreeMap<Digest, Block>,
    by_round: BTreeMap<Round, BTreeSet<Digest>>,
    notarized: BTreeMap<Digest, GroupSignature>,
}

impl BlockPool {
    pub fn new(params: &SchemeParams) -> BlockPool {
        let g = genesis_block();
        let d = g.digest(params);
        let mut pool = BlockPool {
            genesis: d,
            blocks: BTreeMap::new(),
            by_round: BTreeMap::new(),
            notarized: BTreeMap::new(),
        };
        pool.blocks.insert(d, g);
        pool.by_round.entry(0).or_default().insert(d);
        pool
    }

    pub fn genesis(&self) -> &Digest {
        &self.genesis
    }

    /// Insert a block, returning its digest. Re-inserting is a no-op.
    pub fn insert(&mut self, params: &SchemeParams, block: Block) -> Digest {
        let d = block.digest(params);
        if self.blocks.insert(d, block).is_none() {
            let round = self.blocks[&d].round();
            self.by_round.entry(round).or_default().insert(d);
        }
        d
    }

    /// Record a block's own notarization. The first recorded signature for a
    /// digest wins; any valid one serves.
    pub fn set_notarized(&mut self, digest: Digest, sig: GroupSignature) {
        self.notarized.entry(digest).or_insert(sig);
    }

    pub fn get(&self, digest: &Digest) -> Option<&Block> {
        self.blocks.get(digest)
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.blocks.contains_key(digest)
    }

    pub fn notarization_of(&self, digest: &Digest) -> Option<&GroupSignature> {
        self.notarized.get(digest)
    }

    pub fn is_notarized(&self, digest: &Digest) -> bool {
        self.notarized.contains_key(digest)
    }

    /// Digests of all known blocks at a round.
    pub fn round_blocks(&self, round: Round) -> impl Iterator<Item = &Digest> {
        self.by_round.get(&round).into_iter().flatten()
    }

    /// Digests of notarized blocks at a round.
    pub fn notarized_at(&self, round: Round) -> impl Iterator<Item = &Digest> {
        self.round_blocks(round).filter(|d| self.notarized.contains_key(*d))
    }

    /// Walk from `head` back to genesis. `None` if the lineage has a gap.
    pub fn path_from_genesis(&self, head: &Digest) -> Option<Vec<Digest>> {
        let mut path = vec![*head];
        let mut cur = *head;
        loop {
            let block = self.blocks.get(&cur)?;
            match block.prev() {
                None => break,
                Some(prev) => {
                    path.push(*prev);
                    cur = *prev;
                }
            }
        }
        path.reverse();
        Some(path)
    }

    /// Whether every ancestor of `head` is present down to genesis.
    pub fn has_lineage(&self, head: &Digest) -> bool {
        self.path_from_genesis(head).is_some()
    }

    /// The first ancestor missing from the pool on the walk from `head`, if
    /// any. Drives lineage pulls after partitions heal.
    pub fn missing_ancestor(&self, head: &Digest) -> Option<Digest> {
        let mut cur = *head;
        loop {
            match self.blocks.get(&cur) {
                None => return Some(cur),
                Some(b) => match b.prev() {
                    None => return None,
                    Some(prev) => cur = *prev,
                },
            }
        }
    }

    /// Total weight of the chain ending at `head`. Genesis weighs nothing.
    /// `rank_of(round, owner)` supplies each block owner's rank under that
    /// round's seed. `None` if the lineage has a gap.
    pub fn chain_weight(
        &self,
        head: &Digest,
        rank_of: &mut impl FnMut(Round, Label) -> u64,
    ) -> Option<Weight> {
        let path = self.path_from_genesis(head)?;
        let mut w = Weight::zero();
        for d in &path {
            let b = &self.blocks[d];
            if let Some(owner) = b.owner() {
                w.add_rank(rank_of(b.round(), owner));
            }
        }
        Some(w)
    }

    /// Fork choice: among notarized blocks at `round` with complete lineage,
    /// the head of the heaviest chain; ties break toward the smaller digest.
    pub fn heaviest_notarized_head(
        &self,
        round: Round,
        rank_of: &mut impl FnMut(Round, Label) -> u64,
    ) -> Option<Digest> {
        let mut best: Option<(Weight, Digest)> = None;
        let candidates: Vec<Digest> = self.notarized_at(round).copied().collect();
        for d in candidates {
            let Some(w) = self.chain_weight(&d, rank_of) else { continue };
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

    /// The longest common prefix of the chains ending at `heads`, as digests
    /// from genesis. `None` if `heads` is empty or any lineage has a gap.
    pub fn common_prefix(&self, heads: &[Digest]) -> Option<Vec<Digest>> {
        let mut paths = Vec::with_capacity(heads.len());
        for h in heads {
            paths.push(self.path_from_genesis(h)?);
        }
        let first = paths.first()?;
        let mut n = first.len();
        for p in &paths[1..] {
            n = n.min(p.len());
            while n > 0 && p[..n] != first[..n] {
                n -= 1;
            }
        }
        Some(first[..n].to_vec())
    }
}
