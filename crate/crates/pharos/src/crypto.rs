//! Hashing, the hash-based PRG, and seeded permutations.
//!
//! Everything that looks random in the protocol is derived deterministically
//! from 32-octet seeds through these three primitives, so two replicas holding
//! the same seed always derive the same ranking, the same groups and the same
//! committee. The concrete hash is recorded in [`HASH_FUNCTION`] and pinned by
//! frozen test vectors.

use crate::Label;

use sha2::{Digest as _, Sha256};

/// The hash behind [`hash`], [`prg`] and every digest in the protocol.
pub const HASH_FUNCTION: &str = "SHA-256";

/// Width of digests and seeds in octets.
pub const DIGEST_LEN: usize = 32;

/// Errors from the primitives in this module.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("cannot permute an empty universe")]
    EmptyUniverse,
    #[error("universe contains duplicate label {0}")]
    DuplicateLabel(Label),
}

/// A 32-octet hash output identifying a message or block.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

/// A 32-octet randomness seed (beacon output, PRG output).
///
/// Same shape as [`Digest`] but kept as a distinct type: digests name
/// artifacts, seeds parameterize sampling.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seed(pub [u8; DIGEST_LEN]);

macro_rules! impl_hex_fmt {
    ($ty:ident) => {
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", hex::encode(self.0))
            }
        }

        impl std::fmt::Debug for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}({}..)", stringify!($ty), &hex::encode(self.0)[..8])
            }
        }

        impl $ty {
            /// Parse from a 64-char hex string.
            pub fn from_hex(s: &str) -> Option<$ty> {
                let bytes = hex::decode(s).ok()?;
                let arr: [u8; DIGEST_LEN] = bytes.try_into().ok()?;
                Some($ty(arr))
            }
        }
    };
}

impl_hex_fmt!(Digest);
impl_hex_fmt!(Seed);

impl Seed {
    /// The seed's value as an unsigned big-endian integer, reduced mod `m`.
    ///
    /// Used for committee selection and for permutation swap indices. Computed
    /// by Horner folding, which equals the 256-bit integer reduction.
    pub fn value_mod(&self, m: u64) -> u64 {
        assert!(m > 0, "modulus must be positive");
        let m128 = m as u128;
        let mut acc: u128 = 0;
        for &b in &self.0 {
            acc = (acc * 256 + b as u128) % m128;
        }
        acc as u64
    }
}

impl From<Digest> for Seed {
    fn from(d: Digest) -> Seed {
        Seed(d.0)
    }
}

/// Big-endian 8-octet encoding of an integer, the counter encoding used by
/// [`prg`] and the canonical integer encoding throughout.
pub fn encode64(i: u64) -> [u8; 8] {
    i.to_be_bytes()
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(data);
    Digest(h.finalize().into())
}

/// Hash of the concatenation of several byte slices.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// The hash-based PRG: `prg(seed, i) = hash(seed || encode64(i))`.
///
/// Distinct counters give independent-looking seeds from one parent seed.
pub fn prg(seed: &Seed, i: u64) -> Seed {
    Seed(hash_parts(&[&seed.0, &encode64(i)]).0)
}

/// A seeded permutation of a replica universe.
///
/// Position 0 is the highest priority (rank 0). The permutation is a bijection
/// from positions to labels; [`Permutation::rank_of`] is its inverse.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Permutation {
    order: Vec<Label>,
}

impl Permutation {
    /// Labels in permuted order, rank 0 first.
    pub fn as_slice(&self) -> &[Label] {
        &self.order
    }

    /// The label at `rank`.
    pub fn label_at(&self, rank: usize) -> Option<Label> {
        self.order.get(rank).copied()
    }

    /// Zero-based rank of `label`, or `None` if it is not in the universe.
    pub fn rank_of(&self, label: Label) -> Option<u32> {
        self.order.iter().position(|&l| l == label).map(|p| p as u32)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Fisher-Yates shuffle of `universe` keyed by `seed`.
///
/// Swap indices are derived per step: the j-th swap partner (j running from
/// `|U|-1` down to 1) is `prg(seed, j) mod (j+1)`. Labels must be distinct;
/// the universe must be non-empty. The input order of `universe` is part of
/// the derivation, so callers pass the canonical (sorted) roster.
pub fn permutation(universe: &[Label], seed: &Seed) -> Result<Permutation, CryptoError> {
    if universe.is_empty() {
        return Err(CryptoError::EmptyUniverse);
    }
    let mut seen = std::collections::BTreeSet::new();
    for &l in universe {
        if !seen.insert(l) {
            return Err(CryptoError::DuplicateLabel(l));
        }
    }
    let mut order = universe.to_vec();
    for j in (1..order.len()).rev() {
        let k = prg(seed, j as u64).value_mod(j as u64 + 1) as usize;
        order.swap(j, k);
    }
    Ok(Permutation { order })
}
