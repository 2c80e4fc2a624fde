//! Joint-Feldman distributed key generation.
//!
//! Every member deals a random degree-(t-1) polynomial: it broadcasts Feldman
//! commitments to the coefficients and sends each member its evaluation.
//! Shares are checked against the commitments; one complaint round
//! disqualifies any dealer with a failed check. The group key material is the
//! component-wise product of the qualified commitment vectors, and each
//! member's secret share is the sum of its qualified shares — so no single
//! party ever knows the group secret.
//!
//! Simulation grade: the transcript is a plain value computed by the caller,
//! with dealings (including share maps and polynomials) fully inspectable.
//! A real deployment would send shares over private channels; here the
//! openness is what lets tests interpolate the group secret independently.

use super::{SchemeParams, SecretKeyShare, VerificationVector};
use crate::crypto::{prg, Seed};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// DKG failure: malformed transcript or not enough honest dealers.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum DkgError {
    #[error("dealing from dealer {0} has wrong commitment count")]
    WrongCommitmentCount(u64),
    #[error("dealing from dealer {dealer} is missing a share for member {member}")]
    MissingShare { dealer: u64, member: u64 },
    #[error("duplicate dealing from dealer {0}")]
    DuplicateDealer(u64),
    #[error("dealer index {0} out of range")]
    BadDealerIndex(u64),
    #[error("only {got} qualified dealers, need at least {need}")]
    TooFewQualified { need: u32, got: usize },
}

/// A polynomial over Z_q, low-order coefficient first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polynomial {
    pub coefficients: Vec<BigUint>,
}

impl Polynomial {
    /// Derive a degree-(t-1) polynomial from a seed: coefficient k is
    /// `prg(seed, k) mod q`.
    pub fn from_seed(params: &SchemeParams, t: u32, seed: &Seed) -> Polynomial {
        let coefficients = (0..t as u64)
            .map(|k| BigUint::from_bytes_be(&prg(seed, k).0) % params.q())
            .collect();
        Polynomial { coefficients }
    }

    /// Evaluate at integer `x` (mod q).
    pub fn eval(&self, params: &SchemeParams, x: u64) -> BigUint {
        let q = params.q();
        let xb = BigUint::from(x);
        let mut acc = BigUint::zero();
        let mut xpow = BigUint::one();
        for c in &self.coefficients {
            acc = (acc + c * &xpow) % q;
            xpow = xpow * &xb % q;
        }
        acc
    }

    /// The constant term, the dealer's contribution to the group secret.
    pub fn constant(&self) -> &BigUint {
        &self.coefficients[0]
    }
}

/// One dealer's broadcast: commitments plus the per-member share map.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Dealing {
    /// Dealer's 1-based member index.
    pub dealer_index: u64,
    /// Feldman commitments `g^{a_k}`.
    pub commitments: Vec<BigUint>,
    /// Member index -> polynomial evaluation. Private channel in a real
    /// network; open here for transcript-level testing.
    pub shares: BTreeMap<u64, BigUint>,
    /// The dealt polynomial, retained for transcript inspection.
    pub polynomial: Polynomial,
}

impl Dealing {
    /// Deal for a group of `n` members with threshold `t`.
    pub fn deal(params: &SchemeParams, t: u32, n: u32, dealer_index: u64, seed: &Seed) -> Dealing {
        let polynomial = Polynomial::from_seed(params, t, seed);
        let commitments = polynomial
            .coefficients
            .iter()
            .map(|c| params.g().modpow(c, params.p()))
            .collect();
        let shares = (1..=n as u64).map(|i| (i, polynomial.eval(params, i))).collect();
        Dealing { dealer_index, commitments, shares, polynomial }
    }

    /// Feldman check: `g^{share} == prod_k commitments[k]^(index^k)`.
    pub fn share_is_valid(&self, params: &SchemeParams, index: u64, share: &BigUint) -> bool {
        let p = params.p();
        let idx = BigUint::from(index);
        let mut ipow = BigUint::one();
        let mut expect = BigUint::one();
        for c in &self.commitments {
            expect = expect * c.modpow(&ipow, p) % p;
            ipow *= &idx;
        }
        params.g().modpow(share, p) == expect
    }
}

/// A justified complaint recorded during aggregation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Complaint {
    pub complainer: u64,
    pub dealer: u64,
}

/// The aggregated outcome: group key material and per-member shares.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DkgOutcome {
    pub vvec: VerificationVector,
    pub shares: BTreeMap<u64, SecretKeyShare>,
    pub qualified: Vec<u64>,
    pub disqualified: Vec<u64>,
    pub complaints: Vec<Complaint>,
}

/// Honest full transcript: every member deals, dealer i seeded by
/// `prg(seed, i)`.
pub fn deal_all(params: &SchemeParams, t: u32, n: u32, seed: &Seed) -> Vec<Dealing> {
    (1..=n as u64).map(|i| Dealing::deal(params, t, n, i, &prg(seed, i))).collect()
}

/// Run the verification/complaint round and aggregate qualified dealings.
///
/// Every member checks its share from every dealing; a dealer with any failed
/// check is disqualified. Errors if fewer than `t` dealers remain: below that
/// the group secret would be recoverable by fewer than t colluders.
pub fn run_dkg(
    params: &SchemeParams,
    t: u32,
    n: u32,
    dealings: &[Dealing],
) -> Result<DkgOutcome, DkgError> {
    let mut by_dealer: BTreeMap<u64, &Dealing> = BTreeMap::new();
    for d in dealings {
        if d.dealer_index == 0 || d.dealer_index > n as u64 {
            return Err(DkgError::BadDealerIndex(d.dealer_index));
        }
        if d.commitments.len() != t as usize {
            return Err(DkgError::WrongCommitmentCount(d.dealer_index));
        }
        for member in 1..=n as u64 {
            if !d.shares.contains_key(&member) {
                return Err(DkgError::MissingShare { dealer: d.dealer_index, member });
            }
        }
        if by_dealer.insert(d.dealer_index, d).is_some() {
            return Err(DkgError::DuplicateDealer(d.dealer_index));
        }
    }

    let mut complaints = Vec::new();
    let mut disqualified = Vec::new();
    for (&dealer, dealing) in &by_dealer {
        let mut ok = true;
        for member in 1..=n as u64 {
            if !dealing.share_is_valid(params, member, &dealing.shares[&member]) {
                complaints.push(Complaint { complainer: member, dealer });
                ok = false;
            }
        }
        if !ok {
            disqualified.push(dealer);
        }
    }
    let qualified: Vec<u64> =
        by_dealer.keys().copied().filter(|d| !disqualified.contains(d)).collect();
    if qualified.len() < t as usize {
        return Err(DkgError::TooFewQualified { need: t, got: qualified.len() });
    }

    let p = params.p();
    let q = params.q();
    let mut vvec = vec![BigUint::one(); t as usize];
    for &d in &qualified {
        for (k, c) in by_dealer[&d].commitments.iter().enumerate() {
            vvec[k] = &vvec[k] * c % p;
        }
    }
    let shares = (1..=n as u64)
        .map(|member| {
            let mut acc = BigUint::zero();
            for &d in &qualified {
                acc = (acc + &by_dealer[&d].shares[&member]) % q;
            }
            (member, SecretKeyShare { index: member, scalar: acc })
        })
        .collect();

    Ok(DkgOutcome {
        vvec: VerificationVector(vvec),
        shares,
        qualified,
        disqualified,
        complaints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;
    use crate::threshold::{recover, sign_share, verify_group, verify_share, GroupSignature};

    fn seed(tag: &[u8]) -> Seed {
        Seed::from(hash(tag))
    }

    #[test]
    fn honest_dkg_produces_consistent_keys() {
        let params = SchemeParams::toy();
        let (t, n) = (3, 5);
        let dealings = deal_all(&params, t, n, &seed(b"honest"));
        let out = run_dkg(&params, t, n, &dealings).unwrap();

        assert_eq!(out.qualified, vec![1, 2, 3, 4, 5]);
        assert!(out.disqualified.is_empty());
        assert!(out.complaints.is_empty());

        // Every member's public key share matches its secret share.
        for i in 1..=n as u64 {
            let pk = out.vvec.public_key_share(&params, i);
            assert_eq!(pk, params.g().modpow(&out.shares[&i].scalar, params.p()));
        }
    }

    #[test]
    fn misbehaving_dealer_is_disqualified_and_scheme_still_works() {
        let params = SchemeParams::toy();
        let (t, n) = (3, 5);
        let mut dealings = deal_all(&params, t, n, &seed(b"corrupt"));
        // Dealer 2 sends member 4 a share inconsistent with its commitments.
        let bad = (&dealings[1].shares[&4] + 1u32) % params.q();
        dealings[1].shares.insert(4, bad);

        let out = run_dkg(&params, t, n, &dealings).unwrap();
        assert_eq!(out.disqualified, vec![2]);
        assert_eq!(out.qualified, vec![1, 3, 4, 5]);
        assert_eq!(out.complaints, vec![Complaint { complainer: 4, dealer: 2 }]);

        // The remaining key material signs and recovers.
        let msg = b"post-dkg";
        let sigs: Vec<_> = (1..=n as u64)
            .map(|i| sign_share(&params, msg, &out.shares[&i]))
            .collect();
        for s in &sigs {
            let pk = out.vvec.public_key_share(&params, s.index);
            assert!(verify_share(&params, msg, &pk, s));
        }
        let value = recover(&params, t, &sigs[..3]).unwrap();
        let group_sig = GroupSignature { value, contributors: sigs[..3].to_vec() };
        assert!(verify_group(&params, t, &out.vvec, msg, &group_sig));
    }

    #[test]
    fn too_many_bad_dealers_is_an_error() {
        let params = SchemeParams::toy();
        let (t, n) = (3, 4);
        let mut dealings = deal_all(&params, t, n, &seed(b"cabal"));
        for d in dealings.iter_mut().take(2) {
            let bad = (&d.shares[&1] + 1u32) % params.q();
            d.shares.insert(1, bad);
        }
        assert_eq!(
            run_dkg(&params, t, n, &dealings),
            Err(DkgError::TooFewQualified { need: 3, got: 2 })
        );
    }

    #[test]
    fn malformed_transcripts_are_rejected() {
        let params = SchemeParams::toy();
        let (t, n) = (2, 3);
        let dealings = deal_all(&params, t, n, &seed(b"malformed"));

        let mut wrong_count = dealings.clone();
        wrong_count[0].commitments.pop();
        assert_eq!(run_dkg(&params, t, n, &wrong_count), Err(DkgError::WrongCommitmentCount(1)));

        let mut missing = dealings.clone();
        missing[1].shares.remove(&3);
        assert_eq!(
            run_dkg(&params, t, n, &missing),
            Err(DkgError::MissingShare { dealer: 2, member: 3 })
        );

        let mut dup = dealings.clone();
        dup[2].dealer_index = 1;
        assert_eq!(run_dkg(&params, t, n, &dup), Err(DkgError::DuplicateDealer(1)));
    }
}
