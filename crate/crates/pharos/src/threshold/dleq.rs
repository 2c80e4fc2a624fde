//! Chaum-Pedersen proofs of discrete-log equality.
//!
//! A share carries a proof that `log_g(pk_i) = log_h(value)` for
//! `h = H1(m)`, i.e. that the share was produced with the same exponent the
//! verification vector commits to. Non-interactive via Fiat-Shamir; the
//! commitment pair is recomputed from (challenge, response) so the proof is
//! two scalars.

use super::{SchemeParams, DLEQ_NONCE_TAG, DLEQ_TAG};

use num_bigint::BigUint;
use num_traits::Zero;

/// Fiat-Shamir proof: `(challenge, response)` with the commitments implied.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DleqProof {
    pub challenge: BigUint,
    pub response: BigUint,
}

/// Prove `log_g(g^x) = log_h(h^x)` for secret `x`.
///
/// The nonce is derived from `(message, x)`, making the proof deterministic;
/// a repeated nonce across different challenges would leak `x`, which binding
/// the nonce to the message prevents (one message, one proof).
pub fn prove(params: &SchemeParams, message: &[u8], h: &BigUint, x: &BigUint) -> DleqProof {
    let p = params.p();
    let q = params.q();
    let a = params.g().modpow(x, p);
    let b = h.modpow(x, p);
    let w = params.hash_to_scalar(&[DLEQ_NONCE_TAG, message, &params.encode_scalar(x)]);
    let t1 = params.g().modpow(&w, p);
    let t2 = h.modpow(&w, p);
    let challenge = challenge_scalar(params, &a, h, &b, &t1, &t2);
    // response = w - challenge * x (mod q)
    let cx = &challenge * x % q;
    let response = (q + &w - cx) % q;
    DleqProof { challenge, response }
}

/// Verify a proof that `log_g(a) = log_h(b)`.
pub fn verify(params: &SchemeParams, h: &BigUint, a: &BigUint, b: &BigUint, proof: &DleqProof) -> bool {
    let p = params.p();
    if proof.challenge >= *params.q() || proof.response >= *params.q() {
        return false;
    }
    if a.is_zero() || b.is_zero() || *a >= *p || *b >= *p {
        return false;
    }
    // t1 = g^s * a^c, t2 = h^s * b^c; accept iff the challenge recomputes.
    let t1 = params.g().modpow(&proof.response, p) * a.modpow(&proof.challenge, p) % p;
    let t2 = h.modpow(&proof.response, p) * b.modpow(&proof.challenge, p) % p;
    challenge_scalar(params, a, h, b, &t1, &t2) == proof.challenge
}

fn challenge_scalar(
    params: &SchemeParams,
    a: &BigUint,
    h: &BigUint,
    b: &BigUint,
    t1: &BigUint,
    t2: &BigUint,
) -> BigUint {
    params.hash_to_scalar(&[
        DLEQ_TAG,
        &params.encode_element(params.g()),
        &params.encode_element(a),
        &params.encode_element(h),
        &params.encode_element(b),
        &params.encode_element(t1),
        &params.encode_element(t2),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn proof_roundtrip_and_rejection() {
        let params = SchemeParams::toy();
        let p = params.p().clone();
        let x = BigUint::from(777_777u32);
        let msg = b"dleq";
        let h = params.hash_to_element(msg);
        let a = params.g().modpow(&x, &p);
        let b = h.modpow(&x, &p);

        let proof = prove(&params, msg, &h, &x);
        assert!(verify(&params, &h, &a, &b, &proof));

        // Mismatched exponents fail.
        let b_bad = h.modpow(&(&x + 1u32), &p);
        assert!(!verify(&params, &h, &a, &b_bad, &proof));

        // Tampered proof scalars fail.
        let mut bad = proof.clone();
        bad.response = (&bad.response + 1u32) % params.q();
        assert!(!verify(&params, &h, &a, &b, &bad));
        let mut bad = proof.clone();
        bad.challenge = (&bad.challenge + 1u32) % params.q();
        assert!(!verify(&params, &h, &a, &b, &bad));

        // Out-of-range inputs fail fast.
        assert!(!verify(&params, &h, &BigUint::zero(), &b, &proof));
        assert!(!verify(&params, &h, &p, &b, &proof));
    }

    #[test]
    fn proof_is_deterministic_per_message() {
        let params = SchemeParams::toy();
        let x = BigUint::from(31337u32);
        let h1 = params.hash_to_element(b"m1");
        let p1 = prove(&params, b"m1", &h1, &x);
        let p2 = prove(&params, b"m1", &h1, &x);
        assert_eq!(p1, p2);
        let h2 = params.hash_to_element(b"m2");
        let p3 = prove(&params, b"m2", &h2, &x);
        assert_ne!(p1, p3);
    }

    #[test]
    fn exponent_one_still_proves() {
        let params = SchemeParams::toy();
        let x = BigUint::one();
        let h = params.hash_to_element(b"one");
        let a = params.g().clone();
        let b = h.clone();
        let proof = prove(&params, b"one", &h, &x);
        assert!(verify(&params, &h, &a, &b, &proof));
    }
}
