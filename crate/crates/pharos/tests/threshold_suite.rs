//! Integration suite for the threshold scheme: signature uniqueness across
//! every authorized share subset, key generation checked against a direct
//! polynomial-interpolation oracle, and a smoke test of the full-width
//! parameter preset.

use pharos::crypto::{hash, Seed};
use pharos::threshold::dkg::{deal_all, run_dkg};
use pharos::threshold::{
    derive_randomness, recover, sign_share, verify_group, verify_share, GroupSignature,
    SchemeParams, SignatureShare,
};

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::One;
use std::collections::BTreeSet;

/// Lagrange interpolation at zero over Z_q, inverses by Fermat.
fn interpolate_at_zero(params: &SchemeParams, points: &[(u64, BigUint)]) -> BigUint {
    let q = params.q();
    let exp = q - 2u32;
    let mut acc = BigUint::ZERO;
    for (i, (xi, yi)) in points.iter().enumerate() {
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for (j, (xj, _)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            num = num * BigUint::from(*xj) % q;
            let diff = (q + BigUint::from(*xj) - BigUint::from(*xi)) % q;
            den = den * diff % q;
        }
        let coeff = num * den.modpow(&exp, q) % q;
        acc = (acc + yi * coeff) % q;
    }
    acc
}

#[test]
fn signature_unique_across_all_share_subsets() {
    let params = SchemeParams::toy();
    let (t, n) = (3u32, 5u32);
    let seed = Seed::from(hash(b"uniqueness"));
    let dealings = deal_all(&params, t, n, &seed);
    let outcome = run_dkg(&params, t, n, &dealings).unwrap();

    for m in 0..20u64 {
        let message = format!("uniqueness-message-{m}").into_bytes();
        let shares: Vec<SignatureShare> = outcome
            .shares
            .values()
            .map(|k| sign_share(&params, &message, k))
            .collect();
        for (i, share) in shares.iter().enumerate() {
            let pk = outcome.vvec.public_key_share(&params, i as u64 + 1);
            assert!(verify_share(&params, &message, &pk, share));
        }

        // Every t-subset of the five shares recovers the same value.
        let mut values = BTreeSet::new();
        for subset in shares.iter().cloned().combinations(t as usize) {
            let value = recover(&params, t, &subset).unwrap();
            let group = GroupSignature { value: value.clone(), contributors: subset };
            assert!(verify_group(&params, t, &outcome.vvec, &message, &group));
            values.insert(value);
        }
        assert_eq!(values.len(), 1, "message {m} recovered more than one value");

        // And therefore a unique randomness output.
        let sigma = values.into_iter().next().unwrap();
        let seed_a = derive_randomness(&params, &sigma);
        let seed_b = derive_randomness(&params, &sigma);
        assert_eq!(seed_a, seed_b);
    }
}

#[test]
fn dkg_matches_polynomial_interpolation_oracle() {
    let params = SchemeParams::toy();
    for n in [3u32, 5, 7] {
        let t = n / 2 + 1;
        let seed = Seed::from(hash(format!("dkg-oracle-{n}").as_bytes()));
        let dealings = deal_all(&params, t, n, &seed);
        let outcome = run_dkg(&params, t, n, &dealings).unwrap();
        assert!(outcome.disqualified.is_empty());
        assert_eq!(outcome.shares.len(), n as usize);

        // Oracle: the group secret is the interpolation of any t shares at
        // zero, and equals the sum of the dealers' constant terms.
        let points: Vec<(u64, BigUint)> = outcome
            .shares
            .iter()
            .take(t as usize)
            .map(|(i, k)| (*i, k.scalar.clone()))
            .collect();
        let secret = interpolate_at_zero(&params, &points);
        let dealer_sum = dealings
            .iter()
            .fold(BigUint::ZERO, |acc, d| (acc + d.polynomial.constant()) % params.q());
        assert_eq!(secret, dealer_sum, "n={n}");
        assert_eq!(params.g().modpow(&secret, params.p()), *outcome.vvec.group_key());

        // Any other t-subset interpolates to the same secret.
        let alt: Vec<(u64, BigUint)> = outcome
            .shares
            .iter()
            .rev()
            .take(t as usize)
            .map(|(i, k)| (*i, k.scalar.clone()))
            .collect();
        assert_eq!(interpolate_at_zero(&params, &alt), secret);

        // Commitments match the shares: pk_i = g^{s_i}.
        for (i, key) in &outcome.shares {
            assert_eq!(
                params.g().modpow(&key.scalar, params.p()),
                outcome.vvec.public_key_share(&params, *i)
            );
        }

        // A signature recovered from shares equals the direct secret-key
        // signature.
        let message = b"oracle-check";
        let shares: Vec<SignatureShare> = outcome
            .shares
            .values()
            .take(t as usize)
            .map(|k| sign_share(&params, message, k))
            .collect();
        let sigma = recover(&params, t, &shares).unwrap();
        let direct = params.hash_to_element(message).modpow(&secret, params.p());
        assert_eq!(sigma, direct, "n={n}");
    }
}

#[test]
fn full_width_preset_signs_and_verifies() {
    let params = SchemeParams::standard();
    let (t, n) = (2u32, 3u32);
    let seed = Seed::from(hash(b"standard-smoke"));
    let dealings = deal_all(&params, t, n, &seed);
    let outcome = run_dkg(&params, t, n, &dealings).unwrap();
    let message = b"standard preset";
    let shares: Vec<SignatureShare> = outcome
        .shares
        .values()
        .map(|k| sign_share(&params, message, k))
        .collect();
    for (i, share) in shares.iter().enumerate() {
        let pk = outcome.vvec.public_key_share(&params, i as u64 + 1);
        assert!(verify_share(&params, message, &pk, share));
    }
    let a = recover(&params, t, &shares[0..2]).unwrap();
    let b = recover(&params, t, &shares[1..3]).unwrap();
    assert_eq!(a, b);
    let group = GroupSignature { value: a, contributors: shares[0..2].to_vec() };
    assert!(verify_group(&params, t, &outcome.vvec, message, &group));
}
