//! Unique (t,n)-threshold signatures over a Schnorr group.
//!
//! Members hold Shamir shares of a group secret `x`; the group public key and
//! per-member public key shares are Feldman commitments published as a
//! verification vector. A signature share on message `m` is
//! `H1(m)^{x_i}` with a Chaum-Pedersen proof that the exponent matches the
//! member's public key share, so shares verify individually and a group
//! signature carries its own evidence. Any t verified shares interpolate (in
//! the exponent, Lagrange at zero) to the same group value `H1(m)^x` — the
//! uniqueness that lets a hash of the group signature serve as an unbiasable
//! randomness beacon.
//!
//! Simulation grade: `H1(m) = g^{hash(m) mod q}` has a known discrete log, so
//! the scheme demonstrates the threshold mechanics (uniqueness, share
//! verification, interpolation) rather than unforgeability. Adversaries in
//! the simulator are behavioral, never cryptanalytic.

pub mod dkg;
pub mod dleq;

use crate::crypto::{hash, Seed};
use crate::encoding::{DecodeError, Decoder, Encoder};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use std::collections::BTreeSet;

use dleq::DleqProof;

/// Domain tag for the share-proof challenge.
pub(crate) const DLEQ_TAG: &[u8] = b"DLEQ";
/// Domain tag for the deterministic proof nonce.
pub(crate) const DLEQ_NONCE_TAG: &[u8] = b"DLEQ-NONCE";

/// Errors from scheme setup and signature operations.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ThresholdError {
    #[error("parameter check failed: {0}")]
    BadParams(&'static str),
    #[error("share index must be a positive integer below q")]
    BadIndex,
    #[error("need {need} distinct shares, got {got}")]
    NotEnoughShares { need: u32, got: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u64),
    #[error("share verification failed for index {0}")]
    BadShare(u64),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

/// Schnorr-group parameters: a prime-order subgroup of Z_p^*.
///
/// `q` divides `p - 1` and `g` generates the order-`q` subgroup. Element and
/// scalar encodings are big-endian fixed width, sized from `p` and `q`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SchemeParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    elem_width: usize,
    scalar_width: usize,
}

/// Toy 62-bit prime modulus: p = 2q + 1 with q prime. Fast enough to run
/// thousands of simulated rounds and to exhaustively check recovery subsets.
const TOY_P: u64 = 2_305_843_009_213_699_919;
const TOY_Q: u64 = 1_152_921_504_606_849_959;
const TOY_G: u64 = 4;

/// 2048-bit modulus with a 256-bit prime-order subgroup. Fixed parameters,
/// deterministically generated and primality-checked at construction.
const STD_Q_HEX: &str = "a3a4790dc5c608cb1109c7392f395ba6d461880661a932ee9aaadf7814ff7633";
const STD_P_HEX: &str = "a1a229c0a13f20dfc2410d0b23b249fa9b7906d524cee4f766490b4e55ba3554\
d3145e9fcb876067e559f1de02a9d384be241b82a2192b73d9849bfb19a2d871\
590b0b505c6160c02533e8eda79cb7c0452dd3973f3cbc51d6f84b822b2a6532\
cd08d0d212ea098210e4c4c4e95aaaa62ef62a81c1493637b1b8938d76aba9dc\
b247e44506099928c805454ee6cdcae2ab1247a0656fc21942be78ef4de1d214\
95a592262a590146912dadee79bd7788576321cded0cfb11e23d442e8e09f53e\
f3f874d155ee3097ee8d811da0734793500602a882e2d046bb9ae923bd61d111\
bd48651f368fd22aeacb5a35898946e4f92853281a7a40ff404a0e5c09118529";
const STD_G_HEX: &str = "37acb3ff5d5b89eed2334e6b2c43fcd95d08afbf8c2984acdaee36755a6e17f2\
df549bb9e90c51726cd506306bc7e0427ee5a62ca42c12a06788e9ec4f4b008c\
2828261ad194a3557fa026dfa5bccfd5c2d1e14d2bb3315a26c00ba9085c64f5\
0e5afb807dbe94da8923d48eaeb37754c1d2a63fb5080acc43ecc84e6baea6d4\
1b722a49eef27b971ff887b798775a285a6d5d7921aaef210d288c7921467873\
ef1a88ad1560b1e7fcb5ce0154550bdb5e0027cddc8d42fe5082c00e9cdc0258\
e479b6d7db782ea405e1fe9f5d6c6c568b7890d041932c51624eebaad43af309\
ac0cbd22cb541ef2a31ff169afa4b6dfaf319148b87c8528206c9ff0318f9bb9";

impl SchemeParams {
    /// Construct and check parameters: p, q prime (Miller-Rabin), q | p-1,
    /// g generates the order-q subgroup.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<SchemeParams, ThresholdError> {
        if !is_probable_prime(&p) {
            return Err(ThresholdError::BadParams("p is not prime"));
        }
        if !is_probable_prime(&q) {
            return Err(ThresholdError::BadParams("q is not prime"));
        }
        if !((&p - 1u32) % &q).is_zero() {
            return Err(ThresholdError::BadParams("q does not divide p - 1"));
        }
        if g <= BigUint::one() || g >= p {
            return Err(ThresholdError::BadParams("g out of range"));
        }
        if !g.modpow(&q, &p).is_one() {
            return Err(ThresholdError::BadParams("g does not have order q"));
        }
        let elem_width = ((p.bits() + 7) / 8) as usize;
        let scalar_width = ((q.bits() + 7) / 8) as usize;
        Ok(SchemeParams { p, q, g, elem_width, scalar_width })
    }

    /// The toy preset (62-bit p): the default for simulation runs.
    pub fn toy() -> SchemeParams {
        SchemeParams::new(BigUint::from(TOY_P), BigUint::from(TOY_Q), BigUint::from(TOY_G))
            .expect("toy parameters are valid")
    }

    /// The standard preset (2048-bit p, 256-bit q).
    pub fn standard() -> SchemeParams {
        let p = BigUint::parse_bytes(STD_P_HEX.as_bytes(), 16).unwrap();
        let q = BigUint::parse_bytes(STD_Q_HEX.as_bytes(), 16).unwrap();
        let g = BigUint::parse_bytes(STD_G_HEX.as_bytes(), 16).unwrap();
        SchemeParams::new(p, q, g).expect("standard parameters are valid")
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    /// Fixed-width big-endian encoding of a group element.
    pub fn encode_element(&self, e: &BigUint) -> Vec<u8> {
        to_fixed_be(e, self.elem_width)
    }

    /// Fixed-width big-endian encoding of a scalar.
    pub fn encode_scalar(&self, s: &BigUint) -> Vec<u8> {
        to_fixed_be(s, self.scalar_width)
    }

    pub fn decode_element(&self, d: &mut Decoder<'_>, field: &'static str) -> Result<BigUint, DecodeError> {
        Ok(BigUint::from_bytes_be(d.fixed(self.elem_width, field)?))
    }

    pub fn decode_scalar(&self, d: &mut Decoder<'_>, field: &'static str) -> Result<BigUint, DecodeError> {
        Ok(BigUint::from_bytes_be(d.fixed(self.scalar_width, field)?))
    }

    /// Map a message into the order-q subgroup: `H1(m) = g^{hash(m) mod q}`.
    pub fn hash_to_element(&self, message: &[u8]) -> BigUint {
        let e = BigUint::from_bytes_be(&hash(message).0) % &self.q;
        self.g.modpow(&e, &self.p)
    }

    /// Hash arbitrary bytes to a scalar mod q.
    pub(crate) fn hash_to_scalar(&self, parts: &[&[u8]]) -> BigUint {
        BigUint::from_bytes_be(&crate::crypto::hash_parts(parts).0) % &self.q
    }

    /// Modular inverse in Z_q by Fermat (q is prime).
    pub(crate) fn inv_mod_q(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.q - 2u32), &self.q)
    }
}

fn to_fixed_be(v: &BigUint, width: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    assert!(raw.len() <= width, "value exceeds encoding width");
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    out
}

/// Miller-Rabin with 40 deterministic pseudo-random bases.
fn is_probable_prime(n: &BigUint) -> bool {
    if *n < BigUint::from(2u32) {
        return false;
    }
    for sp in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let spb = BigUint::from(sp);
        if (n % &spb).is_zero() {
            return *n == spb;
        }
    }
    let n_minus_1 = n - 1u32;
    let r = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> r;
    let nb = n.to_bytes_be();
    'witness: for i in 0..40u64 {
        let h = crate::crypto::hash_parts(&[b"mr", &nb, &crate::crypto::encode64(i)]);
        let a = BigUint::from_bytes_be(&h.0) % (n - 3u32) + 2u32;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..r {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A member's secret key share: Shamir evaluation of the group polynomial at
/// the member's index (1-based).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SecretKeyShare {
    pub index: u64,
    pub scalar: BigUint,
}

/// Feldman verification vector: commitments `g^{a_k}` to the group
/// polynomial's coefficients. Entry 0 is the group public key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VerificationVector(pub Vec<BigUint>);

impl VerificationVector {
    /// The group public key `g^x`.
    pub fn group_key(&self) -> &BigUint {
        &self.0[0]
    }

    /// The threshold this vector commits to (polynomial degree + 1).
    pub fn threshold(&self) -> u32 {
        self.0.len() as u32
    }

    /// Member `index`'s public key share: `prod_k v_k^(index^k)`.
    pub fn public_key_share(&self, params: &SchemeParams, index: u64) -> BigUint {
        let p = &params.p;
        let idx = BigUint::from(index);
        let mut ipow = BigUint::one();
        let mut acc = BigUint::one();
        for v in &self.0 {
            acc = acc * v.modpow(&ipow, p) % p;
            ipow *= &idx;
        }
        acc
    }

    pub fn encode(&self, params: &SchemeParams) -> Vec<u8> {
        let mut e = Encoder::new();
        e.u64(self.0.len() as u64);
        for v in &self.0 {
            e.fixed(&params.encode_element(v));
        }
        e.finish()
    }

    pub fn decode(params: &SchemeParams, d: &mut Decoder<'_>) -> Result<VerificationVector, DecodeError> {
        let n = d.u64("vvec len")?;
        let mut out = Vec::new();
        for _ in 0..n {
            out.push(params.decode_element(d, "vvec entry")?);
        }
        Ok(VerificationVector(out))
    }
}

/// A verifiable signature share: `value = H1(m)^{x_i}` plus a proof that the
/// exponent equals the member's public key share exponent.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignatureShare {
    pub index: u64,
    pub value: BigUint,
    pub proof: DleqProof,
}

impl SignatureShare {
    /// Canonical encoding: index, value, proof challenge, proof response.
    pub fn encode(&self, params: &SchemeParams) -> Vec<u8> {
        let mut e = Encoder::new();
        e.u64(self.index)
            .fixed(&params.encode_element(&self.value))
            .fixed(&params.encode_scalar(&self.proof.challenge))
            .fixed(&params.encode_scalar(&self.proof.response));
        e.finish()
    }

    pub fn decode(params: &SchemeParams, d: &mut Decoder<'_>) -> Result<SignatureShare, DecodeError> {
        Ok(SignatureShare {
            index: d.u64("share index")?,
            value: params.decode_element(d, "share value")?,
            proof: DleqProof {
                challenge: params.decode_scalar(d, "proof challenge")?,
                response: params.decode_scalar(d, "proof response")?,
            },
        })
    }
}

/// A recovered group signature: the unique `H1(m)^x`, together with the
/// verified shares it was recovered from (at least t, distinct indices,
/// sorted ascending).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupSignature {
    pub value: BigUint,
    pub contributors: Vec<SignatureShare>,
}

impl GroupSignature {
    /// Canonical encoding: value, contributor count, contributors in index
    /// order.
    pub fn encode(&self, params: &SchemeParams) -> Vec<u8> {
        let mut e = Encoder::new();
        e.fixed(&params.encode_element(&self.value));
        e.u64(self.contributors.len() as u64);
        for c in &self.contributors {
            e.fixed(&c.encode(params));
        }
        e.finish()
    }

    pub fn decode(params: &SchemeParams, d: &mut Decoder<'_>) -> Result<GroupSignature, DecodeError> {
        let value = params.decode_element(d, "signature value")?;
        let n = d.u64("contributor count")?;
        let mut contributors = Vec::new();
        for _ in 0..n {
            contributors.push(SignatureShare::decode(params, d)?);
        }
        Ok(GroupSignature { value, contributors })
    }
}

/// Sign `message` with a secret key share. Deterministic: the proof nonce is
/// derived from the message and the share scalar, so re-signing yields
/// identical bytes.
pub fn sign_share(params: &SchemeParams, message: &[u8], key: &SecretKeyShare) -> SignatureShare {
    let h = params.hash_to_element(message);
    let value = h.modpow(&key.scalar, &params.p);
    let proof = dleq::prove(params, message, &h, &key.scalar);
    SignatureShare { index: key.index, value, proof }
}

/// Verify one signature share against the member's public key share.
pub fn verify_share(
    params: &SchemeParams,
    message: &[u8],
    public_key_share: &BigUint,
    share: &SignatureShare,
) -> bool {
    if share.index == 0 {
        return false;
    }
    if share.value.is_zero() || share.value >= params.p {
        return false;
    }
    let h = params.hash_to_element(message);
    dleq::verify(params, &h, public_key_share, &share.value, &share.proof)
}

/// Recover the group signature value from at least `t` shares by Lagrange
/// interpolation at zero in the exponent. Uses the first `t` shares in index
/// order; with verified shares any choice yields the same value.
pub fn recover(
    params: &SchemeParams,
    t: u32,
    shares: &[SignatureShare],
) -> Result<BigUint, ThresholdError> {
    let mut sorted: Vec<&SignatureShare> = shares.iter().collect();
    sorted.sort_by_key(|s| s.index);
    let mut seen = BTreeSet::new();
    for s in &sorted {
        if s.index == 0 {
            return Err(ThresholdError::BadIndex);
        }
        if !seen.insert(s.index) {
            return Err(ThresholdError::DuplicateIndex(s.index));
        }
    }
    if sorted.len() < t as usize {
        return Err(ThresholdError::NotEnoughShares { need: t, got: sorted.len() });
    }
    let chosen = &sorted[..t as usize];
    let indices: Vec<u64> = chosen.iter().map(|s| s.index).collect();

    let mut value = BigUint::one();
    for s in chosen {
        let lambda = lagrange_at_zero(params, &indices, s.index);
        value = value * s.value.modpow(&lambda, &params.p) % &params.p;
    }
    Ok(value)
}

/// Lagrange coefficient at zero over Z_q for index `i` within `indices`:
/// `prod_{k != i} k / (k - i)`.
fn lagrange_at_zero(params: &SchemeParams, indices: &[u64], i: u64) -> BigUint {
    let q = BigInt::from_biguint(num_bigint::Sign::Plus, params.q.clone());
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &k in indices {
        if k == i {
            continue;
        }
        num = num * BigInt::from(k) % &q;
        den = den * (BigInt::from(k) - BigInt::from(i)) % &q;
    }
    let num_u = num.mod_floor(&q).to_biguint().unwrap();
    let den_u = den.mod_floor(&q).to_biguint().unwrap();
    num_u * params.inv_mod_q(&den_u) % &params.q
}

/// Verify a group signature: at least `t` contributors with distinct indices,
/// every contributor share verifies against the verification vector, and the
/// contributors interpolate to the carried value. Because verified shares
/// interpolate identically for any t-subset, checking one subset suffices.
pub fn verify_group(
    params: &SchemeParams,
    t: u32,
    vvec: &VerificationVector,
    message: &[u8],
    sig: &GroupSignature,
) -> bool {
    if sig.contributors.len() < t as usize {
        return false;
    }
    let mut seen = BTreeSet::new();
    for c in &sig.contributors {
        if !seen.insert(c.index) {
            return false;
        }
        let pk = vvec.public_key_share(params, c.index);
        if !verify_share(params, message, &pk, c) {
            return false;
        }
    }
    match recover(params, t, &sig.contributors) {
        Ok(v) => v == sig.value,
        Err(_) => false,
    }
}

/// Hash a group signature value into a randomness seed.
pub fn derive_randomness(params: &SchemeParams, signature_value: &BigUint) -> Seed {
    Seed::from(hash(&params.encode_element(signature_value)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation_rejects_bad_groups() {
        // Composite p.
        assert!(SchemeParams::new(BigUint::from(15u32), BigUint::from(7u32), BigUint::from(2u32)).is_err());
        // q not dividing p - 1: p = 23, q = 7.
        assert!(SchemeParams::new(BigUint::from(23u32), BigUint::from(7u32), BigUint::from(2u32)).is_err());
        // g = 1 rejected.
        assert!(SchemeParams::new(BigUint::from(23u32), BigUint::from(11u32), BigUint::one()).is_err());
        // Valid small group: p = 23, q = 11, g = 4 (order 11 subgroup).
        let p = SchemeParams::new(BigUint::from(23u32), BigUint::from(11u32), BigUint::from(4u32)).unwrap();
        assert_eq!(p.elem_width, 1);
        assert_eq!(p.scalar_width, 1);
    }

    #[test]
    fn presets_construct() {
        let toy = SchemeParams::toy();
        assert_eq!(toy.elem_width, 8);
        assert_eq!(toy.scalar_width, 8);
        let std = SchemeParams::standard();
        assert_eq!(std.elem_width, 256);
        assert_eq!(std.scalar_width, 32);
    }

    #[test]
    fn fixed_width_encoding_pads() {
        let toy = SchemeParams::toy();
        let one = BigUint::one();
        assert_eq!(toy.encode_element(&one), vec![0, 0, 0, 0, 0, 0, 0, 1]);
    }

    fn toy_shares(t: u32, n: u32) -> (SchemeParams, VerificationVector, Vec<SecretKeyShare>) {
        let params = SchemeParams::toy();
        // Fixed polynomial with small coefficients.
        let coeffs: Vec<BigUint> = (0..t).map(|k| BigUint::from(7u32 + 13 * k)).collect();
        let vvec = VerificationVector(
            coeffs.iter().map(|c| params.g.modpow(c, &params.p)).collect(),
        );
        let shares = (1..=n as u64)
            .map(|i| {
                let mut acc = BigUint::zero();
                let mut ipow = BigUint::one();
                for c in &coeffs {
                    acc = (acc + c * &ipow) % &params.q;
                    ipow = ipow * BigUint::from(i) % &params.q;
                }
                SecretKeyShare { index: i, scalar: acc }
            })
            .collect();
        (params, vvec, shares)
    }

    #[test]
    fn share_sign_verify_roundtrip() {
        let (params, vvec, shares) = toy_shares(3, 5);
        let msg = b"roundtrip";
        for key in &shares {
            let sig = sign_share(&params, msg, key);
            let pk = vvec.public_key_share(&params, key.index);
            assert!(verify_share(&params, msg, &pk, &sig));
            // Wrong message fails.
            assert!(!verify_share(&params, b"other", &pk, &sig));
            // Wrong key share fails.
            let pk_other = vvec.public_key_share(&params, key.index % 5 + 1);
            assert!(!verify_share(&params, msg, &pk_other, &sig));
        }
    }

    #[test]
    fn signing_is_deterministic() {
        let (params, _, shares) = toy_shares(3, 5);
        let a = sign_share(&params, b"det", &shares[2]);
        let b = sign_share(&params, b"det", &shares[2]);
        assert_eq!(a.encode(&params), b.encode(&params));
    }

    #[test]
    fn recover_requires_t_distinct_shares() {
        let (params, _, keys) = toy_shares(3, 5);
        let msg = b"thresholds";
        let sigs: Vec<SignatureShare> = keys.iter().map(|k| sign_share(&params, msg, k)).collect();

        assert_eq!(
            recover(&params, 3, &sigs[..2]),
            Err(ThresholdError::NotEnoughShares { need: 3, got: 2 })
        );
        let dup = vec![sigs[0].clone(), sigs[0].clone(), sigs[1].clone()];
        assert_eq!(recover(&params, 3, &dup), Err(ThresholdError::DuplicateIndex(1)));
        assert!(recover(&params, 3, &sigs[..3]).is_ok());
    }

    #[test]
    fn group_signature_verifies_and_rejects_tampering() {
        let (params, vvec, keys) = toy_shares(3, 5);
        let msg = b"group";
        let sigs: Vec<SignatureShare> = keys.iter().map(|k| sign_share(&params, msg, k)).collect();
        let value = recover(&params, 3, &sigs[..3]).unwrap();
        let sig = GroupSignature { value: value.clone(), contributors: sigs[..3].to_vec() };
        assert!(verify_group(&params, 3, &vvec, msg, &sig));

        // Too few contributors.
        let thin = GroupSignature { value: value.clone(), contributors: sigs[..2].to_vec() };
        assert!(!verify_group(&params, 3, &vvec, msg, &thin));

        // Tampered value.
        let forged = GroupSignature { value: value + 1u32, contributors: sigs[..3].to_vec() };
        assert!(!verify_group(&params, 3, &vvec, msg, &forged));

        // Wrong message.
        assert!(!verify_group(&params, 3, &vvec, b"other", &sig));
    }

    #[test]
    fn encode_decode_roundtrip() {
        let (params, _, keys) = toy_shares(3, 5);
        let msg = b"encode";
        let sigs: Vec<SignatureShare> = keys.iter().map(|k| sign_share(&params, msg, k)).collect();
        let value = recover(&params, 3, &sigs).unwrap();
        let sig = GroupSignature { value, contributors: sigs };

        let bytes = sig.encode(&params);
        let mut d = Decoder::new(&bytes);
        let back = GroupSignature::decode(&params, &mut d).unwrap();
        d.finish().unwrap();
        assert_eq!(back, sig);
    }
}
