//! Frozen test vectors.
//!
//! Every constant here was computed by an independent implementation
//! (big-integer arithmetic over the same byte layouts) and frozen. These
//! tests pin the exact bit-level behavior of hashing, permutation, the
//! threshold scheme, key generation, and the group-size tables; any change
//! to an encoding or a domain tag shows up here first.

use pharos::chain::genesis_seed;
use pharos::committee::{
    cdf_binom, cdf_hyper, group_derive, min_group_size_binom, min_group_size_hyper, Beta,
};
use pharos::crypto::{hash, permutation, prg, Seed};
use pharos::threshold::dkg::{run_dkg, Dealing, Polynomial};
use pharos::threshold::{
    derive_randomness, recover, sign_share, verify_group, verify_share, GroupSignature,
    SchemeParams, SecretKeyShare, SignatureShare, VerificationVector,
};
use pharos::threshold::dleq::DleqProof;
use pharos::Label;

use num_bigint::BigUint;
use num_rational::Ratio;
use std::collections::BTreeMap;

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

#[test]
fn genesis_seed_and_hash_vectors() {
    assert_eq!(
        genesis_seed().to_string(),
        "29a2ce1f68fb64de053543ef7c3b38837b941a7dd4ea5967b54e6eab4ab12238"
    );
    assert_eq!(
        hash(b"").to_string(),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
}

#[test]
fn prg_vectors() {
    let seed = Seed::from(hash(b"seed"));
    assert_eq!(
        prg(&seed, 3).to_string(),
        "70690c392a9bad26e9b856b9e8b5fcc274d8ebf1c6693494cf092a84c8a5c2b2"
    );
    assert_eq!(
        prg(&seed, 0).to_string(),
        "cc36962cfef13089a78aacb34a45b2a9f29c01dff44cfc1ad0a679eaae30db0e"
    );
}

#[test]
fn permutation_and_ranking_vectors() {
    let u: Vec<Label> = (1..=5).map(Label).collect();
    let perm = permutation(&u, &Seed::from(hash(b"x"))).unwrap();
    assert_eq!(perm.as_slice(), [4, 1, 3, 2, 5].map(Label));

    let u6: Vec<Label> = (1..=6).map(Label).collect();
    let g = group_derive(&Seed::from(hash(b"g")), 1, &u6, 3).unwrap();
    assert_eq!(g.members, [4, 5, 3].map(Label));

    let r = pharos::chain::ranking(&u, &Seed::from(hash(b"r"))).unwrap();
    assert_eq!(r.order(), [5, 1, 3, 2, 4].map(Label));
    for (label, rank) in [(1, 1), (2, 3), (3, 2), (4, 4), (5, 0)] {
        assert_eq!(r.rank_of(Label(label)), Some(rank));
    }
}

#[test]
fn threshold_signature_vectors() {
    let params = SchemeParams::toy();
    assert_eq!(*params.p(), big(2305843009213699919));
    assert_eq!(*params.q(), big(1152921504606849959));
    assert_eq!(*params.g(), big(4));

    let coef = [
        big(1024942309969071452),
        big(993353569731648925),
        big(429581057886689207),
    ];
    let share_scalars: [(u64, u64); 5] = [
        (1, 142033928373709666),
        (2, 118287662551726294),
        (3, 953703512503121336),
        (4, 342438469014194874),
        (5, 590335541298646826),
    ];
    let msg = b"vector-message";

    // Per-share signature values and proofs are deterministic.
    let frozen: BTreeMap<u64, (u64, u64, u64)> = [
        (1, (872541049283140099, 333860189291517785, 482387247274687422)),
        (2, (949901109910884725, 271196114939382478, 186550515660060233)),
        (3, (586014377790513116, 946876516587165598, 502283602834635996)),
        (4, (1884571213093137537, 66628268688694488, 1072219556335363414)),
        (5, (1933468874412107069, 639805713595837267, 331275552625567875)),
    ]
    .into();

    let vvec = VerificationVector(
        coef.iter().map(|c| params.g().modpow(c, params.p())).collect(),
    );
    assert_eq!(*vvec.group_key(), big(1973568690006912368));
    assert_eq!(
        vvec.0,
        vec![big(1973568690006912368), big(862356182460774821), big(1432464539242222384)]
    );
    let frozen_pk: BTreeMap<u64, u64> = [
        (1, 2042849997283476752),
        (2, 2101707067862216241),
        (3, 224636694150479392),
        (4, 2156098221684927105),
        (5, 1162389273441428520),
    ]
    .into();
    for (i, pk) in &frozen_pk {
        assert_eq!(vvec.public_key_share(&params, *i), big(*pk));
    }

    let mut shares = Vec::new();
    for (index, scalar) in share_scalars {
        let key = SecretKeyShare { index, scalar: big(scalar) };
        let sig = sign_share(&params, msg, &key);
        let (value, c, s) = frozen[&index];
        assert_eq!(
            sig,
            SignatureShare {
                index,
                value: big(value),
                proof: DleqProof { challenge: big(c), response: big(s) },
            }
        );
        let pk = vvec.public_key_share(&params, index);
        assert!(verify_share(&params, msg, &pk, &sig));
        shares.push(sig);
    }

    // sigma = H1(m)^a0 regardless of which t shares recover it.
    let sigma = big(847839340141360659);
    for subset in [&shares[0..3], &shares[2..5], &shares[1..4]] {
        assert_eq!(recover(&params, 3, subset).unwrap(), sigma);
    }
    let group = GroupSignature { value: sigma.clone(), contributors: shares[0..3].to_vec() };
    assert!(verify_group(&params, 3, &vvec, msg, &group));

    assert_eq!(
        derive_randomness(&params, &sigma).to_string(),
        "141f06af1792cbd23721f75c43a158bf4344b5a040d29855c92545ba742ab1b0"
    );
}

#[test]
fn dkg_aggregation_vectors() {
    let params = SchemeParams::toy();
    let dealers: [(u64, [u64; 2]); 3] = [
        (1, [728799409092229743, 1018678918005431365]),
        (2, [917399971790540436, 532934602424644946]),
        (3, [10966411362248038, 260380055760966098]),
    ];
    let n = 3u32;
    let dealings: Vec<Dealing> = dealers
        .iter()
        .map(|(d, coef)| {
            let coefficients: Vec<BigUint> = coef.iter().map(|&c| big(c)).collect();
            let polynomial = Polynomial { coefficients: coefficients.clone() };
            let commitments =
                coefficients.iter().map(|c| params.g().modpow(c, params.p())).collect();
            let shares = (1..=n as u64).map(|i| (i, polynomial.eval(&params, i))).collect();
            Dealing { dealer_index: *d, commitments, shares, polynomial }
        })
        .collect();

    let outcome = run_dkg(&params, 2, n, &dealings).unwrap();
    assert!(outcome.disqualified.is_empty());
    assert_eq!(
        outcome.vvec.0,
        vec![big(1123938416496037169), big(425406333000922234)]
    );
    assert_eq!(*outcome.vvec.group_key(), big(1123938416496037169));
    let member_keys: BTreeMap<u64, u64> = [
        (1, 10394854615510749),
        (2, 669466926199703199),
        (3, 175617493177045690),
    ]
    .into();
    for (i, scalar) in &member_keys {
        assert_eq!(outcome.shares[i].scalar, big(*scalar));
    }
    // The group secret is the sum of the dealers' constant terms, and the
    // group key commits to it.
    let secret = dealers
        .iter()
        .fold(BigUint::ZERO, |acc, (_, c)| (acc + big(c[0])) % params.q());
    assert_eq!(secret, big(504244287638168258));
    assert_eq!(params.g().modpow(&secret, params.p()), *outcome.vvec.group_key());
}

#[test]
fn exact_cdf_vectors() {
    let q = |n: u64, d: u64| Ratio::new(BigUint::from(n), BigUint::from(d));
    assert_eq!(cdf_hyper(1, 3, 2, 5), q(7, 10));
    assert_eq!(cdf_hyper(1, 2, 2, 5), q(9, 10));
    assert_eq!(cdf_binom(1, 3, q(1, 3)), q(20, 27));
}

#[test]
fn minimal_group_size_vectors() {
    let betas = [Beta::from_integer(3).unwrap(), Beta::from_integer(4).unwrap(),
        Beta::from_integer(5).unwrap()];
    let hyper: [[u64; 4]; 3] = [
        [405, 651, 811, 1255],
        [169, 277, 349, 555],
        [111, 181, 227, 365],
    ];
    let binom: [[u64; 4]; 3] = [
        [423, 701, 887, 1447],
        [173, 287, 363, 593],
        [111, 185, 235, 383],
    ];
    let rhos = [40u32, 64, 80, 128];
    for (bi, beta) in betas.iter().enumerate() {
        for (ri, &rho) in rhos.iter().enumerate() {
            assert_eq!(
                min_group_size_hyper(*beta, rho, 10_000).unwrap(),
                hyper[bi][ri],
                "hyper beta={beta} rho=2^-{rho}"
            );
            assert_eq!(
                min_group_size_binom(*beta, rho).unwrap(),
                binom[bi][ri],
                "binom beta={beta} rho=2^-{rho}"
            );
        }
    }
}

#[test]
fn standard_preset_matches_generated_parameters() {
    let params = SchemeParams::standard();
    let p: BigUint = "20404332702309256381281028629163518841052126287839259141040495034890194510040991708743798971107882207378318057866217959124486611594638694843456196583497328788124641002238409931618009144541405645046796354750938304735265114057072577879936331537674087512730028383886963298647007193635020133141846446285901042889906118074157402476295369691181468544519032759026742935201337262278690678956173896685480766048239250779327577127740280747043521626026752456238276804779531657650454412071374394225781128750776056436153984902267747748631742598685129696670083358952411244130332299735020519549517447462855089574190168460915201115433".parse().unwrap();
    let q: BigUint = "74017592720311332730547043025419661976989816823407065664977857954070006822451".parse().unwrap();
    assert_eq!(*params.p(), p);
    assert_eq!(*params.q(), q);
}
