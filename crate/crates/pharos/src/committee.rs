//! Group sampling and honest-supermajority sizing.
//!
//! Groups are random samples of the replica universe, derived from beacon
//! randomness through the seeded permutation, and the per-round committee is
//! picked from the registered groups by the beacon output. A group is usable
//! only if more than half its members are honest; this module computes, with
//! exact rational arithmetic, the smallest group size for which the chance of
//! sampling a dishonest-majority group stays below a target `rho`, given that
//! at most a 1/beta fraction of the universe is Byzantine.
//!
//! Two regimes: sampling without replacement from a finite universe
//! (hypergeometric tail) and the universe-size-independent bound (binomial
//! tail). The binomial answer always dominates the hypergeometric one.

use crate::crypto::{permutation, prg, CryptoError, Seed};
use crate::Label;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use std::collections::BTreeSet;

/// Errors from universe validation and group sizing.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum CommitteeError {
    #[error("beta must be a rational greater than 2, got {num}/{den}")]
    BadBeta { num: u64, den: u64 },
    #[error("rho exponent must be positive")]
    BadRho,
    #[error("population must be positive")]
    EmptyPopulation,
    #[error("group size {n} exceeds universe size {universe}")]
    GroupTooLarge { n: u32, universe: usize },
    #[error("byzantine label {0} is not in the universe")]
    UnknownByzantine(Label),
    #[error("byzantine count {byz} violates the bound: need byz < {n}/beta")]
    TooManyByzantine { byz: usize, n: usize },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// The adversarial-fraction parameter: at most `1/beta` of the universe is
/// Byzantine. A rational strictly greater than 2.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Beta {
    num: u64,
    den: u64,
}

impl Beta {
    pub fn new(num: u64, den: u64) -> Result<Beta, CommitteeError> {
        if den == 0 || num <= 2 * den {
            return Err(CommitteeError::BadBeta { num, den });
        }
        let g = gcd(num, den);
        Ok(Beta { num: num / g, den: den / g })
    }

    pub fn from_integer(v: u64) -> Result<Beta, CommitteeError> {
        Beta::new(v, 1)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }
}

impl std::fmt::Display for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Beta {
    type Err = CommitteeError;

    fn from_str(s: &str) -> Result<Beta, CommitteeError> {
        let bad = || CommitteeError::BadBeta { num: 0, den: 0 };
        match s.split_once('/') {
            None => Beta::from_integer(s.trim().parse().map_err(|_| bad())?),
            Some((n, d)) => Beta::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The assumed Byzantine head-count for a population: `floor(N / beta)`.
pub fn byzantine_bound(population: u64, beta: Beta) -> u64 {
    (population as u128 * beta.den as u128 / beta.num as u128) as u64
}

/// The replica universe: the labels eligible for ranking and group sampling,
/// plus the ground-truth Byzantine roster.
///
/// The Byzantine set exists for harness validation and metrics only; protocol
/// logic never branches on it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Universe {
    labels: Vec<Label>,
    byzantine: BTreeSet<Label>,
}

impl Universe {
    pub fn new(
        labels: Vec<Label>,
        byzantine: BTreeSet<Label>,
    ) -> Result<Universe, CommitteeError> {
        if labels.is_empty() {
            return Err(CommitteeError::EmptyPopulation);
        }
        let mut seen = BTreeSet::new();
        for &l in &labels {
            if !seen.insert(l) {
                return Err(CryptoError::DuplicateLabel(l).into());
            }
        }
        for &b in &byzantine {
            if !seen.contains(&b) {
                return Err(CommitteeError::UnknownByzantine(b));
            }
        }
        Ok(Universe { labels, byzantine })
    }

    /// Universe with labels `1..=n`.
    pub fn contiguous(
        n: u64,
        byzantine: impl IntoIterator<Item = Label>,
    ) -> Result<Universe, CommitteeError> {
        Universe::new((1..=n).map(Label).collect(), byzantine.into_iter().collect())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_byzantine(&self, label: Label) -> bool {
        self.byzantine.contains(&label)
    }

    pub fn byzantine(&self) -> &BTreeSet<Label> {
        &self.byzantine
    }

    pub fn honest(&self) -> impl Iterator<Item = Label> + '_ {
        self.labels.iter().copied().filter(|l| !self.byzantine.contains(l))
    }

    /// Check the adversarial assumption `|byzantine| < |labels| / beta`
    /// (strict).
    pub fn check_beta(&self, beta: Beta) -> Result<(), CommitteeError> {
        let byz = self.byzantine.len() as u128;
        let n = self.labels.len() as u128;
        if byz * beta.num as u128 >= n * beta.den as u128 {
            return Err(CommitteeError::TooManyByzantine {
                byz: self.byzantine.len(),
                n: self.labels.len(),
            });
        }
        Ok(())
    }
}

/// A derived group: the first `n` positions of the permutation seeded with
/// `prg(seed, id)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Group {
    pub id: u64,
    pub members: Vec<Label>,
}

impl Group {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.members.contains(&label)
    }

    /// The member's 1-based share index, which is its Shamir evaluation
    /// point. Position in the derivation order, not the label value.
    pub fn share_index(&self, label: Label) -> Option<u64> {
        self.members.iter().position(|&l| l == label).map(|p| p as u64 + 1)
    }

    pub fn member_at_index(&self, index: u64) -> Option<Label> {
        if index == 0 {
            return None;
        }
        self.members.get(index as usize - 1).copied()
    }
}

/// Derive group `j` of size `n` from `seed` over `universe`.
pub fn group_derive(
    seed: &Seed,
    j: u64,
    universe: &[Label],
    n: u32,
) -> Result<Group, CommitteeError> {
    if n as usize > universe.len() {
        return Err(CommitteeError::GroupTooLarge { n, universe: universe.len() });
    }
    let perm = permutation(universe, &prg(seed, j))?;
    Ok(Group { id: j, members: perm.as_slice()[..n as usize].to_vec() })
}

/// Committee index for a round: the seed's integer value mod the number of
/// registered groups. `m` must be positive.
pub fn committee_select(seed: &Seed, m: u64) -> u64 {
    assert!(m > 0, "committee selection needs at least one group");
    seed.value_mod(m)
}

/// Exact hypergeometric CDF: probability of at most `x` successes when
/// drawing `n` from a population of `big_n` containing `big_m` successes.
pub fn cdf_hyper(x: u64, n: u64, big_m: u64, big_n: u64) -> Ratio<BigUint> {
    assert!(n <= big_n && big_m <= big_n, "sample and successes must fit the population");
    let den = binomial(big_n, n);
    let mut num = BigUint::zero();
    let k_lo = n.saturating_sub(big_n - big_m);
    let k_hi = x.min(big_m).min(n);
    let mut k = k_lo;
    while k <= k_hi {
        num += binomial(big_m, k) * binomial(big_n - big_m, n - k);
        k += 1;
    }
    Ratio::new(num, den)
}

/// Exact binomial CDF: probability of at most `x` successes in `n` trials
/// with success probability `p`.
pub fn cdf_binom(x: u64, n: u64, p: Ratio<BigUint>) -> Ratio<BigUint> {
    assert!(p <= Ratio::one(), "probability cannot exceed 1");
    let (a, b) = (p.numer().clone(), p.denom().clone());
    let b_minus_a = &b - &a;
    let mut num = BigUint::zero();
    for k in 0..=x.min(n) {
        num += binomial(n, k) * a.pow(k as u32) * b_minus_a.pow((n - k) as u32);
    }
    Ratio::new(num, b.pow(n as u32))
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Honest-majority shortfall: the largest tolerable number of Byzantine
/// members in a group of `n` is `ceil(n/2) - 1`.
fn max_byzantine_members(n: u64) -> u64 {
    (n + 1) / 2 - 1
}

/// `cdf > 1 - 2^-r`, compared in integers: `num * 2^r > den * (2^r - 1)`.
fn exceeds_target(num: &BigUint, den: &BigUint, rho_log2: u32) -> bool {
    (num << rho_log2) > ((den << rho_log2) - den)
}

/// Smallest group size n with
/// `CDF_hg(ceil(n/2)-1; n, floor(N/beta), N) > 1 - 2^-rho_log2`.
///
/// Linear scan over n (bounded by the population: sampling everyone gives
/// certainty), binomial coefficients updated incrementally along the scan.
pub fn min_group_size_hyper(
    beta: Beta,
    rho_log2: u32,
    population: u64,
) -> Result<u64, CommitteeError> {
    let found = scan_hyper(beta, &[rho_log2], population)?;
    Ok(found[0])
}

/// Smallest group size n with
/// `CDF_binom(ceil(n/2)-1; n, 1/beta) > 1 - 2^-rho_log2`.
///
/// Independent of the universe size and an upper bound for the finite-universe
/// answer.
pub fn min_group_size_binom(beta: Beta, rho_log2: u32) -> Result<u64, CommitteeError> {
    let found = scan_binom(beta, &[rho_log2])?;
    Ok(found[0])
}

/// Shared scan: smallest qualifying n for each target exponent. Targets must
/// be sorted ascending so the scan can stop at the strictest one.
fn scan_hyper(beta: Beta, targets: &[u32], population: u64) -> Result<Vec<u64>, CommitteeError> {
    check_targets(targets)?;
    if population == 0 {
        return Err(CommitteeError::EmptyPopulation);
    }
    let big_n = population;
    let big_m = byzantine_bound(population, beta);
    let big_a = big_n - big_m; // honest pool

    // cm[k] = C(M, k), extended as the scan needs larger k.
    let mut cm: Vec<BigUint> = vec![BigUint::one()];
    // Running C(A, n) and C(N, n).
    let mut ca_n = BigUint::one();
    let mut cn_n = BigUint::one();

    let mut found = vec![0u64; targets.len()];
    let mut remaining = targets.len();
    for n in 1..=big_n {
        ca_n = update_binomial(ca_n, big_a, n);
        cn_n = update_binomial(cn_n, big_n, n);

        let x = max_byzantine_members(n);
        while cm.len() <= x as usize && (cm.len() as u64) <= big_m {
            let k = cm.len() as u64;
            let next = &cm[k as usize - 1] * BigUint::from(big_m - k + 1) / BigUint::from(k);
            cm.push(next);
        }

        // Sum C(M,k) * C(A, n-k) for k = 0..=x, descending C(A, n-k)
        // incrementally from C(A, n).
        let mut sum = BigUint::zero();
        let mut ca = ca_n.clone(); // C(A, n - k) at k = 0
        let k_hi = x.min(big_m).min(n);
        for k in 0..=k_hi {
            if n - k <= big_a {
                sum += &cm[k as usize] * &ca;
            }
            // Step C(A, j) -> C(A, j-1) with j = n - k.
            let j = n - k;
            if j >= 1 && k < k_hi {
                if j <= big_a {
                    ca = ca * BigUint::from(j) / BigUint::from(big_a - j + 1);
                } else if j == big_a + 1 {
                    // C(A, j) was zero; restart from C(A, A) = 1.
                    ca = BigUint::one();
                }
            }
        }

        for (i, &r) in targets.iter().enumerate() {
            if found[i] == 0 && exceeds_target(&sum, &cn_n, r) {
                found[i] = n;
                remaining -= 1;
            }
        }
        if remaining == 0 {
            break;
        }
    }
    // Sampling the whole population is certain: x >= M once n = N, so every
    // target resolves by then.
    assert!(remaining == 0, "scan must resolve within the population");
    Ok(found)
}

fn scan_binom(beta: Beta, targets: &[u32]) -> Result<Vec<u64>, CommitteeError> {
    check_targets(targets)?;
    // p = 1/beta = den/num; term_k = C(n,k) * a^k * (b-a)^(n-k), denominator
    // b^n, with a = den, b = num.
    let a = BigUint::from(beta.den);
    let b = BigUint::from(beta.num);
    let b_minus_a = &b - &a;

    let mut found = vec![0u64; targets.len()];
    let mut remaining = targets.len();
    let mut den = BigUint::one(); // b^n
    let mut lead = BigUint::one(); // (b-a)^n
    for n in 1u64.. {
        den *= &b;
        lead *= &b_minus_a;

        let x = max_byzantine_members(n);
        let mut term = lead.clone(); // k = 0
        let mut sum = term.clone();
        for k in 0..x {
            // term_{k+1} = term_k * (n-k) * a / ((k+1) * (b-a)), exact.
            term = term * BigUint::from(n - k) * &a
                / BigUint::from(k + 1)
                / &b_minus_a;
            sum += &term;
        }

        for (i, &r) in targets.iter().enumerate() {
            if found[i] == 0 && exceeds_target(&sum, &den, r) {
                found[i] = n;
                remaining -= 1;
            }
        }
        if remaining == 0 {
            break;
        }
        // beta > 2 makes the tail probability vanish; generous safety bound.
        assert!(n < 1_000_000, "binomial scan failed to converge");
    }
    Ok(found)
}

fn check_targets(targets: &[u32]) -> Result<(), CommitteeError> {
    if targets.iter().any(|&r| r == 0) {
        return Err(CommitteeError::BadRho);
    }
    Ok(())
}

/// `C(total, n)` from `C(total, n-1)`.
fn update_binomial(prev: BigUint, total: u64, n: u64) -> BigUint {
    if n > total {
        return BigUint::zero();
    }
    prev * BigUint::from(total - n + 1) / BigUint::from(n)
}

/// A grid of minimal group sizes: rows are failure-probability exponents,
/// columns are beta values. `hyper[r][b]` uses the finite population,
/// `binom[r][b]` the universe-independent bound.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupSizeTable {
    pub betas: Vec<Beta>,
    pub rho_log2s: Vec<u32>,
    pub population: u64,
    pub hyper: Vec<Vec<u64>>,
    pub binom: Vec<Vec<u64>>,
}

/// Compute the full grid. One scan per beta serves all exponents.
pub fn group_size_table(
    betas: &[Beta],
    rho_log2s: &[u32],
    population: u64,
) -> Result<GroupSizeTable, CommitteeError> {
    let mut sorted = rho_log2s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut hyper_cols = Vec::new();
    let mut binom_cols = Vec::new();
    for &beta in betas {
        hyper_cols.push(scan_hyper(beta, &sorted, population)?);
        binom_cols.push(scan_binom(beta, &sorted)?);
    }
    let pick = |cols: &[Vec<u64>], r: u32| -> Vec<u64> {
        let ri = sorted.iter().position(|&s| s == r).unwrap();
        cols.iter().map(|c| c[ri]).collect()
    };
    Ok(GroupSizeTable {
        betas: betas.to_vec(),
        rho_log2s: rho_log2s.to_vec(),
        population,
        hyper: rho_log2s.iter().map(|&r| pick(&hyper_cols, r)).collect(),
        binom: rho_log2s.iter().map(|&r| pick(&binom_cols, r)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_parsing_and_bounds() {
        assert!(Beta::from_integer(3).is_ok());
        assert!(Beta::new(14, 5).is_ok());
        assert!(Beta::new(2, 1).is_err());
        assert!(Beta::new(4, 2).is_err()); // equals 2
        assert!(Beta::new(1, 0).is_err());
        assert_eq!("3".parse::<Beta>().unwrap(), Beta::from_integer(3).unwrap());
        assert_eq!("14/5".parse::<Beta>().unwrap(), Beta::new(14, 5).unwrap());
        assert_eq!(Beta::new(28, 10).unwrap(), Beta::new(14, 5).unwrap());
    }

    #[test]
    fn byzantine_bound_floors() {
        let b3 = Beta::from_integer(3).unwrap();
        assert_eq!(byzantine_bound(10_000, b3), 3333);
        assert_eq!(byzantine_bound(10, b3), 3);
        let b52 = Beta::new(5, 2).unwrap();
        assert_eq!(byzantine_bound(10, b52), 4);
    }

    #[test]
    fn universe_validation() {
        let u = Universe::contiguous(7, [Label(2), Label(5)]).unwrap();
        assert_eq!(u.len(), 7);
        assert!(u.is_byzantine(Label(2)));
        assert!(!u.is_byzantine(Label(1)));
        assert_eq!(u.honest().count(), 5);

        assert!(Universe::contiguous(0, []).is_err());
        assert!(Universe::new(vec![Label(1), Label(1)], BTreeSet::new()).is_err());
        assert!(Universe::new(vec![Label(1)], [Label(9)].into_iter().collect()).is_err());

        let b3 = Beta::from_integer(3).unwrap();
        // 2 of 7 byzantine: 2 < 7/3, fine. 3 of 7: 3 >= 7/3, rejected.
        assert!(u.check_beta(b3).is_ok());
        let v = Universe::contiguous(7, (1..=3).map(Label)).unwrap();
        assert!(v.check_beta(b3).is_err());
    }

    #[test]
    fn committee_select_reduces_seed() {
        let mut seven = [0u8; 32];
        seven[31] = 7;
        assert_eq!(committee_select(&Seed(seven), 5), 2);
        assert_eq!(committee_select(&Seed(seven), 1), 0);
    }

    #[test]
    fn group_derive_bounds() {
        let u: Vec<Label> = (1..=6).map(Label).collect();
        let seed = Seed::from(crate::crypto::hash(b"g"));
        assert!(group_derive(&seed, 1, &u, 7).is_err());
        let g = group_derive(&seed, 1, &u, 3).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.id, 1);
        // Share indices are 1-based positions.
        assert_eq!(g.share_index(g.members[0]), Some(1));
        assert_eq!(g.member_at_index(3), Some(g.members[2]));
        assert_eq!(g.member_at_index(0), None);
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial(5, 0), BigUint::from(1u32));
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
        assert_eq!(binomial(5, 5), BigUint::from(1u32));
        assert_eq!(binomial(5, 6), BigUint::zero());
        assert_eq!(binomial(52, 5), BigUint::from(2_598_960u64));
    }

    #[test]
    fn cdf_edge_cases() {
        // Full support sums to one.
        let full = cdf_hyper(3, 3, 2, 5);
        assert_eq!(full, Ratio::one());
        let fullb = cdf_binom(4, 4, Ratio::new(BigUint::from(1u32), BigUint::from(3u32)));
        assert_eq!(fullb, Ratio::one());
        // Zero successes possible even when x = 0.
        let z = cdf_hyper(0, 2, 1, 4);
        assert_eq!(z, Ratio::new(BigUint::from(1u32), BigUint::from(2u32)));
    }
}
