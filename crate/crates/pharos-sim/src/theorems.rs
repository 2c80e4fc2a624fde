//! Post-run verdicts: each protocol property becomes one named check over
//! the trace, reported as pass, fail, skip (hypothesis not met), or info.
//!
//! Safety checks (randomness agreement, finalized-prefix consistency,
//! finalized-implies-notarized) always run: they must hold under any
//! network and any of the modeled behaviors. Timing and progress checks
//! carry hypotheses (no partitions, a large enough waiting period, enough
//! honest committee members) and skip rounds or whole runs where those
//! fail, rather than diluting the bound.

use crate::runner::RunArtifacts;
use crate::scenario::FinalizeSpec;
use pharos::crypto::Digest;
use pharos::time::Time;
use pharos::{Label, Round};

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Info,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    /// What was checked or why it was skipped.
    pub detail: String,
    /// Instances evaluated (rounds, pairs, windows).
    pub checked: u64,
    pub violations: u64,
    /// First violating instance, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl CheckResult {
    fn skip(name: &str, reason: &str) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            status: Status::Skip,
            detail: reason.to_string(),
            checked: 0,
            violations: 0,
            witness: None,
        }
    }

    fn line(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
            Status::Info => "INFO",
        };
        let mut s = format!(
            "{status} {name}: {detail} [checked {checked}, violations {violations}]",
            name = self.name,
            detail = self.detail,
            checked = self.checked,
            violations = self.violations,
        );
        if let Some(w) = &self.witness {
            s.push_str(&format!(" witness: {w}"));
        }
        s
    }
}

/// Checks whose failure makes the run unsound rather than slow.
const SAFETY_CHECKS: [&str; 3] =
    ["randomness-agreement", "prefix-consistency", "finalized-are-notarized"];

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub safety_ok: bool,
    pub all_ok: bool,
    pub results: Vec<CheckResult>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn lines(&self) -> Vec<String> {
        self.results.iter().map(|r| r.line()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

struct Ctx<'a> {
    art: &'a RunArtifacts,
    rounds: u64,
    delta: Time,
    bt: Time,
    sync: bool,
    threshold: u64,
}

/// A check under construction: counts instances and keeps the first
/// violation as witness.
struct Tally {
    name: &'static str,
    checked: u64,
    violations: u64,
    witness: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Tally {
        Tally { name, checked: 0, violations: 0, witness: None }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn result(self, detail: String) -> CheckResult {
        let status = if self.checked == 0 {
            Status::Skip
        } else if self.violations == 0 {
            Status::Pass
        } else {
            Status::Fail
        };
        let detail = if self.checked == 0 && status == Status::Skip {
            format!("no instance met the hypothesis; {detail}")
        } else {
            detail
        };
        CheckResult {
            name: self.name.to_string(),
            status,
            detail,
            checked: self.checked,
            violations: self.violations,
            witness: self.witness,
        }
    }
}

fn short(d: &Digest) -> String {
    hex::encode(&d.0[..4])
}

/// ceil(x / y) for nonnegative x and positive y.
fn ceil_ratio(x: Time, y: Time) -> u64 {
    let num = x.numer() * y.denom();
    let den = x.denom() * y.numer();
    debug_assert!(num >= 0 && den > 0);
    ((num + den - 1) / den).max(0) as u64
}

/// Evaluate every check against a finished run.
pub fn run_checks(art: &RunArtifacts) -> Report {
    let ctx = Ctx {
        art,
        rounds: art.scenario.rounds,
        delta: art.scenario.delta.0,
        bt: art.scenario.block_time.0,
        sync: art.scenario.is_sync(),
        threshold: art.config.threshold as u64,
    };
    let mut results = vec![
        randomness_agreement(&ctx),
        prefix_consistency(&ctx),
        finalized_are_notarized(&ctx),
        completion(&ctx),
        entry_skew(&ctx),
        one_round_apart(&ctx),
        round_spacing(&ctx),
        fast_bound(&ctx),
        beacon_propagation(&ctx),
        block_propagation(&ctx),
        normal_operation(&ctx),
        minimal_progress(&ctx),
        referenced_notarization(&ctx),
    ];
    if art.scenario.checks.all_normal {
        results.push(all_normal(&ctx));
    }
    if art.scenario.checks.main_theorem {
        results.push(finality_latency(&ctx));
    }
    if let Some(g) = &art.scenario.checks.growth {
        results.push(growth(&ctx, g.k, g.allowed_violations));
    }
    if let Some(q) = &art.scenario.checks.quality {
        results.push(quality(&ctx, q.eta, q.num, q.den, q.upto));
    }
    if let Some(s) = &art.scenario.checks.stall {
        results.push(stall_resume(&ctx, s));
    }
    results.push(top_rank_slack(&ctx));

    let safety_ok = results
        .iter()
        .filter(|r| SAFETY_CHECKS.contains(&r.name.as_str()))
        .all(|r| r.status == Status::Pass);
    let all_ok = results.iter().all(|r| r.status != Status::Fail);
    Report { scenario: art.scenario.name.clone(), safety_ok, all_ok, results }
}

impl Ctx<'_> {
    /// Honest and Byzantine member counts of the committee responsible for
    /// round r (randomness and notarization alike).
    fn committee_split(&self, r: Round) -> Option<(u64, u64)> {
        let prev = self.art.seeds.get(&r.checked_sub(1)?)?;
        let info = self.art.config.committee_for(prev);
        let honest =
            info.group.members.iter().filter(|m| self.art.honest.contains(m)).count() as u64;
        Some((honest, info.group.members.len() as u64 - honest))
    }

    fn committee_live(&self, r: Round) -> bool {
        self.committee_split(r).map(|(h, _)| h >= self.threshold).unwrap_or(false)
    }
}

/// Every replica that recovered round randomness recovered the same value.
fn randomness_agreement(ctx: &Ctx) -> CheckResult {
    let mut per_round: BTreeMap<Round, BTreeSet<[u8; 32]>> = BTreeMap::new();
    for seeds in ctx.art.replica_seeds.values() {
        for (&r, s) in seeds {
            per_round.entry(r).or_default().insert(s.0);
        }
    }
    let mut tally = Tally::new("randomness-agreement");
    for (&r, values) in &per_round {
        tally.check(values.len() == 1, || {
            format!("round {r} produced {} distinct randomness values", values.len())
        });
    }
    tally.result("one randomness value per round across all replicas".to_string())
}

/// No observer, embedded or external, ever contradicts an earlier
/// finalization, and all finalized chains are pairwise prefix-consistent.
fn prefix_consistency(ctx: &Ctx) -> CheckResult {
    let mut tally = Tally::new("prefix-consistency");
    let mut chains: Vec<(String, Vec<Digest>)> = Vec::new();
    for (label, replica) in &ctx.art.replicas {
        chains.push((format!("replica {label}"), replica.observer().finalized().to_vec()));
    }
    for (i, obs) in ctx.art.observers.iter().enumerate() {
        chains.push((format!("observer {i}"), obs.finalized().to_vec()));
    }
    for (label, count) in &ctx.art.trace.embedded_violations {
        tally.check(*count == 0, || format!("replica {label} recorded {count} violations"));
    }
    for (i, count) in ctx.art.trace.observer_violations.iter().enumerate() {
        tally.check(*count == 0, || format!("observer {i} recorded {count} violations"));
    }
    // Reported violation counters catch contradictions over time; the
    // pairwise sweep catches divergence between parties.
    for i in 0..chains.len() {
        for j in (i + 1)..chains.len() {
            let (a, b) = (&chains[i], &chains[j]);
            let n = a.1.len().min(b.1.len());
            tally.check(a.1[..n] == b.1[..n], || {
                let k = (0..n).find(|&k| a.1[k] != b.1[k]).expect("diverging index");
                format!(
                    "{} and {} diverge at height {k}: {} vs {}",
                    a.0,
                    b.0,
                    short(&a.1[k]),
                    short(&b.1[k])
                )
            });
        }
    }
    tally.result(format!("{} finalized chains pairwise consistent", chains.len()))
}

/// Every finalized block carries a genuinely assembled notarization, and
/// finalized rounds are consecutive from genesis.
fn finalized_are_notarized(ctx: &Ctx) -> CheckResult {
    let mut tally = Tally::new("finalized-are-notarized");
    let mut exports: Vec<(String, Vec<pharos::finalizer::FinalizedEntry>)> = Vec::new();
    for (label, replica) in &ctx.art.replicas {
        exports.push((format!("replica {label}"), replica.observer().export()));
    }
    for (i, obs) in ctx.art.observers.iter().enumerate() {
        exports.push((format!("observer {i}"), obs.export()));
    }
    let mut total = 0u64;
    for (name, export) in &exports {
        for (idx, entry) in export.iter().enumerate() {
            total += 1;
            tally.check(entry.round == idx as u64, || {
                format!("{name}: height {idx} holds a round-{} block", entry.round)
            });
            let notarized = ctx
                .art
                .trace
                .notarized
                .get(&entry.round)
                .map(|m| m.contains_key(&entry.digest))
                .unwrap_or(false);
            tally.check(notarized, || {
                format!(
                    "{name}: finalized {} at round {} was never notarized",
                    short(&entry.digest),
                    entry.round
                )
            });
        }
    }
    tally.result(format!("{total} finalized entries across {} chains", exports.len()))
}

/// Every honest replica entered the final round: the run finished.
fn completion(ctx: &Ctx) -> CheckResult {
    let horizon = ctx.rounds + 1;
    let entered = ctx
        .art
        .trace
        .entered_honest
        .get(&horizon)
        .map(|m| m.len())
        .unwrap_or(0);
    let ok = ctx.art.trace.completed;
    CheckResult {
        name: "completion".to_string(),
        status: if ok { Status::Pass } else { Status::Fail },
        detail: format!(
            "{entered} of {} honest replicas entered round {horizon}",
            ctx.art.honest.len()
        ),
        checked: 1,
        violations: u64::from(!ok),
        witness: None,
    }
}

/// Honest round entries spread over at most one delay bound.
fn entry_skew(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("entry-skew", "partitions configured");
    }
    let mut tally = Tally::new("entry-skew");
    for r in 1..=ctx.rounds {
        if !ctx.art.complete(r) {
            continue;
        }
        let lo = ctx.art.tau_min(r).expect("complete round");
        let hi = ctx.art.tau_max(r).expect("complete round");
        tally.check(hi <= lo + ctx.delta, || {
            format!("round {r}: entries spread from {lo} to {hi}")
        });
    }
    tally.result("entry spread within one delay bound per round".to_string())
}

/// No honest replica starts round r+1 before every honest replica reached
/// round r.
fn one_round_apart(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("one-round-apart", "partitions configured");
    }
    if ctx.bt < ctx.delta {
        return CheckResult::skip("one-round-apart", "waiting period below the delay bound");
    }
    let mut tally = Tally::new("one-round-apart");
    for r in 1..=ctx.rounds {
        if !ctx.art.complete(r) {
            continue;
        }
        let Some(next) = ctx.art.tau_min(r + 1) else { continue };
        let hi = ctx.art.tau_max(r).expect("complete round");
        tally.check(hi <= next, || {
            format!("round {}: entered at {next} before round {r} closed at {hi}", r + 1)
        });
    }
    tally.result("honest replicas never two rounds apart".to_string())
}

/// Per honest replica, consecutive round entries are at least the waiting
/// period minus one delay bound apart.
fn round_spacing(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("round-spacing", "partitions configured");
    }
    if ctx.bt < ctx.delta {
        return CheckResult::skip("round-spacing", "waiting period below the delay bound");
    }
    let mut tally = Tally::new("round-spacing");
    let floor = ctx.bt - ctx.delta;
    for r in 1..=ctx.rounds {
        let (Some(cur), Some(next)) = (
            ctx.art.trace.entered_honest.get(&r),
            ctx.art.trace.entered_honest.get(&(r + 1)),
        ) else {
            continue;
        };
        for (label, &t0) in cur {
            let Some(&t1) = next.get(label) else { continue };
            tally.check(t1 - t0 >= floor, || {
                format!("replica {label}: round {r} at {t0}, round {} at {t1}", r + 1)
            });
        }
    }
    tally.result(format!("per-replica round length at least {floor}"))
}

/// No replica enters round r+1 before the earliest honest round-r entry
/// plus the waiting period. Holds under any network: it only needs honest
/// replica code, which never signs early.
fn fast_bound(ctx: &Ctx) -> CheckResult {
    let mut tally = Tally::new("fast-bound");
    for r in 1..=ctx.rounds {
        let (Some(lo), Some(first_next)) = (ctx.art.tau_min(r), ctx.art.tau_star(r + 1)) else {
            continue;
        };
        tally.check(lo + ctx.bt <= first_next, || {
            format!("round {}: first entry {first_next}, honest round {r} began {lo}", r + 1)
        });
    }
    tally.result("rounds last at least the waiting period".to_string())
}

/// All honest replicas hold the round randomness within two delay bounds
/// of the earliest honest entry.
fn beacon_propagation(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("beacon-propagation", "partitions configured");
    }
    if ctx.bt < ctx.delta * 2 {
        return CheckResult::skip("beacon-propagation", "waiting period below two delay bounds");
    }
    let mut tally = Tally::new("beacon-propagation");
    for r in 1..=ctx.rounds {
        if !ctx.committee_live(r) || !ctx.art.complete(r) {
            continue;
        }
        let lo = ctx.art.tau_min(r).expect("complete round");
        if !ctx.art.xi_complete(r) {
            tally.check(false, || {
                format!("round {r}: not every honest replica recovered the randomness")
            });
            continue;
        }
        let latest = ctx.art.xi_max(r).expect("recovery recorded");
        tally.check(latest <= lo + ctx.delta * 2, || {
            format!("round {r}: last honest recovery at {latest}, round began {lo}")
        });
    }
    tally.result("randomness recovered everywhere within two delay bounds".to_string())
}

/// The best-ranked honest proposal of each round reaches every honest
/// replica before the waiting period expires.
fn block_propagation(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("block-propagation", "partitions configured");
    }
    if ctx.bt < ctx.delta * 3 {
        return CheckResult::skip("block-propagation", "waiting period below three delay bounds");
    }
    let mut tally = Tally::new("block-propagation");
    for r in 1..=ctx.rounds {
        if !ctx.committee_live(r) || !ctx.art.complete(r) {
            continue;
        }
        let Some(rank) = ctx.art.best_honest_rank(r) else { continue };
        let proposer = ctx.art.rankings[&r].label_at_rank(rank).expect("rank in range");
        let digest = ctx
            .art
            .trace
            .proposed
            .get(&r)
            .and_then(|v| v.iter().find(|(_, l, _, _)| *l == proposer))
            .map(|(_, _, d, _)| *d);
        let Some(digest) = digest else {
            tally.check(false, || {
                format!("round {r}: best-ranked honest replica {proposer} never proposed")
            });
            continue;
        };
        let deadline = ctx.art.tau_min(r).expect("complete round") + ctx.bt;
        for label in &ctx.art.honest {
            let stored = ctx
                .art
                .trace
                .block_stored
                .get(label)
                .and_then(|m| m.get(&digest))
                .copied();
            tally.check(stored.map(|t| t <= deadline).unwrap_or(false), || {
                format!(
                    "round {r}: replica {label} lacked proposal {} by {deadline}",
                    short(&digest)
                )
            });
        }
    }
    tally.result("best honest proposal stored everywhere before signing".to_string())
}

/// Rounds led by an honest replica notarize exactly one block.
fn normal_operation(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("normal-operation", "partitions configured");
    }
    if ctx.bt < ctx.delta * 3 {
        return CheckResult::skip("normal-operation", "waiting period below three delay bounds");
    }
    let mut tally = Tally::new("normal-operation");
    for r in 1..=ctx.rounds {
        if ctx.art.top_honest(r) != Some(true) {
            continue;
        }
        let Some((honest, byz)) = ctx.committee_split(r) else { continue };
        if honest < ctx.threshold || byz >= ctx.threshold {
            continue;
        }
        let count = ctx.art.trace.notarized.get(&r).map(|m| m.len()).unwrap_or(0);
        tally.check(count == 1, || format!("round {r}: {count} notarized blocks"));
    }
    tally.result("honest-led rounds notarized exactly one block".to_string())
}

/// Round length is bounded by the waiting period plus (d+2) delay bounds,
/// where d is the best honest rank of the round.
fn minimal_progress(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("minimal-progress", "partitions configured");
    }
    if ctx.bt < ctx.delta * 3 {
        return CheckResult::skip("minimal-progress", "waiting period below three delay bounds");
    }
    let mut tally = Tally::new("minimal-progress");
    for r in 1..=ctx.rounds {
        if !ctx.committee_live(r) {
            continue;
        }
        let (Some(lo), Some(next), Some(d)) =
            (ctx.art.tau_min(r), ctx.art.tau_min(r + 1), ctx.art.best_honest_rank(r))
        else {
            continue;
        };
        let bound = lo + ctx.bt + ctx.delta * (d as i128 + 2);
        tally.check(next <= bound, || {
            format!("round {r}: next round at {next}, bound {bound} (best honest rank {d})")
        });
    }
    tally.result("every round advanced within the progress bound".to_string())
}

/// The notarization of a referenced block reaches every honest replica
/// within two delay bounds of the next round starting.
fn referenced_notarization(ctx: &Ctx) -> CheckResult {
    if !ctx.sync {
        return CheckResult::skip("referenced-notarization", "partitions configured");
    }
    if ctx.bt < ctx.delta * 3 {
        return CheckResult::skip(
            "referenced-notarization",
            "waiting period below three delay bounds",
        );
    }
    let genesis = *ctx.art.replicas.values().next().expect("replicas exist").pool().genesis();
    let mut tally = Tally::new("referenced-notarization");
    for r in 1..=ctx.rounds {
        let Some(blocks) = ctx.art.trace.notarized.get(&r) else { continue };
        let Some(next) = ctx.art.tau_min(r + 1) else { continue };
        let deadline = next + ctx.delta * 2;
        for digest in blocks.keys() {
            let prev = ctx
                .art
                .trace
                .block_meta
                .get(digest)
                .and_then(|m| m.prev)
                .expect("notarized blocks crossed the network");
            if prev == genesis {
                continue;
            }
            for label in &ctx.art.honest {
                let seen = ctx
                    .art
                    .trace
                    .nota_seen
                    .get(label)
                    .and_then(|m| m.get(&prev))
                    .copied();
                tally.check(seen.map(|t| t <= deadline).unwrap_or(false), || {
                    format!(
                        "round {r}: replica {label} missed the notarization of {} by {deadline}",
                        short(&prev)
                    )
                });
            }
        }
    }
    tally.result("referenced notarizations reached everyone in the window".to_string())
}

/// Scenario assertion: every round notarized exactly one block.
fn all_normal(ctx: &Ctx) -> CheckResult {
    let mut tally = Tally::new("all-normal");
    for r in 1..=ctx.rounds {
        let count = ctx.art.trace.notarized.get(&r).map(|m| m.len()).unwrap_or(0);
        tally.check(count == 1, || format!("round {r}: {count} notarized blocks"));
    }
    tally.result("every round notarized exactly one block".to_string())
}

/// Scenario assertion: every observer finalizes round r no later than its
/// round r+1 bucket filling plus the finalize delay.
fn finality_latency(ctx: &Ctx) -> CheckResult {
    let FinalizeSpec::Timer { delay } = ctx.art.scenario.finalize else {
        return CheckResult::skip("finality-latency", "not in timer finalization mode");
    };
    if !ctx.sync {
        return CheckResult::skip("finality-latency", "partitions configured");
    }
    let t = delay.0;
    // Existence horizon: late enough rounds may still have their
    // finalization in flight when the run stops.
    let extra = 1 + ceil_ratio(ctx.delta + t, ctx.bt);
    let must_exist = ctx.rounds.saturating_sub(extra);

    let mut tally = Tally::new("finality-latency");
    let mut parties: Vec<(String, &BTreeMap<Round, Time>, &BTreeMap<Round, Time>)> = Vec::new();
    for label in &ctx.art.honest {
        let (Some(fill), Some(fin)) = (
            ctx.art.trace.replica_fill.get(label),
            ctx.art.trace.replica_final.get(label),
        ) else {
            continue;
        };
        parties.push((format!("replica {label}"), fill, fin));
    }
    for i in 0..ctx.art.observers.len() {
        parties.push((
            format!("observer {i}"),
            &ctx.art.trace.observer_fill[i],
            &ctx.art.trace.observer_final[i],
        ));
    }
    for (name, fill, fin) in &parties {
        for r in 1..=ctx.rounds {
            let filled = fill.get(&(r + 1)).copied();
            let finalized = fin.get(&r).copied();
            match (filled, finalized) {
                (Some(f), Some(z)) => {
                    tally.check(z <= f + t, || {
                        format!("{name}: round {r} finalized at {z}, bucket filled at {f}")
                    });
                }
                _ if r <= must_exist => {
                    tally.check(false, || {
                        format!("{name}: round {r} never finalized within the run")
                    });
                }
                _ => {}
            }
        }
    }
    tally.result(format!(
        "finalization within {t} of the next bucket filling, across {} parties",
        parties.len()
    ))
}

/// Scenario assertion: the first external observer's finalized height at
/// the end of round r is at least r - k, with a violation allowance.
fn growth(ctx: &Ctx, k: u64, allowed: u64) -> CheckResult {
    let finals = &ctx.art.trace.observer_final[0];
    let series: Vec<(Time, Round)> = finals.iter().map(|(&r, &t)| (t, r)).collect();
    let height_at = |t: Time| -> Round {
        // One entry per height, times nondecreasing in height.
        let idx = series.partition_point(|&(ft, _)| ft <= t);
        if idx == 0 { 0 } else { series[idx - 1].1 }
    };
    let mut tally = Tally::new("growth");
    for r in 1..=ctx.rounds {
        if !ctx.art.complete(r + 1) {
            continue;
        }
        let end = ctx.art.tau_max(r + 1).expect("complete round");
        let height = height_at(end);
        tally.check(height + k >= r, || {
            format!("round {r}: finalized height {height}, needed {}", r.saturating_sub(k))
        });
    }
    let checked = tally.checked;
    let violations = tally.violations;
    let mut result = tally.result(format!(
        "finalized height kept within {k} of the round number ({violations} of {checked} \
         rounds lagged, {allowed} allowed)"
    ));
    if violations <= allowed && result.status == Status::Fail {
        result.status = Status::Pass;
    }
    result
}

/// Scenario assertion: in every window of eta consecutive finalized rounds
/// up to `upto`, at least num/den of the blocks are honest-owned.
fn quality(ctx: &Ctx, eta: u64, num: u64, den: u64, upto: u64) -> CheckResult {
    let export = ctx.art.observers[0].export();
    if (export.len() as u64) <= upto {
        return CheckResult {
            name: "quality".to_string(),
            status: Status::Fail,
            detail: format!(
                "finalized chain reaches round {} but the check needs round {upto}",
                export.len().saturating_sub(1)
            ),
            checked: 0,
            violations: 1,
            witness: None,
        };
    }
    let honest_flag: Vec<bool> = export
        .iter()
        .map(|e| e.owner.map(|o| ctx.art.honest.contains(&o)).unwrap_or(false))
        .collect();
    let mut tally = Tally::new("quality");
    for start in 1..=(upto - eta + 1) {
        let window = &honest_flag[start as usize..(start + eta) as usize];
        let honest = window.iter().filter(|&&h| h).count() as u64;
        // honest/eta >= num/den, in integers.
        tally.check(honest * den >= num * eta, || {
            format!("rounds {start}..{}: {honest} of {eta} honest-owned", start + eta - 1)
        });
    }
    tally.result(format!(
        "honest share at least {num}/{den} in every {eta}-round window up to round {upto}"
    ))
}

/// Scenario assertion: during the named partition, stalled components
/// produce no randomness after in-flight shares land, live components keep
/// producing, and stalled components resume promptly after the heal.
fn stall_resume(ctx: &Ctx, spec: &crate::scenario::StallCheck) -> CheckResult {
    let window = ctx
        .art
        .trace
        .partition_windows
        .iter()
        .find(|w| w.index == spec.partition);
    let Some(window) = window else {
        return CheckResult {
            name: "stall-resume".to_string(),
            status: Status::Fail,
            detail: format!("partition {} never activated", spec.partition),
            checked: 0,
            violations: 1,
            witness: None,
        };
    };
    let Some(end) = window.end else {
        return CheckResult {
            name: "stall-resume".to_string(),
            status: Status::Fail,
            detail: format!("partition {} never healed", spec.partition),
            checked: 0,
            violations: 1,
            witness: None,
        };
    };
    let start = window.start;
    let members = |component: usize| -> &BTreeSet<Label> { &window.components[component] };

    let mut tally = Tally::new("stall-resume");
    // Stalled: silence once in-flight shares land (delays are strictly
    // below the bound, so anything at or past start+delta is genuine).
    for &c in &spec.stalled {
        let quiet_from = start + ctx.delta;
        let hit = ctx
            .art
            .trace
            .seed_events
            .iter()
            .find(|(t, l, _)| *t >= quiet_from && *t <= end && members(c).contains(l));
        tally.check(hit.is_none(), || {
            let (t, l, r) = hit.expect("checked above");
            format!("component {c}: replica {l} recovered round {r} randomness at {t}")
        });
    }
    // Live: at least two distinct new randomness rounds during the split.
    for &c in &spec.live {
        let rounds: BTreeSet<Round> = ctx
            .art
            .trace
            .seed_events
            .iter()
            .filter(|(t, l, _)| *t > start && *t <= end && members(c).contains(l))
            .map(|(_, _, r)| *r)
            .collect();
        tally.check(rounds.len() >= 2, || {
            format!("component {c}: only {} randomness rounds during the split", rounds.len())
        });
    }
    // Resume: every stalled component recovers randomness within the
    // allowed number of worst-case rounds after the heal.
    let resume_by = end + (ctx.bt + ctx.delta * 2) * (spec.resume_rounds as i128);
    for &c in &spec.stalled {
        let resumed = ctx
            .art
            .trace
            .seed_events
            .iter()
            .any(|(t, l, _)| *t > end && *t <= resume_by && members(c).contains(l));
        tally.check(resumed, || {
            format!("component {c}: no randomness recovery by {resume_by} after heal at {end}")
        });
    }
    tally.result(format!(
        "split from {start} to {end}: stalled components silent, live components active, \
         resumption within {} rounds",
        spec.resume_rounds
    ))
}

/// Informational: the extra latency beyond the waiting period in rounds
/// whose best honest rank is zero. Bears on whether the progress bound's
/// additive term could shrink for top-ranked honest proposers.
fn top_rank_slack(ctx: &Ctx) -> CheckResult {
    let mut max_slack: Option<(Time, Round)> = None;
    let mut samples = 0u64;
    for r in 1..=ctx.rounds {
        if ctx.art.best_honest_rank(r) != Some(0) {
            continue;
        }
        let (Some(lo), Some(next)) = (ctx.art.tau_min(r), ctx.art.tau_min(r + 1)) else {
            continue;
        };
        samples += 1;
        let slack = next - lo - ctx.bt;
        if max_slack.map(|(m, _)| slack > m).unwrap_or(true) {
            max_slack = Some((slack, r));
        }
    }
    let detail = match max_slack {
        Some((slack, r)) => format!(
            "max extra latency beyond the waiting period in rank-zero-honest rounds: \
             {slack} (round {r}, delta {}, {samples} rounds sampled)",
            ctx.delta
        ),
        None => "no rank-zero-honest rounds sampled".to_string(),
    };
    CheckResult {
        name: "top-rank-slack".to_string(),
        status: Status::Info,
        detail,
        checked: samples,
        violations: 0,
        witness: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::run;
    use crate::scenario::Scenario;

    fn base(rounds: u64, block_time: &str, extra: &str) -> Scenario {
        Scenario::from_json(&format!(
            r#"{{
                "name": "theorem-tests",
                "universe": 4,
                "group_size": 4,
                "rounds": {rounds},
                "delta": "1",
                "block_time": "{block_time}",
                "finalize": {{ "timer": {{ "delay": "2" }} }},
                "master_seed": "theorem-tests"
                {extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn all_honest_run_passes_everything() {
        let art = run(base(8, "3", r#", "checks": { "all_normal": true, "main_theorem": true }"#));
        let report = run_checks(&art);
        for r in &report.results {
            assert_ne!(r.status, Status::Fail, "{}", r.line());
        }
        assert!(report.safety_ok);
        assert!(report.all_ok);
        // Sync all-honest hypotheses hold, so nothing upstream skips.
        for name in [
            "entry-skew",
            "fast-bound",
            "beacon-propagation",
            "normal-operation",
            "minimal-progress",
            "all-normal",
            "finality-latency",
        ] {
            let c = report.get(name).expect(name);
            assert_eq!(c.status, Status::Pass, "{}", c.line());
            assert!(c.checked > 0, "{} checked nothing", name);
        }
    }

    #[test]
    fn short_waiting_period_skips_timing_checks_but_keeps_safety() {
        // One delay bound of waiting: normal operation may fail, so its
        // hypothesis gate must skip it; safety still holds and passes.
        let art = run(base(8, "1", ""));
        let report = run_checks(&art);
        assert!(report.safety_ok);
        assert_eq!(report.get("normal-operation").unwrap().status, Status::Skip);
        assert_eq!(report.get("minimal-progress").unwrap().status, Status::Skip);
        assert_eq!(report.get("fast-bound").unwrap().status, Status::Pass);
        assert_eq!(report.get("prefix-consistency").unwrap().status, Status::Pass);
    }

    #[test]
    fn report_json_is_stable() {
        let art = run(base(4, "3", ""));
        let a = run_checks(&art).to_json();
        let art2 = run(base(4, "3", ""));
        let b = run_checks(&art2).to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"safety_ok\": true"));
    }

    #[test]
    fn ceil_ratio_rounds_up() {
        assert_eq!(ceil_ratio(Time::from_int(3), Time::from_int(3)), 1);
        assert_eq!(ceil_ratio(Time::from_int(4), Time::from_int(3)), 2);
        assert_eq!(ceil_ratio(Time::ZERO, Time::from_int(3)), 0);
        assert_eq!(ceil_ratio(Time::new(1, 2), Time::new(3, 2)), 1);
    }
}
