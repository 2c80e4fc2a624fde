//! Per-round metrics table and run summary.
//!
//! The CSV holds one row per simulated round with exact rational times
//! (blank where undefined, booleans as 0/1), so identical runs produce
//! byte-identical files. The summary is a small JSON document with run
//! statistics and realized partition and stall intervals.

use crate::runner::RunArtifacts;
use pharos::time::Time;
use pharos::Round;

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub struct RoundRow {
    pub round: Round,
    /// Earliest and latest honest entry (latest only once all entered).
    pub tau_min: Option<Time>,
    pub tau_max: Option<Time>,
    /// Earliest entry by any replica.
    pub tau_star: Option<Time>,
    /// Honest randomness recovery window (max only when all recovered).
    pub xi_min: Option<Time>,
    pub xi_max: Option<Time>,
    /// Notarized blocks this round; normal means exactly one.
    pub notarized: u64,
    pub normal: bool,
    pub best_honest_rank: Option<u64>,
    pub top_honest: Option<bool>,
    /// Distinct block bodies that crossed the network for this round.
    pub proposals: u64,
    /// First external observer's finalized height at the round's end.
    pub fin_height_obs0: Option<u64>,
    /// Lag from the round's first notarization to its finalization at the
    /// first external observer.
    pub fin_latency_obs0: Option<Time>,
}

/// Finalized height of the first external observer at time `t`.
fn height_series(art: &RunArtifacts) -> Vec<(Time, Round)> {
    match art.trace.observer_final.first() {
        Some(m) => m.iter().map(|(&r, &t)| (t, r)).collect(),
        None => Vec::new(),
    }
}

fn height_at(series: &[(Time, Round)], t: Time) -> Option<Round> {
    let idx = series.partition_point(|&(ft, _)| ft <= t);
    if idx == 0 { None } else { Some(series[idx - 1].1) }
}

pub fn round_rows(art: &RunArtifacts) -> Vec<RoundRow> {
    let mut proposals_per_round: BTreeMap<Round, u64> = BTreeMap::new();
    for meta in art.trace.block_meta.values() {
        *proposals_per_round.entry(meta.round).or_insert(0) += 1;
    }
    let series = height_series(art);
    let has_observer = !art.trace.observer_final.is_empty();

    (1..=art.scenario.rounds)
        .map(|r| {
            let complete = art.complete(r);
            let notarized = art.trace.notarized.get(&r).map(|m| m.len() as u64).unwrap_or(0);
            let fin_height = if has_observer && art.complete(r + 1) {
                height_at(&series, art.tau_max(r + 1).expect("complete round"))
            } else {
                None
            };
            let fin_latency = if has_observer {
                let finalized = art.trace.observer_final[0].get(&r).copied();
                let first_nota =
                    art.trace.notarized.get(&r).and_then(|m| m.values().min().copied());
                match (finalized, first_nota) {
                    (Some(f), Some(n)) => Some(f - n),
                    _ => None,
                }
            } else {
                None
            };
            RoundRow {
                round: r,
                tau_min: art.tau_min(r),
                tau_max: if complete { art.tau_max(r) } else { None },
                tau_star: art.tau_star(r),
                xi_min: art.xi_min(r),
                xi_max: if art.xi_complete(r) { art.xi_max(r) } else { None },
                notarized,
                normal: notarized == 1,
                best_honest_rank: art.best_honest_rank(r),
                top_honest: art.top_honest(r),
                proposals: proposals_per_round.get(&r).copied().unwrap_or(0),
                fin_height_obs0: fin_height,
                fin_latency_obs0: fin_latency,
            }
        })
        .collect()
}

fn cell_time(t: Option<Time>) -> String {
    t.map(|t| t.to_string()).unwrap_or_default()
}

fn cell_u64(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn cell_bool(b: Option<bool>) -> String {
    b.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default()
}

pub fn to_csv(rows: &[RoundRow]) -> String {
    let mut out = String::from(
        "round,tau_min,tau_max,tau_star,xi_min,xi_max,notarized,normal,\
         best_honest_rank,top_honest,proposals,fin_height_obs0,fin_latency_obs0\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.round,
            cell_time(r.tau_min),
            cell_time(r.tau_max),
            cell_time(r.tau_star),
            cell_time(r.xi_min),
            cell_time(r.xi_max),
            r.notarized,
            u8::from(r.normal),
            cell_u64(r.best_honest_rank),
            cell_bool(r.top_honest),
            r.proposals,
            cell_u64(r.fin_height_obs0),
            cell_time(r.fin_latency_obs0),
        )
        .expect("string write");
    }
    out
}

/// An interval where randomness production lagged: the first recovery of
/// round `after_round + 1` came more than one worst-case normal round after
/// the first recovery of `after_round`.
#[derive(Clone, Debug, Serialize)]
pub struct BeaconStall {
    pub after_round: Round,
    pub from: String,
    pub to: String,
    pub gap: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionWindowSummary {
    pub index: usize,
    pub start: String,
    pub end: Option<String>,
    pub components: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub universe: u64,
    pub adversaries: u64,
    pub rounds: u64,
    pub completed: bool,
    pub events_processed: u64,
    pub messages_delivered: u64,
    pub normal_rounds: u64,
    pub top_rank_honest_rounds: u64,
    /// Honest-owned over total finalized blocks at the first external
    /// observer, rounds 1 and up, as an exact "h/n" fraction.
    pub honest_finalized_fraction: Option<String>,
    pub finalized_height_obs0: Option<u64>,
    pub prefix_violations: u64,
    pub observer_rejects: u64,
    pub invalid_artifacts: BTreeMap<String, u64>,
    /// Rounds the run simulated but whose randomness nobody recovered.
    pub rounds_without_randomness: Vec<Round>,
    pub beacon_stalls: Vec<BeaconStall>,
    pub partitions: Vec<PartitionWindowSummary>,
}

pub fn summary(art: &RunArtifacts) -> Summary {
    let rows = round_rows(art);
    let normal_rounds = rows.iter().filter(|r| r.normal).count() as u64;
    let top_rank_honest_rounds =
        rows.iter().filter(|r| r.top_honest == Some(true)).count() as u64;

    let (honest_fraction, finalized_height) = match art.observers.first() {
        Some(obs) => {
            let export = obs.export();
            let total = export.len().saturating_sub(1) as u64;
            let honest = export
                .iter()
                .skip(1)
                .filter(|e| e.owner.map(|o| art.honest.contains(&o)).unwrap_or(false))
                .count() as u64;
            (Some(format!("{honest}/{total}")), Some(total))
        }
        None => (None, None),
    };

    // Global first-recovery time per round; a gap beyond one worst-case
    // normal round is a stall.
    let first_seed: BTreeMap<Round, Time> = art
        .trace
        .seed_recovered
        .iter()
        .filter_map(|(&r, m)| m.values().min().map(|&t| (r, t)))
        .collect();
    let stall_gap = art.scenario.block_time.0 + art.scenario.delta.0 * 2;
    let mut beacon_stalls = Vec::new();
    for (&r, &t) in &first_seed {
        let Some(&next) = first_seed.get(&(r + 1)) else { continue };
        if next - t > stall_gap {
            beacon_stalls.push(BeaconStall {
                after_round: r,
                from: t.to_string(),
                to: next.to_string(),
                gap: (next - t).to_string(),
            });
        }
    }
    let rounds_without_randomness: Vec<Round> =
        (1..=art.scenario.rounds).filter(|r| !first_seed.contains_key(r)).collect();

    let partitions = art
        .trace
        .partition_windows
        .iter()
        .map(|w| PartitionWindowSummary {
            index: w.index,
            start: w.start.to_string(),
            end: w.end.map(|t| t.to_string()),
            components: w
                .components
                .iter()
                .map(|c| c.iter().map(|l| l.0).collect())
                .collect(),
        })
        .collect();

    Summary {
        scenario: art.scenario.name.clone(),
        universe: art.scenario.universe,
        adversaries: art.scenario.adversaries.len() as u64,
        rounds: art.scenario.rounds,
        completed: art.trace.completed,
        events_processed: art.trace.events_processed,
        messages_delivered: art.trace.messages_delivered,
        normal_rounds,
        top_rank_honest_rounds,
        honest_finalized_fraction: honest_fraction,
        finalized_height_obs0: finalized_height,
        prefix_violations: art.trace.embedded_violations.values().sum::<u64>()
            + art.trace.observer_violations.iter().sum::<u64>(),
        observer_rejects: art.trace.observer_rejects.iter().sum(),
        invalid_artifacts: art.trace.invalid.clone(),
        rounds_without_randomness,
        beacon_stalls,
        partitions,
    }
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("summary serializes");
        out.push('\n');
        out
    }
}

/// The finalized chain of one external observer: round, digest, owner.
pub fn observer_export_csv(art: &RunArtifacts, index: usize) -> String {
    let mut out = String::from("round,digest,owner\n");
    for entry in art.observers[index].export() {
        writeln!(
            out,
            "{},{},{}",
            entry.round,
            hex::encode(entry.digest.0),
            entry.owner.map(|o| o.to_string()).unwrap_or_default(),
        )
        .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::run;
    use crate::scenario::Scenario;

    fn art() -> RunArtifacts {
        run(Scenario::from_json(
            r#"{
                "name": "metrics-tests",
                "universe": 4,
                "group_size": 4,
                "rounds": 6,
                "delta": "1",
                "block_time": "3",
                "finalize": { "timer": { "delay": "2" } },
                "master_seed": "metrics-tests"
            }"#,
        )
        .unwrap())
    }

    #[test]
    fn csv_has_one_full_row_per_round() {
        let art = art();
        let rows = round_rows(&art);
        assert_eq!(rows.len(), 6);
        for row in &rows {
            assert!(row.normal, "round {} normal", row.round);
            assert_eq!(row.notarized, 1);
            assert!(row.tau_min.is_some() && row.tau_max.is_some());
            assert!(row.xi_min.is_some() && row.xi_max.is_some());
            assert!(row.best_honest_rank == Some(0), "all-honest: best rank is zero");
        }
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("round,tau_min"));
        // Exact rationals, no floats.
        assert!(!csv.contains('.'));
    }

    #[test]
    fn summary_counts_normal_rounds_and_echoes_the_scenario() {
        let art = art();
        let s = summary(&art);
        assert_eq!(s.scenario, "metrics-tests");
        assert_eq!(s.normal_rounds, 6);
        assert_eq!(s.top_rank_honest_rounds, 6);
        assert!(s.completed);
        assert!(s.beacon_stalls.is_empty());
        assert!(s.rounds_without_randomness.is_empty());
        assert_eq!(s.prefix_violations, 0);
        let json = s.to_json();
        assert!(json.contains("\"normal_rounds\": 6"));
    }

    #[test]
    fn observer_export_lists_the_finalized_chain() {
        let art = art();
        let csv = observer_export_csv(&art, 0);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines.len() >= 5);
        assert_eq!(lines[0], "round,digest,owner");
        // Genesis row: round 0, no owner.
        assert!(lines[1].starts_with("0,"));
        assert!(lines[1].ends_with(','));
    }
}
