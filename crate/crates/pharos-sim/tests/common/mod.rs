//! Shared builders for the integration suites: scenario construction from
//! JSON values, fixture loading, and the CI scenario matrix.

#![allow(dead_code)]

use pharos_sim::runner::{self, RunArtifacts};
use pharos_sim::scenario::Scenario;
use pharos_sim::theorems::{self, CheckResult, Report, Status};

/// Parse, validate, run, and check a scenario given as a JSON value.
pub fn run_value(value: &serde_json::Value) -> (RunArtifacts, Report) {
    let scenario = Scenario::from_json(&value.to_string()).expect("scenario parses");
    scenario.validate().expect("scenario is valid");
    let art = runner::run(scenario);
    let report = theorems::run_checks(&art);
    (art, report)
}

/// Run one of the checked-in scenario fixtures by file stem.
pub fn run_fixture(stem: &str) -> (RunArtifacts, Report) {
    let path = format!("{}/scenarios/{stem}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"));
    let scenario = Scenario::from_json(&text).expect("fixture parses");
    scenario.validate().expect("fixture is valid");
    let art = runner::run(scenario);
    let report = theorems::run_checks(&art);
    (art, report)
}

pub fn expect<'a>(report: &'a Report, name: &str) -> &'a CheckResult {
    report
        .get(name)
        .unwrap_or_else(|| panic!("report for {} lacks check {name}", report.scenario))
}

pub fn assert_status(report: &Report, name: &str, status: Status) {
    let r = expect(report, name);
    assert_eq!(
        r.status, status,
        "{}: {name} expected {status:?}, got {:?} ({}) witness {:?}",
        report.scenario, r.status, r.detail, r.witness
    );
}

/// Largest safe adversary count for a universe of n.
pub fn f_max(n: u64) -> u64 {
    (n - 1) / 2
}

/// A beta satisfying the strict soundness bound f * beta < n for the sizes
/// the matrix uses.
pub fn beta_for(n: u64, f: u64) -> &'static str {
    match (n, f) {
        (_, 0) | (_, 1) => "3",
        (7, 3) => "9/4",
        (10, 4) => "12/5",
        _ => panic!("no beta configured for n={n} f={f}"),
    }
}

pub const BEHAVIOR_KINDS: [&str; 6] = [
    "equivocate",
    "withhold-signatures",
    "withhold-notarization",
    "selfish-chain",
    "crash",
    "beacon-abstain",
];

fn behavior_json(kind: &str) -> serde_json::Value {
    match kind {
        "withhold-notarization" => {
            serde_json::json!({"kind": "withhold-notarization", "delay": "1"})
        }
        "crash" => serde_json::json!({"kind": "crash", "at": "30"}),
        other => serde_json::json!({ "kind": other }),
    }
}

/// One CI matrix cell: n replicas, the top f labels running `behavior`.
pub fn matrix_cell(n: u64, f: u64, behavior: Option<&str>, bt: &str) -> serde_json::Value {
    let mut adversaries = Vec::new();
    if let Some(kind) = behavior {
        for label in n - f + 1..=n {
            adversaries.push(serde_json::json!({"label": label, "behavior": behavior_json(kind)}));
        }
    }
    let name = format!("ci-n{n}-f{f}-{}-bt{bt}", behavior.unwrap_or("honest"));
    serde_json::json!({
        "version": 1,
        "name": name,
        "universe": n,
        "group_size": n,
        "beta": beta_for(n, f),
        "rounds": 100,
        "delta": "1",
        "block_time": bt,
        "finalize": {"timer": {"delay": "2"}},
        "master_seed": name,
        "adversaries": adversaries,
    })
}

/// The CI scenario matrix: universe sizes {4, 7, 10}, adversary counts
/// {0, 1, f_max}, every behavior, over the given waiting periods. Honest
/// cells collapse to one per (n, block time).
pub fn matrix(block_times: &[&str]) -> Vec<(String, serde_json::Value)> {
    let mut cells = Vec::new();
    for &n in &[4u64, 7, 10] {
        let mut fs = vec![0, 1, f_max(n)];
        fs.dedup();
        for &bt in block_times {
            for &f in &fs {
                if f == 0 {
                    push(&mut cells, matrix_cell(n, 0, None, bt));
                } else {
                    for kind in BEHAVIOR_KINDS {
                        push(&mut cells, matrix_cell(n, f, Some(kind), bt));
                    }
                }
            }
        }
    }
    cells
}

fn push(cells: &mut Vec<(String, serde_json::Value)>, value: serde_json::Value) {
    let name = value["name"].as_str().expect("cell has a name").to_string();
    cells.push((name, value));
}
