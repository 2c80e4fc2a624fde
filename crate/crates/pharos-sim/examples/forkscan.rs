//! Scan a run for cross-branch double notarizations: rounds r where two
//! blocks are notarized at r+1 extending distinct round-r parents.

use pharos_sim::runner;
use pharos_sim::scenario::Scenario;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: forkscan SCENARIO [SEED]");
    let seed = args.next();
    let text = std::fs::read_to_string(&path).expect("read scenario");
    let mut scenario = Scenario::from_json(&text).expect("parse scenario");
    if let Some(s) = seed {
        scenario.master_seed = s;
    }
    scenario.validate().expect("valid scenario");
    let art = runner::run(scenario.clone());

    let mut forked = 0u64;
    let mut cross = 0u64;
    for (&r, notas) in &art.trace.notarized {
        if notas.len() >= 2 {
            forked += 1;
        }
        let Some(next) = art.trace.notarized.get(&(r + 1)) else { continue };
        let parents: std::collections::BTreeSet<_> = next
            .keys()
            .filter_map(|d| art.trace.block_meta.get(d).and_then(|m| m.prev))
            .collect();
        if parents.len() >= 2 {
            cross += 1;
            let mut line = format!("round {r}: parents at r+1 diverge;");
            for (d, t) in notas {
                line.push_str(&format!(" nota[{}]@{}", &hex::encode(&d.0[..4]), t));
            }
            for (d, t) in next {
                let p = art.trace.block_meta[d].prev.unwrap();
                line.push_str(&format!(
                    " child[{}->{}]@{}",
                    &hex::encode(&d.0[..4]),
                    &hex::encode(&p.0[..4]),
                    t
                ));
            }
            println!("{line}");
        }
    }
    println!(
        "seed={} rounds={} forked={} cross_branch_children={} violations={:?}",
        scenario.master_seed,
        scenario.rounds,
        forked,
        cross,
        art.trace.observer_violations
    );
}
