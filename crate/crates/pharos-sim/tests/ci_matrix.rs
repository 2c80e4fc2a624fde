//! The CI scenario matrix: every (universe, adversary count, behavior,
//! waiting period) cell must complete, stay safe, and keep the progress
//! bounds. Safety holds unconditionally; timing checks may skip where their
//! hypotheses fail but must never fail.

mod common;

use pharos_sim::theorems::Status;

#[test]
fn matrix_cells_complete_safely_with_progress() {
    let cells = common::matrix(&["3", "5"]);
    assert_eq!(cells.len(), 66, "matrix shape changed");
    for (name, value) in &cells {
        let (art, report) = common::run_value(value);
        assert!(art.trace.completed, "{name}: run did not complete");
        common::assert_status(&report, "completion", Status::Pass);
        assert!(report.safety_ok, "{name}: safety checks failed");
        common::assert_status(&report, "randomness-agreement", Status::Pass);
        common::assert_status(&report, "prefix-consistency", Status::Pass);
        common::assert_status(&report, "finalized-are-notarized", Status::Pass);

        // The waiting period meets the three-delay hypothesis in every cell,
        // so the progress bound must hold outright, and no timing check may
        // report a violation.
        common::assert_status(&report, "minimal-progress", Status::Pass);
        let progress = common::expect(&report, "minimal-progress");
        assert_eq!(progress.violations, 0, "{name}: progress violations");
        for check in
            ["normal-operation", "fast-bound", "round-spacing", "one-round-apart", "entry-skew"]
        {
            let r = common::expect(&report, check);
            assert_ne!(
                r.status,
                Status::Fail,
                "{name}: {check} failed ({}) witness {:?}",
                r.detail,
                r.witness
            );
        }
        println!("{name}: safe, {} progress instances", progress.checked);
    }
}
