//! Acceptance criteria, one line of output each. Run with `--nocapture` to
//! see the lines; the test fails if any criterion fails or overruns.

use krauscope::harness::suite::{
    central_identity, coupling_independence, observable_orders, povm_ambiguity_check,
    round_trips, setting_count, shot_scaling, stinespring_consistency,
};
use krauscope::harness::Check;

type Criterion = (fn() -> Check, Option<f64>);

/// Time budgets in seconds; `None` where no budget is set.
const CRITERIA: [Criterion; 8] = [
    (central_identity, Some(10.0)),
    (povm_ambiguity_check, Some(1.0)),
    (round_trips, Some(30.0)),
    (setting_count, None),
    (coupling_independence, None),
    (observable_orders, Some(10.0)),
    (shot_scaling, Some(60.0)),
    (stinespring_consistency, None),
];

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for (run, budget) in CRITERIA {
        let check = run();
        let in_time = budget.is_none_or(|b| check.seconds < b);
        let passed = check.passed && in_time;
        println!(
            "criterion {} [{}] {}: {} ({:.2}s{})",
            check.id,
            if passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail,
            check.seconds,
            budget.map_or(String::new(), |b| format!(" of {b:.0}s budget")),
        );
        if !passed {
            failed.push(check.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
