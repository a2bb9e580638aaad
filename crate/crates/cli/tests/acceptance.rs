//! The full acceptance battery, one line per criterion.

use mfgl_cli::acceptance::run_all;

#[test]
fn acceptance_criteria() {
    let outcomes = run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
