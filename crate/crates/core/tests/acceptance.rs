//! Acceptance gate: runs the full verification battery sequentially and
//! prints one pass/fail line per criterion (visible with `--nocapture`,
//! or automatically when the gate fails).

use wulff_core::acceptance::{format_line, run_all};

#[test]
fn acceptance_criteria() {
    let results = run_all();
    for r in &results {
        println!("{}", format_line(r));
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format_line(r))
        .collect();
    assert!(
        failed.is_empty(),
        "{} of {} criteria failed:\n{}",
        failed.len(),
        results.len(),
        failed.join("\n")
    );
}
