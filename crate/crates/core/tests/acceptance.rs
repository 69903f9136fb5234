use std::io::Write;

use gaplab_core::verify::{format_table, run_criterion, CRITERIA};

#[test]
fn acceptance_suite() {
    let mut results = Vec::new();
    for c in CRITERIA.iter() {
        let r = run_criterion(c.0);
        // Written to the raw handle so the line survives libtest output capture.
        let _ = std::io::stderr().write_all(format_table(std::slice::from_ref(&r)).as_bytes());
        results.push(r);
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
