//! Full-budget acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 9's second half (the ratio spread growing at every level in 95% of
//! deep chains) does not hold for this model at depth 4; about half of the
//! levels set a new extreme. It is reported as FAIL and listed here.

use channelfield::verify::{run_with, Budget};

const KNOWN_FAILING: [usize; 1] = [9];

fn main() {
    let report = run_with(&[], &Budget::full(), 20_240_601, |c| println!("{}", c.line())).unwrap();
    assert_eq!(report.criteria.len(), 12);
    let failing = report.failing();
    println!("{} of 12 criteria passed; known failing: {KNOWN_FAILING:?}", 12 - failing.len());
    let unexpected: Vec<usize> = failing.into_iter().filter(|id| !KNOWN_FAILING.contains(id)).collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
