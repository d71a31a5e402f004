use channelfield::verify::{run, Budget, CRITERIA};

#[test]
fn cheap_criteria_pass_at_smoke_budget() {
    let report = run(&[1, 2, 6, 7, 8], &Budget::smoke(), 7).unwrap();
    assert_eq!(report.criteria.len(), 5);
    for c in &report.criteria {
        assert!(c.passed, "{}", c.line());
        assert_eq!(c.name, CRITERIA[c.id - 1]);
    }
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["criteria"][2]["id"], 6);
    assert_eq!(json["budget"]["se_band"], 4.0);
}

#[test]
fn runs_are_reproducible() {
    let a = run(&[6], &Budget::smoke(), 11).unwrap();
    let b = run(&[6], &Budget::smoke(), 11).unwrap();
    assert_eq!(a.criteria[0].details, b.criteria[0].details);
}
