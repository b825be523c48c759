use deweight_web::{chain_json, reduce_json, search_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn search_view_for_4_25() {
    let v = parse(&search_json("4/25", 3).unwrap());
    assert_eq!(v["nearest"], "1/6");
    assert_eq!(v["dyadic"], "1/8");
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps[0]["mediant"], "1/2");
    assert_eq!(steps.last().unwrap()["mediant"], "2/13");
}

#[test]
fn search_rejects_out_of_range() {
    assert!(search_json("3/2", 2).is_err());
    assert!(search_json("abc", 2).is_err());
}

#[test]
fn chain_view_for_10_4() {
    let v = parse(&chain_json("10", 4).unwrap());
    assert_eq!(v["formula"], "a1 | (a2 & a3)");
    assert_eq!(v["models"], "10");
    assert_eq!(v["clauses"], serde_json::json!([[-1, 2, 3], [-1, 2, 4]]));
    assert!(chain_json("17", 4).is_err());
}

#[test]
fn reduce_view_for_or_instance() {
    let v = parse(&reduce_json("p cnf 2 1\nc p weight 1 2/3 0\nc p weight 2 1/2 0\n1 2 0\n").unwrap());
    assert_eq!(v["weighted_count"], "5/6");
    assert_eq!(v["c_w"], "6");
    // 2/3 needs one fresh variable, 1/2 none
    assert_eq!(v["metadata"]["total_fresh"], 1);
}
