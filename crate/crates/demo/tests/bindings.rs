use ffhe::study::StudyReport;
use ffhe_demo::{solve_json, sweep_json, trace_json};

#[test]
fn solve_returns_a_report() {
    let text = solve_json("sssc 101-102 p_flow=0.9", "nr-warm-ffhe").unwrap();
    let rep = StudyReport::from_json(&text).unwrap();
    assert!(rep.converged());
    let t = &rep.runs[0].devices[0].targets[0];
    assert!((t.achieved - 0.9).abs() < 1e-6);
}

#[test]
fn solve_rejects_unknown_method() {
    assert!(solve_json("", "gauss-seidel").is_err());
}

#[test]
fn trace_has_three_histories() {
    let v: serde_json::Value = serde_json::from_str(&trace_json("", 3).unwrap()).unwrap();
    for key in ["flat", "warm", "nr"] {
        assert!(!v[key].as_array().unwrap().is_empty(), "{key}");
    }
}

#[test]
fn sweep_hits_each_setpoint() {
    let v: serde_json::Value =
        serde_json::from_str(&sweep_json("sssc 101-102 p_flow={}", 0.5, 0.7, 3).unwrap()).unwrap();
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts.iter().all(|p| p["converged"].as_bool().unwrap()));
    assert!((pts[1]["setpoint"].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn sweep_needs_a_placeholder() {
    assert!(sweep_json("sssc 101-102 p_flow=0.5", 0.0, 1.0, 3).is_err());
}
