use std::path::Path;

use serde::Deserialize;

use tlnas::stats::{spearman_test, welch_t_test};

fn fixture<T: for<'de> Deserialize<'de>>(name: &str) -> T {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[derive(Deserialize)]
struct WelchCase {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    df: f64,
    p_two_sided: f64,
    p_greater: f64,
}

#[derive(Deserialize)]
struct Cases<T> {
    cases: Vec<T>,
}

#[test]
fn welch_matches_scipy() {
    let reference: Cases<WelchCase> = fixture("welch_reference.json");
    assert_eq!(reference.cases.len(), 20);
    for (i, c) in reference.cases.iter().enumerate() {
        let r = welch_t_test(&c.a, &c.b).unwrap();
        assert!((r.t_statistic - c.t).abs() <= 1e-9 * c.t.abs().max(1.0), "case {i}: t {} vs {}", r.t_statistic, c.t);
        assert!((r.degrees_of_freedom - c.df).abs() <= 1e-9 * c.df, "case {i}: df");
        assert!((r.p_value - c.p_two_sided).abs() <= 1e-6, "case {i}: p {} vs {}", r.p_value, c.p_two_sided);
        assert!((r.p_greater() - c.p_greater).abs() <= 1e-6, "case {i}: one-sided p");
    }
}

#[test]
fn welch_is_antisymmetric() {
    let reference: Cases<WelchCase> = fixture("welch_reference.json");
    for c in &reference.cases {
        let ab = welch_t_test(&c.a, &c.b).unwrap();
        let ba = welch_t_test(&c.b, &c.a).unwrap();
        assert_eq!(ab.t_statistic, -ba.t_statistic);
        assert!((ab.p_value - ba.p_value).abs() < 1e-15);
        assert!((ab.p_greater() + ba.p_greater() - 1.0).abs() < 1e-12);
    }
}

#[derive(Deserialize)]
struct SpearmanCase {
    x: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
    p: f64,
}

#[test]
fn spearman_matches_scipy() {
    let reference: Cases<SpearmanCase> = fixture("spearman_reference.json");
    for (i, c) in reference.cases.iter().enumerate() {
        let (rho, p) = spearman_test(&c.x, &c.y).unwrap();
        assert!((rho - c.rho).abs() <= 1e-12, "case {i}: rho {rho} vs {}", c.rho);
        assert!((p - c.p).abs() <= 1e-9, "case {i}: p {p} vs {}", c.p);
    }
}
