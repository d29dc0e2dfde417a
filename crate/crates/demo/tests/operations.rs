use mdvi_demo::{compare_json, params_json, softmax_json, WORK_LIMIT};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn comparison_curves_share_the_sample_axis() {
    let v = parse(compare_json(8, 2, 2, 0.9, 0.9, 1, 200, 3).unwrap());
    let (m, q) = (&v["mdvi"], &v["qlearning"]);
    assert_eq!(m["samples"], q["samples"]);
    let samples = m["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 201);
    assert_eq!(samples[0], 0);
    assert_eq!(samples[200], 200 * 16);
    for curve in [m, q] {
        for e in curve["error"].as_array().unwrap() {
            let e = e.as_f64().unwrap();
            assert!((0.0..=20.0).contains(&e));
        }
    }
}

#[test]
fn comparison_is_deterministic_and_thinned() {
    let a = compare_json(6, 3, 2, 0.9, 0.99, 2, 2000, 9).unwrap();
    assert_eq!(a, compare_json(6, 3, 2, 0.9, 0.99, 2, 2000, 9).unwrap());
    let len = parse(a)["mdvi"]["error"].as_array().unwrap().len();
    assert!(len <= 402, "{len}");
}

#[test]
fn comparison_rejects_bad_input() {
    assert!(compare_json(8, 2, 9, 0.9, 0.9, 1, 10, 0).is_err());
    assert!(compare_json(8, 2, 2, 0.9, 1.5, 1, 10, 0).is_err());
    assert!(compare_json(100, 10, 2, 0.9, 0.9, 100, (WORK_LIMIT / 1000) as usize, 0).is_err());
}

#[test]
fn softmax_sandwich_and_probabilities() {
    let v = parse(softmax_json(&[1.0, 0.0], 1.0).unwrap());
    let p = v["probabilities"].as_array().unwrap();
    let e = std::f64::consts::E;
    assert!((p[0].as_f64().unwrap() - e / (e + 1.0)).abs() < 1e-15);
    let (max, soft, ub) = (v["max"].as_f64().unwrap(), v["soft_value"].as_f64().unwrap(), v["upper_bound"].as_f64().unwrap());
    assert!(max <= soft && soft <= ub);
    assert!((ub - (1.0 + 2f64.ln())).abs() < 1e-15);
    assert!(softmax_json(&[], 1.0).is_err());
    assert!(softmax_json(&[1.0], 0.0).is_err());
}

#[test]
fn params_match_reference_values() {
    let v = parse(params_json(1, 0.9, 8, 2, 0.1, 0.1).unwrap());
    assert_eq!(v["iterations"], 141);
    assert_eq!(v["samples_per_update"], 127_966);
    assert_eq!(v["total_samples"], (141u64 * 127_966 * 16).to_string());
    let v = parse(params_json(2, 0.9, 8, 2, 0.05, 0.1).unwrap());
    assert!((v["alpha"].as_f64().unwrap() - 0.99).abs() < 1e-12);
    assert!(params_json(3, 0.9, 8, 2, 0.1, 0.1).is_err());
}
