use qlockin_web::{cp_fringe, frequency_response, lockin_run};

#[test]
fn fringe_export_packs_axes_then_signal() {
    let v = cp_fringe(2, 11).ok().unwrap();
    assert_eq!(v.len(), 22);
    assert!(v[0] < 0.0 && v[10] > 0.0);
    assert!(v[11..].iter().all(|s| (-1.0..=1.0).contains(s)));
}

#[test]
fn lockin_export_is_json_and_seeded() {
    let a = lockin_run(200.0, -30.0, 9).ok().unwrap();
    let b = lockin_run(200.0, -30.0, 9).ok().unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    for key in ["b_mle_nt", "theta_est_deg", "phi", "posterior_i", "posterior_q"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn frequency_export_has_requested_points() {
    let s = frequency_response(100.0, 1.0, 5, 2, 3).ok().unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["relative_shift"].as_array().unwrap().len(), 5);
}
