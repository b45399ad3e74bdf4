use macfeedback_web::*;
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn curves_cover_every_kind() {
    let v = parse(&curves_json(4, 1, 4).unwrap());
    let kinds: Vec<&str> = v.as_array().unwrap().iter().map(|c| c["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["upper_bound", "separated", "hybrid", "sic", "analog"]);
    let ub = &v[0]["points"];
    assert_eq!(ub[0], serde_json::json!([1.0, 1.0]));
    assert!(curves_json(0, 1, 4).is_err());
}

#[test]
fn sweep_reports_each_scheme() {
    let v = parse(&sweep_json("all", 4.0, 12.0412, 24.0824, 3, 300, 5).unwrap());
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 4);
    for r in arr {
        assert_eq!(r["snr_db"].as_array().unwrap().len(), 3);
        assert!(r["mse"].as_array().unwrap().iter().all(|m| m.as_f64().unwrap() > 0.0));
        assert!(r["slope"].is_number());
    }
    assert_eq!(v, parse(&sweep_json("all", 4.0, 12.0412, 24.0824, 3, 300, 5).unwrap()));
    let b2 = parse(&sweep_json("analog", 2.0, 10.0, 20.0, 2, 100, 1).unwrap());
    assert!(b2[0]["slope"].is_null());
}

#[test]
fn sweep_rejects_bad_input() {
    assert!(sweep_json("digital", 4.0, 10.0, 20.0, 3, 10, 1).is_err());
    assert!(sweep_json("all", 4.0, 20.0, 10.0, 3, 10, 1).is_err());
    assert!(sweep_json("all", 4.0, 10.0, 20.0, 1, 10, 1).is_err());
    assert!(sweep_json("all", 4.0, 10.0, 20.0, 3, MAX_TRIALS + 1, 1).is_err());
    assert!(sweep_json("all", 1.3, 10.0, 20.0, 3, 10, 1).is_err());
}

#[test]
fn min_distance_cdf_is_monotone() {
    let v = parse(&min_distance_json(1, 20_000, 3).unwrap());
    let p: Vec<f64> = v["probability"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(p.len(), 10);
    assert!(p.windows(2).all(|w| w[0] <= w[1]));
    let slope = v["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.2, "{slope}");
    assert!(min_distance_json(4, 10, 1).is_err());
}
