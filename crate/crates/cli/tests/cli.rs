use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macfeedback"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn sweep_prints_results_csv() {
    let o = run(&["sweep", "--scheme", "separated", "--trials", "500", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "scheme,snr_db,user_class,mse,mse_stderr,decode_error_rate,trials");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("separated,12.0412,all,"));
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = run(&[
            "sweep", "--scheme", "all", "--trials", "800", "--seed", "9", "--snr-db", "10,16,22",
            "--out", d.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("scheme,user_class,slope,slope_stderr\n"));
    }
    for f in ["results.csv", "slopes.csv", "exponents.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    // the written spec reproduces the run
    let c = dir.path().join("c");
    let o = run(&[
        "sweep", "--spec", a.join("spec.txt").to_str().unwrap(), "--out", c.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(c.join("results.csv")).unwrap());
}

#[test]
fn b2_defaults_to_two_samples_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep", "--scheme", "analog", "--b", "2", "--trials", "200", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spec = fs::read_to_string(dir.path().join("spec.txt")).unwrap();
    assert!(spec.lines().any(|l| l == "S = 2"), "{spec}");
}

#[test]
fn asymmetric_reports_each_class() {
    let o = run(&["asymmetric", "--trials", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains(",12.0412,12.0412dB,"));
    assert!(text.contains(",36.1236,24.0824dB,"));
    let o = run(&["asymmetric", "--scheme", "analog", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spec_errors_exit_with_two() {
    for args in [
        &["sweep", "--scheme", "analog", "--K", "3", "--trials", "10"][..],
        &["sweep", "--rc", "fixed"],
        &["sweep", "--scheme", "digital"],
        &["sweep", "--b", "1.3", "--S", "1"],
        &["sweep", "--snr-db", "20,10"],
        &["sweep", "--early-stop", "soon"],
        &["sweep", "--spec", "/nonexistent/spec.txt"],
        &["sweep", "--bogus"],
        &["mindist", "--N", "5"],
        &["dmt-experiment", "--r", "-1"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn bad_spec_file_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "scheme = separated\nK = 4\nM = four\nb = 4\nS = 1\nsnr_db = 12\n").unwrap();
    let o = run(&["sweep", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("`M`"), "{err}");
}

#[test]
fn curves_lists_every_kind() {
    let o = run(&["curves"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("x,y,kind\n"));
    for kind in ["upper_bound", "separated", "hybrid", "sic", "analog"] {
        assert!(text.lines().any(|l| l.ends_with(kind)), "{kind}");
    }
    let at4: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("4,").and_then(|r| r.strip_suffix(",separated")))
        .unwrap()
        .parse()
        .unwrap();
    assert!((at4 - 2.0).abs() < 1e-9);
}

#[test]
fn experiments_write_csv() {
    let o = run(&["mindist", "--N", "1", "--trials", "5000", "--eps", "0.1,0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(stderr(&o).contains("log-log slope"));

    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "dmt-experiment", "--M", "2", "--snr-db", "0,5,10", "--trials", "2000", "--detector", "mmse-vblast",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("dmt.csv")).unwrap();
    assert!(csv.starts_with("snr_db,q,errors,trials,error_rate\n0,2,"));
}
