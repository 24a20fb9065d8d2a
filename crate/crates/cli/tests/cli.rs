use std::process::{Command, Output};

fn diffeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffeo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn eval_examples() {
    assert_eq!(stdout(&diffeo(&["eval", "lambda", "0.5"])).trim(), "0.5");
    assert_eq!(stdout(&diffeo(&["eval", "Q", "1", "0"])).trim(), "1 0");
    let out = stdout(&diffeo(&["eval", "gen_plot", "7"]));
    let nums: Vec<f64> = out.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(nums[0], -1.0);
    assert!(nums[1].abs() < 1e-15);

    let t: f64 = 0.25;
    let (x, y) = ((std::f64::consts::PI * t).cos(), (std::f64::consts::PI * t).sin());
    let out = stdout(&diffeo(&["eval", "psi", &x.to_string(), &y.to_string()]));
    let nums: Vec<f64> = out.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(nums.len(), 2);
    assert!((nums[1] - t).abs() < 1e-12, "{out}");
}

#[test]
fn eval_accepts_negative_coordinates() {
    let out = stdout(&diffeo(&["eval", "lambda", "-3"]));
    assert_eq!(out.trim(), "0");
}

#[test]
fn eval_rejects_bad_input() {
    assert_eq!(diffeo(&["eval", "xi_inv", "2"]).status.code(), Some(2));
    assert_eq!(diffeo(&["eval", "no_such_map", "1"]).status.code(), Some(2));
    assert_eq!(diffeo(&["eval", "Q", "2", "0.5"]).status.code(), Some(2));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = diffeo(&["verify", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("smoothfn"));
}

#[test]
fn bad_tolerance_is_a_usage_error() {
    assert_eq!(diffeo(&["verify", "diskmodel", "--tol-alg", "0"]).status.code(), Some(2));
}

#[test]
fn verify_diskmodel_passes_with_a_json_report() {
    let o = diffeo(&["verify", "diskmodel", "--samples", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let props = v["properties"].as_array().unwrap();
    assert!(!props.is_empty());
    for p in props {
        for key in ["suite", "property", "samples", "worst_dev", "tol", "pass"] {
            assert!(p.get(key).is_some(), "missing {key}");
        }
    }
    let names: Vec<&str> = props.iter().map(|p| p["property"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn text_report_matches_the_json_report() {
    let json = stdout(&diffeo(&["verify", "homotopy", "--samples", "1000"]));
    let text = stdout(&diffeo(&["verify", "homotopy", "--samples", "1000", "--report", "text"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let props = v["properties"].as_array().unwrap();
    assert_eq!(text.lines().count(), props.len() + 1);
    for (line, p) in text.lines().zip(props) {
        assert!(line.contains(p["property"].as_str().unwrap()));
    }
}

#[test]
fn disabling_the_wrinkle_fails_the_seam_property() {
    let o = diffeo(&["verify", "subdivision", "--disable-wrinkle", "--samples", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let seam = v["properties"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["property"] == "seam_fd_smooth")
        .unwrap();
    assert_eq!(seam["pass"], false);
}

#[test]
fn same_seed_same_bytes() {
    let args = ["verify", "lifting", "--samples", "1000", "--seed", "9"];
    assert_eq!(diffeo(&args).stdout, diffeo(&args).stdout);
}

#[test]
fn chep_demo_passes_and_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let o = diffeo(&["chep", "chep_d1_demo", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    for key in ["initial", "base", "projection"] {
        assert!(v[key].as_f64().unwrap() <= 1e-6);
    }
    let mut r = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["point", "t", "value"]);
    assert_eq!(r.records().count(), 500);
}

#[test]
fn chep_reads_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("base.json");
    std::fs::write(&path, diffeo_core::instance::bundled("chep_base_only").unwrap()).unwrap();
    let o = diffeo(&["chep", path.to_str().unwrap(), "--report", "text"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS"));
}

#[test]
fn chep_precondition_failure_exits_3() {
    assert_eq!(diffeo(&["chep", "chep_incompatible"]).status.code(), Some(3));
}

#[test]
fn chep_missing_file_is_a_usage_error() {
    assert_eq!(diffeo(&["chep", "/definitely/not/here.json"]).status.code(), Some(2));
}

#[test]
fn dump_subdivision_header_and_rows() {
    let o = diffeo(&["dump-subdivision", "--n", "2", "--grid", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap(),
        vec!["n", "s", "t", "v1", "v2", "region", "out1", "out2", "out3", "time"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 16);
    // s = 1/3 lies on the seam between V1 and V2
    assert!(rows.iter().any(|row| &row[5] == "V1|V2"));
    for row in &rows {
        let time: f64 = row[9].parse().unwrap();
        assert!((0.0..=1.0).contains(&time));
    }
}
