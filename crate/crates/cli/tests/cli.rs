use std::process::{Command, Output};

use serde_json::Value;

fn weblin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weblin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

#[test]
fn example_one_is_linearizable() {
    let o = weblin(&["check", "--f", "x/y", "--g", "x+y"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("YES\n"));
}

#[test]
fn example_seven_is_not() {
    let o = weblin(&[
        "check",
        "--f",
        "y/x",
        "--g",
        "(1-y)/(1-x)",
        "--g",
        "(x-x*y)/(y-x*y)",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("NO\n"));
}

#[test]
fn one_function_is_a_usage_error() {
    let o = weblin(&["check", "--f", "x/y"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("at least two"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = weblin(&["check", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn help_succeeds() {
    let o = weblin(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("linearize"));
}

#[test]
fn parse_errors_carry_the_position() {
    let o = weblin(&["check", "--f", "x/*y", "--g", "x+y"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("offset 2"), "{}", stderr(&o));
}

#[test]
fn bad_domain_is_an_input_error() {
    let o = weblin(&["check", "--example", "1", "--domain", "1,0,0,1"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn invariants_report_zero_for_example_one() {
    let o = weblin(&["invariants", "--example", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out
        .lines()
        .any(|l| l.starts_with("I1") && l.contains("ZERO")));
    assert!(out
        .lines()
        .any(|l| l.starts_with("I2") && l.contains("ZERO")));
}

#[test]
fn invariants_print_a_witness_for_example_seven() {
    let o = weblin(&["invariants", "--example", "7"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out
        .lines()
        .any(|l| l.contains("NONZERO") && l.contains("witness")));
}

fn assert_decimal_string(v: &Value) {
    let s = v.as_str().expect("numbers are strings");
    assert!(!s.is_empty());
}

/// Checks the documented report layout.
fn validate_report(v: &Value) {
    let obj = v.as_object().expect("top-level object");
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    for k in ["web", "config", "invariants", "verdict", "linearization"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert!(v["web"]["f"].is_string());
    assert!(v["web"]["g"]
        .as_array()
        .unwrap()
        .iter()
        .all(Value::is_string));
    assert!(v["config"].is_object());
    assert!(["YES", "NO", "INCONCLUSIVE"].contains(&v["verdict"].as_str().unwrap()));
    for inv in v["invariants"].as_array().unwrap() {
        assert!(inv["name"].is_string());
        assert!(["ZERO", "NONZERO", "INCONCLUSIVE"].contains(&inv["verdict"].as_str().unwrap()));
        assert!(inv["dag_size"].is_u64());
        for e in inv["evidence"].as_array().unwrap() {
            let p = e["point"].as_array().unwrap();
            assert_eq!(p.len(), 2);
            p.iter().for_each(assert_decimal_string);
            assert!(e["params"].is_object());
            assert_decimal_string(&e["residual"]);
            assert!(["exact", "float"].contains(&e["mode"].as_str().unwrap()));
        }
    }
    assert!(v["linearization"].is_null() || v["linearization"].is_object());
}

#[test]
fn json_report_matches_the_schema() {
    for example in ["1", "3", "6", "7"] {
        let o = weblin(&["invariants", "--example", example, "--json"]);
        validate_report(&json(&o));
    }
}

#[test]
fn json_is_reproducible() {
    let args = ["invariants", "--example", "4", "--json", "--seed", "11"];
    let a = weblin(&args);
    let b = weblin(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = weblin(&["invariants", "--example", "4", "--json", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn float_evidence_for_radical_webs() {
    let v = json(&weblin(&["invariants", "--example", "3", "--json"]));
    let ev = &v["invariants"][0]["evidence"][0];
    assert_eq!(ev["mode"], "float");
}

#[test]
fn linearize_example_two() {
    let o = weblin(&["linearize", "--example", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    validate_report(&v);
    let lin = &v["linearization"];
    let rows = lin["straightness"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let r: f64 = row["residual"].as_str().unwrap().parse().unwrap();
        assert!(r < 1e-5, "{row}");
    }
    assert_eq!(v["config"]["grid"], "41");
}

#[test]
fn linearize_refuses_example_five() {
    let o = weblin(&["linearize", "--example", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("refusing"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn forced_negative_control_runs() {
    let o = weblin(&["linearize", "--example", "5", "--force", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    let worst = v["linearization"]["straightness"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["residual"].as_str().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst > 1e-2, "{worst}");
}

#[test]
fn linearize_needs_parameter_values() {
    let o = weblin(&["linearize", "--example", "6"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("--param n=VALUE"));
    let o = weblin(&["linearize", "--example", "6", "--param", "n=3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn svg_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.svg");
    let o = weblin(&[
        "linearize",
        "--f",
        "x/y",
        "--g",
        "x+y",
        "--grid",
        "21",
        "--svg",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("class=\"foliation\"").count(), 8);
    assert!(text.matches("<polyline").count() >= 8);
}

#[test]
fn selftest_passes() {
    let o = weblin(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("19/19 verdicts match"));
}
