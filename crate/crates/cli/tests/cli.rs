use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn mtto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtto"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

fn write_problem(name: &str, body: &Value) -> PathBuf {
    let path = scratch(name);
    std::fs::write(&path, serde_json::to_string(body).unwrap()).unwrap();
    path
}

fn with_payload(file: &str, edit: impl FnOnce(&mut Value)) -> Value {
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(problem(file)).unwrap()).unwrap();
    edit(&mut v);
    v
}

#[test]
fn paper_examples_all_pass() {
    let out = mtto(&["paper-examples"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["tool"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(check(&r, "worked-example.defect-dim")["value"], 2);
    assert_eq!(
        check(&r, "worked-example.case")["value"],
        "all-vanish-at-zero"
    );
    assert_eq!(
        check(&r, "mimo.satisfying")["value"],
        serde_json::json!(["causal"])
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let file = problem("block_shift_eae.json");
    let a = mtto(&["run", file.to_str().unwrap()]);
    let b = mtto(&["run", file.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let (p, q) = (scratch("det_a.json"), scratch("det_b.json"));
    for path in [&p, &q] {
        let out = mtto(&[
            "run",
            file.to_str().unwrap(),
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
}

#[test]
fn timings_are_opt_in() {
    let file = problem("worked_example_kernel.json");
    let plain = json(&mtto(&["run", file.to_str().unwrap()]));
    assert!(plain.get("timings").is_none());
    let timed = json(&mtto(&["run", file.to_str().unwrap(), "--timings"]));
    assert!(timed["timings"]["total_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn empty_payload_is_a_schema_error() {
    let body = serde_json::json!({"schema_version": "1", "task": "paper-examples", "payload": {}});
    let out = mtto(&["run", write_problem("empty.json", &body).to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "input-error");
}

#[test]
fn malformed_files_are_rejected() {
    let cases = [
        (
            "unknown_top.json",
            with_payload("paper_examples.json", |v| v["extra"] = 1.into()),
        ),
        (
            "unknown_payload.json",
            with_payload("mimo_test_case.json", |v| v["payload"]["panel"] = 5.into()),
        ),
        (
            "bad_version.json",
            with_payload("paper_examples.json", |v| v["schema_version"] = "0".into()),
        ),
        (
            "bad_task.json",
            with_payload("paper_examples.json", |v| {
                v["task"] = "solve-everything".into()
            }),
        ),
        (
            "bad_tolerance.json",
            with_payload("mimo_test_case.json", |v| {
                v["tolerances"] = serde_json::json!({"checks": {"no-such-check": 1e-3}})
            }),
        ),
        (
            "outside_disc.json",
            with_payload("spiral_zeros_p2.json", |v| {
                v["payload"]["zeros"] = serde_json::json!({"kind": "finite", "zeros": [[1.5, 0.0]]})
            }),
        ),
    ];
    for (name, body) in cases {
        let out = mtto(&["run", write_problem(name, &body).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let r = json(&out);
        assert_eq!(r["error"]["kind"], "input-error", "{name}");
        assert!(!r["error"]["message"].as_str().unwrap().is_empty());
    }
}

#[test]
fn flags_override_the_file() {
    let file = problem("mimo_test_case.json");
    let f = file.to_str().unwrap();
    let base = json(&mtto(&["run", f]));
    assert_eq!(base["result"]["convention"], "causal");
    assert_eq!(base["pass"], true);

    let literal = mtto(&["run", f, "--convention", "paper-literal"]);
    assert_eq!(literal.status.code(), Some(0), "failed checks still exit 0");
    let literal = json(&literal);
    assert_eq!(literal["config"]["convention"], "paper-literal");
    assert_eq!(literal["result"]["convention"], "paper-literal");
    assert_eq!(literal["pass"], false);
    assert_eq!(check(&literal, "rk4-agreement")["pass"], false);

    let eae = problem("block_shift_eae.json");
    let seeded = json(&mtto(&["run", eae.to_str().unwrap()]));
    assert_eq!(seeded["config"]["seed"], 7);
    let flagged = json(&mtto(&["run", eae.to_str().unwrap(), "--seed", "3"]));
    assert_eq!(flagged["config"]["seed"], 3);
}

#[test]
fn tolerance_precedence_is_flag_then_file_then_default() {
    let body = with_payload(
        "block_shift_eae.json",
        |v| v["tolerances"] = serde_json::json!({"all": 1e-5, "checks": {"kernel-angle": 1e-3, "t1-min-singular": 1e-2}}),
    );
    let path = write_problem("tolerances.json", &body);
    let p = path.to_str().unwrap();

    let file = json(&mtto(&["run", p]));
    let tol = &file["config"]["tolerances"];
    assert_eq!(tol["kernel-angle"], 1e-3);
    assert_eq!(tol["unipotent-inverse-residual"], 1e-5);
    assert_eq!(tol["t1-min-singular"], 1e-2);

    let flag = json(&mtto(&["run", p, "--tol", "1e-6"]));
    let tol = &flag["config"]["tolerances"];
    assert_eq!(tol["kernel-angle"], 1e-6);
    assert_eq!(tol["unipotent-inverse-residual"], 1e-6);
    // Lower bars are not residuals, so --tol leaves them alone.
    assert_eq!(tol["t1-min-singular"], 1e-2);

    let default = json(&mtto(&[
        "run",
        problem("block_shift_eae.json").to_str().unwrap(),
    ]));
    assert_eq!(default["config"]["tolerances"]["kernel-angle"], 1e-8);
}

#[test]
fn loosened_bars_turn_a_failure_into_a_pass() {
    let f = problem("mimo_test_case.json");
    let f = f.to_str().unwrap();
    let strict = json(&mtto(&["run", f, "--grid", "40"]));
    assert_eq!(check(&strict, "rk4-agreement")["pass"], false);
    let loose = json(&mtto(&["run", f, "--grid", "40", "--tol", "1e-1"]));
    assert_eq!(check(&loose, "rk4-agreement")["pass"], true);
}

#[test]
fn conflicting_flags_are_rejected() {
    let kernel = problem("worked_example_kernel.json");
    let k = kernel.to_str().unwrap();
    for args in [
        vec!["run", k, "--grid", "64"],
        vec!["run", k, "--convention", "causal"],
        vec!["run", k, "--csv", "x.csv"],
        vec!["mimo-sim", k],
        vec![
            "lp-diagnose",
            problem("spiral_zeros_p2.json").to_str().unwrap(),
            "--tol",
            "1e-3",
        ],
    ] {
        let out = mtto(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(json(&out)["error"]["kind"], "input-error");
    }
    // Argument parsing errors use the same exit code.
    assert_eq!(
        mtto(&["run", k, "--convention", "sideways"]).status.code(),
        Some(2)
    );
}

#[test]
fn grid_flag_sets_the_panel_count() {
    let f = problem("exponential_kernel.json");
    let r = json(&mtto(&["wh-solve", f.to_str().unwrap(), "--grid", "64"]));
    assert_eq!(r["config"]["grid"], 64);
    assert_eq!(r["result"]["panels"], 64);
    assert_eq!(
        r["result"]["output"][0]["values"].as_array().unwrap().len(),
        65
    );
}

#[test]
fn grid_data_goes_to_the_csv_sidecar() {
    let csv = scratch("mimo.csv");
    let f = problem("mimo_test_case.json");
    let r = json(&mtto(&[
        "run",
        f.to_str().unwrap(),
        "--grid",
        "10",
        "--csv",
        csv.to_str().unwrap(),
    ]));
    assert!(r["result"].get("solution").is_none());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("series,block,node,x,component,re,im"));
    // Two series (v, y) × 11 nodes × 2 components.
    assert_eq!(lines.count(), 44);
}

#[test]
fn compact_and_indented_output_carry_the_same_report() {
    let f = problem("worked_example_near_invariance.json");
    let compact = mtto(&["run", f.to_str().unwrap(), "--json-indent", "0"]);
    let wide = mtto(&["run", f.to_str().unwrap(), "--json-indent", "4"]);
    assert_eq!(compact.stdout.iter().filter(|&&b| b == b'\n').count(), 1);
    assert_eq!(json(&compact), json(&wide));
}

#[test]
fn lp_diagnosis_reports_the_verdict() {
    let f = problem("spiral_zeros_p2.json");
    let r = json(&mtto(&["lp-diagnose", f.to_str().unwrap()]));
    assert_eq!(r["pass"], true);
    assert_eq!(r["result"]["verdict"], "inconclusive");
    assert_eq!(r["result"]["partial_sums"].as_array().unwrap().len(), 4);
}
