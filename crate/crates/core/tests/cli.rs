use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liouville"))
}

fn configs() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("liouville-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], config: &Path, out: &Path) -> (i32, serde_json::Value) {
    let status = bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    let code = status.status.code().unwrap();
    let json = std::fs::read_to_string(out.join("report.json"))
        .map(|s| serde_json::from_str(&s).unwrap())
        .unwrap_or(serde_json::Value::Null);
    (code, json)
}

#[test]
fn bubble_solve_scalar() {
    let out = scratch("bubble");
    let (code, j) = run(&["bubble", "solve"], &configs().join("scalar_bubble.json"), &out);
    assert_eq!(code, 0);
    let sigma = j["data"]["sigma"][0].as_f64().unwrap();
    assert!((sigma - 4.0).abs() < 1e-8);
    assert!(out.join("bubble_solve.csv").exists());
}

#[test]
fn criteria_report_symmetric_pair() {
    let out = scratch("criteria");
    let (code, j) = run(&["criteria", "report"], &configs().join("two_point_symmetric.json"), &out);
    assert_eq!(code, 0);
    // Component 1 has m = 6, where D is not defined at this order.
    let d = &j["data"]["d"];
    assert!(d[0][0].is_null());
    let d11 = d[1][0].as_f64().unwrap();
    let d12 = d[1][1].as_f64().unwrap();
    assert!((d11 - d12).abs() < 1e-6 * d11.abs());
    assert_eq!(j["data"]["regime"], "A");
}

#[test]
fn lambda_rate_passes() {
    let out = scratch("lambda");
    let (code, j) = run(&["verify", "lambda-rate"], &configs().join("m3_lambda.json"), &out);
    assert_eq!(code, 0);
    assert!((j["data"]["slope"].as_f64().unwrap() - 1.0).abs() < 0.01);
}

#[test]
fn eps_list_flag_overrides_config() {
    let out = scratch("epsflag");
    let (code, j) = run(
        &["verify", "fredholm", "--eps-list", "0.1,0.05"],
        &configs().join("scalar_fredholm.json"),
        &out,
    );
    assert_eq!(code, 0);
    assert_eq!(j["data"]["rows"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(out.join("verify_fredholm.csv")).unwrap();
    assert!(csv.starts_with("eps,sigma_constrained,sigma_unconstrained,t1,t2"));
}

#[test]
fn json_is_byte_identical_across_runs() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    let cfg = configs().join("gamma_ray.json");
    run(&["gamma", "project"], &cfg, &a);
    run(&["gamma", "project"], &cfg, &b);
    let ja = std::fs::read(a.join("report.json")).unwrap();
    let jb = std::fs::read(b.join("report.json")).unwrap();
    assert!(!ja.is_empty());
    assert_eq!(ja, jb);
}

#[test]
fn exit_codes() {
    let out = scratch("codes");
    // Missing config file.
    let (code, _) = run(&["bubble", "solve"], &out.join("absent.json"), &out);
    assert_eq!(code, 1);
    // Unknown field.
    let bad = out.join("bad.json");
    std::fs::write(&bad, r#"{"coupling": [[1.0]], "colour": 3}"#).unwrap();
    assert_eq!(run(&["bubble", "solve"], &bad, &out).0, 1);
    // Unknown subcommand.
    assert_eq!(bin().args(["verify", "everything"]).output().unwrap().status.code(), Some(1));
    // A repeated ε cannot show a decreasing residual, so the check fails.
    let cfg = out.join("repeat.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("m3_residual.json")).unwrap()).unwrap();
    v["eps_list"] = serde_json::json!([0.04, 0.04]);
    v["grid"] = serde_json::json!(256);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let (code, j) = run(&["verify", "residual"], &cfg, &out);
    assert_eq!(code, 2);
    assert_eq!(j["pass"], false);
}
