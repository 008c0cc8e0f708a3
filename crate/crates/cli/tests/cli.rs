use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_empc-wds");

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/richmond_pruned.scn")
}

fn bundled_text() -> String {
    std::fs::read_to_string(bundled()).unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("EMPC_WDS_OUT").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("case.scn");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_bundled_scenario_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let res = run(&["simulate", "--scenario", bundled().to_str().unwrap(), "--out", out.to_str().unwrap(), "--plans"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time_s,depth_m,n1,n2,inflow_m3s,demand_m3s,power_kw,price_p_per_kwh,energy_kwh,cost_pence"
    );
    assert_eq!(lines.count(), 96 * 12);

    let metrics = read_json(&out.join("metrics.json"));
    assert_eq!(metrics["controller"], "empc");
    assert_eq!(metrics["status"], "ok");
    assert!(metrics["metrics"]["total_cost_pounds"].as_f64().unwrap() > 0.0);
    let plans = std::fs::read_to_string(out.join("plans.jsonl")).unwrap();
    assert_eq!(plans.lines().count(), 96);
}

#[test]
fn trigger_controller_can_be_selected() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["simulate", "--controller", "trigger", "--demand", "15", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let metrics = read_json(&tmp.path().join("metrics.json"));
    assert_eq!(metrics["controller"], "trigger");
    assert!(!tmp.path().join("plans.jsonl").exists());
}

#[test]
fn negative_area_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), &bundled_text().replace("area_m2 = 500.0", "area_m2 = -500.0"));
    let res = run(&["simulate", "--scenario", &scn, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("tanks.area_m2 (line 6)"), "{}", stderr(&res));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), &bundled_text().replace("area_m2 = 500.0", "area_m2 = 500.0\nradius_m = 3.0"));
    let res = run(&["validate", "--scenario", &scn]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("radius_m"), "{}", stderr(&res));
}

#[test]
fn missing_scenario_file_is_an_io_error() {
    let res = run(&["validate", "--scenario", "/nonexistent/empc.scn"]);
    assert_eq!(code(&res), 1);
}

#[test]
fn demand_beyond_capacity_exits_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["simulate", "--demand", "60", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("hour 0"), "{}", stderr(&res));
    let metrics = read_json(&tmp.path().join("metrics.json"));
    assert_eq!(metrics["status"], "infeasible");
    assert_eq!(metrics["failure"]["hour"], 0);
}

#[test]
fn sweep_writes_one_case_per_demand() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["sweep", "--demand", "5", "--jobs", "1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for controller in ["empc", "trigger"] {
        let dir = tmp.path().join("d5").join(controller);
        assert!(dir.join("trace.csv").is_file());
        assert_eq!(read_json(&dir.join("metrics.json"))["controller"], controller);
    }
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<_> = summary.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("5.0,ok,"), "{}", rows[1]);
    let jsonl = std::fs::read_to_string(tmp.path().join("summary.jsonl")).unwrap();
    let row: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert!(row["cost_ratio"].as_f64().unwrap() > 1.0);
}

#[test]
fn sweep_records_infeasible_cases_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["sweep", "--demand", "5,60", "--jobs", "2", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&res), 3);
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<_> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("5.0,ok,"));
    assert!(rows[1].starts_with("60.0,infeasible,"), "{}", rows[1]);
}

#[test]
fn validate_accepts_the_bundled_scenario() {
    let res = run(&["validate", "--scenario", bundled().to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), "ok");
}

#[test]
fn validate_rejects_multipliers_with_wrong_mean() {
    let tmp = tempfile::tempdir().unwrap();
    // raises the mean by 0.1
    let scn = write_scenario(tmp.path(), &bundled_text().replacen("0.45, 0.35", "2.85, 0.35", 1));
    let res = run(&["validate", "--scenario", &scn]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("demand.multipliers"), "{}", stderr(&res));
}

#[test]
fn validate_rejects_a_table_without_the_zero_row() {
    let tmp = tempfile::tempdir().unwrap();
    let text = bundled_text();
    let start = text.find("[[pumps.combos]]\ncounts = [0, 0]").unwrap();
    let end = start + 1 + text[start + 1..].find("[[pumps.combos]]").unwrap();
    let scn = write_scenario(tmp.path(), &format!("{}{}", &text[..start], &text[end..]));
    let res = run(&["validate", "--scenario", &scn]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("pumps.combos"), "{}", stderr(&res));
}

#[test]
fn environment_overrides_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");
    let res = Command::new(BIN)
        .args(["simulate", "--out", flag_dir.to_str().unwrap()])
        .env("EMPC_WDS_OUT", &env_dir)
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(env_dir.join("trace.csv").is_file());
    assert!(!flag_dir.exists());
}
