//! End-to-end runs of the `pmx` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SETTING: &str = "CTR=partial,UC=absent";

fn traffic_light() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/traffic_light.pmx")
}

fn pmx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmx"))
        .args(args)
        .output()
        .expect("pmx starts")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn default_rules(dir: &Path) -> PathBuf {
    let rules = dir.join("default.rules");
    let tl = traffic_light();
    let o = pmx(&["gen-rules", tl.to_str().unwrap(), "--setting", SETTING, "-o", rules.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    rules
}

#[test]
fn missing_model_file_exits_with_2() {
    let o = pmx(&["analyze", "/definitely/not/here.pmx"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FileNotFound"), "{}", stderr(&o));
}

#[test]
fn unknown_component_in_setting_exits_with_2() {
    let tl = traffic_light();
    let o = pmx(&["analyze", tl.to_str().unwrap(), "--setting", "NOPE=partial"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn malformed_model_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pmx");
    std::fs::write(&bad, "system Broken { component }").unwrap();
    let o = pmx(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn analyze_reports_json_with_missing_inputs() {
    let tl = traffic_light();
    let o = pmx(&["--format", "json", "analyze", tl.to_str().unwrap(), "--setting", SETTING]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.get("CTR").is_some(), "{v}");
    let p7: Vec<&str> = v["P7"].as_array().unwrap().iter().map(|m| m.as_str().unwrap()).collect();
    assert!(p7.iter().any(|m| m.ends_with("on")) && p7.iter().any(|m| m.ends_with("off")), "{p7:?}");
}

#[test]
fn batch_run_with_default_rules_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let rules = default_rules(dir.path());
    let trace = dir.path().join("trace.jsonl");
    let tl = traffic_light();
    let o = pmx(&[
        "run",
        tl.to_str().unwrap(),
        "--setting",
        SETTING,
        "--rules",
        rules.to_str().unwrap(),
        "--seed",
        "1",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(r["step"].is_u64() && r["component"].is_string(), "{r}");
    }
}

#[test]
fn zero_step_limit_gives_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let rules = default_rules(dir.path());
    let tl = traffic_light();
    let o = pmx(&[
        "--max-steps",
        "0",
        "run",
        tl.to_str().unwrap(),
        "--setting",
        SETTING,
        "--rules",
        rules.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty(), "{}", stdout(&o));
}

#[test]
fn scripted_terminal_session_steers_yellow_to_red() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("steer.txt");
    let log = dir.path().join("commands.txt");
    let commands = "select option 1\ninject CTR on\ncontinue\nselect state red\nquit\n";
    std::fs::write(&script, commands).unwrap();
    let tl = traffic_light();
    let o = pmx(&[
        "--max-steps",
        "100",
        "run",
        tl.to_str().unwrap(),
        "--setting",
        SETTING,
        "--script",
        script.to_str().unwrap(),
        "--command-log",
        log.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("[CTR] at yellow"), "{}", stderr(&o));
    let records: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let decided = records
        .iter()
        .position(|r| r["from"] == "__pmx_dec_c11" && r["to"] == "s21")
        .expect("the decision leads to red");
    assert!(records[decided + 1..]
        .iter()
        .any(|r| r["component"] == "SLD" && r["message"] == "ctrl.red"));
    assert_eq!(std::fs::read_to_string(&log).unwrap(), commands);
}

#[test]
fn closed_session_with_pending_decision_exits_with_1_after_writing_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("empty.txt");
    let trace = dir.path().join("trace.jsonl");
    std::fs::write(&script, "").unwrap();
    let tl = traffic_light();
    let o = pmx(&[
        "run",
        tl.to_str().unwrap(),
        "--setting",
        SETTING,
        "--script",
        script.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!std::fs::read_to_string(&trace).unwrap().is_empty());
}

#[test]
fn mutation_is_reproducible_and_bounded() {
    let tl = traffic_light();
    let a = pmx(&["--seed", "7", "mutate", tl.to_str().unwrap(), "--percent", "50"]);
    let b = pmx(&["--seed", "7", "mutate", tl.to_str().unwrap(), "--percent", "50"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = pmx(&["--seed", "8", "mutate", tl.to_str().unwrap(), "--percent", "50"]);
    assert_ne!(a.stdout, c.stdout);
    let o = pmx(&["mutate", tl.to_str().unwrap(), "--percent", "91"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unmutated_model_is_printed_unchanged() {
    let tl = traffic_light();
    let a = pmx(&["mutate", tl.to_str().unwrap(), "--percent", "0"]);
    let src = std::fs::read_to_string(&tl).unwrap();
    let original = pmx_core::text::parse_model(&src).unwrap();
    let printed = pmx_core::text::parse_model(&stdout(&a)).unwrap();
    assert_eq!(original, printed);
}

#[test]
fn verification_of_the_refined_model_passes() {
    let tl = traffic_light();
    let o = pmx(&["verify", tl.to_str().unwrap(), "--setting", SETTING, "--depth", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("verification passed"));
}

#[test]
fn unrefined_progress_finds_the_yellow_deadlock() {
    let tl = traffic_light();
    let o = pmx(&[
        "--format",
        "json",
        "verify",
        tl.to_str().unwrap(),
        "--setting",
        SETTING,
        "--unrefined",
        "--component",
        "CTR",
        "--policy",
        "drop",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let stuck = &v["components"][0]["progress"]["stuck"];
    assert_eq!(stuck["state"], "s23", "{v}");
    assert_eq!(stuck["rule"], 3, "{v}");
}

#[test]
fn too_deep_verification_is_reported_as_failure() {
    let tl = traffic_light();
    let o = pmx(&["verify", tl.to_str().unwrap(), "--setting", SETTING, "--depth", "9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_choice_rule_applies_and_multi_choice_rule_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("r.rules");
    std::fs::write(
        &rules,
        "rule one where state off when (receipt(timeout)) { select state off using t13 }\n\
         rule many where state red when (receipt(on)) { select state red|green|yellow|off }\n",
    )
    .unwrap();
    let tl = traffic_light();
    let out = dir.path().join("applied.pmx");
    let o = pmx(&[
        "apply-rule",
        tl.to_str().unwrap(),
        "--rules",
        rules.to_str().unwrap(),
        "--rule",
        "one",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    pmx_core::text::parse_model(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let o = pmx(&["apply-rule", tl.to_str().unwrap(), "--rules", rules.to_str().unwrap(), "--rule", "many"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("more than one state"), "{}", stderr(&o));
}

#[test]
fn refine_writes_model_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("refined.pmx");
    let meta = dir.path().join("meta.json");
    let tl = traffic_light();
    let o = pmx(&[
        "refine",
        tl.to_str().unwrap(),
        "--setting",
        SETTING,
        "-o",
        out.to_str().unwrap(),
        "--metadata",
        meta.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let refined = pmx_core::text::parse_model(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(refined.component("CTR").is_some());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    for key in ["org", "introduced_vars", "dec_points"] {
        assert!(m.get(key).is_some(), "{key} missing from {m}");
    }
}

#[test]
fn small_bench_reports_every_measurement() {
    let o = pmx(&[
        "--format",
        "json",
        "bench",
        "--runs",
        "2",
        "--rules",
        "50",
        "--rule-lines",
        "10",
        "--states",
        "70",
        "--transitions",
        "120",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = v["results"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["analysis", "refinement", "rule loading", "rule selection"]);
}
