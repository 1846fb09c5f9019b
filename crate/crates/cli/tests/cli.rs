use std::io::Write;
use std::path::PathBuf;
use std::process::Command;

use hycause_cli::{run, Outcome, SCHEMA};
use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn hycause(args: &[&str]) -> Outcome {
    let mut argv = vec!["hycause"];
    argv.extend_from_slice(args);
    run(argv, None)
}

fn json(out: &Outcome) -> Value {
    serde_json::from_str(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", out.stdout))
}

fn npp(cmd: &str, scenario: &str, effect: &str, extra: &[&str]) -> Outcome {
    let (theory, scenario) = (fixture("npp.hct"), fixture(scenario));
    let mut args = vec![cmd, "--theory", &theory, "--scenario", &scenario, "--effect", effect];
    args.extend_from_slice(extra);
    hycause(&args)
}

fn temp_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn validate_accepts_npp() {
    let out = hycause(&["validate", "--theory", &fixture("npp.hct")]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out);
    assert_eq!(v["schema"], SCHEMA);
    assert_eq!(v["valid"], true);
}

#[test]
fn validate_malformed_is_parse_error() {
    let f = temp_file("theory broken\naction a(p plant) poss: true\n");
    let out = hycause(&["validate", "--theory", f.path().to_str().unwrap()]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("2:"), "{}", out.stderr);
    assert_eq!(json(&out)["error"]["diagnostics"][0]["line"], 2);
    assert_eq!(json(&out)["error"]["kind"], "parse");
}

#[test]
fn validate_overlapping_contexts_is_semantic_error() {
    let f = temp_file(
        "theory overlap\nfluent A()\nfluent B()\ntemporal T()\n  context hot: A rate 1\n  context warm: B rate 2\ninit: A() = false, B() = false, T() = 0\n",
    );
    let out = hycause(&["validate", "--theory", f.path().to_str().unwrap()]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("`hot`") && out.stderr.contains("`warm`"), "{}", out.stderr);
}

#[test]
fn missing_file_is_io_error() {
    let out = hycause(&["validate", "--theory", "/nonexistent/theory.hct"]);
    assert_eq!(out.code, 1);
    assert_eq!(json(&out)["error"]["kind"], "io");
}

#[test]
fn run_defused_scenario_values() {
    let out = hycause(&["run", "--theory", &fixture("npp.hct"), "--scenario", &fixture("s2p.hcs")]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out);
    let ends: Vec<&str> = v["timeline"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["values"]["coreTemp(P1)"]["end"].as_str().unwrap())
        .collect();
    assert_eq!(ends, ["-50", "300", "475", "685", "685"]);
}

#[test]
fn run_out_of_order_times_is_not_executable() {
    let f = temp_file("rup(P1, 10); mRad(P1, 4)");
    let out = hycause(&["run", "--theory", &fixture("npp.hct"), "--scenario", f.path().to_str().unwrap()]);
    assert_eq!(out.code, 4);
    assert!(out.stderr.contains("mRad(P1, 4)"), "{}", out.stderr);
    assert_eq!(json(&out)["error"]["violation"]["timestamp"], 1);
}

#[test]
fn run_unknown_action_is_semantic_error() {
    let f = temp_file("explode(P1, 3)");
    let out = hycause(&["run", "--theory", &fixture("npp.hct"), "--scenario", f.path().to_str().unwrap()]);
    assert_eq!(out.code, 3, "{}", out.stderr);
}

#[test]
fn cause_never_achieved_is_invalid_setting() {
    let out = npp("cause", "s2p.hcs", "coreTemp(P1) >= 1000", &[]);
    assert_eq!(out.code, 5);
    assert_eq!(json(&out)["error"]["conjunct"], "achieved");
}

#[test]
fn cause_effect_true_before_first_action() {
    let out = npp("cause", "s2.hcs", "coreTemp(P1) <= 0", &[]);
    assert_eq!(out.code, 5);
    assert_eq!(json(&out)["error"]["conjunct"], "false-initially");
}

#[test]
fn cause_unknown_fluent_is_rejected() {
    let out = npp("cause", "s2.hcs", "pressure(P1) >= 3", &[]);
    assert!(out.code == 2 || out.code == 3, "{out:?}");
}

#[test]
fn cause_at_interior_time_appends_noop() {
    // At t = 23 the core is at 800 + 3 * 100 = 1100, before fixP at 26.
    let s = temp_file("rup(P1, 5); csFailure(P1, 15); mRad(P1, 20)");
    let (theory, scenario) = (fixture("npp.hct"), s.path().to_str().unwrap().to_string());
    let base = ["cause", "--theory", &theory, "--scenario", &scenario, "--effect", "coreTemp(P1) >= 1000"];
    assert_eq!(hycause(&base).code, 5);
    let mut args = base.to_vec();
    args.extend(["--at", "23"]);
    let out = hycause(&args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out);
    assert_eq!(v["appended_noop"], "23");
    assert_eq!(v["cause"]["action"], "csFailure(P1, 15)");
}

#[test]
fn query_time_before_last_start_is_rejected() {
    let out = npp("eval", "s2.hcs", "coreTemp(P1) >= 1000", &["--at", "3"]);
    assert_eq!(out.code, 2);
}

#[test]
fn eval_reports_value_and_truth() {
    let out = npp("eval", "s2.hcs", "coreTemp(P1) >= 1000", &[]);
    assert_eq!(out.code, 0);
    let v = json(&out);
    assert_eq!((v["value"].as_str(), v["holds"].as_bool(), v["time"].as_str()), (Some("1400"), Some(true), Some("26")));
    let out = npp("eval", "s2.hcs", "CSFailed(P1)", &[]);
    assert_eq!(json(&out)["holds"], true);
}

#[test]
fn defuse_trail_lists_eliminated_causes() {
    let out = npp("defuse", "s2.hcs", "coreTemp(P1) >= 1000", &[]);
    assert_eq!(out.code, 0);
    let v = json(&out);
    let trail = v["eliminated"].as_array().unwrap();
    assert_eq!(trail.len(), 1);
    assert_eq!(trail[0]["removed"], "csFailure(P1, 15)");
    assert_eq!(trail[0]["inserted"], "noOp(15)");
}

#[test]
fn butfor_confirms_dependence_on_npp() {
    let out = npp("butfor", "s2.hcs", "coreTemp(P1) >= 1000", &[]);
    assert_eq!(out.code, 0);
    let v = json(&out);
    assert_eq!(v["verdict"], "dependence-confirmed");
    assert_eq!(v["counterfactual"][1], "noOp(15)");
}

#[test]
fn repeated_rupture_chain_replaces_both() {
    let out = npp("defuse", "thm7.hcs", "Ruptured(P1)", &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out);
    let removed: Vec<u64> = v["eliminated"].as_array().unwrap().iter().map(|r| r["timestamp"].as_u64().unwrap()).collect();
    assert_eq!(removed, [3, 4]);
    assert_eq!(v["effect_in_defused"], false);
}

fn hot(cmd: &str, scenario: &str, extra: &[&str]) -> Outcome {
    let (theory, scenario) = (fixture("hot.hct"), fixture(scenario));
    let mut args = vec![cmd, "--theory", &theory, "--scenario", &scenario, "--effect", "coreTemp(P1) >= 1000"];
    args.extend_from_slice(extra);
    hycause(&args)
}

#[test]
fn butfor_initially_true_context_is_implicit() {
    let out = hot("butfor", "hot.hcs", &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out);
    assert_eq!(v["verdict"], "implicit-in-initial-state");
    assert_eq!(v["contexts_initially_false"], false);
    assert_eq!(v["effect_persists"], true);
}

#[test]
fn no_cause_exit_codes() {
    let out = hot("cause", "hot_thm4.hcs", &[]);
    assert_eq!(out.code, 6);
    let v = json(&out);
    assert_eq!(v["cause"], Value::Null);
    assert_eq!(v["implicit_in_initial_state"], true);
    assert_eq!(hot("defuse", "hot_thm4.hcs", &[]).code, 6);
    let out = hot("butfor", "hot_thm4.hcs", &[]);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out)["verdict"], "implicit-in-initial-state");
}

#[test]
fn text_format_renders_same_record() {
    let out = npp("cause", "s2.hcs", "coreTemp(P1) >= 1000", &["--format", "text"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.starts_with("schema: hycause/1\ncommand: cause\n"), "{}", out.stdout);
    assert!(out.stdout.contains("cause:\n  action: csFailure(P1, 15)\n  timestamp: 1\n"), "{}", out.stdout);
    let record = json(&npp("cause", "s2.hcs", "coreTemp(P1) >= 1000", &[]));
    assert_eq!(out.stdout, hycause_cli::render_text(&record));
}

#[test]
fn env_format_overrides_flag() {
    let (theory, scenario) = (fixture("npp.hct"), fixture("s2.hcs"));
    let args = ["hycause", "run", "--theory", &theory, "--scenario", &scenario, "--format", "json"];
    let out = run(args, Some("text"));
    assert!(out.stdout.starts_with("schema: hycause/1"), "{}", out.stdout);
    assert_eq!(run(args, Some("yaml")).code, 2);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(hycause(&["frobnicate"]).code, 2);
    assert_eq!(hycause(&["cause", "--theory", "x"]).code, 2);
    let help = hycause(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("butfor"));
}

#[test]
fn check_runs_small_campaign() {
    let out = hycause(&["check", "--cases", "20", "--seed", "3"]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"].as_array().unwrap().len(), 8);
}

#[test]
fn binary_propagates_exit_code_and_env() {
    let out = Command::new(env!("CARGO_BIN_EXE_hycause"))
        .args(["cause", "--theory", &fixture("npp.hct"), "--scenario", &fixture("s2p.hcs")])
        .args(["--effect", "coreTemp(P1) >= 1000"])
        .env("HYCAUSE_FORMAT", "text")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid setting"));
    assert!(out.stdout.is_empty());
}
