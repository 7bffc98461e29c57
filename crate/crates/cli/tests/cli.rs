//! End-to-end tests of the `veil` binary: exit codes, determinism, file
//! round-trips, and the worked examples.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn veil() -> Command {
    Command::new(env!("CARGO_BIN_EXE_veil"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    veil()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const DONATION_TRACES: &str = "alphabet: 0.gives 1.gives $5 $10 thanks STOP\n\
    0.gives $5 thanks STOP\n\
    1.gives $10 thanks STOP\n";

#[test]
fn uniform_dc_spec_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "dc",
            "--n",
            "3",
            "--outsider",
            "--out",
            "dc.json",
            "--emit-spec",
            "spec.json",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let check = run_in(dir.path(), &["check", "dc.json", "spec.json"]);
    assert_eq!(check.status.code(), Some(0), "{}", stdout(&check));
    assert!(stdout(&check).contains("3 passed, 0 failed, 0 errors"));
}

#[test]
fn biased_dc_conditional_spec_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "dc-prob",
            "--n",
            "3",
            "--outsider",
            "--priors",
            "4/5,1/10,1/10",
            "--nsa-share",
            "1/5",
            "--out",
            "dc.json",
            "--emit-spec",
            "spec.json",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let spec_text = std::fs::read_to_string(dir.path().join("spec.json")).unwrap();
    assert!(spec_text.contains("= 1/2"));
    assert!(spec_text.contains("= 8/9"));
    let check = run_in(dir.path(), &["check", "dc.json", "spec.json"]);
    assert_eq!(check.status.code(), Some(0), "{}", stdout(&check));
}

#[test]
fn failing_query_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "generate",
            "dc",
            "--n",
            "3",
            "--outsider",
            "--out",
            "dc.json",
        ],
    );
    write(
        dir.path(),
        "spec.json",
        r#"[ {"query": {"kind": "k-anonymous", "i": "0", "a": "paid", "j": "o", "k": 4}} ]"#,
    );
    let check = run_in(dir.path(), &["check", "dc.json", "spec.json"]);
    assert_eq!(check.status.code(), Some(1));
    let text = stdout(&check);
    assert!(text.contains("FAIL"), "{text}");
    assert!(text.contains("witness:"), "{text}");
}

#[test]
fn malformed_rational_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "generate",
            "dc",
            "--n",
            "3",
            "--outsider",
            "--out",
            "dc.json",
        ],
    );
    write(
        dir.path(),
        "spec.json",
        r#"[ {"query": {"kind": "alpha", "i": "0", "a": "paid", "j": "o", "alpha": "1/0"}} ]"#,
    );
    let check = run_in(dir.path(), &["check", "dc.json", "spec.json"]);
    assert_eq!(check.status.code(), Some(2));
    assert!(stdout(&check).is_empty(), "no partial output on code 2");
}

#[test]
fn semantic_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // no measure in the system, but a probabilistic query
    run_in(
        dir.path(),
        &[
            "generate",
            "dc",
            "--n",
            "3",
            "--outsider",
            "--out",
            "dc.json",
        ],
    );
    write(
        dir.path(),
        "spec.json",
        r#"[ {"query": {"kind": "alpha", "i": "0", "a": "paid", "j": "o", "alpha": "1/2"}} ]"#,
    );
    let check = run_in(dir.path(), &["check", "dc.json", "spec.json"]);
    assert_eq!(check.status.code(), Some(3));
    assert!(stdout(&check).contains("ERROR"));

    // unknown agent in a formula
    write(
        dir.path(),
        "ghost.json",
        r#"[ {"formula": "K_ghost theta(0, paid)"} ]"#,
    );
    let check = run_in(dir.path(), &["check", "dc.json", "ghost.json"]);
    assert_eq!(check.status.code(), Some(3));
}

#[test]
fn reports_are_deterministic_and_stable_under_run_reordering() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "generate",
            "dc",
            "--n",
            "3",
            "--outsider",
            "--out",
            "dc.json",
        ],
    );
    write(
        dir.path(),
        "spec.json",
        r#"[ {"formula": "theta(0, paid) => P_o theta(1, paid)"},
             {"query": {"kind": "minimal", "i": "0", "a": "paid", "j": "o"}} ]"#,
    );
    let first = run_in(dir.path(), &["check", "dc.json", "spec.json", "--json"]);
    let second = run_in(dir.path(), &["check", "dc.json", "spec.json", "--json"]);
    assert_eq!(stdout(&first), stdout(&second));

    // reverse the run order in the file; the report must not change
    let text = std::fs::read_to_string(dir.path().join("dc.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let runs = value["runs"].as_array_mut().unwrap();
    runs.reverse();
    std::fs::write(
        dir.path().join("reversed.json"),
        serde_json::to_string_pretty(&value).unwrap(),
    )
    .unwrap();
    let reversed = run_in(
        dir.path(),
        &["check", "reversed.json", "spec.json", "--json"],
    );
    assert_eq!(stdout(&first), stdout(&reversed));
}

#[test]
fn posterior_equality_formulas_run_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    // uniform priors over the four payer cases: posteriors coincide for
    // every pair of cryptographers at every point
    run_in(
        dir.path(),
        &[
            "generate",
            "dc-prob",
            "--n",
            "3",
            "--outsider",
            "--priors",
            "1/3,1/3,1/3",
            "--nsa-share",
            "1/4",
            "--out",
            "dc.json",
        ],
    );
    write(
        dir.path(),
        "spec.json",
        r#"[ {"formula": "theta(0, paid) => Pr_o(theta(0, paid)) = Pr_o(theta(1, paid))"},
             {"formula": "K_o thetaOther(o, paid) => Pr_o(theta(0, paid) | thetaOther(o, paid)) = 1/3"} ]"#,
    );
    let check = run_in(dir.path(), &["check", "dc.json", "spec.json"]);
    let text = stdout(&check);
    assert_eq!(check.status.code(), Some(0), "{text}");
    assert!(text.contains("2 passed"), "{text}");

    // unguarded conditioning hits the zero-probability conditioning event
    // at the points where nobody in the ring paid: a semantic error
    write(
        dir.path(),
        "unguarded.json",
        r#"[ {"formula": "Pr_o(theta(0, paid) | thetaOther(o, paid)) = 1/3"} ]"#,
    );
    let err = run_in(dir.path(), &["check", "dc.json", "unguarded.json"]);
    assert_eq!(err.status.code(), Some(3), "{}", stdout(&err));
}

#[test]
fn donation_process_fails_then_passes_after_hiding() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "donation.txt", DONATION_TRACES);
    let raw = run_in(
        dir.path(),
        &[
            "csp-check",
            "donation.txt",
            "--alphabet",
            "0.gives,1.gives",
            "--close-prefixes",
            "--verify-theorem",
        ],
    );
    assert_eq!(raw.status.code(), Some(1));
    let text = stdout(&raw);
    assert!(text.contains("FAIL"), "{text}");
    assert!(text.contains("counterexample: 0.gives $10"), "{text}");
    assert!(text.contains("agree"), "{text}");

    let hidden = run_in(
        dir.path(),
        &[
            "csp-check",
            "donation.txt",
            "--alphabet",
            "0.gives,1.gives",
            "--close-prefixes",
            "--hide",
            "$5,$10",
            "--verify-theorem",
        ],
    );
    assert_eq!(hidden.status.code(), Some(0));
    assert!(stdout(&hidden).contains("PASS"));
}

#[test]
fn non_prefix_closed_traces_need_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "donation.txt", DONATION_TRACES);
    let strict = run_in(
        dir.path(),
        &["csp-check", "donation.txt", "--alphabet", "0.gives,1.gives"],
    );
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn reserved_abstraction_event_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.txt", "alphabet: x \u{3b1}\nx\n");
    let out = run_in(
        dir.path(),
        &[
            "csp-check",
            "bad.txt",
            "--alphabet",
            "x",
            "--close-prefixes",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn imported_system_round_trips_through_check() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "donation.txt", DONATION_TRACES);
    let import = run_in(
        dir.path(),
        &[
            "import-csp",
            "donation.txt",
            "--alphabet",
            "0.gives,1.gives",
            "--close-prefixes",
            "--out",
            "donation.json",
        ],
    );
    assert!(import.status.success());
    write(
        dir.path(),
        "spec.json",
        r#"[ {"query": {"kind": "up-to", "i": "0", "a": "gives", "j": "o", "I_A": ["0", "1"]}} ]"#,
    );
    let check = run_in(dir.path(), &["check", "donation.json", "spec.json"]);
    assert_eq!(check.status.code(), Some(1));
    assert!(stdout(&check).contains("witness: (tr0, 2)"));
}

#[test]
fn delta_mode_flag_changes_query_semantics() {
    let dir = tempfile::tempdir().unwrap();
    // the staggered example: observer sees only the clock, actors act at
    // their own index; theta-mode total holds, delta-mode fails
    write(dir.path(), "staggered.json", &staggered_system_json());
    write(
        dir.path(),
        "spec.json",
        r#"[ {"query": {"kind": "total", "i": "a1", "a": "act", "j": "obs"}} ]"#,
    );
    let theta = run_in(dir.path(), &["check", "staggered.json", "spec.json"]);
    assert_eq!(theta.status.code(), Some(0), "{}", stdout(&theta));
    let delta = run_in(
        dir.path(),
        &["check", "staggered.json", "spec.json", "--mode", "delta"],
    );
    assert_eq!(delta.status.code(), Some(1), "{}", stdout(&delta));
}

fn staggered_system_json() -> String {
    let agents = ["a1", "a2", "a3"];
    let horizon = 3usize;
    let runs: Vec<serde_json::Value> = agents
        .iter()
        .enumerate()
        .map(|(idx, actor)| {
            let states: Vec<serde_json::Value> = (0..=horizon)
                .map(|t| {
                    let mut locals = serde_json::Map::new();
                    for a in agents {
                        locals.insert(a.to_string(), serde_json::json!([a == *actor, t]));
                    }
                    locals.insert("obs".to_string(), serde_json::json!(t));
                    serde_json::json!({"env": 0, "locals": locals})
                })
                .collect();
            serde_json::json!({
                "id": format!("r{}", idx + 1),
                "states": states,
                "events": [[actor, "act", idx + 1]],
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "agents": ["a1", "a2", "a3", "obs"],
        "horizon": horizon,
        "runs": runs,
        "props": {},
    }))
    .unwrap()
}
