//! End-to-end tests of the `gdbal` binary: exit codes, file outputs, config
//! round trips, and the determinism acceptance criterion (byte-identical
//! reports for a fixed seed).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gdbal")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gdbal-cli-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, seed: Option<u64>) -> std::process::Output {
    let mut c = Command::new(bin());
    c.arg(cmd).arg("--config").arg(config).arg("--out").arg(out);
    if let Some(s) = seed {
        c.arg("--seed").arg(s.to_string());
    }
    c.output().expect("binary runs")
}

const CHAIN_REDUCE: &str = r#"{
  "plant": {"builtin": "network_chain", "n": 6},
  "epsilon": 0.01,
  "vertices": {"strategy": "one-at-a-time"},
  "reduction": {"order": 2},
  "seed": 42
}"#;

#[test]
fn reduce_succeeds_and_emits_files() {
    let dir = tmp_dir("reduce");
    let cfg = write_config(&dir, "job.json", CHAIN_REDUCE);
    let out = dir.join("out");
    let res = run("reduce", &cfg, &out, None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["report.json", "report.txt", "effective_config.json", "sigma.csv", "bounds.csv",
              "reduced_model.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    // bounds table monotone nonincreasing
    let bounds = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let vals: Vec<f64> = bounds
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn effective_config_round_trips() {
    let dir = tmp_dir("roundtrip");
    let cfg = write_config(&dir, "job.json", CHAIN_REDUCE);
    let out = dir.join("out");
    assert!(run("reduce", &cfg, &out, None).status.success());
    let eff = fs::read_to_string(out.join("effective_config.json")).unwrap();
    let out2 = dir.join("out2");
    let cfg2 = write_config(&dir, "eff.json", &eff);
    assert!(run("reduce", &cfg2, &out2, None).status.success());
    let eff2 = fs::read_to_string(out2.join("effective_config.json")).unwrap();
    assert_eq!(eff, eff2, "effective config must re-parse to an identical job");
}

#[test]
fn config_errors_exit_3() {
    let dir = tmp_dir("badcfg");
    // unknown key rejected
    let cfg = write_config(
        &dir,
        "bad.json",
        r#"{"plant": {"builtin": "dc_motor"}, "unknown_key": 1}"#,
    );
    let res = run("gramians", &cfg, &dir.join("o1"), None);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    // missing file
    let res = run("gramians", &dir.join("nope.json"), &dir.join("o2"), None);
    assert_eq!(res.status.code(), Some(3));
    // gamma <= 1 rejected
    let cfg = write_config(
        &dir,
        "badgamma.json",
        r#"{"plant": {"builtin": "dc_motor"}, "gamma": 0.5}"#,
    );
    let res = run("hinf", &cfg, &dir.join("o3"), None);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn infeasible_exits_2() {
    // the motor benchmark is open-loop unstable: no Gramian pair exists
    let dir = tmp_dir("infeasible");
    let cfg = write_config(
        &dir,
        "job.json",
        r#"{"plant": {"builtin": "dc_motor"}, "epsilon": 0.01,
            "vertices": {"strategy": "one-at-a-time"}}"#,
    );
    let res = run("gramians", &cfg, &dir.join("out"), None);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let report = fs::read_to_string(dir.join("out").join("report.json")).unwrap();
    assert!(report.contains("infeasible"));
}

#[test]
fn verification_failure_exits_1() {
    // an uncertified-rate contraction claim: chain with a huge epsilon in the
    // verifier via a tiny dt horizon is hard to force; instead claim decay of
    // an unstable loop by configuring lqg on a plant whose pair exists but
    // sabotage with slope_max far below the achievable rate
    let dir = tmp_dir("verify1");
    let cfg = write_config(
        &dir,
        "job.json",
        r#"{"plant": {"builtin": "dc_motor"}, "epsilon": 0.01,
            "vertices": {"strategy": "one-at-a-time"},
            "verify": {"trials": 4, "t_final": 30.0, "dt": 0.002, "slope_max": -50.0},
            "seed": 5}"#,
    );
    let res = run("lqg", &cfg, &dir.join("out"), None);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn simulate_writes_scenario_csvs() {
    let dir = tmp_dir("simulate");
    let cfg = write_config(
        &dir,
        "job.json",
        r#"{
  "plant": {"builtin": "network_chain", "n": 6},
  "epsilon": 0.01,
  "vertices": {"strategy": "one-at-a-time"},
  "reduction": {"order": 2},
  "simulation": {
    "t_final": 5.0, "dt": 0.001,
    "scenarios": [
      {"name": "driven", "system": "plant",
       "input": {"kind": "sum-of-sines", "amps": [1.0, 1.0], "freqs": [1.0, 3.0]}},
      {"name": "driven_r2", "system": "reduced",
       "input": {"kind": "sum-of-sines", "amps": [1.0, 1.0], "freqs": [1.0, 3.0]}}
    ]
  },
  "seed": 9
}"#,
    );
    let out = dir.join("out");
    let res = run("simulate", &cfg, &out, None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("driven.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,"));
    assert_eq!(csv.lines().count(), 5002); // header + 5001 grid points
    assert!(out.join("driven_r2.csv").exists());
    // empty scenario list is a no-op success
    let cfg2 = write_config(
        &dir,
        "empty.json",
        r#"{"plant": {"builtin": "network_chain", "n": 4}, "epsilon": 0.01}"#,
    );
    let res = run("simulate", &cfg2, &dir.join("out_empty"), None);
    assert!(res.status.success());
}

#[test]
fn shipped_configs_stay_valid() {
    // every checked-in job config must still parse against the schema, and
    // the fast motor jobs must run end to end
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut found = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        found += 1;
        let dir = tmp_dir(&format!(
            "cfg-{}",
            path.file_stem().unwrap().to_string_lossy()
        ));
        // rewrite with a one-iteration solver budget: the run then exits 0
        // or 2 almost instantly, while exit 3 still flags schema drift
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["solver"] = serde_json::json!({"max_iter": 1});
        let capped = dir.join("capped.json");
        fs::write(&capped, serde_json::to_string(&doc).unwrap()).unwrap();
        let res = run("gramians", &capped, &dir.join("out"), Some(1));
        assert_ne!(
            res.status.code(),
            Some(3),
            "{} no longer parses: {}",
            path.display(),
            String::from_utf8_lossy(&res.stderr)
        );
    }
    assert!(found >= 6, "expected the shipped config set, found {found}");
    // the motor loop scenarios run end to end
    let dir = tmp_dir("cfg-motor-sim");
    let res = run(
        "simulate",
        &root.join("motor_hinf_gamma5.json"),
        &dir.join("out"),
        Some(1),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["loop_full.csv", "loop_r2.csv", "loop_r1.csv"] {
        assert!(dir.join("out").join(f).exists(), "missing {f}");
    }
}

#[test]
fn block_structure_yields_block_diagonal_gramians() {
    let dir = tmp_dir("blocks");
    let cfg = write_config(
        &dir,
        "job.json",
        r#"{
  "plant": {"expressions": ["-3*x1 + sin(x2 - x1)", "-3*x2 + sin(x1 - x2)", "-3*x3"],
            "b": [[1.0], [0.0], [1.0]], "c": [[1.0, 0.0, 0.0]]},
  "epsilon": 0.01,
  "vertices": {"strategy": "scaled-sound"},
  "structure": {"blocks": [2, 1]},
  "seed": 2
}"#,
    );
    let out = dir.join("out");
    let res = run("gramians", &cfg, &out, None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let x = fs::read_to_string(out.join("X.csv")).unwrap();
    for (i, line) in x.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if i < 2 {
            assert_eq!(cells[2], "0", "X[{i}][2] must be exactly zero off the blocks");
        } else {
            assert_eq!(cells[0], "0");
            assert_eq!(cells[1], "0");
        }
    }
}

/// Acceptance criterion 8: every command with a fixed seed produces
/// byte-identical JSON reports across two consecutive runs.
#[test]
fn criterion_8_determinism() {
    let dir = tmp_dir("determinism");
    let motor_hinf = r#"{
  "plant": {"builtin": "dc_motor"},
  "epsilon": 0.01,
  "gamma": 5.0,
  "vertices": {"strategy": "one-at-a-time"},
  "reduction": {"order": 2},
  "hinf": {"orders": [2, 1]},
  "verify": {"trials": 4, "t_final": 30.0, "dt": 0.002},
  "simulation": {"t_final": 2.0, "dt": 0.001,
    "scenarios": [{"name": "loop", "system": "lqg-loop",
                   "x0": [1.0, -0.5, 0.25]}]},
  "seed": 1234
}"#;
    let chain = r#"{
  "plant": {"builtin": "network_chain", "n": 6},
  "epsilon": 0.01,
  "vertices": {"strategy": "one-at-a-time"},
  "reduction": {"order": 2},
  "verify": {"trials": 4, "t_final": 10.0, "dt": 0.002,
             "checks": ["ies", "observability", "error-bound"]},
  "seed": 1234
}"#;
    let mut all_pass = true;
    let mut notes = Vec::new();
    for (cmd, cfg_body, tag) in [
        ("gramians", chain, "g"),
        ("reduce", chain, "r"),
        ("lqg", motor_hinf, "l"),
        ("hinf", motor_hinf, "h"),
        ("simulate", motor_hinf, "s"),
        ("verify", chain, "v"),
    ] {
        let cfg = write_config(&dir, &format!("{tag}.json"), cfg_body);
        let out_a = dir.join(format!("{tag}_a"));
        let out_b = dir.join(format!("{tag}_b"));
        let ra = run(cmd, &cfg, &out_a, Some(77));
        let rb = run(cmd, &cfg, &out_b, Some(77));
        assert_eq!(
            ra.status.code(),
            rb.status.code(),
            "{cmd}: exit codes differ"
        );
        let ja = fs::read(out_a.join("report.json")).unwrap();
        let jb = fs::read(out_b.join("report.json")).unwrap();
        let identical = ja == jb;
        all_pass &= identical;
        notes.push(format!("{cmd}: {}", if identical { "byte-identical" } else { "DIFFERS" }));
    }
    println!(
        "ACCEPTANCE 8: {} — {}",
        if all_pass { "PASS" } else { "FAIL" },
        notes.join(", ")
    );
    assert!(all_pass, "{notes:?}");
}
