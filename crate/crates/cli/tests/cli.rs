use std::path::PathBuf;
use std::process::{Command, Output};

fn scenarios(dir: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(dir)
}

fn lessons(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lessons")).args(args).output().expect("spawn lessons")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn zero_iterations_is_a_usage_error() {
    let s = scenarios("skill");
    let out = lessons(&["run", "--scenario", s.to_str().unwrap(), "--iterations", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_scenario_exits_1() {
    let out = lessons(&["run", "--scenario", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("error"));
}

#[test]
fn unknown_ablation_exits_1() {
    let s = scenarios("skill");
    let out = lessons(&["run", "--scenario", s.to_str().unwrap(), "--ablate", "no_such_thing"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenarios("skill");
    let mut bytes = Vec::new();
    for (i, parallel) in ["0", "4"].iter().enumerate() {
        let path = dir.path().join(format!("r{i}.json"));
        let out = lessons(&[
            "run",
            "--scenario",
            s.to_str().unwrap(),
            "--ablate",
            "cap",
            "--iterations",
            "2",
            "--parallel",
            parallel,
            "--report",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn full_beats_cap_and_assertions_hold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let s = scenarios("skill");
    let out = lessons(&[
        "run",
        "--scenario",
        s.to_str().unwrap(),
        "--ablate",
        "cap",
        "--iterations",
        "3",
        "--assert",
        "--report",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let cells = report["cells"].as_array().unwrap();
    for scenario in ["open_drawer", "pick_up_mug", "scissors_in_drawer", "tape_in_drawer"] {
        let total = |ablation: &str| -> u64 {
            let c = cells.iter().find(|c| c["scenario"] == scenario && c["ablation"] == ablation).unwrap();
            c["corrections"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum()
        };
        assert!(total("full") < total("cap"), "{scenario}");
    }
    let table = text(&out.stdout);
    assert!(table.contains("cap") && table.contains("full"));
}

#[test]
fn knowledge_persists_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.json");
    let report = dir.path().join("r.json");
    let s = scenarios("skill/open_drawer.json");
    let run = |iterations: &str| {
        let out = lessons(&[
            "run",
            "--scenario",
            s.to_str().unwrap(),
            "--iterations",
            iterations,
            "--kb",
            kb.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
        v["cells"][0]["corrections"][0].as_u64().unwrap()
    };
    assert!(run("1") > 0);
    assert!(kb.exists());
    assert_eq!(run("1"), 0);

    let out = lessons(&["kb", "list", "--kb", kb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let keys = text(&out.stdout);
    let skill = keys.lines().find(|k| k.starts_with("skill/")).expect("a skill entry").to_string();
    let out = lessons(&["kb", "show", &skill, "--kb", kb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(serde_json::from_slice::<serde_json::Value>(&out.stdout).is_ok());
    assert_eq!(lessons(&["kb", "delete", &skill, "--kb", kb.to_str().unwrap()]).status.code(), Some(0));
    let out = lessons(&["kb", "show", &skill, "--kb", kb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn kb_without_source_is_an_error() {
    assert_eq!(lessons(&["kb", "list"]).status.code(), Some(1));
}
