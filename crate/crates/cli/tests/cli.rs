use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use skillplan::samplers::parse_replay;
use skillplan::RigidTransform;
use skillplan_cli::{relative_goal, ScenarioConfig};

fn skillplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skillplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("schema_version = 1\n{body}")).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn transform(v: &Value) -> RigidTransform {
    serde_json::from_value(v.clone()).unwrap()
}

const OBJECT: &str = "
[object]
half_extents = [0.04, 0.03, 0.025]
pose = [0.0, 0.0, 0.025, 1.0, 0.0, 0.0, 0.0]
";

const BOUNDED: &str = "
[planner]
time_budget = 60.0
max_samples = 1000
";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identity_goal_single_pull() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("seed = 3\nskeleton = \"p\"\n{OBJECT}{BOUNDED}"));
    let out_dir = dir.path().join("out");
    let out = skillplan(&["plan", "--config", s(&cfg), "--out", s(&out_dir), "--goal", "0,0,0,1,0,0,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plan = read_json(out_dir.join("plan.json"));
    assert_eq!(plan["steps"].as_array().unwrap().len(), 1);
    assert_eq!(plan["skeleton"], "p");
    assert!(plan["execution"]["within_tolerance"].as_bool().unwrap());
    for f in ["observed.ply", "step_00.ply", "step_01.ply", "stats.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    assert_eq!(read_json(out_dir.join("stats.json"))["found"], true);
}

#[test]
fn goal_pair_is_relative_transform() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("skeleton = \"p\"\n{OBJECT}{BOUNDED}"));
    let out_dir = dir.path().join("out");
    let a = "0.0 0.0 0.025 1 0 0 0";
    let b = "0.06 0.03 0.025 0.9659258 0 0 0.2588190";
    let out = skillplan(&["plan", "--config", s(&cfg), "--out", s(&out_dir), "--goal-pair", a, b]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plan = read_json(out_dir.join("plan.json"));
    let expected = relative_goal(
        &skillplan_cli::parse_transform(a).unwrap(),
        &skillplan_cli::parse_transform(b).unwrap(),
    );
    let t_des = transform(&plan["t_des"]);
    assert!(t_des.approx_eq(&expected, 1e-12, 1e-12), "{t_des:?} vs {expected:?}");
    let reached = transform(&plan["execution"]["final_pose"]);
    let goal_pose = skillplan_cli::parse_transform(b).unwrap();
    assert!(reached.approx_eq(&goal_pose, 0.03, 20f64.to_radians()));
}

#[test]
fn malformed_skeleton_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), "bad.toml", "skeleton = \"pxq\"\n");
    let out = skillplan(&["plan", "--config", s(&cfg), "--out", s(&out_dir), "--goal", "0,0,0,1,0,0,0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("'x'"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), "ok.toml", "");
    let out = skillplan(&["plan", "--config", s(&cfg), "--skeleton", "pxq", "--goal", "0,0,0,1,0,0,0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("'x'"), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let goal = ["--goal", "0,0,0,1,0,0,0"];
    let unknown = write_config(dir.path(), "u.toml", "[planner]\nbudget = 3\n");
    let out = skillplan(&[&["plan", "--config", s(&unknown)][..], &goal].concat());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("budget"), "{}", stderr(&out));

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&skillplan(&[&["plan", "--config", s(&missing)][..], &goal].concat())), 1);

    let ok = write_config(dir.path(), "ok.toml", "");
    assert_eq!(code(&skillplan(&[&["plan", "--config", s(&ok), "--noise", "0.1"][..], &goal].concat())), 1);
    assert_eq!(code(&skillplan(&["plan", "--config", s(&ok), "--goal", "1,2,3"])), 1);
    assert_eq!(code(&skillplan(&["plan", "--config", s(&ok)])), 1);
    assert_eq!(code(&skillplan(&["gen-data", "--config", s(&ok), "--skill", "x"])), 1);
    assert_eq!(code(&skillplan(&["evaluate", "--config", s(&ok), "--trials", "0"])), 1);
    assert_eq!(code(&skillplan(&["frobnicate"])), 1);
}

#[test]
fn planner_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("skeleton = \"p\"\n{OBJECT}\n[planner]\nmax_samples = 20\n"),
    );
    // Lifting the object 1 m is not a planar move, so the wall-clock budget
    // runs out.
    let out_dir = dir.path().join("out");
    let args = ["plan", "--config", s(&cfg), "--out", s(&out_dir), "--goal", "0,0,1,1,0,0,0", "--budget", "1"];
    let out = skillplan(&args);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let stats = read_json(out_dir.join("stats.json"));
    assert_eq!(stats["found"], false);
    assert_eq!(stats["failure"], "time");
    assert!(!out_dir.join("plan.json").exists());
}

fn evaluate(cfg: &Path, out_dir: &Path, trials: &str) -> Output {
    skillplan(&["evaluate", "--config", s(cfg), "--out", s(out_dir), "--trials", trials])
}

#[test]
fn evaluate_single_trial_writes_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("seed = 5\n{BOUNDED}\n[evaluation]\nskeletons = [\"pg\"]\nthreads = 1\n"),
    );
    let out_dir = dir.path().join("out");
    let out = evaluate(&cfg, &out_dir, "1");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let records = fs::read_to_string(out_dir.join("trials.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 1);
    let rec: Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(rec["skeleton"], "pg");
    assert_eq!(fs::read_to_string(out_dir.join("timings.jsonl")).unwrap().lines().count(), 1);
    assert_eq!(read_json(out_dir.join("summary.json"))["overall"]["trials"], 1);
}

#[test]
fn evaluate_is_deterministic_with_per_skeleton_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("seed = 9\n{BOUNDED}\n[evaluation]\nskeletons = [\"p\", \"pg\"]\nn_objects = 3\n"),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&evaluate(&cfg, &a, "2")), 0);
    let out = skillplan(&["evaluate", "--config", s(&cfg), "--out", s(&b), "--trials", "2"]);
    assert_eq!(code(&out), 0);
    let ra = fs::read(a.join("trials.jsonl")).unwrap();
    assert_eq!(ra, fs::read(b.join("trials.jsonl")).unwrap());
    assert_eq!(String::from_utf8(ra).unwrap().lines().count(), 4);

    let summary = read_json(a.join("summary.json"));
    let labels: Vec<&str> = summary["per_skeleton"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["p", "pg"]);
    let table = fs::read_to_string(a.join("table.txt")).unwrap();
    for row in ["p ", "pg ", "all "] {
        assert!(table.lines().any(|l| l.starts_with(row)), "row {row:?} missing:\n{table}");
    }

    let other = dir.path().join("c");
    assert_eq!(
        code(&skillplan(&["evaluate", "--config", s(&cfg), "--out", s(&other), "--trials", "2", "--seed", "10"])),
        0
    );
    assert_ne!(fs::read(a.join("trials.jsonl")).unwrap(), fs::read(other.join("trials.jsonl")).unwrap());
}

#[test]
fn plan_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("seed = 4\nskeleton = \"pg\"\n{BOUNDED}"));
    let goal = "0.05,0,0.03,0.7071068,0.7071068,0,0";
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ca = code(&skillplan(&["plan", "--config", s(&cfg), "--out", s(&a), "--goal", goal]));
    let cb = code(&skillplan(&["plan", "--config", s(&cfg), "--out", s(&b), "--goal", goal]));
    assert_eq!(ca, cb);
    for f in ["stats.json", "observed.ply"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    if ca == 0 {
        assert_eq!(fs::read(a.join("plan.json")).unwrap(), fs::read(b.join("plan.json")).unwrap());
    }
}

fn gen_data(cfg: &Path, out_dir: &Path, skill: &str, samples: &str) -> Output {
    skillplan(&["gen-data", "--config", s(cfg), "--out", s(out_dir), "--skill", skill, "--samples", samples])
}

#[test]
fn gen_data_contact_arity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "seed = 2\n");
    let out_dir = dir.path().join("out");
    for (skill, name, two_palms) in [("g", "grasp_reorient", true), ("p", "pull_right", false)] {
        let out = gen_data(&cfg, &out_dir, skill, "10");
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let records = parse_replay(&fs::read_to_string(out_dir.join(format!("{name}.replay"))).unwrap()).unwrap();
        assert!(!records.is_empty() && records.len() <= 10, "{} records", records.len());
        for r in &records {
            let palms = usize::from(r.contact.left.is_some()) + usize::from(r.contact.right.is_some());
            assert_eq!(palms, if two_palms { 2 } else { 1 });
            assert!(!r.mask_indices.is_empty());
        }
        let stats = read_json(out_dir.join(format!("{name}.yield.json")));
        assert_eq!(stats["emitted"].as_u64().unwrap() as usize, records.len());
        let meta = fs::read_to_string(out_dir.join(format!("{name}.samples.jsonl"))).unwrap();
        assert_eq!(meta.lines().count(), records.len());
    }
}

#[test]
fn gen_data_round_trips_through_replay_planner() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gen.toml", "seed = 8\n");
    let data_dir = dir.path().join("data");
    let out = gen_data(&cfg, &data_dir, "p", "5");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let meta = fs::read_to_string(data_dir.join("pull_right.samples.jsonl")).unwrap();
    let first: Value = serde_json::from_str(meta.lines().next().expect("at least one sample")).unwrap();

    let replay_cfg = write_config(
        dir.path(),
        "replay.toml",
        &format!(
            "skeleton = \"p\"\n{BOUNDED}\n[sampler]\nkind = \"replay\"\npath = \"data/pull_right.replay\"\n\
             [object]\nhalf_extents = {}\npose = {}\n",
            first["half_extents"], first["start"]
        ),
    );
    let parsed = ScenarioConfig::load(&replay_cfg).unwrap();
    assert!(matches!(parsed.sampler, skillplan_cli::SamplerConfig::Replay { ref path } if path.is_absolute() || path.exists()));

    let subgoal = transform(&first["subgoal"]).to_array().map(|v| v.to_string()).join(",");
    let out_dir = dir.path().join("plan");
    let out = skillplan(&["plan", "--config", s(&replay_cfg), "--out", s(&out_dir), "--goal", &subgoal]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plan = read_json(out_dir.join("plan.json"));
    assert!(plan["steps"][0]["skill"].as_str().unwrap().starts_with("pull"));
    assert!(plan["execution"]["within_tolerance"].as_bool().unwrap());
}

#[test]
fn export_writes_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", OBJECT);
    let out_dir = dir.path().join("out");
    let out = skillplan(&["export", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let object = skillplan::ply::load_ply(out_dir.join("object.ply")).unwrap();
    assert_eq!(object.len(), 600);
    assert!(skillplan::ply::load_ply(out_dir.join("table.ply")).unwrap().len() > 100);
    let scenario: ScenarioConfig = serde_json::from_value(read_json(out_dir.join("scenario.json"))).unwrap();
    assert_eq!(scenario.object.points, 600);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n > 0);
}
