use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crowdnav::data::{load_trajectories, LoadOptions, GRID_HZ};
use crowdnav::policy::load_policy;
use crowdnav::sim::parse_trace;

const SMALL: &str = r#"
[data]
episodes = 4
train_episodes = 6
[data.synthetic]
duration = 40.0
[train.sac]
total_transitions = 120
warmup = 40
batch = 16
hidden = [8, 8]
curve_interval = 40
"#;

fn crowdnav(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("small.toml");
    if !cfg.exists() {
        fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_crowdnav"))
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .env_remove("CROWDNAV_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn path(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_str().unwrap().to_string()
}

#[test]
fn help_lists_config_keys_with_provenance() {
    let o = ok(Command::new(env!("CARGO_BIN_EXE_crowdnav")).arg("--help").output().unwrap());
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["seed", "sim.mpc.horizon", "sim.reward.goal_radius", "train.sac.gamma", "data.synthetic.mean_speed"] {
        assert!(text.lines().any(|l| l.trim_start().starts_with(key)), "{key} missing");
    }
    assert!(text.lines().any(|l| l.contains("sim.mpc.beta") && l.contains("[paper") && l.contains("0.9")));
    assert!(text.lines().any(|l| l.contains("sim.reward.goal_bonus") && l.contains("[decision")));
    let o = ok(Command::new(env!("CARGO_BIN_EXE_crowdnav")).args(["eval", "--help"]).output().unwrap());
    assert!(String::from_utf8(o.stdout).unwrap().contains("eval.jobs"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&crowdnav(dir.path(), &["gen-data", "--bogus"])), 1);
    assert_eq!(code(&crowdnav(dir.path(), &["train", "--lambda-f", "2"])), 1);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[sim]\nfoo = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_crowdnav"))
        .args(["--config", bad.to_str().unwrap(), "gen-data"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
}

#[test]
fn gen_data_deterministic_and_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(crowdnav(d, &["--out", &path(d, "a/nested"), "--seed", "5", "gen-data"]));
    ok(crowdnav(d, &["--out", &path(d, "b"), "--seed", "5", "gen-data"]));
    ok(crowdnav(d, &["--out", &path(d, "c"), "--seed", "6", "gen-data"]));
    for f in ["trajectories.txt", "segments.json", "episodes.txt", "train_episodes.txt"] {
        assert_eq!(read(d.join("a/nested").join(f)), read(d.join("b").join(f)), "{f}");
    }
    assert_ne!(read(d.join("b/trajectories.txt")), read(d.join("c/trajectories.txt")));

    let ds = load_trajectories(&d.join("b/trajectories.txt"), &LoadOptions { frame_rate: GRID_HZ }).unwrap();
    // constant-velocity walkers: finite differences recover the sampled speed
    for f in &ds.frames {
        for h in &f.humans {
            assert!((0.85 - 1e-6..=0.95 + 1e-6).contains(&h.speed()), "{}", h.speed());
        }
    }
}

#[test]
fn uncreatable_output_dir_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("file");
    fs::write(&file, "x").unwrap();
    let o = crowdnav(dir.path(), &["--out", &path(&file, "sub"), "gen-data"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot create"));
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = crowdnav(dir.path(), &["--out", &path(dir.path(), "empty"), "eval", "--planner", "mpc"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_zero_transitions_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = path(d, "run");
    ok(crowdnav(d, &["--out", &out, "gen-data"]));
    ok(crowdnav(d, &["--out", &path(d, "zero"), "train", "--data", &out, "--transitions", "0"]));
    let (p, header) = load_policy(&d.join("zero/policy.bin")).unwrap();
    assert_eq!(header.layers.len(), 3);
    assert_eq!(p.f_max, 5.0);
    assert_eq!(read(d.join("zero/curve.csv")), b"transitions,avg_return,avg_task_return,episodes\n");

    ok(crowdnav(d, &["--out", &path(d, "t1"), "--seed", "3", "train", "--data", &out, "--lambda-f", "5"]));
    ok(crowdnav(d, &["--out", &path(d, "t2"), "--seed", "3", "train", "--data", &out, "--lambda-f", "5"]));
    assert_eq!(read(d.join("t1/curve.csv")), read(d.join("t2/curve.csv")));
    assert_eq!(read(d.join("t1/policy.bin")), read(d.join("t2/policy.bin")));
    let (_, h) = load_policy(&d.join("t1/policy.bin")).unwrap();
    assert_eq!(h.training["lambda_f"], 5.0);
    assert_eq!(String::from_utf8(read(d.join("t1/curve.csv"))).unwrap().lines().count(), 4);
}

#[test]
fn eval_deterministic_comparable_and_exportable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = path(d, "run");
    ok(crowdnav(d, &["--out", &run, "gen-data"]));
    ok(crowdnav(d, &["--out", &run, "train"]));

    let o = crowdnav(d, &["--out", &run, "eval", "--planner", "hicrowd"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--checkpoint"));
    let o = crowdnav(d, &["--out", &run, "eval", "--planner", "hicrowd", "--checkpoint", &path(d, "nope.bin")]);
    assert_eq!(code(&o), 2);

    let ckpt = path(d, "run/policy.bin");
    for (out, jobs) in [("e1", "1"), ("e2", "1"), ("e3", "3")] {
        let out = path(d, out);
        for planner in ["hicrowd", "mpc", "orca"] {
            ok(crowdnav(
                d,
                &["--out", &out, "eval", "--data", &run, "--planner", planner, "--checkpoint", &ckpt, "--jobs", jobs],
            ));
        }
    }
    for planner in ["hicrowd", "mpc", "orca"] {
        let m = format!("metrics_{planner}.csv");
        assert_eq!(read(d.join("e1").join(&m)), read(d.join("e2").join(&m)));
        assert_eq!(read(d.join("e1").join(&m)), read(d.join("e3").join(&m)));
        for k in 0..4 {
            let t = format!("traces_{planner}/episode_{k:04}.jsonl");
            assert_eq!(read(d.join("e1").join(&t)), read(d.join("e3").join(&t)));
        }
    }
    // identical specs across planners
    let spec = |planner: &str| {
        parse_trace(&String::from_utf8(read(d.join(format!("e1/traces_{planner}/episode_0002.jsonl")))).unwrap())
            .unwrap()
            .spec
    };
    assert_eq!(spec("mpc"), spec("orca"));
    assert_eq!(spec("mpc"), spec("hicrowd"));

    let trace = path(d, "e1/traces_hicrowd/episode_0001.jsonl");
    ok(crowdnav(d, &["export", &trace, "--format", "trace", "--output", &path(d, "x/copy.jsonl")]));
    assert_eq!(read(&trace), read(d.join("x/copy.jsonl")));
    ok(crowdnav(d, &["export", &trace, "--output", &path(d, "x/a.svg")]));
    ok(crowdnav(d, &["export", &trace, "--output", &path(d, "x/b.svg")]));
    let svg = read(d.join("x/a.svg"));
    assert_eq!(svg, read(d.join("x/b.svg")));
    let text = String::from_utf8(svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(text.contains("<polyline"));
}

#[test]
fn empty_record_exports_valid_svg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let line = serde_json::json!({
        "spec": {"segment": 0, "start_frame": 0, "start": [0.0, 0.0], "goal": [3.0, 0.0], "setting": "offline", "seed": 1},
        "planner": "mpc",
        "initial": {"x": 0.0, "y": 0.0, "theta": 0.0, "v_last": 0.0, "omega_last": 0.0},
        "goal": {"gx": 3.0, "gy": 0.0},
        "steps": 0,
        "outcome": "timeout",
        "navigation_time": 0.0,
        "path_length": 0.0,
        "min_ped_distance": null,
        "frozen_steps": 0,
        "freeze_steps": 0
    });
    let trace = d.join("empty.jsonl");
    fs::write(&trace, format!("{line}\n")).unwrap();
    let r = parse_trace(&fs::read_to_string(&trace).unwrap());
    assert!(r.is_ok(), "{r:?}");
    ok(crowdnav(d, &["export", trace.to_str().unwrap()]));
    let text = String::from_utf8(read(d.join("empty.svg"))).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(!text.contains("<polygon"));
}
