use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use opinion_stackelberg::oracle::AdjudicationReport;
use opinion_stackelberg::CrossRecursion;

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opinion-stackelberg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        edit(fs::read_to_string(example("toy.toml")).unwrap()),
    )
    .unwrap();
    path
}

#[test]
fn validate_reports_each_check() {
    let out = cli(&["validate", example("paper98.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn validate_fails_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), |t| {
        t.replace(
            "v0 = [-1.0, 1.0]",
            "v0 = [1.0, 2.0]\ninterval = [-1.0, 1.0]",
        )
    });
    let out = cli(&["validate", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL stubborn-hull-contains-origin"));
}

#[test]
fn simulate_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = cli(&[
        "simulate",
        example("toy.toml").to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "trace.csv",
        "fig1_stubborn_opinions.csv",
        "fig2_optimal_cost.csv",
        "fig3_openness.csv",
        "fig4_regular_opinions.csv",
        "agents.csv",
        "manifest.json",
    ] {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
    let header = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(header.starts_with("k,x_1,x_2,v_1,v_2,u_1,u_2,y_1,y_2,V_k,inner_iterations\n"));
}

#[test]
fn unreadable_config_and_bad_output_dir_exit_with_three() {
    let out = cli(&["simulate", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let target = blocker.join("run");
    let out = cli(&[
        "simulate",
        example("toy.toml").to_str().unwrap(),
        "--output-dir",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), |t| t.replace("epsilon = 0.5", "epsilon = -0.5"));
    let out = cli(&[
        "simulate",
        config.to_str().unwrap(),
        "--output-dir",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let config = write_config(dir.path(), |t| {
        t.replace("horizon = 1", "horizon = 1\nbogus = 2")
    });
    let out = cli(&["simulate", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_with_two_unless_best_effort() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), |t| {
        t.replace("epsilon = 0.5", "epsilon = 0.5\nmax_inner_iterations = 1")
    });
    let out_dir = dir.path().join("o");
    let args = [
        "simulate",
        config.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).status.code(), Some(2));

    let mut lenient = args.to_vec();
    lenient.push("--best-effort");
    assert_eq!(cli(&lenient).status.code(), Some(0));
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(json["unconverged_steps"], serde_json::json!([0]));
    assert_eq!(
        json["config"]["game"]["best_effort"],
        serde_json::json!(true)
    );
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "simulate",
        example("toy.toml").to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
        "--sweep",
        "game.epsilon=0.25,4",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = fs::read_to_string(dir.path().join("game.epsilon=0.25/trace.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("game.epsilon=4/trace.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn adjudicated_winner_is_the_default_recursion() {
    let out = cli(&[
        "oracle",
        "adjudicate",
        "--seed",
        "5",
        "--count",
        "20",
        "--budget",
        "2e4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout(&out);
    assert_eq!(
        report
            .lines()
            .filter(|l| l.starts_with("instance="))
            .count(),
        40
    );
    assert_eq!(
        AdjudicationReport::parse_winner(&report),
        Some(CrossRecursion::default())
    );
}

#[test]
fn qp_oracle_subcommand_prints_one_line_per_instance() {
    let out = cli(&["oracle", "qp", "--count", "3", "--resolution", "0.01"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 3);
}
