use std::fs;
use std::path::{Path, PathBuf};

use opinion_stackelberg::artifacts::{Table, MANIFEST_FILE, TRACE_FILE};
use opinion_stackelberg::linalg::Vector;
use opinion_stackelberg::network::{build_network, AgentId};
use opinion_stackelberg::scenario::{
    generate_paper_topology, generate_x0, run, validate, ConfigError, MatrixSpec, NetworkSpec,
    RunError, RunOptions, ScenarioConfig, X0Spec, CHECK_R, CHECK_STOCHASTIC, CHECK_STUBBORN_HULL,
};

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_file(&example(name)).unwrap()
}

fn run_into(config: &ScenarioConfig, dir: &Path) -> opinion_stackelberg::scenario::RunArtifacts {
    run(
        config,
        &RunOptions {
            output_dir: Some(dir.to_path_buf()),
            ..RunOptions::default()
        },
    )
    .unwrap()
}

#[test]
fn ring_degree_zero_is_the_bipartite_example() {
    let edges = generate_paper_topology(2, 2, 0).unwrap();
    let generated = build_network(&edges, 4).unwrap();
    let by_hand = [(3, 1), (4, 1), (3, 2), (4, 2)].map(|(a, b)| (AgentId(a), AgentId(b)));
    let expected = build_network(&by_hand, 4).unwrap();
    assert_eq!(generated.weights(), expected.weights());
    assert_eq!(generated.weights()[(0, 2)], 0.5);
}

#[test]
fn stubborn_ring_rows() {
    let net = build_network(&generate_paper_topology(96, 2, 2).unwrap(), 98).unwrap();
    assert_eq!((net.n_regular(), net.n_stubborn()), (96, 2));
    for row in net.weights().row_iter() {
        let nonzero: Vec<f64> = row.iter().copied().filter(|&w| w != 0.0).collect();
        assert_eq!(nonzero, vec![0.25; 4]);
    }
    assert!(net.stochasticity_violations().is_empty());

    let small = build_network(&generate_paper_topology(4, 2, 2).unwrap(), 6).unwrap();
    for i in 0..4 {
        assert_eq!(small.in_neighbors(i).len(), 4);
    }
    assert!(small.stochasticity_violations().is_empty());
}

#[test]
fn initial_opinion_modes() {
    let x = generate_x0(&X0Spec::Linspace, 3, [-1.0, 1.0], None).unwrap();
    assert_eq!(x, Vector::from_row_slice(&[-0.5, 0.0, 0.5]));

    let explicit = X0Spec::Explicit {
        values: vec![0.2, -0.2],
    };
    assert_eq!(
        generate_x0(&explicit, 2, [-1.0, 1.0], None).unwrap(),
        Vector::from_row_slice(&[0.2, -0.2])
    );
    let outside = X0Spec::Explicit {
        values: vec![0.2, -1.5],
    };
    assert!(matches!(
        generate_x0(&outside, 2, [-1.0, 1.0], None),
        Err(ConfigError::BoundsError(_))
    ));
    assert!(matches!(
        generate_x0(&X0Spec::Linspace, 2, [1.0, -1.0], None),
        Err(ConfigError::BoundsError(_))
    ));

    let uniform = X0Spec::Uniform { seed: 7 };
    let a = generate_x0(&uniform, 50, [-1.0, 1.0], None).unwrap();
    let b = generate_x0(&uniform, 50, [-1.0, 1.0], None).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
    assert_ne!(a, generate_x0(&uniform, 50, [-1.0, 1.0], Some(8)).unwrap());
}

#[test]
fn toy_run_has_two_state_rows_and_one_control_row() {
    let dir = tempfile::tempdir().unwrap();
    let artifacts = run_into(&load("toy.toml"), dir.path());
    assert_eq!(artifacts.trace.states.len(), 2);
    assert_eq!(artifacts.trace.controls.len(), 1);

    let table = Table::parse(&fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 2);
    let u = table.column("u_1").unwrap();
    assert!(table.rows[0][u].as_f64().is_some());
    assert!(table.rows[1][u].as_f64().is_none());
}

#[test]
fn reference_config_passes_every_check() {
    let report = validate(&load("paper98.toml"));
    assert!(report.passed(), "{report}");
}

#[test]
fn one_sided_stubborn_opinions_fail_the_hull_check() {
    let mut config = load("toy.toml");
    config.opinions.v0 = vec![1.0, 2.0];
    config.opinions.interval = Some([-1.0, 1.0]);
    let report = validate(&config);
    assert!(!report.check(CHECK_STUBBORN_HULL).unwrap().passed);
    assert_eq!(
        report.checks.iter().filter(|c| !c.passed).count(),
        1,
        "{report}"
    );
}

#[test]
fn short_weight_row_fails_stochasticity() {
    let mut config = load("toy.toml");
    // agent 1 hears 2, 3, 4; agent 2 hears 3, 4
    let NetworkSpec::Edges {
        explicit_weights, ..
    } = &mut config.network
    else {
        panic!("toy uses edges")
    };
    *explicit_weights = Some(vec![vec![0.0, 0.3, 0.3, 0.3], vec![0.0, 0.0, 0.5, 0.5]]);
    let report = validate(&config);
    let check = report.check(CHECK_STOCHASTIC).unwrap();
    assert!(!check.passed);
    assert!(check.detail.contains("0.9"), "{}", check.detail);
}

#[test]
fn indefinite_r_is_rejected_before_compute() {
    let mut config = load("toy.toml");
    let dir = tempfile::tempdir().unwrap();
    config.weights.r = MatrixSpec::Explicit {
        explicit: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
    };
    let out = dir.path().join("never");
    let err = run(
        &config,
        &RunOptions {
            output_dir: Some(out.clone()),
            ..RunOptions::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, RunError::Validation(_)));
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains(CHECK_R), "{err}");
    assert!(!out.exists());
}

#[test]
fn trace_csv_round_trips_byte_for_byte() {
    for name in ["toy.toml", "paper98.toml"] {
        let dir = tempfile::tempdir().unwrap();
        run_into(&load(name), dir.path());
        for file in fs::read_dir(dir.path()).unwrap() {
            let path = file.unwrap().path();
            if path.extension().is_some_and(|e| e == "csv") && !path.ends_with("agents.csv") {
                let text = fs::read_to_string(&path).unwrap();
                assert!(!text.contains('\r'));
                assert_eq!(
                    Table::parse(&text).unwrap().to_csv(),
                    text,
                    "{}",
                    path.display()
                );
            }
        }
    }
}

#[test]
fn config_hash_tracks_every_field() {
    let base = load("paper98.toml");
    let hash = base.content_hash();
    assert_eq!(load("paper98.toml").content_hash(), hash);

    let mut variants = Vec::new();
    let mut c = base.clone();
    c.game.epsilon = 1.0 + f64::EPSILON;
    variants.push(c);
    let mut c = base.clone();
    c.game.gamma = 2e-6;
    variants.push(c);
    let mut c = base.clone();
    c.opinions.v0[0] = -0.5;
    variants.push(c);
    let mut c = base.clone();
    c.weights.q = MatrixSpec::Scalar { scalar: 0.2 };
    variants.push(c);
    let mut c = base.clone();
    c.network = NetworkSpec::StubbornRing {
        n_regular: 96,
        n_stubborn: 2,
        ring_degree: 4,
    };
    variants.push(c);
    let mut c = base.clone();
    c.output_dir = PathBuf::from("elsewhere");
    variants.push(c);
    let mut c = base.clone();
    c.game.warm_start = true;
    variants.push(c);

    let mut hashes: Vec<String> = variants.iter().map(ScenarioConfig::content_hash).collect();
    assert!(hashes.iter().all(|h| *h != hash));
    hashes.sort();
    hashes.dedup();
    assert_eq!(hashes.len(), variants.len());
}

#[test]
fn manifest_replay_is_bit_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut config = load("paper98.toml");
    config.opinions.x0 = X0Spec::Uniform { seed: 3 };
    run_into(&config, first.path());

    let replayed = ScenarioConfig::load(&first.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(replayed.opinions.x0, X0Spec::Uniform { seed: 3 });
    run_into(&replayed, second.path());
    let a = fs::read(first.path().join(TRACE_FILE)).unwrap();
    let b = fs::read(second.path().join(TRACE_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_override_lands_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = load("toy.toml");
    config.opinions.x0 = X0Spec::Uniform { seed: 1 };
    let options = RunOptions {
        output_dir: Some(dir.path().to_path_buf()),
        seed: Some(42),
        ..RunOptions::default()
    };
    run(&config, &options).unwrap();
    let echoed = ScenarioConfig::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(echoed.opinions.x0, X0Spec::Uniform { seed: 42 });
}

#[test]
fn symmetric_scenario_keeps_the_mean_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let artifacts = run_into(&load("paper98.toml"), dir.path());
    for x in &artifacts.trace.states {
        assert!(x.mean().abs() <= 1e-9, "{}", x.mean());
    }
}

#[test]
fn trace_replays_through_the_per_agent_update() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = load("paper98.toml");
    config.opinions.x0 = X0Spec::Uniform { seed: 11 };
    let artifacts = run_into(&config, dir.path());
    let replayed = artifacts
        .trace
        .replay_per_agent(&artifacts.scenario.network, &artifacts.scenario.init)
        .unwrap();
    for (a, b) in replayed.iter().zip(&artifacts.trace.states) {
        assert!((a - b).amax() <= 1e-10);
    }
}

#[test]
fn identical_configs_give_identical_traces() {
    let config = load("paper98.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ta = run_into(&config, a.path()).trace;
    let tb = run_into(&config, b.path()).trace;
    assert_eq!(ta, tb);
}
