//! Scenario configuration, generators, validation and the run driver.
//!
//! A scenario is a TOML document with the sections `network`, `opinions`,
//! `game` and `weights` plus a top-level `output_dir`. The README documents
//! the full grammar. Vectors over regular agents list them by ascending agent
//! id, vectors over stubborn agents likewise.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{write_artifacts, ArtifactPaths};
use crate::dynamics::InitialOpinions;
use crate::follower_qp::{Coupling, DEFAULT_QP_TOLERANCE};
use crate::leader_dp::{CrossRecursion, LeaderWeights};
use crate::linalg::{is_positive_definite, min_eigenvalue, Matrix, Vector};
use crate::network::{build_network, validate_stubborn_hull, AgentId, NetworkError, SocialNetwork};
use crate::parallel::{map_slice, Execution};
use crate::stackelberg::{
    simulate, GameConfig, GameError, GameTrace, DEFAULT_GAMMA, DEFAULT_MAX_INNER_ITERATIONS,
};

/// Eigenvalue slack for the PSD checks on `Q` and the terminal block.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub output_dir: PathBuf,
    pub network: NetworkSpec,
    pub opinions: OpinionSpec,
    pub game: GameSpec,
    pub weights: WeightSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// Every stubborn agent influences every regular agent, and regular
    /// agents additionally listen to their `ring_degree` nearest ring
    /// neighbors. Regular agents are `1..=n_regular`.
    StubbornRing {
        n_regular: usize,
        n_stubborn: usize,
        #[serde(default = "default_ring_degree")]
        ring_degree: usize,
    },
    /// Explicit `[from, to]` influence edges over agents `1..=n_agents`.
    Edges {
        n_agents: usize,
        edges: Vec<[usize; 2]>,
        /// One row per regular agent over all agents, replacing uniform weights.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explicit_weights: Option<Vec<Vec<f64>>>,
    },
}

fn default_ring_degree() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpinionSpec {
    pub x0: X0Spec,
    pub v0: Vec<f64>,
    /// Interval the initial regular opinions are drawn from; defaults to the
    /// hull of `v0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    /// Opinion space `[a, b]`, recorded for reporting only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opinion_space: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum X0Spec {
    Linspace,
    Uniform { seed: u64 },
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub horizon: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner_iterations: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default)]
    pub cross_recursion: CrossRecursion,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "default_qp_tolerance")]
    pub qp_tolerance: f64,
    #[serde(default)]
    pub best_effort: bool,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_max_inner() -> usize {
    DEFAULT_MAX_INNER_ITERATIONS
}

fn default_qp_tolerance() -> f64 {
    DEFAULT_QP_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub q: MatrixSpec,
    pub r: MatrixSpec,
    #[serde(default)]
    pub terminal: TerminalSpec,
}

/// Terminal blocks of `S(n)`; omitted blocks are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s11: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s12: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s22: Option<MatrixSpec>,
}

/// `{ scalar = c }` for `c I`, or `{ explicit = [[..], ..] }` row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MatrixSpec {
    Scalar { scalar: f64 },
    Explicit { explicit: Vec<Vec<f64>> },
}

impl MatrixSpec {
    pub fn resolve(&self, what: &'static str, dim: usize) -> Result<Matrix, ConfigError> {
        match self {
            MatrixSpec::Scalar { scalar } => Ok(Matrix::identity(dim, dim) * *scalar),
            MatrixSpec::Explicit { explicit } => {
                if explicit.len() != dim || explicit.iter().any(|row| row.len() != dim) {
                    return Err(ConfigError::MatrixShape { what, dim });
                }
                Ok(Matrix::from_fn(dim, dim, |i, j| explicit[i][j]))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid ring degree {degree} for {n_regular} regular agents (must be even and below n_regular)")]
    InvalidDegree { degree: usize, n_regular: usize },
    #[error("need at least two stubborn agents, got {0}")]
    TooFewStubborn(usize),
    #[error("x0 bounds error: {0}")]
    BoundsError(String),
    #[error("{what} must be a {dim}x{dim} matrix")]
    MatrixShape { what: &'static str, dim: usize },
    #[error("{what} has {actual} entries, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Influence edges for the stubborn-ring topology.
///
/// Agents `1..=n_regular` are regular and the rest stubborn. Each regular
/// agent hears all stubborn agents and the `ring_degree / 2` nearest regular
/// agents on either side of a ring.
pub fn generate_paper_topology(
    n_regular: usize,
    n_stubborn: usize,
    ring_degree: usize,
) -> Result<Vec<(AgentId, AgentId)>, ConfigError> {
    if n_stubborn < 2 {
        return Err(ConfigError::TooFewStubborn(n_stubborn));
    }
    if !ring_degree.is_multiple_of(2) || (ring_degree > 0 && ring_degree >= n_regular) {
        return Err(ConfigError::InvalidDegree {
            degree: ring_degree,
            n_regular,
        });
    }
    let mut edges = Vec::with_capacity(n_regular * (n_stubborn + ring_degree));
    for i in 0..n_regular {
        for s in 0..n_stubborn {
            edges.push((AgentId(n_regular + s + 1), AgentId(i + 1)));
        }
        for offset in 1..=ring_degree / 2 {
            for j in [
                (i + offset) % n_regular,
                (i + n_regular - offset) % n_regular,
            ] {
                edges.push((AgentId(j + 1), AgentId(i + 1)));
            }
        }
    }
    Ok(edges)
}

/// Initial regular opinions inside `[lo, hi]`.
///
/// Linspace mode places the points at the interior nodes of an even
/// subdivision of the interval into `n_regular + 1` cells, so `n = 3` on
/// `[-1, 1]` gives `[-0.5, 0, 0.5]`. The `seed` argument overrides the seed
/// stored in uniform mode.
pub fn generate_x0(
    spec: &X0Spec,
    n_regular: usize,
    interval: [f64; 2],
    seed: Option<u64>,
) -> Result<Vector, ConfigError> {
    let [lo, hi] = interval;
    if !(lo < hi) {
        return Err(ConfigError::BoundsError(format!(
            "interval [{lo}, {hi}] is empty"
        )));
    }
    match spec {
        X0Spec::Linspace => {
            let step = (hi - lo) / (n_regular + 1) as f64;
            Ok(Vector::from_fn(n_regular, |i, _| {
                lo + step * (i + 1) as f64
            }))
        }
        X0Spec::Uniform { seed: stored } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(*stored));
            Ok(Vector::from_fn(n_regular, |_, _| rng.random_range(lo..hi)))
        }
        X0Spec::Explicit { values } => {
            if values.len() != n_regular {
                return Err(ConfigError::Length {
                    what: "explicit x0",
                    expected: n_regular,
                    actual: values.len(),
                });
            }
            if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(ConfigError::BoundsError(format!(
                    "x0 entry {v} outside [{lo}, {hi}]"
                )));
            }
            Ok(Vector::from_row_slice(values))
        }
    }
}

/// A config resolved into the objects the solver consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: SocialNetwork,
    pub init: InitialOpinions,
    pub game: GameConfig,
    pub interval: [f64; 2],
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, LoadError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))?;
        Ok(Self::from_toml(&text)?)
    }

    /// The config echoed inside a run manifest.
    pub fn from_manifest(text: &str) -> Result<Self, ConfigError> {
        #[derive(Deserialize)]
        struct Echo {
            config: ScenarioConfig,
        }
        serde_json::from_str::<Echo>(text)
            .map(|e| e.config)
            .map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Load a TOML config, or the config echoed by a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self, LoadError> {
        if path.extension().is_some_and(|e| e == "json") {
            let text =
                std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))?;
            Ok(Self::from_manifest(&text)?)
        } else {
            Self::from_toml_file(path)
        }
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Resolve the uniform-mode x0 seed override into the config itself.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let (Some(seed), X0Spec::Uniform { seed: stored }) = (seed, &mut self.opinions.x0) {
            *stored = seed;
        }
        self
    }

    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        let network = match &self.network {
            NetworkSpec::StubbornRing {
                n_regular,
                n_stubborn,
                ring_degree,
            } => {
                let edges = generate_paper_topology(*n_regular, *n_stubborn, *ring_degree)?;
                build_network(&edges, n_regular + n_stubborn)?
            }
            NetworkSpec::Edges {
                n_agents,
                edges,
                explicit_weights,
            } => {
                let edges: Vec<_> = edges
                    .iter()
                    .map(|&[from, to]| (AgentId(from), AgentId(to)))
                    .collect();
                let net = build_network(&edges, *n_agents)?;
                match explicit_weights {
                    Some(rows) => net.with_explicit_weights(rows)?,
                    None => net,
                }
            }
        };
        let (nr, ns) = (network.n_regular(), network.n_stubborn());
        let v0 = &self.opinions.v0;
        if v0.len() != ns {
            return Err(ConfigError::Length {
                what: "v0",
                expected: ns,
                actual: v0.len(),
            });
        }
        let interval = self.opinions.interval.unwrap_or_else(|| {
            let lo = v0.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            [lo, hi]
        });
        let x0 = generate_x0(&self.opinions.x0, nr, interval, None)?;
        let init = InitialOpinions::new(&network, x0, Vector::from_row_slice(v0))
            .map_err(NetworkError::from)?;

        let w = &self.weights;
        let mut weights = LeaderWeights::new(w.q.resolve("Q", nr)?, w.r.resolve("R", ns)?);
        let zero = MatrixSpec::Scalar { scalar: 0.0 };
        weights.s11_terminal = w
            .terminal
            .s11
            .as_ref()
            .unwrap_or(&zero)
            .resolve("S11(n)", nr)?;
        weights.s12_terminal = w
            .terminal
            .s12
            .as_ref()
            .unwrap_or(&zero)
            .resolve("S12(n)", nr)?;
        weights.s22_terminal = w
            .terminal
            .s22
            .as_ref()
            .unwrap_or(&zero)
            .resolve("S22(n)", nr)?;

        let g = &self.game;
        let game = GameConfig {
            horizon: g.horizon,
            gamma: g.gamma,
            max_inner_iterations: g.max_inner_iterations,
            epsilon: g.epsilon,
            coupling: g.coupling,
            weights,
            cross_recursion: g.cross_recursion,
            warm_start: g.warm_start,
            qp_tolerance: g.qp_tolerance,
            best_effort: g.best_effort,
        };
        Ok(Scenario {
            network,
            init,
            game,
            interval,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of every static check on a config.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Failed checks other than the ones listed in `lenient`.
    pub fn blocking_failures(&self, lenient: &[&str]) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.passed && !lenient.contains(&c.name))
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

pub const CHECK_RESOLVE: &str = "config-resolves";
pub const CHECK_STOCHASTIC: &str = "w-row-stochastic";
pub const CHECK_STUBBORN_HULL: &str = "stubborn-hull-contains-origin";
pub const CHECK_R: &str = "r-positive-definite";
pub const CHECK_Q: &str = "q-positive-semidefinite";
pub const CHECK_TERMINAL: &str = "terminal-positive-semidefinite";
pub const CHECK_GAME: &str = "game-parameters";

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

/// Run every static invariant on the config. Never fails; problems are
/// reported as failed checks.
pub fn validate(config: &ScenarioConfig) -> ValidationReport {
    let scenario = match config.resolve() {
        Ok(s) => s,
        Err(e) => {
            return ValidationReport {
                checks: vec![check(CHECK_RESOLVE, false, e.to_string())],
            }
        }
    };
    let mut checks = vec![check(
        CHECK_RESOLVE,
        true,
        format!(
            "{} regular and {} stubborn agents",
            scenario.network.n_regular(),
            scenario.network.n_stubborn()
        ),
    )];

    let violations = scenario.network.stochasticity_violations();
    checks.push(match violations.first() {
        None => check(CHECK_STOCHASTIC, true, "every regular row sums to 1"),
        Some(&(row, sum)) => check(
            CHECK_STOCHASTIC,
            false,
            format!(
                "{} rows off; agent {} sums to {sum:.12}",
                violations.len(),
                scenario.network.external_id(row)
            ),
        ),
    });

    checks.push(
        match validate_stubborn_hull(&scenario.network, &scenario.init.v0) {
            Ok(()) => check(CHECK_STUBBORN_HULL, true, "stubborn opinions straddle 0"),
            Err(e) => check(CHECK_STUBBORN_HULL, false, e.to_string()),
        },
    );

    let w = &scenario.game.weights;
    checks.push(if is_positive_definite(&w.r) {
        check(
            CHECK_R,
            true,
            format!("min eigenvalue {:e}", min_eigenvalue(&w.r)),
        )
    } else {
        check(
            CHECK_R,
            false,
            format!(
                "R is not symmetric positive definite (min eigenvalue {:e})",
                min_eigenvalue(&crate::linalg::symmetrize(&w.r))
            ),
        )
    });
    checks.push(psd_check(CHECK_Q, "Q", &w.q));
    checks.push(psd_check(CHECK_TERMINAL, "S(n)", &w.terminal_block()));

    checks.push(match scenario.game.validate() {
        Ok(()) => check(
            CHECK_GAME,
            true,
            format!(
                "horizon {}, gamma {:e}, epsilon {}",
                scenario.game.horizon, scenario.game.gamma, scenario.game.epsilon
            ),
        ),
        Err(GameError::Dp(_)) => check(CHECK_GAME, true, "weights reported above"),
        Err(e) => check(CHECK_GAME, false, e.to_string()),
    });
    ValidationReport { checks }
}

fn psd_check(name: &'static str, label: &str, m: &Matrix) -> Check {
    let asym = crate::linalg::asymmetry(m);
    let lambda = min_eigenvalue(&crate::linalg::symmetrize(m));
    let passed = asym <= PSD_TOLERANCE && lambda >= -PSD_TOLERANCE;
    check(
        name,
        passed,
        format!("{label}: asymmetry {asym:e}, min eigenvalue {lambda:e}"),
    )
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub best_effort: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config rejected:\n{0}")]
    Validation(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 1 validation failure, 2 solver failure or non-convergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 1,
            RunError::Game(GameError::InvalidConfig(_)) => 1,
            RunError::Game(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

impl From<LoadError> for RunError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(path, err) => RunError::Io(std::io::Error::new(
                err.kind(),
                format!("{}: {err}", path.display()),
            )),
            LoadError::Config(c) => RunError::Validation(c.to_string()),
        }
    }
}

/// Everything a completed run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub trace: GameTrace,
    pub paths: ArtifactPaths,
}

/// Apply the run options to a config: output directory, best-effort flag
/// and x0 seed all end up in the echoed config.
pub fn effective_config(config: &ScenarioConfig, options: &RunOptions) -> ScenarioConfig {
    let mut config = config.clone().with_seed(options.seed);
    if let Some(dir) = &options.output_dir {
        config.output_dir = dir.clone();
    }
    if options.best_effort {
        config.game.best_effort = true;
    }
    config
}

/// Validate, simulate and write every artifact.
///
/// Only the origin-in-hull check is lenient here; it is logged as a warning.
pub fn run(config: &ScenarioConfig, options: &RunOptions) -> Result<RunArtifacts, RunError> {
    let config = effective_config(config, options);
    let report = validate(&config);
    let blocking = report.blocking_failures(&[CHECK_STUBBORN_HULL]);
    if !blocking.is_empty() {
        let mut text = String::new();
        for c in blocking {
            let _ = writeln!(text, "FAIL {}: {}", c.name, c.detail);
        }
        return Err(RunError::Validation(text));
    }
    if let Some(c) = report.check(CHECK_STUBBORN_HULL).filter(|c| !c.passed) {
        warn!("{}: {}", c.name, c.detail);
    }
    let scenario = config
        .resolve()
        .map_err(|e| RunError::Validation(e.to_string()))?;
    info!(
        "simulating {} regular / {} stubborn agents over {} steps",
        scenario.network.n_regular(),
        scenario.network.n_stubborn(),
        scenario.game.horizon
    );
    let trace = simulate(&scenario.game, &scenario.network, &scenario.init)?;
    let paths = write_artifacts(&config, &scenario, &trace)?;
    Ok(RunArtifacts {
        config,
        scenario,
        trace,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bad sweep spec {0:?}: {1}")]
pub struct SweepError(pub String, pub String);

/// Configs for `KEY=v1,v2,...`, where `KEY` is a dotted path such as
/// `game.epsilon`. Each run writes below `<output_dir>/<KEY>=<value>`.
pub fn sweep_configs(base: &ScenarioConfig, spec: &str) -> Result<Vec<ScenarioConfig>, SweepError> {
    let err = |msg: &str| SweepError(spec.to_string(), msg.to_string());
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| err("expected KEY=v1,v2"))?;
    let path: Vec<&str> = key.split('.').collect();
    let mut out = Vec::new();
    for raw in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut tree = serde_json::to_value(base).expect("config serializes");
        let slot = path
            .iter()
            .try_fold(&mut tree, |node, part| node.get_mut(*part))
            .ok_or_else(|| err(&format!("unknown key {key}")))?;
        *slot = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut config: ScenarioConfig =
            serde_json::from_value(tree).map_err(|e| err(&e.to_string()))?;
        config.output_dir = base.output_dir.join(format!("{key}={raw}"));
        out.push(config);
    }
    if out.is_empty() {
        return Err(err("no values"));
    }
    Ok(out)
}

/// Run independent configs, concurrently when the build allows it.
pub fn run_many(
    configs: &[ScenarioConfig],
    options: &RunOptions,
    exec: Execution,
) -> Vec<Result<RunArtifacts, RunError>> {
    let options = RunOptions {
        output_dir: None,
        ..options.clone()
    };
    map_slice(exec, configs, |c| run(c, &options))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
output_dir = "out"

[network]
topology = "stubborn-ring"
n_regular = 4
n_stubborn = 2

[opinions]
v0 = [-1.0, 1.0]
x0 = { mode = "linspace" }

[game]
horizon = 1
epsilon = 1.0

[weights]
q = { scalar = 0.1 }
r = { scalar = 1.0 }
"#;

    #[test]
    fn parses_defaults() {
        let config = ScenarioConfig::from_toml(TOY).unwrap();
        assert_eq!(
            config.network,
            NetworkSpec::StubbornRing {
                n_regular: 4,
                n_stubborn: 2,
                ring_degree: 2
            }
        );
        assert_eq!(config.game.gamma, DEFAULT_GAMMA);
        assert_eq!(config.game.coupling, Coupling::Identity);
        let scenario = config.resolve().unwrap();
        assert_eq!(scenario.interval, [-1.0, 1.0]);
        let expected = Vector::from_row_slice(&[-0.6, -0.2, 0.2, 0.6]);
        assert!((&scenario.init.x0 - expected).amax() < 1e-15);
        assert!(validate(&config).passed());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = TOY.replace("epsilon = 1.0", "epsilon = 1.0\nepsilonn = 2.0");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn explicit_matrices() {
        let spec = MatrixSpec::Explicit {
            explicit: vec![vec![2.0, 0.0], vec![0.0, 3.0]],
        };
        assert_eq!(spec.resolve("R", 2).unwrap()[(1, 1)], 3.0);
        assert!(matches!(
            spec.resolve("R", 3),
            Err(ConfigError::MatrixShape { .. })
        ));
    }

    #[test]
    fn topology_guards() {
        assert!(matches!(
            generate_paper_topology(4, 2, 3),
            Err(ConfigError::InvalidDegree { .. })
        ));
        assert!(matches!(
            generate_paper_topology(2, 2, 2),
            Err(ConfigError::InvalidDegree { .. })
        ));
        assert!(matches!(
            generate_paper_topology(4, 1, 2),
            Err(ConfigError::TooFewStubborn(1))
        ));
    }

    #[test]
    fn sweep_expands_dotted_keys() {
        let config = ScenarioConfig::from_toml(TOY).unwrap();
        let runs = sweep_configs(&config, "game.epsilon=0.5,2").unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].game.epsilon, 0.5);
        assert_eq!(runs[1].game.epsilon, 2.0);
        assert_eq!(runs[1].output_dir, PathBuf::from("out/game.epsilon=2"));
        assert!(sweep_configs(&config, "game.nope=1").is_err());
        assert!(sweep_configs(&config, "game.horizon=abc").is_err());
    }
}
