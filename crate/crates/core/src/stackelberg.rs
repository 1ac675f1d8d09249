//! Forward-backward iteration between the follower QP and the leader DP.
//!
//! At each time step `k` the followers' openness starts at `ȳ = 0`. The QP is
//! solved against the leaders' current opinions; if the new openness moved
//! by more than `gamma` (infinity norm) the system matrices are rebuilt from
//! it, the leader recursion is rerun from `n` back to `k`, the leaders adopt
//! `u*(k)`, and the QP is solved again. On the very first pass the leaders'
//! opinions are the ones carried over from the previous step.

use log::warn;

use crate::dynamics::{
    assemble, step_matrix, step_per_agent, InitialOpinions, OpennessVector, OpinionState,
    StubbornControl, SystemMatrices,
};
use crate::follower_qp::{
    build_qp, kkt_residual, solve_box_qp_from, Coupling, QpError, DEFAULT_QP_TOLERANCE,
};
use crate::leader_dp::{
    backward_recursion, bellman_gradient, optimal_control, value_at, CrossRecursion, DpError,
    LeaderWeights, ValueFunction,
};
use crate::linalg::{inf_norm, Vector};
use crate::network::{validate_stubborn_hull, SocialNetwork};
use crate::DimensionMismatch;

pub const DEFAULT_GAMMA: f64 = 1e-6;
pub const DEFAULT_MAX_INNER_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Final time `n`.
    pub horizon: usize,
    /// Fixed-point tolerance on `‖ȳ - y*‖∞`.
    pub gamma: f64,
    pub max_inner_iterations: usize,
    pub epsilon: f64,
    pub coupling: Coupling,
    pub weights: LeaderWeights,
    pub cross_recursion: CrossRecursion,
    /// Start `ȳ` from the previous step's openness instead of zero.
    pub warm_start: bool,
    pub qp_tolerance: f64,
    /// Accept the last iterate when the inner loop hits its cap.
    pub best_effort: bool,
}

impl GameConfig {
    pub fn new(horizon: usize, weights: LeaderWeights) -> Self {
        Self {
            horizon,
            gamma: DEFAULT_GAMMA,
            max_inner_iterations: DEFAULT_MAX_INNER_ITERATIONS,
            epsilon: 1.0,
            coupling: Coupling::default(),
            weights,
            cross_recursion: CrossRecursion::default(),
            warm_start: false,
            qp_tolerance: DEFAULT_QP_TOLERANCE,
            best_effort: false,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.horizon < 1 {
            return Err(GameError::InvalidConfig(
                "horizon must be at least 1".into(),
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(GameError::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.max_inner_iterations < 1 {
            return Err(GameError::InvalidConfig(
                "max_inner_iterations must be at least 1".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(GameError::Qp(QpError::InvalidEpsilon(self.epsilon)));
        }
        self.weights.validate()?;
        Ok(())
    }
}

/// Diagnostics of an inner loop that hit its iteration cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub k: usize,
    pub last_y: Vector,
    pub last_u: Vector,
    pub delta_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("fixed point not reached at k = {} after {} iterations (last ‖Δy‖∞ = {:.3e})", .0.k, .0.delta_history.len(), .0.delta_history.last().copied().unwrap_or(f64::NAN))]
    FixedPointDivergence(Box<Divergence>),
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub y: OpennessVector,
    pub u: StubbornControl,
    pub inner_iterations: usize,
    /// Leader value `V_k` at `(x(k), d(y*))`.
    pub value: f64,
    /// Follower objective `J_k` at `y*` (without the constant term).
    pub follower_objective: f64,
    pub delta_history: Vec<f64>,
    pub converged: bool,
    /// `(A, B, d)` built from the returned openness.
    pub mats: SystemMatrices,
    /// Worst invariants over every backward recursion run during the step.
    pub recursion: RecursionHealth,
}

/// Symmetry and definiteness of the value-function blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionHealth {
    /// Largest `‖S12(t) - S21(t)ᵀ‖∞`.
    pub max_cross_asymmetry: f64,
    /// Smallest eigenvalue of any `S11(t)`.
    pub min_s11_eigenvalue: f64,
}

impl Default for RecursionHealth {
    fn default() -> Self {
        Self {
            max_cross_asymmetry: 0.0,
            min_s11_eigenvalue: f64::INFINITY,
        }
    }
}

impl RecursionHealth {
    fn record(&mut self, vf: &ValueFunction) {
        self.max_cross_asymmetry = self.max_cross_asymmetry.max(vf.max_cross_asymmetry);
        self.min_s11_eigenvalue = self.min_s11_eigenvalue.min(vf.min_s11_eigenvalue());
    }
}

/// Iterate follower and leader best responses at time `k`.
///
/// `initial_control` holds the leaders' opinion change carried over from the
/// previous step; `previous_openness` is only read when warm starting.
pub fn solve_step(
    k: usize,
    x: &Vector,
    initial_control: &StubbornControl,
    previous_openness: Option<&OpennessVector>,
    config: &GameConfig,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<StepOutcome, GameError> {
    if k >= config.horizon {
        return Err(DpError::EmptyHorizon {
            k,
            n: config.horizon,
        }
        .into());
    }
    let nr = network.n_regular();
    let mut y_bar = match (config.warm_start, previous_openness) {
        (true, Some(y)) => y.as_vector().clone(),
        _ => Vector::zeros(nr),
    };
    let mut u = initial_control.clone();
    let mut deltas = Vec::new();
    let mut last_y = None;
    let mut health = RecursionHealth::default();

    for iteration in 1..=config.max_inner_iterations {
        let qp = build_qp(x, &u, network, init, config.epsilon, config.coupling)?;
        let solution = solve_box_qp_from(&qp, &y_bar, config.qp_tolerance)?;
        let y_star = solution.y_star;
        let delta = inf_norm(&(&y_bar - y_star.as_vector()));
        deltas.push(delta);
        if delta <= config.gamma {
            return finish(
                k,
                x,
                y_star,
                u,
                iteration,
                solution.objective,
                deltas,
                true,
                health,
                config,
                network,
                init,
            );
        }
        let mats = assemble(&y_star, network, init)?;
        let (vf, policy) = backward_recursion(
            &mats,
            &config.weights,
            k,
            config.horizon,
            config.cross_recursion,
        )?;
        health.record(&vf);
        u = optimal_control(&policy, x, &mats.d, k)?;
        y_bar = y_star.as_vector().clone();
        last_y = Some((y_star, solution.objective));
    }

    let (y_star, objective) = last_y.expect("at least one iteration ran");
    if config.best_effort {
        return finish(
            k,
            x,
            y_star,
            u,
            config.max_inner_iterations,
            objective,
            deltas,
            false,
            health,
            config,
            network,
            init,
        );
    }
    Err(GameError::FixedPointDivergence(Box::new(Divergence {
        k,
        last_y: y_star.into_vector(),
        last_u: u.0,
        delta_history: deltas,
    })))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    k: usize,
    x: &Vector,
    y: OpennessVector,
    u: StubbornControl,
    inner_iterations: usize,
    follower_objective: f64,
    delta_history: Vec<f64>,
    converged: bool,
    mut health: RecursionHealth,
    config: &GameConfig,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<StepOutcome, GameError> {
    let mats = assemble(&y, network, init)?;
    let (vf, _) = backward_recursion(
        &mats,
        &config.weights,
        k,
        config.horizon,
        config.cross_recursion,
    )?;
    health.record(&vf);
    let value = value_at(&vf, x, &mats.d, k)?;
    Ok(StepOutcome {
        y,
        u,
        inner_iterations,
        value,
        follower_objective,
        delta_history,
        converged,
        mats,
        recursion: health,
    })
}

/// Full run over `k = 0..n`.
///
/// Row `k` of the trace holds `x(k)` and the stubborn opinions `v(k) = v0 + u*(k)`
/// that act during the transition to `x(k+1)`; the final row repeats the last
/// stubborn opinions.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace {
    pub states: Vec<Vector>,
    pub stubborn: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub openness: Vec<Vector>,
    pub inner_iterations: Vec<usize>,
    pub values: Vec<f64>,
    pub follower_objectives: Vec<f64>,
    pub recursion: Vec<RecursionHealth>,
    /// Steps accepted without convergence under `best_effort`.
    pub unconverged_steps: Vec<usize>,
}

impl GameTrace {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Recompute the states by pushing the stored controls and openness
    /// through the per-agent update.
    pub fn replay_per_agent(
        &self,
        network: &SocialNetwork,
        init: &InitialOpinions,
    ) -> Result<Vec<Vector>, GameError> {
        let mut state = OpinionState::initial(init);
        let mut states = vec![state.x.clone()];
        for (u, y) in self.controls.iter().zip(&self.openness) {
            let y = OpennessVector::new(y.clone())
                .map_err(|e| GameError::InvalidConfig(e.to_string()))?;
            state = step_per_agent(&state, &StubbornControl(u.clone()), &y, network, init)?;
            states.push(state.x.clone());
        }
        Ok(states)
    }
}

pub fn simulate(
    config: &GameConfig,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<GameTrace, GameError> {
    config.validate()?;
    if let Err(violation) = validate_stubborn_hull(network, &init.v0) {
        warn!("stubborn opinions do not straddle the origin ({violation}); continuing");
    }
    let n = config.horizon;
    let mut trace = GameTrace {
        states: Vec::with_capacity(n + 1),
        stubborn: Vec::with_capacity(n + 1),
        controls: Vec::with_capacity(n),
        openness: Vec::with_capacity(n),
        inner_iterations: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        follower_objectives: Vec::with_capacity(n),
        recursion: Vec::with_capacity(n),
        unconverged_steps: Vec::new(),
    };
    let mut state = OpinionState::initial(init);
    let mut carried = StubbornControl::zeros(network.n_stubborn());
    let mut previous_openness: Option<OpennessVector> = None;

    for k in 0..n {
        let step = solve_step(
            k,
            &state.x,
            &carried,
            previous_openness.as_ref(),
            config,
            network,
            init,
        )?;
        let next = step_matrix(&state, &step.u, &step.mats, &init.v0)?;
        trace.states.push(state.x.clone());
        trace.stubborn.push(step.u.opinions(&init.v0));
        trace.controls.push(step.u.0.clone());
        trace.openness.push(step.y.as_vector().clone());
        trace.inner_iterations.push(step.inner_iterations);
        trace.values.push(step.value);
        trace.follower_objectives.push(step.follower_objective);
        trace.recursion.push(step.recursion);
        if !step.converged {
            warn!("accepting unconverged iterate at k = {k}");
            trace.unconverged_steps.push(k);
        }
        carried = step.u;
        previous_openness = Some(step.y);
        state = next;
    }
    trace.states.push(state.x);
    trace.stubborn.push(carried.opinions(&init.v0));
    Ok(trace)
}

/// Follower KKT residual at `y` given `u`, and the norm of the leader's
/// Bellman gradient at `u` given `y`.
pub fn mutual_best_response_residual(
    k: usize,
    x: &Vector,
    y: &OpennessVector,
    u: &StubbornControl,
    config: &GameConfig,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<(f64, f64), GameError> {
    let qp = build_qp(x, u, network, init, config.epsilon, config.coupling)?;
    let qp_residual = kkt_residual(&qp, y.as_vector());
    let mats = assemble(y, network, init)?;
    let (vf, _) = backward_recursion(
        &mats,
        &config.weights,
        k,
        config.horizon,
        config.cross_recursion,
    )?;
    let gradient = bellman_gradient(&vf, &mats, &config.weights, x, &u.0, k)?;
    Ok((qp_residual, gradient.norm()))
}
