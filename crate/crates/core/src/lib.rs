//! Opinion steering on a Friedkin-Johnsen social network.
//!
//! Stubborn agents (leaders) choose opinion changes by finite-horizon dynamic
//! programming; regular agents (followers) choose their openness by solving a
//! box-constrained quadratic program. At each time step the two best
//! responses are iterated to a fixed point before the network advances.
//!
//! Module map:
//! - [`network`]: social graph, agent partition and influence matrix.
//! - [`dynamics`]: per-agent and matrix-form opinion updates.
//! - [`follower_qp`]: the openness QP and its active-set solver.
//! - [`leader_dp`]: backward value-function recursion and leader gains.
//! - [`stackelberg`]: the forward-backward iteration and full simulation.
//! - [`oracle`]: brute-force grid verifiers for the QP and DP solvers.
//! - [`scenario`] and [`artifacts`]: config ingestion, generators and CSV output.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod dynamics;
pub mod follower_qp;
pub mod leader_dp;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod parallel;
pub mod scenario;
pub mod stackelberg;

pub use dynamics::{
    InitialOpinions, OpennessVector, OpinionState, StubbornControl, SystemMatrices,
};
pub use follower_qp::{Coupling, QpProblem, QpSolution};
pub use leader_dp::{CrossRecursion, LeaderPolicy, LeaderWeights, ValueFunction};
pub use network::{AgentId, SocialNetwork};
pub use stackelberg::{GameConfig, GameTrace};

/// Error raised when two objects that must agree in size do not.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
pub struct DimensionMismatch {
    pub what: &'static str,
    pub expected: usize,
    pub actual: usize,
}

pub(crate) fn check_len(
    what: &'static str,
    expected: usize,
    actual: usize,
) -> Result<(), DimensionMismatch> {
    if expected == actual {
        Ok(())
    } else {
        Err(DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
