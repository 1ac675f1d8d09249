//! Matrix-form Friedkin-Johnsen dynamics with openness as the follower input.
//!
//! With `L = diag(y) W = [A B]` and `d = B v0 + (I - diag(y)) x0` the regular
//! opinions evolve as `x(k+1) = A x(k) + B u(k) + d`. Stubborn opinions are
//! `v = v0 + u`, and the neighbor sum of a regular agent reads the stubborn
//! opinions produced by the control applied at the same step.

use crate::linalg::{vstack, Matrix, Vector};
use crate::network::SocialNetwork;
use crate::{check_len, DimensionMismatch};

/// Initial opinions `x0` (regular, internal order) and `v0` (stubborn).
///
/// `x0` is threaded into `d` and the QP plant explicitly; it is never re-read
/// from an evolving state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialOpinions {
    pub x0: Vector,
    pub v0: Vector,
}

impl InitialOpinions {
    pub fn new(network: &SocialNetwork, x0: Vector, v0: Vector) -> Result<Self, DimensionMismatch> {
        check_len("x0", network.n_regular(), x0.len())?;
        check_len("v0", network.n_stubborn(), v0.len())?;
        Ok(Self { x0, v0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState {
    pub x: Vector,
    pub v: Vector,
    pub k: usize,
}

impl OpinionState {
    pub fn initial(init: &InitialOpinions) -> Self {
        Self {
            x: init.x0.clone(),
            v: init.v0.clone(),
            k: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("openness y[{index}] = {value} lies outside [0, 1]")]
    OpennessOutOfBounds { index: usize, value: f64 },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Follower decision `y`, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpennessVector(Vector);

impl OpennessVector {
    pub fn new(y: Vector) -> Result<Self, DynamicsError> {
        if let Some((index, &value)) = y
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(DynamicsError::OpennessOutOfBounds { index, value });
        }
        Ok(Self(y))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Vector::zeros(n))
    }

    pub fn ones(n: usize) -> Self {
        Self(Vector::from_element(n, 1.0))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_vector(self) -> Vector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stubborn opinion change `u = v - v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StubbornControl(pub Vector);

impl StubbornControl {
    pub fn zeros(n: usize) -> Self {
        Self(Vector::zeros(n))
    }

    pub fn from_opinions(v: &Vector, v0: &Vector) -> Self {
        Self(v - v0)
    }

    pub fn opinions(&self, v0: &Vector) -> Vector {
        v0 + &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Matrix,
    pub b: Matrix,
    pub d: Vector,
}

/// `Λ = diag(y)`.
pub fn openness_matrix(y: &OpennessVector) -> Matrix {
    Matrix::from_diagonal(y.as_vector())
}

/// Build `A`, `B` and `d` for openness `y`.
pub fn assemble(
    y: &OpennessVector,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<SystemMatrices, DimensionMismatch> {
    let nr = network.n_regular();
    let ns = network.n_stubborn();
    check_len("openness", nr, y.len())?;
    check_len("x0", nr, init.x0.len())?;
    check_len("v0", ns, init.v0.len())?;

    let yv = y.as_vector();
    let mut l = network.weights().clone();
    for (i, mut row) in l.row_iter_mut().enumerate() {
        row *= yv[i];
    }
    let a = l.columns(0, nr).into_owned();
    let b = l.columns(nr, ns).into_owned();
    let anchor = init.x0.component_mul(&yv.map(|v| 1.0 - v));
    let d = &b * &init.v0 + anchor;
    Ok(SystemMatrices { a, b, d })
}

/// Advance one step with `x(k+1) = A x + B u + d`.
pub fn step_matrix(
    state: &OpinionState,
    u: &StubbornControl,
    mats: &SystemMatrices,
    v0: &Vector,
) -> Result<OpinionState, DimensionMismatch> {
    check_len("state", mats.a.ncols(), state.x.len())?;
    check_len("control", mats.b.ncols(), u.0.len())?;
    check_len("v0", u.0.len(), v0.len())?;
    let x = &mats.a * &state.x + &mats.b * &u.0 + &mats.d;
    Ok(OpinionState {
        x,
        v: u.opinions(v0),
        k: state.k + 1,
    })
}

/// Advance one step agent by agent.
///
/// Regular agent `i` mixes its in-neighbors' opinions with weight `λ_i` and
/// its own initial opinion with weight `1 - λ_i`; stubborn agents take
/// `v0 + u`.
pub fn step_per_agent(
    state: &OpinionState,
    u: &StubbornControl,
    y: &OpennessVector,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<OpinionState, DimensionMismatch> {
    let nr = network.n_regular();
    check_len("state", nr, state.x.len())?;
    check_len("openness", nr, y.len())?;
    check_len("control", network.n_stubborn(), u.0.len())?;
    check_len("x0", nr, init.x0.len())?;
    check_len("v0", network.n_stubborn(), init.v0.len())?;

    let opinion = |j: usize| {
        if network.is_regular(j) {
            state.x[j]
        } else {
            init.v0[j - nr] + u.0[j - nr]
        }
    };
    let w = network.weights();
    let x = Vector::from_fn(nr, |i, _| {
        let lambda = y.as_vector()[i];
        let social: f64 = network
            .in_neighbors(i)
            .iter()
            .map(|&j| w[(i, j)] * opinion(j))
            .sum();
        lambda * social + (1.0 - lambda) * init.x0[i]
    });
    Ok(OpinionState {
        x,
        v: u.opinions(&init.v0),
        k: state.k + 1,
    })
}

/// Diagonal of the QP plant `H = diag(W [x; u + v0] - x0)`, so that
/// `x(k+1) = H y + x0` for every openness `y`.
pub fn qp_plant(
    x: &Vector,
    u: &StubbornControl,
    network: &SocialNetwork,
    init: &InitialOpinions,
) -> Result<Vector, DimensionMismatch> {
    check_len("state", network.n_regular(), x.len())?;
    check_len("control", network.n_stubborn(), u.0.len())?;
    check_len("x0", network.n_regular(), init.x0.len())?;
    let stacked = vstack(x, &u.opinions(&init.v0));
    Ok(network.weights() * stacked - &init.x0)
}
