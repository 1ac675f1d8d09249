//! The regular agents' openness QP.
//!
//! minimize `½ yᵀ P y + f y` subject to `Z y <= b`, where `Z = [I; -I]` and
//! `b = [1; 0]`, i.e. `y ∈ [0, 1]^N_R`. With the plant `x(k+1) = H y + x0`:
//!
//! - identity coupling: `P = HᵀH + εI`, `f = x0ᵀ H`
//! - all-ones coupling: `P = Hᵀ𝟙H + εI`, `f = x0ᵀ 𝟙 H`
//!
//! Both drop the constant `½ x0ᵀ C x0` of the follower cost.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::dynamics::{qp_plant, InitialOpinions, OpennessVector, StubbornControl};
use crate::linalg::{asymmetry, Matrix, Vector};
use crate::network::SocialNetwork;
use crate::{check_len, DimensionMismatch};

/// Default tolerance for the KKT certificate.
pub const DEFAULT_QP_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Coupling matrix in the follower's consensus term `x(k+1)ᵀ C x(k+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// `C = I`.
    #[default]
    Identity,
    /// `C = 𝟙𝟙ᵀ`.
    AllOnes,
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coupling::Identity => "identity",
            Coupling::AllOnes => "all-ones",
        })
    }
}

impl FromStr for Coupling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Coupling::Identity),
            "all-ones" => Ok(Coupling::AllOnes),
            other => Err(format!(
                "unknown coupling `{other}` (expected identity or all-ones)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("QP Hessian is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("active-set solver hit its iteration cap of {0}")]
    MaxIterations(usize),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: Matrix,
    /// Linear term, a row vector in the objective `f y`.
    pub f: Vector,
    pub epsilon: f64,
}

impl QpProblem {
    /// Build `P` and `f` from the plant diagonal `h`.
    pub fn from_plant(
        h: &Vector,
        x0: &Vector,
        epsilon: f64,
        coupling: Coupling,
    ) -> Result<Self, QpError> {
        if !(epsilon > 0.0) {
            return Err(QpError::InvalidEpsilon(epsilon));
        }
        check_len("x0", h.len(), x0.len())?;
        let n = h.len();
        let (p, f) = match coupling {
            Coupling::Identity => {
                let p = Matrix::from_diagonal(&h.map(|v| v * v));
                (p, x0.component_mul(h))
            }
            Coupling::AllOnes => (h * h.transpose(), h * x0.sum()),
        };
        Ok(Self {
            p: p + Matrix::identity(n, n) * epsilon,
            f,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, y: &Vector) -> f64 {
        0.5 * y.dot(&(&self.p * y)) + self.f.dot(y)
    }

    /// `P y + fᵀ`.
    pub fn gradient(&self, y: &Vector) -> Vector {
        &self.p * y + &self.f
    }

    /// `Z = [I; -I]`.
    pub fn constraint_matrix(&self) -> Matrix {
        let n = self.dim();
        let mut z = Matrix::zeros(2 * n, n);
        for i in 0..n {
            z[(i, i)] = 1.0;
            z[(n + i, i)] = -1.0;
        }
        z
    }

    /// `b = [1; 0]`.
    pub fn constraint_rhs(&self) -> Vector {
        let n = self.dim();
        Vector::from_fn(2 * n, |i, _| if i < n { 1.0 } else { 0.0 })
    }
}

/// Build the follower QP at state `x` given the leader's control `u`.
pub fn build_qp(
    x: &Vector,
    u: &StubbornControl,
    network: &SocialNetwork,
    init: &InitialOpinions,
    epsilon: f64,
    coupling: Coupling,
) -> Result<QpProblem, QpError> {
    let h = qp_plant(x, u, network, init)?;
    QpProblem::from_plant(&h, &init.x0, epsilon, coupling)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Lower(usize),
    Upper(usize),
}

impl Bound {
    fn index(self) -> usize {
        match self {
            Bound::Lower(i) | Bound::Upper(i) => i,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub y_star: OpennessVector,
    pub objective: f64,
    pub kkt_residual: f64,
    pub active_set: BTreeSet<Bound>,
    pub iterations: usize,
}

/// Largest KKT violation of a box-feasible `y`.
///
/// Interior coordinates contribute `|g_i|`, coordinates at 0 contribute
/// `max(0, -g_i)` and at 1 `max(0, g_i)`, with `g = P y + fᵀ`. Bound
/// violations are added as well so infeasible points never certify.
pub fn kkt_residual(problem: &QpProblem, y: &Vector) -> f64 {
    let g = problem.gradient(y);
    y.iter()
        .zip(g.iter())
        .map(|(&yi, &gi)| {
            let stationarity = if yi <= 0.0 {
                (-gi).max(0.0)
            } else if yi >= 1.0 {
                gi.max(0.0)
            } else {
                gi.abs()
            };
            stationarity + (-yi).max(0.0) + (yi - 1.0).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Solve the box QP from `y = 0`.
pub fn solve_box_qp(problem: &QpProblem, tolerance: f64) -> Result<QpSolution, QpError> {
    solve_box_qp_from(problem, &Vector::zeros(problem.dim()), tolerance)
}

/// Primal active-set method for the strictly convex box QP.
///
/// The working set holds coordinates pinned at a bound. Each iteration takes
/// the Newton step on the free coordinates; a blocking bound joins the
/// working set, and once the step vanishes the bound with the most negative
/// multiplier leaves it. Iterations are capped at `10 * N_R`.
pub fn solve_box_qp_from(
    problem: &QpProblem,
    warm_start: &Vector,
    tolerance: f64,
) -> Result<QpSolution, QpError> {
    let n = problem.dim();
    check_len("P", n, problem.p.nrows())?;
    check_len("P", n, problem.p.ncols())?;
    check_len("warm start", n, warm_start.len())?;
    if asymmetry(&problem.p) > SYMMETRY_TOLERANCE || Cholesky::new(problem.p.clone()).is_none() {
        return Err(QpError::NotPositiveDefinite);
    }

    // f = 0 makes y = 0 optimal for any positive definite P.
    if problem.f.iter().all(|&v| v == 0.0) {
        return Ok(finish(
            problem,
            Vector::zeros(n),
            (0..n).map(Bound::Lower).collect(),
            0,
        ));
    }

    let mut y = warm_start.map(|v| v.clamp(0.0, 1.0));
    let g0 = problem.gradient(&y);
    let mut working: BTreeSet<Bound> = BTreeSet::new();
    for i in 0..n {
        if y[i] == 0.0 && g0[i] >= 0.0 {
            working.insert(Bound::Lower(i));
        } else if y[i] == 1.0 && g0[i] <= 0.0 {
            working.insert(Bound::Upper(i));
        }
    }

    let cap = 10 * n.max(1);
    for iteration in 1..=cap {
        let fixed: BTreeSet<usize> = working.iter().map(|b| b.index()).collect();
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
        let g = problem.gradient(&y);

        let step = newton_step(problem, &free, &g).ok_or(QpError::NotPositiveDefinite)?;
        let step_norm = step.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));

        if step_norm <= 1e-14 * (1.0 + y.amax()) {
            // Multipliers of the pinned bounds: g_i at the lower bound, -g_i at the upper.
            let release = working
                .iter()
                .map(|&b| {
                    let mu = match b {
                        Bound::Lower(i) => g[i],
                        Bound::Upper(i) => -g[i],
                    };
                    (b, mu)
                })
                .filter(|&(_, mu)| mu < -tolerance)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match release {
                Some((bound, _)) => {
                    working.remove(&bound);
                }
                None => return Ok(finish(problem, y, working, iteration)),
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (slot, &i) in free.iter().enumerate() {
            let s = step[slot];
            let limit = if s < 0.0 {
                Some((-y[i] / s, Bound::Lower(i)))
            } else if s > 0.0 {
                Some(((1.0 - y[i]) / s, Bound::Upper(i)))
            } else {
                None
            };
            if let Some((t, bound)) = limit {
                if t < alpha {
                    alpha = t.max(0.0);
                    blocking = Some(bound);
                }
            }
        }
        for (slot, &i) in free.iter().enumerate() {
            y[i] += alpha * step[slot];
        }
        if let Some(bound) = blocking {
            y[bound.index()] = match bound {
                Bound::Lower(_) => 0.0,
                Bound::Upper(_) => 1.0,
            };
            working.insert(bound);
        }
    }
    Err(QpError::MaxIterations(cap))
}

/// Solve `P_FF s = -g_F` on the free coordinates.
fn newton_step(problem: &QpProblem, free: &[usize], g: &Vector) -> Option<Vector> {
    if free.is_empty() {
        return Some(Vector::zeros(0));
    }
    let m = free.len();
    let pff = Matrix::from_fn(m, m, |a, b| problem.p[(free[a], free[b])]);
    let rhs = Vector::from_fn(m, |a, _| -g[free[a]]);
    Cholesky::new(pff).map(|c| c.solve(&rhs))
}

fn finish(
    problem: &QpProblem,
    mut y: Vector,
    active_set: BTreeSet<Bound>,
    iterations: usize,
) -> QpSolution {
    y.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let kkt = kkt_residual(problem, &y);
    let objective = problem.objective(&y);
    QpSolution {
        y_star: OpennessVector::new(y).expect("clamped into the box"),
        objective,
        kkt_residual: kkt,
        active_set,
        iterations,
    }
}
