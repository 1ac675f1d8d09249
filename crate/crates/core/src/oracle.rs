//! Brute-force grid verifiers for the follower QP and the leader DP.
//!
//! Both oracles enumerate a rectangular grid and keep the best point, with
//! ties broken by the lexicographically smallest grid index. The objectives
//! they search are convex quadratics, so along the last grid axis the best
//! grid point is always one of the neighbors of the continuous line
//! minimizer; that axis is scanned by evaluating just those neighbors, which
//! returns exactly the same grid point as a full scan.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::SystemMatrices;
use crate::follower_qp::{solve_box_qp, Coupling, QpProblem, DEFAULT_QP_TOLERANCE};
use crate::leader_dp::{backward_recursion, closed_loop_cost, CrossRecursion, LeaderWeights};
use crate::linalg::{max_eigenvalue, Matrix, Vector};
use crate::parallel::{map_indexed, map_slice, Execution};

/// Cap on enumerated grid points (all axes except the line-scanned last one).
pub const MAX_GRID_POINTS: f64 = 1e8;
pub const MAX_QP_DIM: usize = 4;
pub const MAX_DP_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("grid would enumerate {0:.3e} points")]
    GridTooLarge(f64),
    #[error("oracle limited to {max} dimensions, got {got}")]
    TooManyDimensions { got: usize, max: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("solver failed on an oracle instance: {0}")]
    Solver(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: f64,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: f64) -> Result<Self, OracleError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(OracleError::InvalidGrid(
                "lower and upper must be nonempty and equally long".into(),
            ));
        }
        if !(resolution > 0.0) {
            return Err(OracleError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(u >= l)) {
            return Err(OracleError::InvalidGrid("upper must dominate lower".into()));
        }
        let grid = Self {
            lower,
            upper,
            resolution,
        };
        let enumerated = grid.enumerated_points();
        if enumerated > MAX_GRID_POINTS {
            return Err(OracleError::GridTooLarge(enumerated));
        }
        Ok(grid)
    }

    /// The unit box `[0, 1]^dim`.
    pub fn unit_box(dim: usize, resolution: f64) -> Result<Self, OracleError> {
        Self::new(vec![0.0; dim], vec![1.0; dim], resolution)
    }

    /// Symmetric cube `[-radius, radius]^dim`.
    pub fn cube(dim: usize, radius: f64, resolution: f64) -> Result<Self, OracleError> {
        Self::new(vec![-radius; dim], vec![radius; dim], resolution)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        ((self.upper[axis] - self.lower[axis]) / self.resolution + 1e-9).floor() as usize + 1
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        (self.lower[axis] + index as f64 * self.resolution).min(self.upper[axis])
    }

    fn enumerated_points(&self) -> f64 {
        (0..self.dim() - 1)
            .map(|a| self.axis_len(a) as f64)
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub point: Vector,
    pub value: f64,
    /// Multi-index of the point on the grid.
    pub index: Vec<usize>,
}

/// Best grid point of `f`, which must be a convex quadratic along the last axis.
pub fn grid_minimize<F>(grid: &GridSpec, exec: Execution, f: F) -> GridMinimum
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let dim = grid.dim();
    let lens: Vec<usize> = (0..dim).map(|a| grid.axis_len(a)).collect();
    let last = dim - 1;

    // Each task owns one slice of the first axis (or the single line in 1-D).
    let first_len = if dim == 1 { 1 } else { lens[0] };
    let partial = map_indexed(exec, first_len, |first| {
        let mut index = vec![0usize; dim];
        if dim > 1 {
            index[0] = first;
        }
        let mut point: Vec<f64> = (0..dim).map(|a| grid.coordinate(a, index[a])).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        loop {
            let (j, value) = line_minimum(grid, &lens, &mut point, &f);
            index[last] = j;
            point[last] = grid.coordinate(last, j);
            let better = match &best {
                None => true,
                Some((bv, bi)) => value < *bv || (value == *bv && index < *bi),
            };
            if better {
                best = Some((value, index.clone()));
            }
            // advance axes 1..last as an odometer
            let mut axis = last;
            loop {
                if axis <= 1 {
                    return best.expect("at least one line");
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < lens[axis] {
                    point[axis] = grid.coordinate(axis, index[axis]);
                    break;
                }
                index[axis] = 0;
                point[axis] = grid.coordinate(axis, 0);
            }
        }
    });

    let (value, index) = partial
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .expect("nonempty grid");
    let point = Vector::from_fn(dim, |a, _| grid.coordinate(a, index[a]));
    GridMinimum {
        point,
        value,
        index,
    }
}

/// Best index on the last axis with all other coordinates fixed in `point`.
fn line_minimum<F>(grid: &GridSpec, lens: &[usize], point: &mut [f64], f: &F) -> (usize, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let last = point.len() - 1;
    let m = lens[last];
    let mut eval = |j: usize| {
        point[last] = grid.coordinate(last, j);
        f(point)
    };
    let candidates: Vec<usize> = if m <= 6 {
        (0..m).collect()
    } else {
        // Fit the quadratic in the index through widely spaced nodes so that
        // rounding cannot swamp the curvature on fine grids.
        let (mid, end) = (m / 2, m - 1);
        let (c0, c1, c2) = (eval(0), eval(mid), eval(end));
        let left = (c1 - c0) / mid as f64;
        let right = (c2 - c1) / (end - mid) as f64;
        let curvature = (right - left) / end as f64;
        let slope = left - curvature * mid as f64;
        if curvature > 0.0 {
            let centre = (-slope / (2.0 * curvature)).clamp(0.0, end as f64);
            let lo = (centre.floor() as usize).saturating_sub(2);
            let hi = (centre.ceil() as usize + 2).min(end);
            (lo..=hi).chain([0, end]).collect()
        } else {
            vec![0, end]
        }
    };
    let mut best = (usize::MAX, f64::INFINITY);
    for j in candidates {
        let value = eval(j);
        if value < best.1 || (value == best.1 && j < best.0) {
            best = (j, value);
        }
    }
    best
}

/// Exhaustive search of the follower objective over the grid intersected
/// with `[0, 1]^N_R`.
pub fn qp_grid_oracle(
    problem: &QpProblem,
    grid: &GridSpec,
    exec: Execution,
) -> Result<GridMinimum, OracleError> {
    let n = problem.dim();
    if n > MAX_QP_DIM {
        return Err(OracleError::TooManyDimensions {
            got: n,
            max: MAX_QP_DIM,
        });
    }
    if grid.dim() != n {
        return Err(OracleError::InvalidGrid(format!(
            "grid has {} axes for a {n}-dimensional QP",
            grid.dim()
        )));
    }
    let lower: Vec<f64> = grid.lower.iter().map(|l| l.max(0.0)).collect();
    let upper: Vec<f64> = grid.upper.iter().map(|u| u.min(1.0)).collect();
    let clipped = GridSpec::new(lower, upper, grid.resolution)?;
    let p = &problem.p;
    let f = &problem.f;
    Ok(grid_minimize(&clipped, exec, |y| {
        let mut total = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += p[(i, j)] * y[j];
            }
            total += 0.5 * y[i] * row + f[i] * y[i];
        }
        total
    }))
}

/// `½ L res²` with `L` the largest eigenvalue of `P`.
pub fn qp_grid_gap_bound(problem: &QpProblem, resolution: f64) -> f64 {
    0.5 * max_eigenvalue(&problem.p) * resolution * resolution
}

/// Open-loop leader cost of a flattened control sequence `[u(k); ...; u(n-1)]`.
pub fn open_loop_cost(
    mats: &SystemMatrices,
    weights: &LeaderWeights,
    x: &Vector,
    k: usize,
    n: usize,
    sequence: &[f64],
) -> f64 {
    OpenLoopModel::new(mats, weights, x, k, n).cost(sequence)
}

/// Row-major copy of one leader problem for fast repeated rollouts.
struct OpenLoopModel {
    nr: usize,
    ns: usize,
    steps: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
    terminal: Vec<f64>,
    x: Vec<f64>,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn half_form(m: &[f64], z: &[f64]) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[i * n + j] * z[j];
        }
        total += z[i] * row;
    }
    0.5 * total
}

impl OpenLoopModel {
    fn new(mats: &SystemMatrices, weights: &LeaderWeights, x: &Vector, k: usize, n: usize) -> Self {
        Self {
            nr: mats.a.nrows(),
            ns: mats.b.ncols(),
            steps: n - k,
            a: row_major(&mats.a),
            b: row_major(&mats.b),
            d: mats.d.as_slice().to_vec(),
            q: row_major(&weights.q),
            r: row_major(&weights.r),
            terminal: row_major(&weights.terminal_block()),
            x: x.as_slice().to_vec(),
        }
    }

    fn cost(&self, sequence: &[f64]) -> f64 {
        let (nr, ns) = (self.nr, self.ns);
        let mut state = self.x.clone();
        let mut next = vec![0.0; nr];
        let mut total = 0.0;
        for step in 0..self.steps {
            let u = &sequence[step * ns..(step + 1) * ns];
            total += half_form(&self.q, &state) + half_form(&self.r, u);
            for (i, slot) in next.iter_mut().enumerate() {
                let a_row = &self.a[i * nr..(i + 1) * nr];
                let b_row = &self.b[i * ns..(i + 1) * ns];
                *slot = self.d[i]
                    + a_row.iter().zip(&state).map(|(a, x)| a * x).sum::<f64>()
                    + b_row.iter().zip(u).map(|(b, v)| b * v).sum::<f64>();
            }
            std::mem::swap(&mut state, &mut next);
        }
        state.extend_from_slice(&self.d);
        total + half_form(&self.terminal, &state)
    }
}

/// Exhaustive search over open-loop control sequences.
pub fn dp_grid_oracle(
    mats: &SystemMatrices,
    weights: &LeaderWeights,
    x: &Vector,
    k: usize,
    n: usize,
    grid: &GridSpec,
    exec: Execution,
) -> Result<GridMinimum, OracleError> {
    let dim = mats.b.ncols() * n.saturating_sub(k);
    if dim == 0 || dim > MAX_DP_DIM {
        return Err(OracleError::TooManyDimensions {
            got: dim,
            max: MAX_DP_DIM,
        });
    }
    if grid.dim() != dim {
        return Err(OracleError::InvalidGrid(format!(
            "grid has {} axes for {dim} control coordinates",
            grid.dim()
        )));
    }
    let model = OpenLoopModel::new(mats, weights, x, k, n);
    Ok(grid_minimize(grid, exec, |seq| model.cost(seq)))
}

/// Hessian of the open-loop cost in the control sequence, from second
/// differences with unit steps (exact for a quadratic up to rounding).
pub fn open_loop_hessian(
    mats: &SystemMatrices,
    weights: &LeaderWeights,
    x: &Vector,
    k: usize,
    n: usize,
) -> Matrix {
    let dim = mats.b.ncols() * (n - k);
    let model = OpenLoopModel::new(mats, weights, x, k, n);
    let cost = |s: &[f64]| model.cost(s);
    let zero = vec![0.0; dim];
    let c0 = cost(&zero);
    let unit = |i: usize, j: usize| {
        let mut s = zero.clone();
        s[i] += 1.0;
        s[j] += 1.0;
        s
    };
    let single: Vec<f64> = (0..dim)
        .map(|i| {
            let mut s = zero.clone();
            s[i] = 1.0;
            cost(&s)
        })
        .collect();
    let mut h = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            h[(i, j)] = if i == j {
                let mut minus = zero.clone();
                minus[i] = -1.0;
                single[i] + cost(&minus) - 2.0 * c0
            } else {
                cost(&unit(i, j)) - single[i] - single[j] + c0
            };
        }
    }
    h
}

/// `½ L dim (res / 2)²`: worst objective loss from rounding an interior
/// minimizer to its nearest grid point.
pub fn dp_grid_gap_bound(hessian: &Matrix, resolution: f64) -> f64 {
    let half = 0.5 * resolution;
    0.5 * max_eigenvalue(hessian) * hessian.nrows() as f64 * half * half
}

/// One small leader problem for the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DpInstance {
    pub mats: SystemMatrices,
    pub weights: LeaderWeights,
    pub x: Vector,
    pub k: usize,
    pub n: usize,
    pub grid: GridSpec,
}

/// Unconstrained minimizer of the open-loop cost, from exact differences of
/// the quadratic. Only used to size oracle grids so they contain the optimum.
pub fn open_loop_minimizer(
    mats: &SystemMatrices,
    weights: &LeaderWeights,
    x: &Vector,
    k: usize,
    n: usize,
) -> Option<Vector> {
    let dim = mats.b.ncols() * (n - k);
    let model = OpenLoopModel::new(mats, weights, x, k, n);
    let gradient = Vector::from_fn(dim, |i, _| {
        let mut plus = vec![0.0; dim];
        let mut minus = vec![0.0; dim];
        plus[i] = 1.0;
        minus[i] = -1.0;
        0.5 * (model.cost(&plus) - model.cost(&minus))
    });
    let hessian = open_loop_hessian(mats, weights, x, k, n);
    Some(-hessian.cholesky()?.solve(&gradient))
}

/// Random instance with `N_R = nr`, `N_S = ns` and horizon `n - k = horizon`.
///
/// The grid is a cube around the origin wide enough to contain the open-loop
/// optimum with some margin, with about `budget` enumerated points.
pub fn random_dp_instance<R: Rng>(
    rng: &mut R,
    nr: usize,
    ns: usize,
    horizon: usize,
    budget: f64,
) -> DpInstance {
    let mut uniform = |rows: usize, cols: usize, scale: f64| {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
    };
    let a = uniform(nr, nr, 0.6);
    let b = uniform(nr, ns, 0.8);
    let d = uniform(nr, 1, 0.4).column(0).into_owned();
    let mq = uniform(nr, nr, 1.0);
    let mr = uniform(ns, ns, 0.5);
    let x = uniform(nr, 1, 1.0).column(0).into_owned();
    let mut weights = LeaderWeights::new(
        mq.transpose() * &mq * 0.5,
        mr.transpose() * &mr + Matrix::identity(ns, ns) * 0.5,
    );
    let mt = uniform(2 * nr, 2 * nr, 0.5);
    let terminal = mt.transpose() * &mt;
    weights.s11_terminal = terminal.view((0, 0), (nr, nr)).into_owned();
    weights.s12_terminal = terminal.view((0, nr), (nr, nr)).into_owned();
    weights.s22_terminal = terminal.view((nr, nr), (nr, nr)).into_owned();
    let mats = SystemMatrices { a, b, d };

    let dim = ns * horizon;
    let reach = open_loop_minimizer(&mats, &weights, &x, 0, horizon).map_or(1.0, |u| u.amax());
    let radius = 1.25 * reach + 0.25;
    let per_axis = if dim <= 1 {
        2001.0
    } else {
        budget.powf(1.0 / (dim - 1) as f64).floor().max(2.0)
    };
    let resolution = 2.0 * radius / (per_axis - 1.0);
    let grid = GridSpec::cube(dim, radius, resolution).expect("budget keeps the grid in range");
    DpInstance {
        mats,
        weights,
        x,
        k: 0,
        n: horizon,
        grid,
    }
}

/// Instance `i` of a campaign: sizes cycle through `N_R ∈ {1,2,3}`,
/// `N_S ∈ {1,2}` and horizons `1..=3`.
pub fn campaign_dp_instance<R: Rng>(rng: &mut R, i: usize, budget: f64) -> DpInstance {
    random_dp_instance(rng, 1 + i % 3, 1 + (i / 3) % 2, 1 + (i / 6) % 3, budget)
}

/// Random follower QP of dimension `dim`. `kind` 0 and 1 build the plant
/// with identity and all-ones coupling; anything else is a dense SPD matrix.
pub fn random_qp_instance<R: Rng>(rng: &mut R, dim: usize, kind: usize) -> QpProblem {
    let epsilon = rng.random_range(0.05..1.0);
    let h = Vector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
    let x0 = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    match kind {
        0 => QpProblem::from_plant(&h, &x0, epsilon, Coupling::Identity)
            .expect("epsilon is positive"),
        1 => {
            QpProblem::from_plant(&h, &x0, epsilon, Coupling::AllOnes).expect("epsilon is positive")
        }
        _ => {
            let m = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            QpProblem {
                p: m.transpose() * &m + Matrix::identity(dim, dim) * epsilon,
                f: h,
                epsilon,
            }
        }
    }
}

/// Solver against oracle on one QP.
#[derive(Debug, Clone, PartialEq)]
pub struct QpCheck {
    pub dim: usize,
    pub solver_objective: f64,
    pub oracle_objective: f64,
    pub gap_bound: f64,
    pub kkt_residual: f64,
}

impl QpCheck {
    /// Oracle objective minus solver objective; never below zero for a true minimizer.
    pub fn gap(&self) -> f64 {
        self.oracle_objective - self.solver_objective
    }
}

/// `count` random QPs with `N_R` cycling through 1, 2, 3, each solved and
/// searched on a grid of the given resolution.
pub fn qp_campaign(
    seed: u64,
    count: usize,
    resolution: f64,
    exec: Execution,
) -> Result<Vec<QpCheck>, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<QpProblem> = (0..count)
        .map(|i| random_qp_instance(&mut rng, 1 + i % 3, (i / 3) % 3))
        .collect();
    map_slice(exec, &problems, |problem| {
        let solution = solve_box_qp(problem, DEFAULT_QP_TOLERANCE)
            .map_err(|e| OracleError::Solver(e.to_string()))?;
        let grid = GridSpec::unit_box(problem.dim(), resolution)?;
        let best = qp_grid_oracle(problem, &grid, Execution::Sequential)?;
        Ok(QpCheck {
            dim: problem.dim(),
            solver_objective: solution.objective,
            oracle_objective: best.value,
            gap_bound: qp_grid_gap_bound(problem, resolution),
            kkt_residual: solution.kkt_residual,
        })
    })
    .into_iter()
    .collect()
}

/// Recursion gains against the open-loop oracle on one leader problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DpCheck {
    pub n_regular: usize,
    pub n_stubborn: usize,
    pub horizon: usize,
    pub closed_loop_cost: f64,
    pub oracle_cost: f64,
    pub gap_bound: f64,
    pub max_cross_asymmetry: f64,
    pub min_s11_eigenvalue: f64,
}

impl DpCheck {
    pub fn gap(&self) -> f64 {
        self.oracle_cost - self.closed_loop_cost
    }
}

pub fn dp_check(inst: &DpInstance, variant: CrossRecursion) -> Result<DpCheck, OracleError> {
    let solver = |e: crate::leader_dp::DpError| OracleError::Solver(e.to_string());
    let (vf, policy) =
        backward_recursion(&inst.mats, &inst.weights, inst.k, inst.n, variant).map_err(solver)?;
    let closed = closed_loop_cost(&policy, &inst.weights, &inst.x).map_err(solver)?;
    let best = dp_grid_oracle(
        &inst.mats,
        &inst.weights,
        &inst.x,
        inst.k,
        inst.n,
        &inst.grid,
        Execution::Sequential,
    )?;
    let hessian = open_loop_hessian(&inst.mats, &inst.weights, &inst.x, inst.k, inst.n);
    Ok(DpCheck {
        n_regular: inst.mats.a.nrows(),
        n_stubborn: inst.mats.b.ncols(),
        horizon: inst.n - inst.k,
        closed_loop_cost: closed,
        oracle_cost: best.value,
        gap_bound: dp_grid_gap_bound(&hessian, inst.grid.resolution),
        max_cross_asymmetry: vf.max_cross_asymmetry,
        min_s11_eigenvalue: vf.min_s11_eigenvalue(),
    })
}

pub fn dp_campaign_instances(seed: u64, count: usize, budget: f64) -> Vec<DpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| campaign_dp_instance(&mut rng, i, budget))
        .collect()
}

/// `count` leader problems checked with the default recursion.
pub fn dp_campaign(
    seed: u64,
    count: usize,
    budget: f64,
    exec: Execution,
) -> Result<Vec<DpCheck>, OracleError> {
    let instances = dp_campaign_instances(seed, count, budget);
    map_slice(exec, &instances, |inst| {
        dp_check(inst, CrossRecursion::default())
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjudicationRecord {
    pub instance: usize,
    pub variant: CrossRecursion,
    pub cost: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjudicationReport {
    pub records: Vec<AdjudicationRecord>,
    pub mean_excess: Vec<(CrossRecursion, f64)>,
    pub winner: CrossRecursion,
}

impl AdjudicationReport {
    /// One `key=value` record per line, then per-variant summaries and the winner.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "instance={} variant={} cost={:.16e} excess={:.16e}",
                r.instance, r.variant, r.cost, r.excess
            );
        }
        for (variant, mean) in &self.mean_excess {
            let _ = writeln!(out, "summary variant={variant} mean_excess={mean:.16e}");
        }
        let _ = writeln!(out, "winner={}", self.winner);
        out
    }

    /// Read the winning variant back from [`AdjudicationReport::to_text`] output.
    pub fn parse_winner(text: &str) -> Option<CrossRecursion> {
        text.lines()
            .find_map(|l| l.strip_prefix("winner="))
            .and_then(|w| w.trim().parse().ok())
    }
}

/// Rank the cross-block recursions by closed-loop cost in excess of the grid optimum.
pub fn variant_adjudicator(
    instances: &[DpInstance],
    exec: Execution,
) -> Result<AdjudicationReport, OracleError> {
    let optima = map_slice(exec, instances, |inst| {
        dp_grid_oracle(
            &inst.mats,
            &inst.weights,
            &inst.x,
            inst.k,
            inst.n,
            &inst.grid,
            Execution::Sequential,
        )
    });
    let mut records = Vec::new();
    for (i, (inst, optimum)) in instances.iter().zip(optima).enumerate() {
        let optimum = optimum?;
        for variant in CrossRecursion::ALL {
            let (_, policy) =
                backward_recursion(&inst.mats, &inst.weights, inst.k, inst.n, variant)
                    .map_err(|e| OracleError::Solver(format!("instance {i}: {e}")))?;
            let cost = closed_loop_cost(&policy, &inst.weights, &inst.x)
                .map_err(|e| OracleError::Solver(format!("instance {i}: {e}")))?;
            records.push(AdjudicationRecord {
                instance: i,
                variant,
                cost,
                excess: cost - optimum.value,
            });
        }
    }
    let mean_excess: Vec<(CrossRecursion, f64)> = CrossRecursion::ALL
        .iter()
        .map(|&v| {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.variant == v)
                .map(|r| r.excess)
                .collect();
            (v, xs.iter().sum::<f64>() / xs.len().max(1) as f64)
        })
        .collect();
    let winner = mean_excess
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|&(v, _)| v)
        .unwrap_or_default();
    Ok(AdjudicationReport {
        records,
        mean_excess,
        winner,
    })
}
