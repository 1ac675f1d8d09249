//! Social graph, regular/stubborn partition and the influence matrix.
//!
//! Agents are identified externally by 1-based [`AgentId`]s. Internally the
//! agents are relabeled so that regular agents occupy rows `0..n_regular`
//! and stubborn agents follow; relative order inside each group is kept, so
//! the i-th regular agent internally is the i-th regular agent by ascending
//! external id.

use std::collections::BTreeSet;
use std::fmt;

use crate::linalg::{Matrix, Vector};
use crate::DimensionMismatch;

/// Row sums of the influence matrix must match 1 within this bound.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("network has no regular agents")]
    EmptyGraph,
    #[error("agent {agent} is out of range 1..={n_agents}")]
    AgentOutOfRange { agent: AgentId, n_agents: usize },
    #[error("agent {0} is only influenced by itself")]
    PartitionError(AgentId),
    #[error("self-loop on agent {0} is not allowed")]
    SelfLoop(AgentId),
    #[error("explicit weight W[{row},{col}] = {value} is outside the in-neighborhood or negative")]
    InvalidWeight { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    n_regular: usize,
    n_stubborn: usize,
    /// In-neighbors of each regular agent, internal indices, ascending.
    in_neighbors: Vec<Vec<usize>>,
    /// `n_regular x n_agents`, internal column order.
    weights: Matrix,
    /// internal index -> external 0-based index.
    to_external: Vec<usize>,
    /// external 0-based index -> internal index.
    to_internal: Vec<usize>,
}

/// Build the network from `(from, to)` influence edges over agents `1..=n_agents`.
///
/// Agents with at least one in-neighbor are regular, the rest stubborn.
/// Weights are uniform over each in-neighborhood. Duplicate edges collapse.
pub fn build_network(
    edges: &[(AgentId, AgentId)],
    n_agents: usize,
) -> Result<SocialNetwork, NetworkError> {
    let mut incoming: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_agents];
    let mut self_loops = BTreeSet::new();
    for &(from, to) in edges {
        for agent in [from, to] {
            if agent.0 == 0 || agent.0 > n_agents {
                return Err(NetworkError::AgentOutOfRange { agent, n_agents });
            }
        }
        if from == to {
            self_loops.insert(from.0 - 1);
        } else {
            incoming[to.0 - 1].insert(from.0 - 1);
        }
    }
    if let Some(&agent) = self_loops.iter().find(|&&a| incoming[a].is_empty()) {
        return Err(NetworkError::PartitionError(AgentId(agent + 1)));
    }
    if let Some(&agent) = self_loops.iter().next() {
        return Err(NetworkError::SelfLoop(AgentId(agent + 1)));
    }

    let (regular, stubborn): (Vec<usize>, Vec<usize>) =
        (0..n_agents).partition(|&a| !incoming[a].is_empty());
    if regular.is_empty() {
        return Err(NetworkError::EmptyGraph);
    }
    let to_external: Vec<usize> = regular.iter().chain(stubborn.iter()).copied().collect();
    let mut to_internal = vec![0; n_agents];
    for (internal, &external) in to_external.iter().enumerate() {
        to_internal[external] = internal;
    }

    let n_regular = regular.len();
    let mut weights = Matrix::zeros(n_regular, n_agents);
    let mut in_neighbors = Vec::with_capacity(n_regular);
    for (row, &external) in regular.iter().enumerate() {
        let mut neighbors: Vec<usize> =
            incoming[external].iter().map(|&j| to_internal[j]).collect();
        neighbors.sort_unstable();
        let w = 1.0 / neighbors.len() as f64;
        for &j in &neighbors {
            weights[(row, j)] = w;
        }
        in_neighbors.push(neighbors);
    }

    Ok(SocialNetwork {
        n_regular,
        n_stubborn: n_agents - n_regular,
        in_neighbors,
        weights,
        to_external,
        to_internal,
    })
}

impl SocialNetwork {
    pub fn n_regular(&self) -> usize {
        self.n_regular
    }

    pub fn n_stubborn(&self) -> usize {
        self.n_stubborn
    }

    pub fn n_agents(&self) -> usize {
        self.n_regular + self.n_stubborn
    }

    /// Influence matrix `W`, `n_regular x n_agents`, internal ordering.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// In-neighbors (internal indices) of regular agent `row`.
    pub fn in_neighbors(&self, row: usize) -> &[usize] {
        &self.in_neighbors[row]
    }

    pub fn is_regular(&self, internal: usize) -> bool {
        internal < self.n_regular
    }

    pub fn external_id(&self, internal: usize) -> AgentId {
        AgentId(self.to_external[internal] + 1)
    }

    pub fn internal_index(&self, agent: AgentId) -> Option<usize> {
        agent
            .0
            .checked_sub(1)
            .and_then(|a| self.to_internal.get(a).copied())
    }

    /// External ids of the regular agents in internal order.
    pub fn regular_ids(&self) -> Vec<AgentId> {
        (0..self.n_regular).map(|i| self.external_id(i)).collect()
    }

    pub fn stubborn_ids(&self) -> Vec<AgentId> {
        (self.n_regular..self.n_agents())
            .map(|i| self.external_id(i))
            .collect()
    }

    /// Replace the uniform weights by an explicit matrix.
    ///
    /// `rows` holds one row per regular agent (ascending external id), with
    /// columns in external agent order. Entries outside an agent's
    /// in-neighborhood must be zero and all entries nonnegative. Row sums are
    /// not enforced here; [`SocialNetwork::stochasticity_violations`] reports them.
    pub fn with_explicit_weights(mut self, rows: &[Vec<f64>]) -> Result<Self, NetworkError> {
        crate::check_len("explicit weight rows", self.n_regular, rows.len())?;
        let n = self.n_agents();
        let mut weights = Matrix::zeros(self.n_regular, n);
        for (row, values) in rows.iter().enumerate() {
            crate::check_len("explicit weight columns", n, values.len())?;
            for (external_col, &value) in values.iter().enumerate() {
                let col = self.to_internal[external_col];
                let allowed = self.in_neighbors[row].binary_search(&col).is_ok();
                if value < 0.0 || (!allowed && value != 0.0) || !value.is_finite() {
                    return Err(NetworkError::InvalidWeight {
                        row: row + 1,
                        col: external_col + 1,
                        value,
                    });
                }
                weights[(row, col)] = value;
            }
        }
        self.weights = weights;
        Ok(self)
    }

    /// Regular rows (internal index, row sum) whose sum differs from 1 by more
    /// than [`ROW_SUM_TOLERANCE`].
    pub fn stochasticity_violations(&self) -> Vec<(usize, f64)> {
        self.weights
            .row_iter()
            .enumerate()
            .filter_map(|(i, row)| {
                let s: f64 = row.iter().sum();
                ((s - 1.0).abs() > ROW_SUM_TOLERANCE).then_some((i, s))
            })
            .collect()
    }

    /// Permute a vector over all agents from external to internal order.
    pub fn to_internal_order(&self, external: &Vector) -> Result<Vector, DimensionMismatch> {
        crate::check_len("agent vector", self.n_agents(), external.len())?;
        Ok(Vector::from_fn(self.n_agents(), |i, _| {
            external[self.to_external[i]]
        }))
    }

    /// Permute a vector over all agents from internal to external order.
    pub fn to_external_order(&self, internal: &Vector) -> Result<Vector, DimensionMismatch> {
        crate::check_len("agent vector", self.n_agents(), internal.len())?;
        Ok(Vector::from_fn(self.n_agents(), |e, _| {
            internal[self.to_internal[e]]
        }))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StubbornHullViolation {
    #[error("need at least two stubborn agents, found {0}")]
    TooFewStubborn(usize),
    #[error("no stubborn opinion is negative")]
    NoNegativeAnchor,
    #[error("no stubborn opinion is positive")]
    NoPositiveAnchor,
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Check that the stubborn opinions straddle the origin.
pub fn validate_stubborn_hull(
    network: &SocialNetwork,
    v0: &Vector,
) -> Result<(), StubbornHullViolation> {
    crate::check_len("stubborn opinions", network.n_stubborn(), v0.len())?;
    if v0.len() < 2 {
        return Err(StubbornHullViolation::TooFewStubborn(v0.len()));
    }
    if !v0.iter().any(|&v| v < 0.0) {
        return Err(StubbornHullViolation::NoNegativeAnchor);
    }
    if !v0.iter().any(|&v| v > 0.0) {
        return Err(StubbornHullViolation::NoPositiveAnchor);
    }
    Ok(())
}
