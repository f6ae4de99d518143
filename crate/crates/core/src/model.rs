//! Domain types shared by the solver, the mechanisms and the experiment
//! runner: parameter grids, observation spaces, neighbor relations, model
//! matrices and estimator kernels.
//!
//! Matrix orientation: the likelihood `Q` is `|Y| x |Θ|` (row = observation,
//! column = parameter) and an estimator kernel `P` is `|Θ| x |Y|`
//! (row = estimate, column = observation).

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tolerances::Tolerances;

/// Finite, strictly increasing set of parameter values inside `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDocument", into = "GridDocument")]
pub struct ParameterGrid {
    points: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl ParameterGrid {
    pub fn new(points: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a parameter grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidArgument(format!("invalid grid range [{lower}, {upper}]")));
        }
        if let Some(w) = points.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(format!(
                "grid points must be strictly increasing (at index {})",
                w + 1
            )));
        }
        if points.iter().any(|&p| p < lower || p > upper) {
            return Err(Error::InvalidArgument(format!(
                "grid points must lie in [{lower}, {upper}]"
            )));
        }
        Ok(ParameterGrid { points, lower, upper })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a grid has at least two points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.points[k]
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Largest gap between consecutive points.
    pub fn max_spacing(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the grid point nearest to `value`, ties to the lower index.
    pub fn nearest_index(&self, value: f64) -> usize {
        let mut best = 0;
        for (k, &p) in self.points.iter().enumerate() {
            if (p - value).abs() < (self.points[best] - value).abs() {
                best = k;
            }
        }
        best
    }
}

#[derive(Serialize, Deserialize)]
struct GridDocument {
    points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
}

impl TryFrom<GridDocument> for ParameterGrid {
    type Error = Error;

    fn try_from(doc: GridDocument) -> Result<Self> {
        let lower = doc.lower.or_else(|| doc.points.first().copied()).unwrap_or(0.0);
        let upper = doc.upper.or_else(|| doc.points.last().copied()).unwrap_or(0.0);
        ParameterGrid::new(doc.points, lower, upper)
    }
}

impl From<ParameterGrid> for GridDocument {
    fn from(grid: ParameterGrid) -> Self {
        GridDocument {
            points: grid.points,
            lower: Some(grid.lower),
            upper: Some(grid.upper),
        }
    }
}

/// `m` equally spaced points on `[lower, upper]`, both endpoints included.
pub fn make_uniform_grid(lower: f64, upper: f64, m: usize) -> Result<ParameterGrid> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("grid size must be at least 2, got {m}")));
    }
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!(
            "grid bounds must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    let span = upper - lower;
    let last = (m - 1) as f64;
    let mut points: Vec<f64> = (0..m).map(|j| lower + span * (j as f64 / last)).collect();
    points[m - 1] = upper;
    ParameterGrid::new(points, lower, upper)
}

/// Ordered, labelled finite observation space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ObservationSpace {
    labels: Vec<String>,
}

impl ObservationSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("observation space must not be empty".into()));
        }
        let distinct: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
        if distinct.len() != labels.len() {
            return Err(Error::InvalidArgument("observation labels must be distinct".into()));
        }
        Ok(ObservationSpace { labels })
    }

    /// Observations labelled `0, 1, …, n-1`.
    pub fn indexed(n: usize) -> Result<Self> {
        ObservationSpace::new((0..n).map(|i| i.to_string()).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

impl TryFrom<Vec<String>> for ObservationSpace {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        ObservationSpace::new(labels)
    }
}

impl From<ObservationSpace> for Vec<String> {
    fn from(obs: ObservationSpace) -> Self {
        obs.labels
    }
}

/// Symmetric neighbor relation over observation indices.
///
/// Inserting `(i, j)` also inserts `(j, i)`, so every DP constraint is
/// imposed in both directions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, usize)>", into = "Vec<(usize, usize)>")]
pub struct NeighborGraph {
    pairs: BTreeSet<(usize, usize)>,
}

impl NeighborGraph {
    pub fn new() -> Self {
        NeighborGraph::default()
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "self-pair ({i}, {i}) is not a neighbor relation"
            )));
        }
        self.pairs.insert((i, j));
        self.pairs.insert((j, i));
        Ok(())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut graph = NeighborGraph::new();
        for (i, j) in pairs {
            graph.insert(i, j)?;
        }
        Ok(graph)
    }

    /// Path graph `0 - 1 - … - (n-1)`.
    pub fn path(n: usize) -> Self {
        let mut graph = NeighborGraph::new();
        for i in 1..n {
            graph.pairs.insert((i - 1, i));
            graph.pairs.insert((i, i - 1));
        }
        graph
    }

    /// Ordered pairs in lexicographic order; each undirected edge appears twice.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn num_ordered_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.pairs.iter().map(|&(i, j)| i.max(j)).max()
    }

    pub fn adjacency(&self, n: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &self.pairs {
            if i < n && j < n {
                adj[i].push(j);
            }
        }
        adj
    }
}

impl TryFrom<Vec<(usize, usize)>> for NeighborGraph {
    type Error = Error;

    fn try_from(pairs: Vec<(usize, usize)>) -> Result<Self> {
        NeighborGraph::from_pairs(pairs)
    }
}

impl From<NeighborGraph> for Vec<(usize, usize)> {
    fn from(graph: NeighborGraph) -> Self {
        graph.pairs.into_iter().collect()
    }
}

/// `L[j][k] = (θ_j - θ_k)²`.
pub fn square_loss_matrix(grid: &ParameterGrid) -> Matrix {
    let n = grid.len();
    Matrix::from_fn(n, n, |j, k| {
        let d = grid.point(j) - grid.point(k);
        d * d
    })
}

/// Everything the DP estimation program needs: likelihood, loss, prior and
/// the neighbor relation lifted to observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModel {
    grid: ParameterGrid,
    #[serde(rename = "observations")]
    obs: ObservationSpace,
    neighbors: NeighborGraph,
    #[serde(rename = "Q")]
    likelihood: Matrix,
    #[serde(rename = "L")]
    loss: Matrix,
    prior: Vec<f64>,
}

impl FiniteModel {
    /// Builds a model and rejects it if any invariant fails.
    pub fn new(
        grid: ParameterGrid,
        obs: ObservationSpace,
        neighbors: NeighborGraph,
        likelihood: Matrix,
        loss: Matrix,
        prior: Vec<f64>,
    ) -> Result<Self> {
        let model = FiniteModel::from_parts(grid, obs, neighbors, likelihood, loss, prior)?;
        model.ensure_valid()?;
        Ok(model)
    }

    /// Builds a model checking shapes only. Use [`validate_model`] to list
    /// the remaining invariant violations.
    pub fn from_parts(
        grid: ParameterGrid,
        obs: ObservationSpace,
        neighbors: NeighborGraph,
        likelihood: Matrix,
        loss: Matrix,
        prior: Vec<f64>,
    ) -> Result<Self> {
        let (n_theta, n_obs) = (grid.len(), obs.len());
        if likelihood.rows() != n_obs || likelihood.cols() != n_theta {
            return Err(Error::DimensionMismatch(format!(
                "Q is {}x{}, expected {n_obs}x{n_theta}",
                likelihood.rows(),
                likelihood.cols()
            )));
        }
        if loss.rows() != n_theta || loss.cols() != n_theta {
            return Err(Error::DimensionMismatch(format!(
                "L is {}x{}, expected {n_theta}x{n_theta}",
                loss.rows(),
                loss.cols()
            )));
        }
        if prior.len() != n_theta {
            return Err(Error::DimensionMismatch(format!(
                "prior has {} entries, expected {n_theta}",
                prior.len()
            )));
        }
        Ok(FiniteModel {
            grid,
            obs,
            neighbors,
            likelihood,
            loss,
            prior,
        })
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_model(self);
        if violations.is_empty() {
            return Ok(());
        }
        let listed: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        Err(Error::InvalidModel(format!(
            "{} violation(s): {}",
            violations.len(),
            listed.join("; ")
        )))
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn observations(&self) -> &ObservationSpace {
        &self.obs
    }

    pub fn neighbors(&self) -> &NeighborGraph {
        &self.neighbors
    }

    /// `Q`, shape `|Y| x |Θ|`.
    pub fn likelihood(&self) -> &Matrix {
        &self.likelihood
    }

    /// `L`, shape `|Θ| x |Θ|`.
    pub fn loss(&self) -> &Matrix {
        &self.loss
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn num_params(&self) -> usize {
        self.grid.len()
    }

    pub fn num_obs(&self) -> usize {
        self.obs.len()
    }

    /// `Σ_j Q[i][j] π_j`, the prior predictive probability of observation `i`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.likelihood.row(i).iter().zip(&self.prior).map(|(q, p)| q * p).sum()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: FiniteModel = serde_json::from_str(s)?;
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FiniteModel::from_json_str(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelPart {
    Likelihood,
    Loss,
    Prior,
    Neighbors,
}

impl fmt::Display for ModelPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelPart::Likelihood => "Q",
            ModelPart::Loss => "L",
            ModelPart::Prior => "prior",
            ModelPart::Neighbors => "neighbors",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonFinite,
    Negative,
    AboveOne,
    /// A `Q` column (pmf over observations) does not sum to 1.
    ColumnSum,
    /// The prior does not sum to 1.
    Sum,
    IndexOutOfRange,
    Asymmetric,
    SelfPair,
}

/// One failed model invariant. `row`/`col` locate the entry (for the prior
/// and for column sums only one of them is set); `magnitude` is the size of
/// the offending value or deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub part: ModelPart,
    pub kind: ViolationKind,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.part, self.kind)?;
        match (self.row, self.col) {
            (Some(r), Some(c)) => write!(f, " at ({r}, {c})")?,
            (Some(r), None) => write!(f, " at row {r}")?,
            (None, Some(c)) => write!(f, " at column {c}")?,
            (None, None) => {}
        }
        write!(f, " (magnitude {:e})", self.magnitude)
    }
}

/// Lists every broken [`FiniteModel`] invariant. Empty means valid.
pub fn validate_model(model: &FiniteModel) -> Vec<Violation> {
    let tol = Tolerances::DEFAULT;
    let mut out = Vec::new();
    let at = |part, kind, row, col, magnitude| Violation {
        part,
        kind,
        row,
        col,
        magnitude,
    };

    let q = model.likelihood();
    for r in 0..q.rows() {
        for c in 0..q.cols() {
            let v = q.get(r, c);
            if !v.is_finite() {
                out.push(at(ModelPart::Likelihood, ViolationKind::NonFinite, Some(r), Some(c), v));
            } else if v < 0.0 {
                out.push(at(ModelPart::Likelihood, ViolationKind::Negative, Some(r), Some(c), -v));
            } else if v > 1.0 {
                out.push(at(
                    ModelPart::Likelihood,
                    ViolationKind::AboveOne,
                    Some(r),
                    Some(c),
                    v - 1.0,
                ));
            }
        }
    }
    for c in 0..q.cols() {
        let dev = q.column_sum(c) - 1.0;
        if !(dev.abs() <= tol.stochasticity) {
            out.push(at(
                ModelPart::Likelihood,
                ViolationKind::ColumnSum,
                None,
                Some(c),
                dev.abs(),
            ));
        }
    }

    let l = model.loss();
    for r in 0..l.rows() {
        for c in 0..l.cols() {
            let v = l.get(r, c);
            if !v.is_finite() {
                out.push(at(ModelPart::Loss, ViolationKind::NonFinite, Some(r), Some(c), v));
            } else if v < 0.0 {
                out.push(at(ModelPart::Loss, ViolationKind::Negative, Some(r), Some(c), -v));
            }
        }
    }

    for (j, &p) in model.prior().iter().enumerate() {
        if !p.is_finite() {
            out.push(at(ModelPart::Prior, ViolationKind::NonFinite, Some(j), None, p));
        } else if p < 0.0 {
            out.push(at(ModelPart::Prior, ViolationKind::Negative, Some(j), None, -p));
        } else if p > 1.0 {
            out.push(at(ModelPart::Prior, ViolationKind::AboveOne, Some(j), None, p - 1.0));
        }
    }
    let dev = model.prior().iter().sum::<f64>() - 1.0;
    if !(dev.abs() <= tol.prior_sum) {
        out.push(at(ModelPart::Prior, ViolationKind::Sum, None, None, dev.abs()));
    }

    let n_obs = model.num_obs();
    for (i, j) in model.neighbors().pairs() {
        if i >= n_obs || j >= n_obs {
            out.push(at(
                ModelPart::Neighbors,
                ViolationKind::IndexOutOfRange,
                Some(i),
                Some(j),
                i.max(j) as f64,
            ));
        } else if i == j {
            out.push(at(ModelPart::Neighbors, ViolationKind::SelfPair, Some(i), Some(j), 0.0));
        } else if !model.neighbors().contains(j, i) {
            out.push(at(
                ModelPart::Neighbors,
                ViolationKind::Asymmetric,
                Some(i),
                Some(j),
                0.0,
            ));
        }
    }
    out
}

/// A randomized estimator on a finite grid: `P[k][i]` is the probability of
/// reporting `θ_k` after observing `y_i`. Every column is a pmf.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorKernel {
    probs: Matrix,
    epsilon: f64,
}

impl EstimatorKernel {
    /// Entries in `[-1e-10, 0)` are clamped to zero; anything more negative,
    /// or a column not summing to 1 within 1e-8, is rejected.
    pub fn new(mut probs: Matrix, epsilon: f64) -> Result<Self> {
        let tol = Tolerances::DEFAULT;
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        for r in 0..probs.rows() {
            for c in 0..probs.cols() {
                let v = probs.get(r, c);
                if !v.is_finite() || v < -tol.kernel_negative {
                    return Err(Error::KernelExtraction(format!(
                        "entry ({r}, {c}) = {v:e} is not a probability"
                    )));
                }
                if v < 0.0 {
                    probs.set(r, c, 0.0);
                }
            }
        }
        for c in 0..probs.cols() {
            let dev = probs.column_sum(c) - 1.0;
            if dev.abs() > tol.kernel_column_sum {
                return Err(Error::KernelExtraction(format!("column {c} sums to 1{dev:+e}")));
            }
        }
        Ok(EstimatorKernel { probs, epsilon })
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_params(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_obs(&self) -> usize {
        self.probs.cols()
    }

    #[inline]
    pub fn prob(&self, k: usize, i: usize) -> f64 {
        self.probs.get(k, i)
    }

    /// `max P[k][i] - e^ε P[k][i']` over neighbor pairs and rows.
    /// Non-positive when the kernel is exactly ε-DP.
    pub fn dp_residual(&self, neighbors: &NeighborGraph) -> f64 {
        let factor = self.epsilon.exp();
        let mut worst = f64::NEG_INFINITY;
        for (i, j) in neighbors.pairs() {
            for k in 0..self.num_params() {
                worst = worst.max(self.prob(k, i) - factor * self.prob(k, j));
            }
        }
        worst
    }

    /// Largest `|Σ_k P[k][i] - 1|` over columns.
    pub fn column_sum_residual(&self) -> f64 {
        (0..self.num_obs())
            .map(|c| (self.probs.column_sum(c) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-column most likely grid index, ties to the lowest index.
    pub fn argmax_readout(&self) -> Vec<usize> {
        (0..self.num_obs())
            .map(|i| {
                let mut best = 0;
                for k in 1..self.num_params() {
                    if self.prob(k, i) > self.prob(best, i) {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}
