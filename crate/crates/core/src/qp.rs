//! Block-partitioned quadratic programs `f(x) = 1/2 x^T Q x + r^T x`.
//!
//! Agent indices are zero-based throughout: agent `i` owns the coordinates in
//! [`BlockPartition::range`]`(i)`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};

/// Entrywise relative asymmetry tolerated (and symmetrized away) on input.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Sizes `n_1..n_N` of the agent-owned blocks of the decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required".into()));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("block {pos} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(BlockPartition { sizes, offsets })
    }

    /// Sizes as balanced as possible, the first `n mod agents` blocks one larger.
    pub fn even(n: usize, agents: usize) -> Result<Self> {
        if agents == 0 || agents > n {
            return Err(Error::InvalidPartition(format!("cannot split {n} coordinates among {agents} agents")));
        }
        let base = n / agents;
        let extra = n % agents;
        Self::new((0..agents).map(|i| base + usize::from(i < extra)).collect())
    }

    /// Number of agents `N`.
    pub fn agents(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `n`.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Agent owning coordinate `coord`.
    pub fn owner(&self, coord: usize) -> usize {
        self.offsets.partition_point(|&o| o <= coord) - 1
    }

    pub(crate) fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.agents() {
            return Err(Error::AgentOutOfRange { index: i, agents: self.agents() });
        }
        Ok(())
    }

    /// Expands one value per agent into one value per coordinate.
    pub fn expand(&self, per_agent: &[f64]) -> Result<Vec<f64>> {
        if per_agent.len() != self.agents() {
            return Err(Error::Dimension { what: "per-agent values", expected: self.agents(), found: per_agent.len() });
        }
        Ok(self.sizes.iter().zip(per_agent).flat_map(|(&s, &v)| std::iter::repeat_n(v, s)).collect())
    }
}

impl TryFrom<Vec<usize>> for BlockPartition {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<BlockPartition> for Vec<usize> {
    fn from(p: BlockPartition) -> Self {
        p.sizes
    }
}

/// Rows of `m` owned by agent `i` (the `n_i x n` slice `Q^[i]`).
pub fn block_rows(m: &Matrix, i: usize, partition: &BlockPartition) -> Result<Matrix> {
    partition.check_agent(i)?;
    if m.rows() != partition.dim() {
        return Err(Error::Dimension { what: "matrix rows", expected: partition.dim(), found: m.rows() });
    }
    let r = partition.range(i);
    Ok(m.row_block(r.start, r.end))
}

/// Entries of `v` owned by agent `i`.
pub fn block_entries<'a>(v: &'a [f64], i: usize, partition: &BlockPartition) -> Result<&'a [f64]> {
    partition.check_agent(i)?;
    if v.len() != partition.dim() {
        return Err(Error::Dimension { what: "vector", expected: partition.dim(), found: v.len() });
    }
    Ok(&v[partition.range(i)])
}

/// Per-coordinate hyperrectangle `X = X_1 x ... x X_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = BoxBounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Dimension { what: "box upper bounds", expected: self.lower.len(), found: self.upper.len() });
        }
        for (coord, (&lower, &upper)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                return Err(Error::InvalidBox { coord, lower, upper });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Coordinatewise clamp onto the box.
pub fn project_box(x: &[f64], bounds: &BoxBounds) -> Result<Vec<f64>> {
    if x.len() != bounds.dim() {
        return Err(Error::Dimension { what: "vector", expected: bounds.dim(), found: x.len() });
    }
    Ok(x.iter().zip(bounds.lower.iter().zip(&bounds.upper)).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect())
}

/// A validated quadratic program with symmetric positive definite `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    q: Matrix,
    r: Vec<f64>,
    partition: BlockPartition,
    bounds: Option<BoxBounds>,
}

impl QuadraticProblem {
    /// Validates dimensions, symmetrizes `Q` when its asymmetry is within
    /// [`SYMMETRY_TOL`] and rejects it otherwise, and checks positive
    /// definiteness with a Cholesky factorization.
    pub fn new(q: Matrix, r: Vec<f64>, partition: BlockPartition, bounds: Option<BoxBounds>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::NotSquare { rows: q.rows(), cols: q.cols() });
        }
        let n = partition.dim();
        if q.rows() != n {
            return Err(Error::Dimension { what: "Q", expected: n, found: q.rows() });
        }
        if r.len() != n {
            return Err(Error::Dimension { what: "r", expected: n, found: r.len() });
        }
        if q.as_slice().iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(Error::invalid("Q and r must be finite"));
        }
        let asymmetry = q.relative_asymmetry();
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry, tolerance: SYMMETRY_TOL });
        }
        let q = q.symmetrized();
        Cholesky::new(&q)?;
        if let Some(b) = &bounds {
            b.validate()?;
            if b.dim() != n {
                return Err(Error::Dimension { what: "box bounds", expected: n, found: b.dim() });
            }
        }
        Ok(QuadraticProblem { q, r, partition, bounds })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn bounds(&self) -> Option<&BoxBounds> {
        self.bounds.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn agents(&self) -> usize {
        self.partition.agents()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { what: "x", expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let qx = self.q.matvec(x);
        Ok(0.5 * linalg::dot(x, &qx) + linalg::dot(&self.r, x))
    }

    /// `Q^[i] x + r^[i]`.
    pub fn gradient_block(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.partition.check_agent(i)?;
        Ok(self
            .partition
            .range(i)
            .map(|row| linalg::dot(self.q.row(row), x) + self.r[row])
            .collect())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.q.matvec(x).iter().zip(&self.r).map(|(a, b)| a + b).collect())
    }

    /// Unconstrained minimizer `-Q^{-1} r`, ignoring any box.
    pub fn exact_minimizer(&self) -> Result<Vec<f64>> {
        let chol = Cholesky::new(&self.q)?;
        let neg_r: Vec<f64> = self.r.iter().map(|v| -v).collect();
        Ok(chol.solve(&neg_r))
    }

    /// The problem with `Q` replaced by `Q + A`.
    pub fn regularize(&self, choice: &RegularizationChoice) -> Result<QuadraticProblem> {
        let diag = choice.diagonal(&self.partition)?;
        let mut q = self.q.clone();
        for (k, a) in diag.iter().enumerate() {
            q[(k, k)] += a;
        }
        QuadraticProblem::new(q, self.r.clone(), self.partition.clone(), self.bounds.clone())
    }

    pub fn with_bounds(mut self, bounds: Option<BoxBounds>) -> Result<Self> {
        if let Some(b) = &bounds {
            b.validate()?;
            if b.dim() != self.dim() {
                return Err(Error::Dimension { what: "box bounds", expected: self.dim(), found: b.dim() });
            }
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn spectral_exact(&self) -> SpectralInfo {
        // Q is symmetric by construction.
        spectral_exact(&self.q).expect("validated problem matrix is symmetric")
    }
}

/// Extreme eigenvalues of `Q` and its condition number, either exact or as
/// conservative bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    /// `||Q||_2 = lambda_1(Q)`, or an upper bound on it.
    pub norm2: f64,
    /// `lambda_n(Q)`, or a lower bound on it. Bounds that are not positive
    /// carry no information; see [`SpectralInfo::lambda_min_usable`].
    pub lambda_min: f64,
    /// `k_Q`, or an upper bound (infinite when `lambda_min` is unusable).
    pub cond: f64,
    pub is_upper_bound: bool,
}

impl SpectralInfo {
    pub fn lambda_min_usable(&self) -> bool {
        self.lambda_min > 0.0
    }
}

/// Exact extreme eigenvalues by cyclic Jacobi.
pub fn spectral_exact(q: &Matrix) -> Result<SpectralInfo> {
    if !q.is_square() {
        return Err(Error::NotSquare { rows: q.rows(), cols: q.cols() });
    }
    let asymmetry = q.relative_asymmetry();
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry, tolerance: SYMMETRY_TOL });
    }
    let ev = linalg::symmetric_eigenvalues(&q.symmetrized())?;
    let (norm2, lambda_min) = (ev[0], *ev.last().unwrap());
    Ok(SpectralInfo { norm2, lambda_min, cond: norm2 / lambda_min, is_upper_bound: false })
}

/// Cheap bounds for a symmetric positive semidefinite `Q`: the smaller of the
/// Gershgorin row bound and the trace for `||Q||_2`, the Gershgorin lower
/// bound for `lambda_n(Q)`.
pub fn spectral_bounds(q: &Matrix) -> SpectralInfo {
    let n = q.rows();
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for i in 0..n {
        let row = q.row(i);
        let radius: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum();
        upper = upper.max(row[i] + radius);
        lower = lower.min(row[i] - radius);
    }
    let norm2 = upper.min(q.trace());
    let cond = if lower > 0.0 { norm2 / lower } else { f64::INFINITY };
    SpectralInfo { norm2, lambda_min: lower, cond, is_upper_bound: true }
}

/// Per-agent regularization weights `alpha_i`, giving
/// `A = diag(alpha_1 I_{n_1}, ..., alpha_N I_{n_N})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationChoice {
    alphas: Vec<f64>,
}

impl RegularizationChoice {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::invalid("at least one regularization weight is required"));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid(format!("regularization weights must be positive and finite, got {a}")));
        }
        Ok(RegularizationChoice { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_max(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn alpha_min(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Diagonal of `A`, one entry per coordinate.
    pub fn diagonal(&self, partition: &BlockPartition) -> Result<Vec<f64>> {
        partition.expand(&self.alphas)
    }

    pub fn matrix(&self, partition: &BlockPartition) -> Result<Matrix> {
        Ok(Matrix::from_diag(&self.diagonal(partition)?))
    }
}
