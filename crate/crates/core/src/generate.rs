//! Seeded random quadratic programs with a prescribed spectral norm and
//! condition number: `Q = U^T diag(lambda) U` with `U` a random orthogonal
//! matrix.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qp::{BlockPartition, QuadraticProblem};
use crate::rng::{self, Stream};

/// How the `n - 2` interior eigenvalues are spread over `[||Q||/k_Q, ||Q||]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spectrum {
    Uniform,
    #[default]
    LogUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Blocks {
    /// Number of agents; sizes from [`BlockPartition::even`].
    Even(usize),
    Sizes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RLaw {
    /// Gaussian direction scaled to exactly this Euclidean norm.
    Norm(f64),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub n: usize,
    pub blocks: Blocks,
    pub norm2: f64,
    pub cond: f64,
    #[serde(default)]
    pub spectrum: Spectrum,
    pub r: RLaw,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(self.norm2 > 0.0) || !self.norm2.is_finite() {
            return Err(Error::invalid(format!("target ||Q||_2 must be positive, got {}", self.norm2)));
        }
        if !(self.cond >= 1.0) || !self.cond.is_finite() {
            return Err(Error::invalid(format!("target k_Q must be >= 1, got {}", self.cond)));
        }
        if self.n == 1 && self.cond != 1.0 {
            return Err(Error::invalid("a 1x1 matrix has condition number 1"));
        }
        self.partition()?;
        match &self.r {
            RLaw::Norm(v) if !(*v >= 0.0) || !v.is_finite() => {
                Err(Error::invalid(format!("target ||r||_2 must be nonnegative, got {v}")))
            }
            RLaw::Explicit(r) if r.len() != self.n => Err(Error::Dimension { what: "r", expected: self.n, found: r.len() }),
            _ => Ok(()),
        }
    }

    pub fn partition(&self) -> Result<BlockPartition> {
        let p = match &self.blocks {
            Blocks::Even(agents) => BlockPartition::even(self.n, *agents)?,
            Blocks::Sizes(sizes) => BlockPartition::new(sizes.clone())?,
        };
        if p.dim() != self.n {
            return Err(Error::InvalidPartition(format!("block sizes sum to {}, expected n = {}", p.dim(), self.n)));
        }
        Ok(p)
    }
}

/// Orthonormal `n x n` matrix from Gram-Schmidt (applied twice) on the rows
/// of a Gaussian matrix. Every diagonal entry of the implied triangular
/// factor is positive, which fixes the signs.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    let mut rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    for i in 0..n {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = linalg::dot(&rows[i], &rows[j]);
                let (head, tail) = rows.split_at_mut(i);
                for (v, u) in tail[0].iter_mut().zip(&head[j]) {
                    *v -= proj * u;
                }
            }
        }
        let norm = linalg::norm2(&rows[i]);
        rows[i].iter_mut().for_each(|v| *v /= norm);
    }
    Matrix::from_rows(&rows).expect("square by construction")
}

/// Eigenvalues in descending order: `||Q||`, interior draws, `||Q|| / k_Q`.
pub fn eigenvalues<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Vec<f64> {
    let (hi, lo) = (spec.norm2, spec.norm2 / spec.cond);
    if spec.n == 1 {
        return vec![hi];
    }
    let mut interior: Vec<f64> = (0..spec.n - 2)
        .map(|_| match spec.spectrum {
            Spectrum::Uniform => rng.random_range(lo..=hi),
            Spectrum::LogUniform => rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi),
        })
        .collect();
    interior.sort_by(|a, b| b.total_cmp(a));
    let mut ev = Vec::with_capacity(spec.n);
    ev.push(hi);
    ev.extend(interior);
    ev.push(lo);
    ev
}

pub fn generate_q(spec: &GenSpec) -> Result<Matrix> {
    spec.validate()?;
    let n = spec.n;
    if spec.cond == 1.0 {
        return Ok(Matrix::identity(n).scale(spec.norm2));
    }
    let u = random_orthogonal(n, &mut rng::stream(spec.seed, Stream::Matrix));
    let ev = eigenvalues(spec, &mut rng::stream(spec.seed, Stream::Spectrum));
    let mut q = Matrix::zeros(n, n);
    for (k, lambda) in ev.iter().enumerate() {
        let uk = u.row(k);
        for i in 0..n {
            let a = lambda * uk[i];
            for j in i..n {
                q[(i, j)] += a * uk[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            q[(i, j)] = q[(j, i)];
        }
    }
    Ok(q)
}

pub fn generate_r(spec: &GenSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    match &spec.r {
        RLaw::Explicit(r) => Ok(r.clone()),
        RLaw::Norm(target) if *target == 0.0 => Ok(vec![0.0; spec.n]),
        RLaw::Norm(target) => {
            let mut rng = rng::stream(spec.seed, Stream::Linear);
            let mut r: Vec<f64> = (0..spec.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let scale = target / linalg::norm2(&r);
            r.iter_mut().for_each(|v| *v *= scale);
            Ok(r)
        }
    }
}

pub fn generate_problem(spec: &GenSpec) -> Result<QuadraticProblem> {
    QuadraticProblem::new(generate_q(spec)?, generate_r(spec)?, spec.partition()?, None)
}
