//! Weighted block-maximum norm and the nested sub-level sets built from it.
//!
//! `||x||_max = max_i ||x_i||_{p_i} / omega_i` with `omega_i >= 1` and
//! `p_i in [1, inf]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qp::BlockPartition;

/// Exponent of a vector p-norm, with infinity as its own variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(PNorm::Infinity)
        } else if p >= 1.0 && p.is_finite() {
            Ok(PNorm::Finite(p))
        } else {
            Err(Error::invalid(format!("norm exponent must lie in [1, inf], got {p}")))
        }
    }

    /// `1/p`, zero for infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            PNorm::Finite(p) => 1.0 / p,
            PNorm::Infinity => 0.0,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            PNorm::Infinity => x.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            PNorm::Finite(1.0) => x.iter().map(|v| v.abs()).sum(),
            PNorm::Finite(2.0) => linalg::norm2(x),
            PNorm::Finite(p) => {
                // scale by the largest entry to keep |v|^p representable
                let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }

    fn ge(self, other: f64) -> bool {
        match self {
            PNorm::Infinity => true,
            PNorm::Finite(p) => p >= other,
        }
    }

    fn min(self, other: PNorm) -> PNorm {
        match (self, other) {
            (PNorm::Infinity, o) => o,
            (s, PNorm::Infinity) => s,
            (PNorm::Finite(a), PNorm::Finite(b)) => PNorm::Finite(a.min(b)),
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "infinity" => Ok(PNorm::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::invalid(format!("bad norm exponent {other:?}")))?;
                PNorm::new(p)
            }
        }
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PNorm::Finite(p) => s.serialize_f64(*p),
            PNorm::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => PNorm::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Per-block weights and exponents of the block-maximum norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormScheme {
    weights: Vec<f64>,
    exponents: Vec<PNorm>,
}

impl NormScheme {
    pub fn new(weights: Vec<f64>, exponents: Vec<PNorm>) -> Result<Self> {
        let s = NormScheme { weights, exponents };
        s.validate()?;
        Ok(s)
    }

    /// Same weight and exponent for all `agents` blocks.
    pub fn uniform(agents: usize, weight: f64, exponent: PNorm) -> Result<Self> {
        Self::new(vec![weight; agents], vec![exponent; agents])
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.exponents.len() {
            return Err(Error::invalid(format!(
                "norm scheme needs one weight and one exponent per block ({} weights, {} exponents)",
                self.weights.len(),
                self.exponents.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 1.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("block weights must be finite and >= 1, got {w}")));
        }
        if let Some(PNorm::Finite(p)) = self.exponents.iter().find(|p| !p.ge(1.0)) {
            return Err(Error::invalid(format!("norm exponents must be >= 1, got {p}")));
        }
        Ok(())
    }

    pub fn blocks(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exponents(&self) -> &[PNorm] {
        &self.exponents
    }

    pub fn omega_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn p_min(&self) -> PNorm {
        self.exponents.iter().copied().fold(PNorm::Infinity, PNorm::min)
    }

    fn check(&self, partition: &BlockPartition) -> Result<()> {
        if self.blocks() != partition.agents() {
            return Err(Error::Dimension { what: "norm scheme blocks", expected: partition.agents(), found: self.blocks() });
        }
        Ok(())
    }
}

pub fn block_max_norm(x: &[f64], partition: &BlockPartition, scheme: &NormScheme) -> Result<f64> {
    scheme.check(partition)?;
    if x.len() != partition.dim() {
        return Err(Error::Dimension { what: "vector", expected: partition.dim(), found: x.len() });
    }
    Ok((0..partition.agents())
        .map(|i| scheme.exponents[i].norm(&x[partition.range(i)]) / scheme.weights[i])
        .fold(0.0, f64::max))
}

/// Upper bound on the induced block-maximum norm from `||B||_2`:
/// `n^(1/p_min - 1/2) ||B||_2 / omega_min` when `p_min < 2`, and
/// `||B||_2 / omega_min` otherwise.
pub fn induced_norm_bound_from_norm2(norm2: f64, n: usize, scheme: &NormScheme) -> f64 {
    let p_min = scheme.p_min();
    let base = norm2 / scheme.omega_min();
    if p_min.ge(2.0) {
        base
    } else {
        (n as f64).powf(p_min.reciprocal() - 0.5) * base
    }
}

pub fn induced_norm_bound(b: &Matrix, scheme: &NormScheme) -> Result<f64> {
    if !b.is_square() {
        return Err(Error::NotSquare { rows: b.rows(), cols: b.cols() });
    }
    Ok(induced_norm_bound_from_norm2(linalg::spectral_norm(b)?, b.rows(), scheme))
}

/// `D_o = max_i ||x^i(0) - x_hat||_max` over the agents' initial local copies.
pub fn initial_radius(
    states: &[Vec<f64>],
    x_hat: &[f64],
    partition: &BlockPartition,
    scheme: &NormScheme,
) -> Result<f64> {
    states.iter().try_fold(0.0_f64, |acc, x| {
        if x.len() != x_hat.len() {
            return Err(Error::Dimension { what: "local copy", expected: x_hat.len(), found: x.len() });
        }
        Ok(acc.max(block_max_norm(&linalg::sub(x, x_hat), partition, scheme)?))
    })
}

/// Position of a point in the nested family `X(s) = {y : ||y - x_hat||_max <= q^s n D_o}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SetIndex {
    /// Not even in `X(0)`.
    Outside,
    /// Largest `s` with membership in `X(s)`.
    Level(u32),
    /// Within `1e-12 n D_o` of `x_hat`; member of every `X(s)` up to rounding.
    Converged,
}

impl fmt::Display for SetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetIndex::Outside => f.write_str("outside"),
            SetIndex::Level(s) => write!(f, "{s}"),
            SetIndex::Converged => f.write_str("converged"),
        }
    }
}

impl FromStr for SetIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outside" => Ok(SetIndex::Outside),
            "converged" => Ok(SetIndex::Converged),
            other => other.parse().map(SetIndex::Level).map_err(|_| Error::invalid(format!("bad set index {other:?}"))),
        }
    }
}

pub const CONVERGED_RELATIVE: f64 = 1e-12;

/// Set index of a point at block-max distance `distance` from `x_hat`.
pub fn set_index_of_distance(distance: f64, q: f64, n: usize, d_o: f64) -> Result<SetIndex> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("contraction factor must lie in (0, 1), got {q}")));
    }
    if !(d_o >= 0.0) {
        return Err(Error::invalid(format!("initial radius must be nonnegative, got {d_o}")));
    }
    let radius = n as f64 * d_o;
    if distance <= CONVERGED_RELATIVE * radius || distance == 0.0 {
        return Ok(SetIndex::Converged);
    }
    if distance > radius {
        return Ok(SetIndex::Outside);
    }
    let level = |s: u32| q.powi(s as i32) * radius;
    // log estimate, then settle the boundary with direct comparisons
    let guess = ((distance / radius).ln() / q.ln()).floor();
    let mut s = if guess.is_finite() && guess > 0.0 { guess.min(u32::MAX as f64 - 1.0) as u32 } else { 0 };
    while s > 0 && level(s) < distance {
        s -= 1;
    }
    while level(s + 1) >= distance {
        s += 1;
    }
    Ok(SetIndex::Level(s))
}

pub fn set_index(
    y: &[f64],
    x_hat: &[f64],
    q: f64,
    d_o: f64,
    partition: &BlockPartition,
    scheme: &NormScheme,
) -> Result<SetIndex> {
    let dist = block_max_norm(&linalg::sub(y, x_hat), partition, scheme)?;
    set_index_of_distance(dist, q, partition.dim(), d_o)
}
