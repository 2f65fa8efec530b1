//! Closed-form parameter planning: admissible stepsizes, the contraction
//! factor `q = ||I - Gamma Q||_2`, regularization intervals that trade
//! conditioning against solution error, and the resulting error bound.
//!
//! Every function accepts upper bounds on `||Q||_2` and `k_Q` in place of the
//! exact values. Intervals are open.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qp::BlockPartition;

/// Relative inward nudge applied to interval endpoints before sampling.
pub const SAMPLE_NUDGE: f64 = 1e-12;

/// Open interval `(lower, upper)` of per-agent stepsizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeInterval {
    pub lower: f64,
    pub upper: f64,
}

impl StepsizeInterval {
    pub fn contains(&self, gamma: f64) -> bool {
        self.lower < gamma && gamma < self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Uniform draw from the interval with both ends pulled in by [`SAMPLE_NUDGE`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_open(self.lower, self.upper, rng)
    }
}

pub(crate) fn sample_open<R: Rng + ?Sized>(lower: f64, upper: f64, rng: &mut R) -> f64 {
    let pad = SAMPLE_NUDGE * (upper - lower);
    let (lo, hi) = (lower + pad, upper - pad);
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        0.5 * (lower + upper)
    }
}

fn check_spectrum(norm2: f64, cond: f64) -> Result<()> {
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::invalid(format!("||Q||_2 must be positive and finite, got {norm2}")));
    }
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(Error::invalid(format!("condition number must be finite and >= 1, got {cond}")));
    }
    Ok(())
}

/// `((sqrt(k) - 1) / (||Q|| sqrt(k)), (sqrt(k) + 1) / (||Q|| sqrt(k)))`.
///
/// Any choice of per-agent stepsizes inside this interval makes
/// `||I - Gamma Q||_2 < 1`.
pub fn stepsize_interval(norm2: f64, cond: f64) -> Result<StepsizeInterval> {
    check_spectrum(norm2, cond)?;
    let sk = cond.sqrt();
    let denom = norm2 * sk;
    Ok(StepsizeInterval { lower: (sk - 1.0) / denom, upper: (sk + 1.0) / denom })
}

/// Left-hand side of the general interval condition; an interval is valid
/// when this exceeds one.
pub fn interval_margin(gamma_lower: f64, gamma_upper: f64, norm2: f64, cond: f64) -> Result<f64> {
    check_spectrum(norm2, cond)?;
    if !(gamma_lower > 0.0) || !(gamma_upper >= gamma_lower) {
        return Err(Error::invalid(format!(
            "stepsize bounds must satisfy 0 < lower <= upper, got ({gamma_lower}, {gamma_upper})"
        )));
    }
    let sk = cond.sqrt();
    let plus = (sk + 1.0).powi(2) / sk;
    let minus = (sk - 1.0).powi(2) / sk;
    Ok((plus - gamma_upper / gamma_lower * minus) / (2.0 * gamma_upper * norm2))
}

/// Whether every stepsize selection from `[gamma_lower, gamma_upper]` is
/// certified to contract.
pub fn validate_interval(gamma_lower: f64, gamma_upper: f64, norm2: f64, cond: f64) -> Result<bool> {
    Ok(interval_margin(gamma_lower, gamma_upper, norm2, cond)? > 1.0)
}

/// Per-agent stepsizes `gamma_i`, i.e. `Gamma = diag(gamma_1 I_{n_1}, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    gammas: Vec<f64>,
}

impl GammaMatrix {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::invalid("at least one stepsize is required"));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid(format!("stepsizes must be positive and finite, got {g}")));
        }
        Ok(GammaMatrix { gammas })
    }

    /// Each agent draws independently from `interval`.
    pub fn sample<R: Rng + ?Sized>(agents: usize, interval: &StepsizeInterval, rng: &mut R) -> Result<Self> {
        Self::new((0..agents).map(|_| interval.sample(rng)).collect())
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn diagonal(&self, partition: &BlockPartition) -> Result<Vec<f64>> {
        partition.expand(&self.gammas)
    }
}

/// `I - Gamma Q`.
pub fn iteration_matrix(q: &Matrix, gamma: &GammaMatrix, partition: &BlockPartition) -> Result<Matrix> {
    if q.rows() != partition.dim() || !q.is_square() {
        return Err(Error::Dimension { what: "Q", expected: partition.dim(), found: q.rows() });
    }
    let g = gamma.diagonal(partition)?;
    Ok(Matrix::identity(q.rows()).sub(&q.scale_rows(&g)))
}

/// `q = ||I - Gamma Q||_2`, from the largest eigenvalue of
/// `(I - Gamma Q)^T (I - Gamma Q)`.
pub fn contraction_factor(q: &Matrix, gamma: &GammaMatrix, partition: &BlockPartition) -> Result<f64> {
    linalg::spectral_norm(&iteration_matrix(q, gamma, partition)?)
}

/// Sufficient condition `alpha_max / alpha_min < k_Q` for `k_{Q+A} < k_Q`.
pub fn improves_conditioning(alphas: &[f64], cond_q: f64) -> bool {
    let max = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    min > 0.0 && max / min < cond_q
}

fn check_error_target(cond_q: f64, norm2: f64, norm_r: f64, epsilon: f64) -> Result<()> {
    check_spectrum(norm2, cond_q)?;
    if !(norm_r > 0.0) || !norm_r.is_finite() {
        return Err(Error::invalid(format!("||r||_2 must be positive and finite, got {norm_r}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("error target must be positive, got {epsilon}")));
    }
    let cap = norm_r * cond_q / norm2;
    if !(epsilon < cap) {
        return Err(Error::invalid(format!(
            "error target epsilon = {epsilon} must satisfy epsilon < ||r||_2 k_Q / ||Q||_2 = {cap}"
        )));
    }
    Ok(())
}

/// Strict lower bound `k_Q - eps ||Q|| (k_Q - 1) / (||r|| k_Q)` on admissible
/// target condition numbers.
pub fn feasible_kd_lower(cond_q: f64, norm2: f64, norm_r: f64, epsilon: f64) -> Result<f64> {
    check_error_target(cond_q, norm2, norm_r, epsilon)?;
    Ok(cond_q - epsilon * norm2 * (cond_q - 1.0) / (norm_r * cond_q))
}

/// Smallest regularization weight (exclusive) that guarantees
/// `k_{Q+A} <= k_D` for every agent choosing above it.
pub fn alpha_min_lower(cond_q: f64, norm2: f64, norm_r: f64, epsilon: f64, k_d: f64) -> Result<f64> {
    let kd_floor = feasible_kd_lower(cond_q, norm2, norm_r, epsilon)?;
    if !(k_d > kd_floor) || !(k_d >= 1.0) {
        return Err(Error::infeasible(format!(
            "target condition number k_D = {k_d} must satisfy k_D > k_Q - eps ||Q||_2 (k_Q - 1)/(||r||_2 k_Q) = {kd_floor} and k_D >= 1"
        )));
    }
    let slack = norm_r * cond_q - epsilon * norm2;
    Ok(norm2 * (1.0 / k_d - 1.0 / cond_q) + epsilon * norm2 * norm2 / (cond_q * k_d * slack))
}

/// Largest regularization weight (exclusive) that keeps the regularization
/// error below `epsilon`.
pub fn alpha_max_upper(cond_q: f64, norm2: f64, norm_r: f64, epsilon: f64) -> Result<f64> {
    check_error_target(cond_q, norm2, norm_r, epsilon)?;
    Ok(epsilon * norm2 * norm2 / (norm_r * cond_q * cond_q - epsilon * norm2 * cond_q))
}

/// Bound on `||x_hat - x_hat_A||_2` when every `alpha_i <= alpha_max`.
pub fn error_bound(cond_q: f64, norm2: f64, norm_r: f64, alpha_max: f64) -> f64 {
    if alpha_max.is_infinite() {
        return norm_r * cond_q / norm2;
    }
    norm_r * cond_q * cond_q * alpha_max / (norm2 * norm2 + norm2 * cond_q * alpha_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationPlan {
    /// Exclusive lower end of the per-agent `alpha_i` interval.
    pub alpha_lower: f64,
    /// Exclusive upper end of the per-agent `alpha_i` interval.
    pub alpha_upper: f64,
    pub k_d: f64,
    pub epsilon: f64,
    /// [`error_bound`] evaluated at `alpha_upper`.
    pub predicted_error_bound: f64,
    /// Stepsizes for `Q + A` from `||Q + A||_2 <= ||Q||_2 + alpha_upper` and `k_{Q+A} <= k_D`.
    pub predicted_stepsize_interval: StepsizeInterval,
}

impl RegularizationPlan {
    pub fn contains(&self, alpha: f64) -> bool {
        self.alpha_lower < alpha && alpha < self.alpha_upper
    }

    pub fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_open(self.alpha_lower, self.alpha_upper, rng)
    }
}

pub fn plan_regularization(cond_q: f64, norm2: f64, norm_r: f64, epsilon: f64, k_d: f64) -> Result<RegularizationPlan> {
    let alpha_upper = alpha_max_upper(cond_q, norm2, norm_r, epsilon)?;
    // weights must stay positive even when k_D >= k_Q makes the bound negative
    let alpha_lower = alpha_min_lower(cond_q, norm2, norm_r, epsilon, k_d)?.max(0.0);
    if !(alpha_lower < alpha_upper) {
        return Err(Error::infeasible(format!(
            "regularization interval is empty: alpha_min bound {alpha_lower} >= alpha_max bound {alpha_upper}"
        )));
    }
    Ok(RegularizationPlan {
        alpha_lower,
        alpha_upper,
        k_d,
        epsilon,
        predicted_error_bound: error_bound(cond_q, norm2, norm_r, alpha_upper),
        predicted_stepsize_interval: stepsize_interval(norm2 + alpha_upper, k_d)?,
    })
}
