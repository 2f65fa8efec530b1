//! Reference computations for integration tests, done with nalgebra so that
//! they share no code with the library's own linear algebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use taqp::linalg::Matrix;
use taqp::qp::{BlockPartition, QuadraticProblem};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn norm2(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

pub fn cond(m: &DMatrix<f64>) -> f64 {
    let e = eigs(m);
    e[e.len() - 1] / e[0]
}

pub fn gaussian(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Orthogonal factor from nalgebra's Householder QR of a Gaussian matrix.
pub fn orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_vec(n, n, gaussian(n * n, rng));
    a.qr().q()
}

/// Symmetric PD matrix with largest eigenvalue `top` and condition number
/// `k`; interior eigenvalues log-uniform.
pub fn pd_matrix(n: usize, top: f64, k: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let u = orthogonal(n, rng);
    let mut ev: Vec<f64> = (0..n).map(|_| top / k.powf(rng.random::<f64>())).collect();
    ev[0] = top;
    if n > 1 {
        ev[1] = top / k;
    }
    let m = &u * DMatrix::from_diagonal(&DVector::from_vec(ev)) * u.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_partition(n: usize, rng: &mut impl Rng) -> BlockPartition {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.random_range(1..=left.min(5));
        sizes.push(s);
        left -= s;
    }
    BlockPartition::new(sizes).unwrap()
}

pub fn problem(q: &DMatrix<f64>, r: Vec<f64>, partition: BlockPartition) -> QuadraticProblem {
    QuadraticProblem::new(from_na(q), r, partition, None).unwrap()
}

pub fn solve(q: &DMatrix<f64>, r: &[f64]) -> Vec<f64> {
    let x = q.clone().lu().solve(&DVector::from_column_slice(r)).unwrap();
    x.iter().map(|v| -v).collect()
}

pub fn vnorm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
