//! Shared dense symmetric kernels: eigendecomposition, Cholesky, SPD inverse
//! and SPD square root. These back both the solver and the balancing module.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{context}: matrix is not positive definite")]
    NotPositiveDefinite { context: &'static str },
    #[error("matrix is singular")]
    Singular,
}

/// `(A + A^T)/2`, used to scrub accumulated asymmetry before decomposition.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (a + a.transpose())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending
/// with eigenvector columns permuted to match. Deterministic for a given
/// input.
pub fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let se = symmetrize(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &se.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    let (vals, _) = sym_eigen(a);
    vals[0]
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    let (vals, _) = sym_eigen(a);
    vals[vals.len() - 1]
}

/// Lower-triangular Cholesky factor of an SPD matrix.
pub fn cholesky_lower(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>, KernelError> {
    if a.nrows() != a.ncols() {
        return Err(KernelError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    symmetrize(a)
        .cholesky()
        .map(|c| c.l())
        .ok_or(KernelError::NotPositiveDefinite { context })
}

/// Inverse of an SPD matrix via Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>, KernelError> {
    if a.nrows() != a.ncols() {
        return Err(KernelError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    symmetrize(a)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(KernelError::NotPositiveDefinite { context })
}

/// Symmetric square root of an SPD matrix.
pub fn spd_sqrt(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>, KernelError> {
    let (vals, vecs) = sym_eigen(a);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(KernelError::NotPositiveDefinite { context });
    }
    let d = DMatrix::from_diagonal(&vals.map(f64::sqrt));
    Ok(&vecs * d * vecs.transpose())
}

/// General linear solve via LU with a singularity check.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    a.clone().lu().solve(b).ok_or(KernelError::Singular)
}

/// General matrix inverse via LU.
pub fn lu_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    a.clone().try_inverse().ok_or(KernelError::Singular)
}

/// Largest eigenvalue of a product `P Q` of two SPD matrices, computed via the
/// symmetric form `P^{1/2} Q P^{1/2}` so the spectrum stays real.
pub fn lambda_max_spd_product(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<f64, KernelError> {
    let ph = spd_sqrt(p, "lambda_max_spd_product")?;
    Ok(lambda_max(&(&ph * q * &ph)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn eigen_residual_contract() {
        // ||A v - lambda v|| <= 1e-10 ||A|| for n up to 200.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[5usize, 40, 200] {
            let a = {
                let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                symmetrize(&m)
            };
            let norm = a.norm();
            let (vals, vecs) = sym_eigen(&a);
            for k in 0..n {
                let v = vecs.column(k);
                let r = &a * v - vals[k] * v;
                assert!(
                    r.norm() <= 1e-10 * norm,
                    "n={n} k={k}: residual {} vs {}",
                    r.norm(),
                    1e-10 * norm
                );
            }
            // sorted descending
            for k in 1..n {
                assert!(vals[k - 1] >= vals[k]);
            }
        }
    }

    #[test]
    fn sqrt_and_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[2usize, 7, 30] {
            let a = random_spd(n, &mut rng);
            let s = spd_sqrt(&a, "test").unwrap();
            assert!((&s * &s - &a).norm() <= 1e-10 * a.norm());
            let inv = spd_inverse(&a, "test").unwrap();
            assert!((&a * inv - DMatrix::identity(n, n)).norm() <= 1e-9);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_lower(&a, "test"),
            Err(KernelError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn product_lambda_max_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_spd(4, &mut rng);
        let q = random_spd(4, &mut rng);
        let lm = lambda_max_spd_product(&p, &q).unwrap();
        // power iteration on P Q for reference
        let mut v = DVector::from_element(4, 1.0);
        let pq = &p * &q;
        for _ in 0..500 {
            v = &pq * v;
            let nv = v.norm();
            v /= nv;
        }
        let reference = (v.transpose() * &pq * &v)[(0, 0)];
        assert!((lm - reference).abs() <= 1e-8 * lm.abs().max(1.0));
    }
}
