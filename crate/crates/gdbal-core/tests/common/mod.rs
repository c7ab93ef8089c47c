//! Independent dense-equation oracles used by the integration and acceptance
//! suites. These deliberately avoid the library's LMI path: the Lyapunov
//! solver works on the Kronecker-vectorized linear system, and the Riccati
//! solver runs Kleinman iteration on top of it.
#![allow(dead_code)] // each test target uses its own subset

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Solve `A X + X A' + Q = 0` by LU on the n^2 x n^2 Kronecker system.
/// Suitable for the small systems used as oracles.
pub fn lyapunov_dense(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut big = DMatrix::zeros(n * n, n * n);
    // vec(A X + X A') = (I kron A + A kron I) vec(X)   [column-major vec]
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // (I kron A): block-diagonal copies of A
                big[(j * n + i, j * n + k)] += a[(i, k)];
                // (A kron I): A[j, k] * I at block (j, k)
                big[(j * n + i, k * n + i)] += a[(j, k)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, (0..n * n).map(|idx| -q[(idx % n, idx / n)]));
    let sol = big.lu().solve(&rhs).expect("Lyapunov system singular");
    DMatrix::from_fn(n, n, |i, j| sol[j * n + i])
}

/// Stabilizing solution of `A'P + P A - P B B' P + C'C = 0` by Kleinman
/// iteration started from P = 0 (valid for Hurwitz `A`).
pub fn care_dense(a: &DMatrix<f64>, b: &DMatrix<f64>, ctc: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut p = DMatrix::zeros(n, n);
    for _ in 0..200 {
        let ak = a - b * (b.transpose() * &p);
        let q = ctc + &p * b * (b.transpose() * &p);
        // A_k' P + P A_k + Q = 0  solved as Lyapunov in A_k'
        let next = lyapunov_dense(&ak.transpose(), &q);
        let diff = (&next - &p).norm();
        p = next;
        if diff < 1e-13 * p.norm().max(1.0) {
            break;
        }
    }
    p
}

/// Random Hurwitz matrix with eigenvalues shifted left of `-margin`.
pub fn random_hurwitz(n: usize, margin: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let shift = m.complex_eigenvalues().iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let a = m - DMatrix::identity(n, n) * (shift + margin);
        if a.complex_eigenvalues().iter().all(|c| c.re < -margin / 2.0) {
            return a;
        }
    }
}

pub fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}
