//! Contragredient transformations, coordinate changes of plants and vertex
//! sets, balanced truncation and truncation error bounds.

use crate::lmi::kernels::{self, KernelError};
use crate::sysmodel::{PlantModel, VectorField, VertexSet};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("transformation matrix is singular")]
    SingularTransform,
    #[error(
        "singular values {r} and {r1} are not separated: sigma_{r} = {a:.6e}, \
         sigma_{r1} = {b:.6e} (gap below 1e-10); refusing to truncate at a tie"
    )]
    SingularValueTie { r: usize, r1: usize, a: f64, b: f64 },
    #[error("reduced order {r} exceeds state dimension {n}")]
    OrderTooLarge { r: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Which pair of certificates a balanced realization diagonalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalancingKind {
    Gd,
    Lqg,
    Hinf,
}

/// A plant carried into balanced coordinates `z = T x`, in which both
/// certificate matrices equal `diag(sigma)`.
#[derive(Debug, Clone)]
pub struct BalancedRealization {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub plant: PlantModel,
    pub vertices: VertexSet,
    pub kind: BalancingKind,
}

/// Balanced-truncated reduced model of order `r`, with its inherited vertex
/// blocks and output error bound.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub r: usize,
    pub plant: PlantModel,
    pub vertices: VertexSet,
    /// Parent balanced values (full length).
    pub sigma: DVector<f64>,
    /// `2 * sum of discarded sigma` (output L2 gain factor).
    pub bound: f64,
}

/// `(T, T^{-1}, sigma)` from a contragredient factorization.
pub type Contragredient = (DMatrix<f64>, DMatrix<f64>, DVector<f64>);

/// Simultaneously diagonalize SPD `X` (controllability-like, transforming as
/// `T X T'`) and SPD `Y` (observability-like, transforming as `T^-T Y T^-1`):
/// returns `(T, T^-1, sigma)` with both transformed matrices equal to
/// `diag(sigma)` and `sigma_i = sqrt(eig_i(X Y))` descending.
///
/// Algorithm: Cholesky `X = L L'`, eigendecompose `L' Y L = U D U'`,
/// `T^{-1} = L U D^{-1/4}`.
pub fn contragredient(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<Contragredient, BalanceError> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(BalanceError::Dimension(format!(
            "X is {}x{}, Y is {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let l = kernels::cholesky_lower(x, "contragredient X")?;
    let m = l.transpose() * y * &l;
    let (vals, u) = kernels::sym_eigen(&m);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(BalanceError::Kernel(KernelError::NotPositiveDefinite {
            context: "contragredient Y",
        }));
    }
    let sigma = vals.map(f64::sqrt);
    let d_quarter_inv = DMatrix::from_diagonal(&vals.map(|v| v.powf(-0.25)));
    let d_quarter = DMatrix::from_diagonal(&vals.map(|v| v.powf(0.25)));
    let t_inv = &l * &u * d_quarter_inv;
    // T = D^{1/4} U' L^{-1}
    let l_inv = kernels::lu_inverse(&l).map_err(|_| BalanceError::SingularTransform)?;
    let t = d_quarter * u.transpose() * l_inv;
    Ok((t, t_inv, sigma))
}

/// Carry a plant and its vertex family through `z = T x`: the drift becomes
/// `z -> T f(T^-1 z)`, `B -> T B`, `C -> C T^-1`, vertices `A -> T A T^-1`.
pub fn transform_plant(
    plant: &PlantModel,
    vertices: &VertexSet,
    t: &DMatrix<f64>,
) -> Result<(PlantModel, VertexSet), BalanceError> {
    let t_inv = kernels::lu_inverse(t).map_err(|_| BalanceError::SingularTransform)?;
    transform_plant_with_inverse(plant, vertices, t, &t_inv)
}

pub fn transform_plant_with_inverse(
    plant: &PlantModel,
    vertices: &VertexSet,
    t: &DMatrix<f64>,
    t_inv: &DMatrix<f64>,
) -> Result<(PlantModel, VertexSet), BalanceError> {
    if t.nrows() != plant.n() {
        return Err(BalanceError::Dimension(format!(
            "T is {}x{}, state dimension is {}",
            t.nrows(),
            t.ncols(),
            plant.n()
        )));
    }
    // Flatten nested transforms so repeated balancing stays cheap.
    let field = match &plant.field {
        VectorField::Transformed { inner, t: t0, t_inv: t0_inv } => VectorField::Transformed {
            inner: inner.clone(),
            t: t * t0,
            t_inv: t0_inv * t_inv,
        },
        other => VectorField::Transformed {
            inner: Box::new(other.clone()),
            t: t.clone(),
            t_inv: t_inv.clone(),
        },
    };
    let mut out = plant.clone();
    out.field = field;
    out.b = t * &plant.b;
    out.c = &plant.c * t_inv;
    Ok((out, vertices.transformed(t, t_inv)))
}

/// Balance a plant against an (X, Y) certificate pair.
pub fn balance(
    plant: &PlantModel,
    vertices: &VertexSet,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    kind: BalancingKind,
) -> Result<BalancedRealization, BalanceError> {
    let (t, t_inv, sigma) = contragredient(x, y)?;
    let (bplant, bverts) = transform_plant_with_inverse(plant, vertices, &t, &t_inv)?;
    Ok(BalancedRealization { t, t_inv, sigma, plant: bplant, vertices: bverts, kind })
}

/// Truncate a balanced realization to order `r`. Requires a strict gap
/// `sigma_r > sigma_{r+1}` (absolute tolerance 1e-10); `r = n` returns the
/// identity reduction with bound zero.
pub fn truncate(balanced: &BalancedRealization, r: usize) -> Result<ReducedModel, BalanceError> {
    let n = balanced.plant.n();
    if r > n || r == 0 {
        return Err(BalanceError::OrderTooLarge { r, n });
    }
    if r < n {
        let gap = balanced.sigma[r - 1] - balanced.sigma[r];
        if gap <= 1e-10 {
            return Err(BalanceError::SingularValueTie {
                r,
                r1: r + 1,
                a: balanced.sigma[r - 1],
                b: balanced.sigma[r],
            });
        }
    }
    let field = if r == n {
        balanced.plant.field.clone()
    } else {
        VectorField::Truncated { inner: Box::new(balanced.plant.field.clone()), r }
    };
    let b1 = balanced.plant.b.rows(0, r).into_owned();
    let c1 = balanced.plant.c.columns(0, r).into_owned();
    let mut plant = balanced.plant.clone();
    plant.field = field;
    plant.b = b1;
    plant.c = c1;
    Ok(ReducedModel {
        r,
        plant,
        vertices: balanced.vertices.truncated(r),
        sigma: balanced.sigma.clone(),
        bound: error_bound(&balanced.sigma, r),
    })
}

/// Output-error gain factor of balanced truncation: `2 * sum_{i>r} sigma_i`.
pub fn error_bound(sigma: &DVector<f64>, r: usize) -> f64 {
    2.0 * sigma.iter().skip(r).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{build_vertices, builtin_network_chain, VertexStrategy};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.2
    }

    #[test]
    fn identity_pair_balances_to_ones() {
        let i = DMatrix::identity(4, 4);
        let (_, _, sigma) = contragredient(&i, &i).unwrap();
        assert!(sigma.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_pair_with_tied_product() {
        let x = DMatrix::from_diagonal(&DVector::from_column_slice(&[4.0, 1.0]));
        let y = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0]));
        let (t, t_inv, sigma) = contragredient(&x, &y).unwrap();
        assert!((sigma[0] - 2.0).abs() < 1e-12);
        assert!((sigma[1] - 2.0).abs() < 1e-12);
        let s = DMatrix::from_diagonal(&sigma);
        assert!((&t * &x * t.transpose() - &s).norm() < 1e-10);
        assert!((t_inv.transpose() * &y * &t_inv - &s).norm() < 1e-10);
    }

    #[test]
    fn balancing_residuals_up_to_n100() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &n in &[3usize, 10, 40, 100] {
            let x = random_spd(n, &mut rng);
            let y = random_spd(n, &mut rng);
            let (t, t_inv, sigma) = contragredient(&x, &y).unwrap();
            let s = DMatrix::from_diagonal(&sigma);
            let rx = (&t * &x * t.transpose() - &s).norm() / x.norm();
            let ry = (t_inv.transpose() * &y * &t_inv - &s).norm() / y.norm();
            assert!(rx <= 1e-8, "n={n}: X residual {rx}");
            assert!(ry <= 1e-8, "n={n}: Y residual {ry}");
            // sigma nonincreasing and positive
            for k in 1..n {
                assert!(sigma[k - 1] >= sigma[k] - 1e-14);
            }
            assert!(sigma[n - 1] > 0.0);
            // sigma^2 = eig(XY) via the symmetric product form
            let xh = kernels::spd_sqrt(&x, "test").unwrap();
            let (eigs, _) = kernels::sym_eigen(&(&xh * &y * &xh));
            for k in 0..n {
                let rel = (sigma[k] * sigma[k] - eigs[k]).abs() / eigs[k];
                assert!(rel <= 1e-8, "n={n} k={k}: rel {rel}");
            }
            // T * T^-1 = I
            assert!((&t * &t_inv - DMatrix::identity(n, n)).norm() < 1e-8);
        }
    }

    #[test]
    fn non_spd_input_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        let good = DMatrix::identity(2, 2);
        assert!(contragredient(&bad, &good).is_err());
        assert!(contragredient(&good, &bad).is_err());
    }

    #[test]
    fn transform_identity_and_scaling() {
        let plant = builtin_network_chain(3, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let (same, vs) = transform_plant(&plant, &verts, &DMatrix::identity(3, 3)).unwrap();
        let x = DVector::from_column_slice(&[0.4, -0.2, 1.0]);
        assert!((same.field.eval(&x) - plant.field.eval(&x)).amax() < 1e-14);
        assert_eq!(vs.len(), verts.len());
        // scaling T = 2I on dx/dt = -x + u: z' = -z + 2u, C halved
        let lin = PlantModel::new(
            VectorField::Linear { a: DMatrix::from_element(1, 1, -1.0) },
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            0.0,
        )
        .unwrap();
        let lverts = VertexSet::explicit(vec![DMatrix::from_element(1, 1, -1.0)]);
        let (scaled, _) =
            transform_plant(&lin, &lverts, &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(scaled.b[(0, 0)], 2.0);
        assert_eq!(scaled.c[(0, 0)], 0.5);
        let z = DVector::from_column_slice(&[3.0]);
        assert!((scaled.field.eval(&z)[0] - -3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_transform_rejected() {
        let plant = builtin_network_chain(2, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            transform_plant(&plant, &verts, &t),
            Err(BalanceError::SingularTransform)
        ));
    }

    #[test]
    fn truncate_full_order_is_identity() {
        let plant = builtin_network_chain(3, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let x = DMatrix::identity(3, 3) * 2.0;
        let bal = balance(&plant, &verts, &x, &x, BalancingKind::Gd).unwrap();
        let red = truncate(&bal, 3).unwrap();
        assert_eq!(red.bound, 0.0);
        let z = DVector::from_column_slice(&[0.1, 0.2, -0.3]);
        assert!((red.plant.field.eval(&z) - bal.plant.field.eval(&z)).amax() < 1e-14);
    }

    #[test]
    fn truncated_field_evaluates_padded_prefix() {
        let plant = builtin_network_chain(3, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let x = DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, 2.0, 1.0]));
        let bal = balance(&plant, &verts, &x, &x, BalancingKind::Gd).unwrap();
        let red = truncate(&bal, 1).unwrap();
        let z1 = DVector::from_column_slice(&[0.7]);
        let padded = DVector::from_column_slice(&[0.7, 0.0, 0.0]);
        let expect = bal.plant.field.eval(&padded)[0];
        assert!((red.plant.field.eval(&z1)[0] - expect).abs() < 1e-14);
        assert_eq!(red.vertices.vertices[0].nrows(), 1);
    }

    #[test]
    fn tie_refused() {
        let plant = builtin_network_chain(2, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let x = DMatrix::identity(2, 2);
        let bal = balance(&plant, &verts, &x, &x, BalancingKind::Gd).unwrap();
        assert!(matches!(
            truncate(&bal, 1),
            Err(BalanceError::SingularValueTie { .. })
        ));
    }

    #[test]
    fn congruence_preserves_vertex_feasibility() {
        // If X satisfies A X + X A' + BB' + eps X <= 0 at every vertex, then
        // T X T' satisfies the transformed family's inequality.
        use crate::gdreduce::controllability_problem;
        use crate::lmi::check;
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..5 {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let a = &m - DMatrix::identity(3, 3) * 2.5;
            let b = DMatrix::from_fn(3, 1, |_, _| rng.gen_range(-1.0..1.0));
            let plant = PlantModel::new(
                VectorField::Linear { a: a.clone() },
                b.clone(),
                DMatrix::identity(3, 3),
                0.01,
            )
            .unwrap();
            let verts = VertexSet::explicit(vec![a.clone()]);
            let g = crate::gdreduce::solve_gd_gramians(
                &plant,
                &verts,
                crate::gdreduce::GramianObjective::None,
                None,
                &crate::lmi::SolveOptions::default(),
            )
            .unwrap();
            let t = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0))
                + DMatrix::identity(3, 3) * 2.0;
            let (tp, tv) = transform_plant(&plant, &verts, &t).unwrap();
            let x_t = &t * &g.x * t.transpose();
            let problem = controllability_problem(&tp, &tv, None);
            let rep = check(&problem, &vec![x_t]).unwrap();
            assert!(rep.worst <= 1e-7, "transformed feasibility violated: {}", rep.worst);
        }
    }

    #[test]
    fn error_bound_arithmetic() {
        let sigma = DVector::from_column_slice(&[3.0, 2.0, 1.0]);
        assert_eq!(error_bound(&sigma, 1), 6.0);
        assert_eq!(error_bound(&sigma, 2), 2.0);
        assert_eq!(error_bound(&sigma, 3), 0.0);
    }

    #[test]
    fn balanced_field_vanishes_at_origin() {
        let plant = builtin_network_chain(4, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_spd(4, &mut rng);
        let y = random_spd(4, &mut rng);
        let bal = balance(&plant, &verts, &x, &y, BalancingKind::Gd).unwrap();
        assert!(bal.plant.field.eval(&DVector::zeros(4)).amax() < 1e-12);
    }

    use crate::lmi::kernels;
}
