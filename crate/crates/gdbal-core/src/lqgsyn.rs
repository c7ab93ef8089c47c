//! GD Riccati pairs, LQG balancing, coprime representations, observers, and
//! the observer-based dynamic stabilizing controller.

use crate::balancing::{self, BalanceError, BalancedRealization, BalancingKind};
use crate::lmi::kernels::{self, KernelError};
use crate::lmi::{
    self, AffineTerm, LmiConstraint, LmiError, LmiProblem, LmiVariable, SolveOptions, SolveStatus,
};
use crate::sysmodel::{PlantModel, VectorField, VertexSet};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LqgError {
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("GD {which} Riccati inequality solve did not reach feasibility: {reason}")]
    Infeasible { which: &'static str, reason: String },
    #[error(
        "Schur-form solution failed the quadratic recheck at vertex {vertex} \
         (violation {violation:.3e})"
    )]
    RecheckFailed { vertex: usize, violation: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Feasible solutions of the GD control and filter Riccati inequalities,
/// re-verified in the original quadratic forms at every vertex.
#[derive(Debug, Clone)]
pub struct RiccatiPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub epsilon: f64,
    /// Worst quadratic-form violation of the control inequality over vertices.
    pub p_violation: f64,
    /// Worst quadratic-form violation of the filter inequality over vertices.
    pub q_violation: f64,
    pub iterations: usize,
}

/// Where a controller came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    /// Observer-based stabilizing controller from a Riccati pair.
    Lqg,
    /// Reduced-order observer controller built from LQG-balanced blocks;
    /// stability with respect to the full plant is not certified.
    LqgReduced,
    /// Full-order disturbance-attenuation controller.
    HinfFull,
    /// Reduced-order disturbance-attenuation controller.
    HinfReduced,
}

/// State-space controller `dx_c/dt = f_c(x_c) + A_corr x_c + H y`,
/// `u = F x_c`, where `f_c` reuses the plant's drift (possibly in balanced
/// coordinates, possibly truncated).
#[derive(Debug, Clone)]
pub struct Controller {
    pub order: usize,
    pub field: VectorField,
    pub a_corr: DMatrix<f64>,
    pub input_map: DMatrix<f64>,
    pub output_gain: DMatrix<f64>,
    pub kind: ControllerKind,
    /// True when the construction's exponential-stability hypotheses held
    /// (epsilon > 0 and, for reduced controllers, the full condition list).
    pub ges_certified: bool,
}

impl Controller {
    /// Time derivative of the controller state given the current measurement.
    pub fn state_deriv(&self, xc: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.field.eval(xc) + &self.a_corr * xc + &self.input_map * y
    }

    pub fn control_output(&self, xc: &DVector<f64>) -> DVector<f64> {
        &self.output_gain * xc
    }
}

/// Quadratic-form evaluation of the control Riccati inequality at one vertex:
/// `P A + A' P - P B B' P + C'C + eps P`.
pub fn control_riccati_residual(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    plant: &PlantModel,
) -> DMatrix<f64> {
    let pb = p * &plant.b;
    p * a + a.transpose() * p - &pb * pb.transpose()
        + plant.c.transpose() * &plant.c
        + p * plant.epsilon
}

/// Quadratic-form evaluation of the filter Riccati inequality at one vertex:
/// `A Q + Q A' - Q C'C Q + B B' + eps Q`.
pub fn filter_riccati_residual(
    q: &DMatrix<f64>,
    a: &DMatrix<f64>,
    plant: &PlantModel,
) -> DMatrix<f64> {
    let qc = q * plant.c.transpose();
    a * q + q * a.transpose() - &qc * qc.transpose()
        + &plant.b * plant.b.transpose()
        + q * plant.epsilon
}

/// Schur-form problem for the inverse control variable `Ph = P^{-1}`:
/// `[A Ph + Ph A' - B B' + eps Ph, Ph C'; C Ph, -I] <= 0`, `Ph > 0`.
pub fn control_riccati_problem(plant: &PlantModel, vertices: &VertexSet) -> LmiProblem {
    riccati_schur_problem(
        "Ph",
        vertices,
        plant.n(),
        plant.epsilon,
        &[-(&plant.b * plant.b.transpose())],
        &plant.c,
        false,
    )
}

/// Schur-form problem for the inverse filter variable `Qh = Q^{-1}`:
/// `[Qh A + A' Qh - C'C + eps Qh, Qh B; B' Qh, -I] <= 0`, `Qh > 0`.
pub fn filter_riccati_problem(plant: &PlantModel, vertices: &VertexSet) -> LmiProblem {
    riccati_schur_problem(
        "Qh",
        vertices,
        plant.n(),
        plant.epsilon,
        &[-(plant.c.transpose() * &plant.c)],
        &plant.b.transpose(),
        true,
    )
}

/// Shared Schur-form construction. With `adjoint = false` the variable
/// multiplies the vertex from the left block-row (`A V + V A'`); with
/// `adjoint = true` the mirrored form (`V A + A' V`). `corners` holds the
/// constant top-left additions (one shared, or one per vertex) and `border`
/// the off-diagonal coefficient (`C` or `B'`), entering as `V border'`.
pub(crate) fn riccati_schur_problem(
    var: &str,
    vertices: &VertexSet,
    n: usize,
    epsilon: f64,
    corners: &[DMatrix<f64>],
    border: &DMatrix<f64>,
    adjoint: bool,
) -> LmiProblem {
    assert!(corners.len() == 1 || corners.len() == vertices.len());
    let k = border.nrows();
    let d = n + k;
    let eye = DMatrix::identity(n, n);
    // embeddings into the (n+k) block matrix
    let mut e1 = DMatrix::zeros(d, n);
    e1.view_mut((0, 0), (n, n)).copy_from(&eye);
    let mut e2 = DMatrix::zeros(d, k);
    e2.view_mut((n, 0), (k, k)).copy_from(&DMatrix::identity(k, k));

    let mut p = LmiProblem::new();
    p.add_variable(LmiVariable::matrix(var, n));
    for (i, a) in vertices.vertices.iter().enumerate() {
        let corner = if corners.len() == 1 { &corners[0] } else { &corners[i] };
        let mut constant = DMatrix::zeros(d, d);
        constant.view_mut((0, 0), (n, n)).copy_from(corner);
        constant
            .view_mut((n, n), (k, k))
            .copy_from(&(-DMatrix::<f64>::identity(k, k)));
        let diag_term = if adjoint {
            // e1 V (A e1') + transpose = e1 (V A + A' V) e1'
            AffineTerm::pair(var, e1.clone(), a * e1.transpose())
        } else {
            // (e1 A) V e1' + transpose = e1 (A V + V A') e1'
            AffineTerm::pair(var, &e1 * a, e1.transpose())
        };
        // e1 V border' e2' + transpose = [0, V border'; border V', 0]
        let border_term =
            AffineTerm::pair(var, e1.clone(), border.transpose() * e2.transpose());
        p.add_constraint(LmiConstraint::nsd(
            format!("vertex[{i}]"),
            constant,
            vec![
                diag_term,
                AffineTerm::pair(var, &e1 * (epsilon / 2.0), e1.transpose()),
                border_term,
            ],
            0.0,
        ));
    }
    p.add_constraint(LmiConstraint::psd(
        "positive-definite",
        DMatrix::zeros(n, n),
        vec![AffineTerm::pair(var, DMatrix::identity(n, n) * 0.5, DMatrix::identity(n, n))],
        1e-9,
    ));
    p
}

/// Solve both GD Riccati inequalities through their Schur-form LMIs in the
/// inverse variables and re-verify the quadratic forms at every vertex.
pub fn solve_gd_riccati(
    plant: &PlantModel,
    vertices: &VertexSet,
    options: &SolveOptions,
) -> Result<RiccatiPair, LqgError> {
    if vertices.dim() != plant.n() {
        return Err(LqgError::Dimension(format!(
            "vertex dimension {} vs state dimension {}",
            vertices.dim(),
            plant.n()
        )));
    }
    let pp = control_riccati_problem(plant, vertices);
    let psol = lmi::solve(&pp, options)?;
    let SolveStatus::Feasible = psol.status else {
        return Err(LqgError::Infeasible { which: "control", reason: status(&psol.status) });
    };
    let qp = filter_riccati_problem(plant, vertices);
    let qsol = lmi::solve(&qp, options)?;
    let SolveStatus::Feasible = qsol.status else {
        return Err(LqgError::Infeasible { which: "filter", reason: status(&qsol.status) });
    };
    let p = kernels::spd_inverse(&psol.assignment[0], "control Riccati inverse")?;
    let q = kernels::spd_inverse(&qsol.assignment[0], "filter Riccati inverse")?;

    let recheck_tol = 1e-7;
    let mut p_violation = f64::NEG_INFINITY;
    let mut q_violation = f64::NEG_INFINITY;
    for (i, a) in vertices.vertices.iter().enumerate() {
        let pv = kernels::lambda_max(&control_riccati_residual(&p, a, plant));
        let qv = kernels::lambda_max(&filter_riccati_residual(&q, a, plant));
        if pv > recheck_tol {
            return Err(LqgError::RecheckFailed { vertex: i, violation: pv });
        }
        if qv > recheck_tol {
            return Err(LqgError::RecheckFailed { vertex: i, violation: qv });
        }
        p_violation = p_violation.max(pv);
        q_violation = q_violation.max(qv);
    }
    Ok(RiccatiPair {
        p,
        q,
        epsilon: plant.epsilon,
        p_violation,
        q_violation,
        iterations: psol.iterations + qsol.iterations,
    })
}

fn status(s: &SolveStatus) -> String {
    match s {
        SolveStatus::Feasible => "feasible".into(),
        SolveStatus::InfeasibleCertified { witness, residual } => {
            format!("infeasible (witness {witness:.3e}, residual {residual:.3e})")
        }
        SolveStatus::Unknown { reason } => format!("unknown: {reason}"),
    }
}

/// Balance a plant against a Riccati pair. The filter solution transforms
/// covariance-like and the control solution cost-like, so the contragredient
/// runs on `(Q, P)`; the balanced values are `sqrt(eig(P Q))` either way.
pub fn lqg_balance(
    plant: &PlantModel,
    vertices: &VertexSet,
    pair: &RiccatiPair,
) -> Result<BalancedRealization, LqgError> {
    Ok(balancing::balance(plant, vertices, &pair.q, &pair.p, BalancingKind::Lqg)?)
}

/// Closed-loop representation driven by the feedback `u = -B'P x + v`: the
/// new input enters through `B`, outputs are `(y; u)`.
pub fn build_rcr(plant: &PlantModel, p: &DMatrix<f64>) -> PlantModel {
    let n = plant.n();
    let bt_p = plant.b.transpose() * p;
    let k = -(&plant.b * &bt_p);
    let mut c = DMatrix::zeros(plant.p() + plant.m(), n);
    c.view_mut((0, 0), (plant.p(), n)).copy_from(&plant.c);
    c.view_mut((plant.p(), 0), (plant.m(), n)).copy_from(&(-&bt_p));
    let mut out = plant.clone();
    out.field = VectorField::LinearCorrected { inner: Box::new(plant.field.clone()), k };
    out.c = c;
    out.output_shift = DVector::zeros(plant.p() + plant.m());
    out
}

/// Controllability/observability certificates of the closed-loop
/// representation: `((P + Q^{-1})^{-1}, P)`.
pub fn rcr_gramians(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), LqgError> {
    let qinv = kernels::spd_inverse(q, "rcr_gramians Q")?;
    let x = kernels::spd_inverse(&(p + qinv), "rcr_gramians P + Q^-1")?;
    Ok((x, p.clone()))
}

/// Observer-form representation: drift corrected by `-Q C'C`, inputs
/// `(u, y)` entering through `[B, Q C']`, output `C x` (the residual output
/// subtracts `y` through its feedthrough, which has no effect on dynamics).
pub fn build_lcr(plant: &PlantModel, q: &DMatrix<f64>) -> PlantModel {
    let n = plant.n();
    let qct = q * plant.c.transpose();
    let k = -(&qct * &plant.c);
    let mut b = DMatrix::zeros(n, plant.m() + plant.p());
    b.view_mut((0, 0), (n, plant.m())).copy_from(&plant.b);
    b.view_mut((0, plant.m()), (n, plant.p())).copy_from(&qct);
    let mut out = plant.clone();
    out.field = VectorField::LinearCorrected { inner: Box::new(plant.field.clone()), k };
    out.b = b;
    out
}

/// Certificates of the observer-form representation: `(Q, (Q + P^{-1})^{-1})`.
pub fn lcr_gramians(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), LqgError> {
    let pinv = kernels::spd_inverse(p, "lcr_gramians P")?;
    let y = kernels::spd_inverse(&(q + pinv), "lcr_gramians Q + P^-1")?;
    Ok((q.clone(), y))
}

/// State observer `dxh/dt = f(xh) - Q C'C xh + B u + Q C' y`, returned as a
/// plant with input `(u, y)`. Identical dynamics to the observer-form
/// representation.
pub fn build_observer(plant: &PlantModel, q: &DMatrix<f64>) -> PlantModel {
    build_lcr(plant, q)
}

/// Observer-based dynamic controller
/// `dx_c/dt = f(x_c) + B u - Q C'(C x_c - y)`, `u = -B'P x_c`.
pub fn build_lqg_controller(
    plant: &PlantModel,
    pair: &RiccatiPair,
) -> Result<Controller, LqgError> {
    let p = &pair.p;
    let q = &pair.q;
    if p.nrows() != plant.n() || q.nrows() != plant.n() {
        return Err(LqgError::Dimension("Riccati pair does not match plant".into()));
    }
    let bt_p = plant.b.transpose() * p;
    let qct = q * plant.c.transpose();
    let a_corr = -(&plant.b * &bt_p) - &qct * &plant.c;
    Ok(Controller {
        order: plant.n(),
        field: plant.field.clone(),
        a_corr,
        input_map: qct,
        output_gain: -bt_p,
        kind: ControllerKind::Lqg,
        ges_certified: plant.epsilon > 0.0,
    })
}

/// Reduced-order observer controller assembled from the leading blocks of an
/// LQG-balanced realization. Stabilizes the reduced model; stability with
/// respect to the full plant is NOT certified.
pub fn build_reduced_lqg_controller(
    balanced: &BalancedRealization,
    r: usize,
) -> Result<Controller, LqgError> {
    let reduced = balancing::truncate(balanced, r)?;
    let pi1 = DMatrix::from_diagonal(&balanced.sigma.rows(0, r).into_owned());
    let b1 = &reduced.plant.b;
    let c1 = &reduced.plant.c;
    let bt_pi = b1.transpose() * &pi1;
    let pict = &pi1 * c1.transpose();
    let a_corr = -(b1 * &bt_pi) - &pict * c1;
    Ok(Controller {
        order: r,
        field: reduced.plant.field.clone(),
        a_corr,
        input_map: pict,
        output_gain: -bt_pi,
        kind: ControllerKind::LqgReduced,
        ges_certified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::check;
    use crate::sysmodel::{build_vertices, builtin_dc_motor, VertexStrategy};
    use nalgebra::dmatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn scalar_plant(a: f64, eps: f64) -> PlantModel {
        PlantModel::new(
            VectorField::Linear { a: dmatrix![a] },
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn scalar_unstable_riccati_root() {
        // dx/dt = x + u, y = x: control Riccati equality root 2p - p^2 + 1 = 0
        // gives p = 1 + sqrt(2); the inequality accepts it at eps = 0.
        let plant = scalar_plant(1.0, 0.0);
        let verts = VertexSet::explicit(vec![dmatrix![1.0]]);
        let root = 1.0 + 2.0f64.sqrt();
        let res = control_riccati_residual(&dmatrix![root], &dmatrix![1.0], &plant);
        assert!(res[(0, 0)].abs() < 1e-12);
        let pair = solve_gd_riccati(&plant, &verts, &SolveOptions::default()).unwrap();
        assert!(pair.p[(0, 0)] >= root - 1e-6, "p = {}", pair.p[(0, 0)]);
        assert!(pair.p_violation <= 1e-7 && pair.q_violation <= 1e-7);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let plant = scalar_plant(-1.0, 0.01);
        let verts = VertexSet::explicit(vec![DMatrix::identity(2, 2)]);
        assert!(matches!(
            solve_gd_riccati(&plant, &verts, &SolveOptions::default()),
            Err(LqgError::Dimension(_))
        ));
    }

    #[test]
    fn dc_motor_riccati_pair_and_thm_gramian_formulas() {
        let plant = builtin_dc_motor(0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let pair = solve_gd_riccati(&plant, &verts, &SolveOptions::default()).unwrap();
        assert!(pair.p_violation <= 1e-7);
        assert!(pair.q_violation <= 1e-7);

        // Closed-loop representation certificate formulas, checker-verified
        // against the corrected vertex family A_i - B B' P.
        let rcr = build_rcr(&plant, &pair.p);
        let rcr_verts = VertexSet::explicit(
            verts
                .vertices
                .iter()
                .map(|a| a - &plant.b * (plant.b.transpose() * &pair.p))
                .collect(),
        );
        let (x_rcr, y_rcr) = rcr_gramians(&pair.p, &pair.q).unwrap();
        let xp = crate::gdreduce::controllability_problem(&rcr, &rcr_verts, None);
        let rep = check(&xp, &vec![x_rcr]).unwrap();
        assert!(rep.worst <= 1e-7, "RCR controllability: {}", rep.worst);
        let yp = crate::gdreduce::observability_problem(&rcr, &rcr_verts, None);
        let rep = check(&yp, &vec![y_rcr]).unwrap();
        assert!(rep.worst <= 1e-7, "RCR observability: {}", rep.worst);

        // Observer-form representation dually
        let lcr = build_lcr(&plant, &pair.q);
        let lcr_verts = VertexSet::explicit(
            verts
                .vertices
                .iter()
                .map(|a| a - &pair.q * (plant.c.transpose() * &plant.c))
                .collect(),
        );
        let (x_lcr, y_lcr) = lcr_gramians(&pair.p, &pair.q).unwrap();
        let xp = crate::gdreduce::controllability_problem(&lcr, &lcr_verts, None);
        let rep = check(&xp, &vec![x_lcr]).unwrap();
        assert!(rep.worst <= 1e-7, "LCR controllability: {}", rep.worst);
        let yp = crate::gdreduce::observability_problem(&lcr, &lcr_verts, None);
        let rep = check(&yp, &vec![y_lcr]).unwrap();
        assert!(rep.worst <= 1e-7, "LCR observability: {}", rep.worst);
    }

    #[test]
    fn rcr_identity_formula() {
        let (x, y) = rcr_gramians(&DMatrix::identity(3, 3), &DMatrix::identity(3, 3)).unwrap();
        assert!((x - DMatrix::identity(3, 3) * 0.5).norm() < 1e-12);
        assert!((y - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn random_feasible_pairs_pass_formula_checks() {
        // For random stable linear plants, the solved pair's closed-loop and
        // observer-form certificate formulas pass the checker.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..3 {
            let n = 3;
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let a = &m - DMatrix::identity(n, n) * 2.5;
            let b = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
            let c = DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
            let plant =
                PlantModel::new(VectorField::Linear { a: a.clone() }, b.clone(), c, 0.01)
                    .unwrap();
            let verts = VertexSet::explicit(vec![a.clone()]);
            let pair = match solve_gd_riccati(&plant, &verts, &SolveOptions::default()) {
                Ok(p) => p,
                Err(e) => panic!("trial {trial}: {e}"),
            };
            let rcr = build_rcr(&plant, &pair.p);
            let rcr_verts =
                VertexSet::explicit(vec![&a - &b * (b.transpose() * &pair.p)]);
            let (x_rcr, y_rcr) = rcr_gramians(&pair.p, &pair.q).unwrap();
            let xp = crate::gdreduce::controllability_problem(&rcr, &rcr_verts, None);
            assert!(check(&xp, &vec![x_rcr]).unwrap().worst <= 1e-7);
            let yp = crate::gdreduce::observability_problem(&rcr, &rcr_verts, None);
            assert!(check(&yp, &vec![y_rcr]).unwrap().worst <= 1e-7);
        }
    }

    #[test]
    fn gramians_are_riccati_feasible() {
        // A feasible GD Gramian pair satisfies the Riccati inequalities with
        // the roles swapped: X passes the filter form, Y the control form.
        let plant = crate::sysmodel::builtin_network_chain(4, 0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let g = crate::gdreduce::solve_gd_gramians(
            &plant,
            &verts,
            crate::gdreduce::GramianObjective::None,
            None,
            &SolveOptions::default(),
        )
        .unwrap();
        for a in &verts.vertices {
            let qv = kernels::lambda_max(&filter_riccati_residual(&g.x, a, &plant));
            assert!(qv <= 1e-7, "X fails filter form: {qv}");
            let pv = kernels::lambda_max(&control_riccati_residual(&g.y, a, &plant));
            assert!(pv <= 1e-7, "Y fails control form: {pv}");
        }
    }

    #[test]
    fn lqg_balanced_truncation_closure() {
        let plant = builtin_dc_motor(0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let pair = solve_gd_riccati(&plant, &verts, &SolveOptions::default()).unwrap();
        let bal = lqg_balance(&plant, &verts, &pair).unwrap();
        // balanced coordinates diagonalize both (within 1e-8 relative)
        let pi = DMatrix::from_diagonal(&bal.sigma);
        let p_bal = bal.t_inv.transpose() * &pair.p * &bal.t_inv;
        let q_bal = &bal.t * &pair.q * bal.t.transpose();
        assert!((&p_bal - &pi).norm() / pair.p.norm() <= 1e-8);
        assert!((&q_bal - &pi).norm() / pair.q.norm() <= 1e-8);
        // Pi_1 passes both reduced quadratic inequalities for admissible r
        for r in [1usize, 2] {
            if r < 3 && bal.sigma[r - 1] - bal.sigma[r] <= 1e-10 {
                continue;
            }
            let red = balancing::truncate(&bal, r).unwrap();
            let pi1 = DMatrix::from_diagonal(&bal.sigma.rows(0, r).into_owned());
            for a in &red.vertices.vertices {
                let pv = kernels::lambda_max(&control_riccati_residual(&pi1, a, &red.plant));
                let qv = kernels::lambda_max(&filter_riccati_residual(&pi1, a, &red.plant));
                assert!(pv <= 1e-7, "r={r}: reduced control form {pv}");
                assert!(qv <= 1e-7, "r={r}: reduced filter form {qv}");
            }
        }
    }

    #[test]
    fn controller_matrices_match_construction() {
        let plant = builtin_dc_motor(0.01).unwrap();
        let verts = build_vertices(&plant, VertexStrategy::OneAtATime, None).unwrap();
        let pair = solve_gd_riccati(&plant, &verts, &SolveOptions::default()).unwrap();
        let k = build_lqg_controller(&plant, &pair).unwrap();
        assert!(k.ges_certified);
        // u = -B'P xc; observer injection Q C'
        let xc = DVector::from_column_slice(&[0.2, -0.4, 1.0]);
        let y = DVector::from_column_slice(&[0.5, 0.1]);
        let u = k.control_output(&xc);
        let expect_u = -(plant.b.transpose() * &pair.p) * &xc;
        assert!((u - expect_u).amax() < 1e-12);
        let dxc = k.state_deriv(&xc, &y);
        let manual = plant.field.eval(&xc)
            + &plant.b * (-(plant.b.transpose() * &pair.p) * &xc)
            - (&pair.q * plant.c.transpose()) * (&plant.c * &xc - &y);
        assert!((dxc - manual).amax() < 1e-10);
        // eps = 0 pair: controller built but not certified
        let mut plant0 = plant.clone();
        plant0.epsilon = 0.0;
        let k0 = build_lqg_controller(&plant0, &pair).unwrap();
        assert!(!k0.ges_certified);
    }
}
