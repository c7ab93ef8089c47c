//! Cross-checks of the LMI machinery against dense Lyapunov/Riccati equation
//! solutions on random linear systems, plus balanced values against classical
//! Hankel singular values.

mod common;

use common::{care_dense, lyapunov_dense, random_hurwitz, random_matrix};
use gdbal_core::balancing::contragredient;
use gdbal_core::gdreduce::{controllability_problem, observability_problem};
use gdbal_core::lmi::{check, kernels};
use gdbal_core::lqgsyn::{control_riccati_residual, filter_riccati_residual};
use gdbal_core::sysmodel::{PlantModel, VectorField, VertexSet};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn linear_plant(a: &DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, eps: f64) -> PlantModel {
    PlantModel::new(VectorField::Linear { a: a.clone() }, b, c, eps).unwrap()
}

#[test]
fn lyapunov_solutions_accepted_by_checker() {
    // For random stable A (n <= 5) with eps = 0, the exact Gramian-equation
    // solutions satisfy the inequality constraints at violation <= 1e-8.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for n in 2..=5usize {
        for _ in 0..3 {
            let a = random_hurwitz(n, 0.3, &mut rng);
            let b = random_matrix(n, 2, &mut rng);
            let c = random_matrix(1, n, &mut rng);
            let plant = linear_plant(&a, b.clone(), c.clone(), 0.0);
            let verts = VertexSet::explicit(vec![a.clone()]);

            let x_exact = lyapunov_dense(&a, &(&b * b.transpose()));
            let xp = controllability_problem(&plant, &verts, None);
            let rep = check(&xp, &vec![x_exact.clone()]).unwrap();
            assert!(rep.worst <= 1e-8, "n={n}: controllability violation {}", rep.worst);

            let y_exact = lyapunov_dense(&a.transpose(), &(c.transpose() * &c));
            let yp = observability_problem(&plant, &verts, None);
            let rep = check(&yp, &vec![y_exact.clone()]).unwrap();
            assert!(rep.worst <= 1e-8, "n={n}: observability violation {}", rep.worst);

            // contragredient of the exact pair reproduces the classical
            // Hankel singular values sqrt(eig(X Y)).
            let (_, _, sigma) = contragredient(&x_exact, &y_exact).unwrap();
            let xh = kernels::spd_sqrt(&x_exact, "oracle").unwrap();
            let (eigs, _) = kernels::sym_eigen(&(&xh * &y_exact * &xh));
            for k in 0..n {
                let hsv = eigs[k].max(0.0).sqrt();
                assert!(
                    (sigma[k] - hsv).abs() <= 1e-8 * hsv.max(1e-12),
                    "n={n} k={k}: {} vs {hsv}",
                    sigma[k]
                );
            }
        }
    }
}

#[test]
fn riccati_equation_roots_accepted_by_checker() {
    // Kleinman solutions of the control/filter Riccati equations satisfy the
    // corresponding inequalities with eps = 0 at violation <= 1e-8.
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for n in 2..=5usize {
        let a = random_hurwitz(n, 0.3, &mut rng);
        let b = random_matrix(n, 1, &mut rng);
        let c = random_matrix(2, n, &mut rng);
        let plant = linear_plant(&a, b.clone(), c.clone(), 0.0);

        let p_exact = care_dense(&a, &b, &(c.transpose() * &c));
        let pv = kernels::lambda_max(&control_riccati_residual(&p_exact, &a, &plant));
        assert!(pv <= 1e-8, "n={n}: control residual {pv}");

        // filter equation = control equation on the dual system
        let q_exact = care_dense(&a.transpose(), &c.transpose(), &(&b * b.transpose()));
        let qv = kernels::lambda_max(&filter_riccati_residual(&q_exact, &a, &plant));
        assert!(qv <= 1e-8, "n={n}: filter residual {qv}");
    }
}

#[test]
fn polytopic_random_systems_solve_and_recheck() {
    // Random stable systems with a small vertex spread: both Gramians and
    // the Riccati pair solve, and every output is checker-verified.
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for n in 3..=6usize {
        let a = random_hurwitz(n, 0.6, &mut rng);
        let e = random_matrix(n, n, &mut rng) * 0.05;
        let b = random_matrix(n, 1, &mut rng);
        let c = random_matrix(1, n, &mut rng);
        let plant = linear_plant(&a, b, c, 0.01);
        let verts = VertexSet::explicit(vec![a.clone(), &a + &e, &a - &e]);
        let g = gdbal_core::gdreduce::solve_gd_gramians(
            &plant,
            &verts,
            gdbal_core::gdreduce::GramianObjective::MinTraceBoth,
            None,
            &gdbal_core::lmi::SolveOptions::default(),
        )
        .unwrap_or_else(|err| panic!("n={n} gramians: {err}"));
        assert!(g.x_violation <= 0.0 && g.y_violation <= 0.0);
        let pair = gdbal_core::lqgsyn::solve_gd_riccati(
            &plant,
            &verts,
            &gdbal_core::lmi::SolveOptions::default(),
        )
        .unwrap_or_else(|err| panic!("n={n} riccati: {err}"));
        assert!(pair.p_violation <= 1e-7 && pair.q_violation <= 1e-7);
    }
}

#[test]
fn solver_feasible_set_contains_exact_gramian() {
    // The exact Lyapunov solution is feasible, so the solver must also reach
    // feasibility on the same problem; its output is checker-verified.
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n = 4;
    let a = random_hurwitz(n, 0.4, &mut rng);
    let b = random_matrix(n, 1, &mut rng);
    let c = random_matrix(1, n, &mut rng);
    let plant = linear_plant(&a, b, c, 0.0);
    let verts = VertexSet::explicit(vec![a.clone()]);
    let g = gdbal_core::gdreduce::solve_gd_gramians(
        &plant,
        &verts,
        gdbal_core::gdreduce::GramianObjective::None,
        None,
        &gdbal_core::lmi::SolveOptions::default(),
    )
    .unwrap();
    assert!(g.x_violation <= 0.0);
    assert!(g.y_violation <= 0.0);
}
