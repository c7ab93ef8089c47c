//! Disturbance-attenuation (H-infinity) certificates, full and reduced
//! controllers, order selection, gamma improvement, and condition reports.

use crate::balancing::{self, BalanceError, BalancedRealization, BalancingKind};
use crate::lmi::kernels::{self, KernelError};
use crate::lmi::{
    self, AffineTerm, LmiConstraint, LmiError, LmiProblem, LmiVariable, Objective, SolveOptions,
    SolveStatus,
};
use crate::lqgsyn::{riccati_schur_problem, Controller, ControllerKind};
use crate::sysmodel::{check_oddness, PlantModel, VertexSet};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HinfError {
    #[error("gamma must be > 1 (beta undefined at gamma = {0})")]
    GammaOutOfRange(f64),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Box<HinfError> },
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("{which} inequality solve did not reach feasibility: {reason}")]
    Infeasible { which: &'static str, reason: String },
    #[error("quadratic recheck failed at vertex {vertex} (violation {violation:.3e})")]
    RecheckFailed { vertex: usize, violation: f64 },
    #[error(
        "spectral condition gamma^2 > lambda_max(P Q) is violated \
         ({lambda_max:.4} >= {gamma_sq:.4}); pass the override flag to build anyway"
    )]
    SpectralViolated { lambda_max: f64, gamma_sq: f64 },
    #[error("observer gain matrix is singular")]
    GainSingular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("gamma improvement requires epsilon > 0")]
    EpsilonZero,
}

fn stage(name: &'static str, e: HinfError) -> HinfError {
    HinfError::Stage { stage: name, source: Box::new(e) }
}

/// beta = sqrt(1 - gamma^{-2}); requires gamma > 1.
pub fn beta_of(gamma: f64) -> Result<f64, HinfError> {
    if gamma <= 1.0 {
        return Err(HinfError::GammaOutOfRange(gamma));
    }
    Ok((1.0 - gamma.powi(-2)).sqrt())
}

/// How the residual bound entering the filter-side inequality is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RinfMode {
    /// One constant PSD matrix of minimal trace dominating every vertex
    /// residual. Simple, but over-conservative when residuals differ much
    /// across vertices.
    ConstantMinTrace,
    /// The exact per-vertex residual `-M_i`, which is the affine relaxation
    /// of the pointwise bound and is what convex combination reproduces at
    /// every state.
    #[default]
    PerVertex,
}

/// Objective used for the inverse-variable solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HinfObjective {
    /// Maximize the trace of the inverse variable (pushes the solution's
    /// inverse-trace down, but can leave one direction nearly singular).
    MaxTrace,
    /// Maximize the smallest eigenvalue of the inverse variable, i.e.
    /// minimize the largest eigenvalue of the solution. Keeps the spectral
    /// condition and the residual bounds as small as the family allows.
    #[default]
    MinLambdaMax,
    /// Plain feasibility.
    None,
}

/// Control-side residual `M_i = P A + A'P - b^2 P BB' P + C'C + eps P`.
pub fn hinf_control_residual(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    plant: &PlantModel,
    beta: f64,
) -> DMatrix<f64> {
    let pb = p * &plant.b;
    p * a + a.transpose() * p - (&pb * pb.transpose()) * (beta * beta)
        + plant.c.transpose() * &plant.c
        + p * plant.epsilon
}

/// Filter-side residual
/// `A Q + Q A' - b^2 Q C'C Q + BB' + eps Q + g^-2 Q R Q`.
pub fn hinf_filter_residual(
    q: &DMatrix<f64>,
    a: &DMatrix<f64>,
    plant: &PlantModel,
    gamma: f64,
    beta: f64,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let qc = q * plant.c.transpose();
    a * q + q * a.transpose() - (&qc * qc.transpose()) * (beta * beta)
        + &plant.b * plant.b.transpose()
        + q * plant.epsilon
        + (q * r * q) * gamma.powi(-2)
}

fn solve_inverse_variable(
    problem_base: LmiProblem,
    var: &str,
    n: usize,
    objective: HinfObjective,
    options: &SolveOptions,
    which: &'static str,
) -> Result<(DMatrix<f64>, usize), HinfError> {
    let mut problem = problem_base;
    match objective {
        HinfObjective::MaxTrace => {
            problem.objective = Objective::MaximizeTrace(var.to_string());
        }
        HinfObjective::MinLambdaMax => {
            // auxiliary scalar s with V >= s I, s >= 0, maximize s
            problem.add_variable(LmiVariable::scalar("s"));
            let eye = DMatrix::identity(n, n);
            let mut terms = vec![AffineTerm::pair(var, &eye * 0.5, eye.clone())];
            terms.extend(AffineTerm::scalar_times("s", -&eye));
            problem.add_constraint(LmiConstraint::psd("lambda-min-bound", DMatrix::zeros(n, n), terms, 0.0));
            problem.add_constraint(LmiConstraint::psd(
                "s-nonneg",
                DMatrix::zeros(1, 1),
                AffineTerm::scalar_times("s", DMatrix::identity(1, 1)),
                0.0,
            ));
            problem.objective = Objective::MaximizeTrace("s".to_string());
        }
        HinfObjective::None => {}
    }
    let sol = lmi::solve(&problem, options)?;
    let SolveStatus::Feasible = sol.status else {
        return Err(HinfError::Infeasible { which, reason: status(&sol.status) });
    };
    let idx = problem.var_index(var).expect("variable exists");
    let inv = kernels::spd_inverse(&sol.assignment[idx], "inverse-variable solve")?;
    Ok((inv, sol.iterations))
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

/// Solve the control-side inequality in the inverse variable and re-verify
/// the quadratic form at every vertex.
pub fn solve_pinf(
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    objective: HinfObjective,
    options: &SolveOptions,
) -> Result<DMatrix<f64>, HinfError> {
    let beta = beta_of(gamma)?;
    let n = plant.n();
    let corner = -(&plant.b * plant.b.transpose()) * (beta * beta);
    let problem = riccati_schur_problem("Ph", vertices, n, plant.epsilon, &[corner], &plant.c, false);
    let (p, _) = solve_inverse_variable(problem, "Ph", n, objective, options, "control")?;
    for (i, a) in vertices.vertices.iter().enumerate() {
        let v = kernels::lambda_max(&hinf_control_residual(&p, a, plant, beta));
        if v > 1e-6 {
            return Err(HinfError::RecheckFailed { vertex: i, violation: v });
        }
    }
    Ok(p)
}

/// Minimal-trace constant residual bound: `min trace R` subject to `R >= 0`
/// and `R >= -M_i` for every vertex residual `M_i` of `p_inf`. Always
/// feasible.
pub fn compute_rinf(
    p_inf: &DMatrix<f64>,
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    options: &SolveOptions,
) -> Result<DMatrix<f64>, HinfError> {
    let beta = beta_of(gamma)?;
    let n = plant.n();
    let eye = DMatrix::identity(n, n);
    let mut problem = LmiProblem::new();
    problem.add_variable(LmiVariable::matrix("R", n));
    problem.add_constraint(LmiConstraint::psd(
        "psd",
        DMatrix::zeros(n, n),
        vec![AffineTerm::pair("R", &eye * 0.5, eye.clone())],
        0.0,
    ));
    for (i, a) in vertices.vertices.iter().enumerate() {
        let m = hinf_control_residual(p_inf, a, plant, beta);
        problem.add_constraint(LmiConstraint::psd(
            format!("dominate[{i}]"),
            m,
            vec![AffineTerm::pair("R", &eye * 0.5, eye.clone())],
            0.0,
        ));
    }
    problem.objective = Objective::MinimizeTrace("R".into());
    let sol = lmi::solve(&problem, options)?;
    let SolveStatus::Feasible = sol.status else {
        return Err(HinfError::Infeasible { which: "residual bound", reason: status(&sol.status) });
    };
    Ok(kernels::symmetrize(&sol.assignment[0]))
}

/// Residual bounds for the filter inequality: one matrix per vertex (or a
/// single shared one).
pub fn rinf_terms(
    mode: RinfMode,
    p_inf: &DMatrix<f64>,
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    options: &SolveOptions,
) -> Result<Vec<DMatrix<f64>>, HinfError> {
    match mode {
        RinfMode::ConstantMinTrace => Ok(vec![compute_rinf(p_inf, plant, vertices, gamma, options)?]),
        RinfMode::PerVertex => {
            let beta = beta_of(gamma)?;
            Ok(vertices
                .vertices
                .iter()
                .map(|a| -hinf_control_residual(p_inf, a, plant, beta))
                .collect())
        }
    }
}

/// Solve the filter-side inequality in the inverse variable, with the given
/// residual bounds, and re-verify the quadratic form at every vertex.
pub fn solve_qinf(
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    rinf: &[DMatrix<f64>],
    objective: HinfObjective,
    options: &SolveOptions,
) -> Result<DMatrix<f64>, HinfError> {
    let beta = beta_of(gamma)?;
    let n = plant.n();
    if !(rinf.len() == 1 || rinf.len() == vertices.len()) {
        return Err(HinfError::Dimension(format!(
            "{} residual bounds for {} vertices",
            rinf.len(),
            vertices.len()
        )));
    }
    let ctc = plant.c.transpose() * &plant.c;
    let corners: Vec<DMatrix<f64>> = (0..vertices.len())
        .map(|i| {
            let r = if rinf.len() == 1 { &rinf[0] } else { &rinf[i] };
            -&ctc * (beta * beta) + r * gamma.powi(-2)
        })
        .collect();
    let problem = riccati_schur_problem(
        "Qh",
        vertices,
        n,
        plant.epsilon,
        &corners,
        &plant.b.transpose(),
        true,
    );
    let (q, _) = solve_inverse_variable(problem, "Qh", n, objective, options, "filter")?;
    for (i, a) in vertices.vertices.iter().enumerate() {
        let r = if rinf.len() == 1 { &rinf[0] } else { &rinf[i] };
        let v = kernels::lambda_max(&hinf_filter_residual(&q, a, plant, gamma, beta, r));
        if v > 1e-6 {
            return Err(HinfError::RecheckFailed { vertex: i, violation: v });
        }
    }
    Ok(q)
}

/// A complete certificate for the disturbance-attenuation design at a given
/// gamma, with checker-verified residuals and the honest spectral-condition
/// status.
#[derive(Debug, Clone)]
pub struct HinfCertificate {
    pub gamma: f64,
    pub beta: f64,
    pub p_inf: DMatrix<f64>,
    pub q_inf: DMatrix<f64>,
    /// Residual bounds (one shared or one per vertex) used on the filter side.
    pub r_inf: Vec<DMatrix<f64>>,
    pub r_mode: RinfMode,
    pub lambda_max_pq: f64,
    /// True iff `gamma^2 > lambda_max(P Q)`.
    pub spectral_ok: bool,
    /// Balanced values: `sqrt(eig(P Q))`, descending.
    pub pi: DVector<f64>,
    /// Worst control-side quadratic violation over vertices.
    pub p_violation: f64,
    /// Worst filter-side quadratic violation over vertices.
    pub q_violation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub pinf_objective: HinfObjective,
    pub qinf_objective: HinfObjective,
    pub rinf_mode: RinfMode,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            pinf_objective: HinfObjective::MinLambdaMax,
            qinf_objective: HinfObjective::MinLambdaMax,
            rinf_mode: RinfMode::PerVertex,
        }
    }
}

/// Full certification chain: control solve, residual bounds, filter solve,
/// spectral condition, balanced values. Stage failures carry the stage name.
pub fn certify(
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    copts: &CertifyOptions,
    options: &SolveOptions,
) -> Result<HinfCertificate, HinfError> {
    let p_inf = solve_pinf(plant, vertices, gamma, copts.pinf_objective, options)
        .map_err(|e| stage("solve_pinf", e))?;
    let r_inf = rinf_terms(copts.rinf_mode, &p_inf, plant, vertices, gamma, options)
        .map_err(|e| stage("compute_rinf", e))?;
    let q_inf = solve_qinf(plant, vertices, gamma, &r_inf, copts.qinf_objective, options)
        .map_err(|e| stage("solve_qinf", e))?;
    assemble_certificate(plant, vertices, gamma, p_inf, q_inf, r_inf, copts.rinf_mode)
        .map_err(|e| stage("assemble", e))
}

/// Build a certificate record from externally supplied solutions (for
/// replication runs); residual violations are measured and reported honestly
/// rather than enforced.
pub fn certificate_from_solutions(
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    p_inf: DMatrix<f64>,
    q_inf: DMatrix<f64>,
    rinf_mode: RinfMode,
    options: &SolveOptions,
) -> Result<HinfCertificate, HinfError> {
    let r_inf = rinf_terms(rinf_mode, &p_inf, plant, vertices, gamma, options)?;
    assemble_certificate(plant, vertices, gamma, p_inf, q_inf, r_inf, rinf_mode)
}

fn assemble_certificate(
    plant: &PlantModel,
    vertices: &VertexSet,
    gamma: f64,
    p_inf: DMatrix<f64>,
    q_inf: DMatrix<f64>,
    r_inf: Vec<DMatrix<f64>>,
    r_mode: RinfMode,
) -> Result<HinfCertificate, HinfError> {
    let beta = beta_of(gamma)?;
    let mut p_violation = f64::NEG_INFINITY;
    let mut q_violation = f64::NEG_INFINITY;
    for (i, a) in vertices.vertices.iter().enumerate() {
        p_violation =
            p_violation.max(kernels::lambda_max(&hinf_control_residual(&p_inf, a, plant, beta)));
        let r = if r_inf.len() == 1 { &r_inf[0] } else { &r_inf[i] };
        q_violation = q_violation
            .max(kernels::lambda_max(&hinf_filter_residual(&q_inf, a, plant, gamma, beta, r)));
    }
    let lambda_max_pq = kernels::lambda_max_spd_product(&p_inf, &q_inf)?;
    let (_, _, pi) = balancing::contragredient(&q_inf, &p_inf)?;
    Ok(HinfCertificate {
        gamma,
        beta,
        p_inf,
        q_inf,
        r_inf,
        r_mode,
        lambda_max_pq,
        spectral_ok: gamma * gamma > lambda_max_pq,
        pi,
        p_violation,
        q_violation,
    })
}

/// Full-order controller
/// `dx_c/dt = f(x_c) - b^2 B B'P x_c - (Q^{-1} - g^{-2} P)^{-1} C'(C x_c - y)`,
/// `u = -B'P x_c`. Requires the spectral condition unless `override_spectral`.
pub fn synthesize_controller(
    plant: &PlantModel,
    cert: &HinfCertificate,
    override_spectral: bool,
) -> Result<Controller, HinfError> {
    if !cert.spectral_ok && !override_spectral {
        return Err(HinfError::SpectralViolated {
            lambda_max: cert.lambda_max_pq,
            gamma_sq: cert.gamma * cert.gamma,
        });
    }
    let qinv = kernels::spd_inverse(&cert.q_inf, "controller observer gain")?;
    let w = qinv - &cert.p_inf * cert.gamma.powi(-2);
    let l = kernels::lu_solve(&w, &plant.c.transpose())
        .map_err(|_| HinfError::GainSingular)?;
    let btp = plant.b.transpose() * &cert.p_inf;
    let a_corr = -(&plant.b * &btp) * (cert.beta * cert.beta) - &l * &plant.c;
    Ok(Controller {
        order: plant.n(),
        field: plant.field.clone(),
        a_corr,
        input_map: l,
        output_gain: -btp,
        kind: ControllerKind::HinfFull,
        ges_certified: plant.epsilon > 0.0 && cert.spectral_ok,
    })
}

/// Weighted tail sum controlling reduced-controller certification:
/// `rho_r = 2 sum_{i>r} beta pi_i / sqrt(1 + beta^2 pi_i^2)`.
pub fn rho(pi: &DVector<f64>, r: usize, beta: f64) -> f64 {
    2.0 * pi
        .iter()
        .skip(r)
        .map(|&p| beta * p / (1.0 + beta * beta * p * p).sqrt())
        .sum::<f64>()
}

/// Result of scanning for the smallest certifiable reduced order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSelection {
    pub r: usize,
    /// False when no `r < n` satisfies the condition and `r = n` is returned.
    pub satisfied_below_full: bool,
    pub rho_r: f64,
}

/// Smallest `r` with `rho_r (1 + gamma/beta) < 1`.
pub fn select_order(pi: &DVector<f64>, gamma: f64) -> Result<OrderSelection, HinfError> {
    let beta = beta_of(gamma)?;
    let n = pi.len();
    let factor = 1.0 + gamma / beta;
    for r in 1..n {
        let rr = rho(pi, r, beta);
        if rr * factor < 1.0 {
            return Ok(OrderSelection { r, satisfied_below_full: true, rho_r: rr });
        }
    }
    Ok(OrderSelection { r: n, satisfied_below_full: false, rho_r: 0.0 })
}

/// Per-hypothesis report for a reduced-order controller.
#[derive(Debug, Clone)]
pub struct ReductionReport {
    pub r: usize,
    /// Certificate feasibility and the spectral condition (honest status of
    /// the hardest part of hypothesis I).
    pub spectral_ok: bool,
    pub p_violation: f64,
    pub q_violation: f64,
    /// Gap hypothesis `pi_r > pi_{r+1}`.
    pub gap_ok: bool,
    /// Odd-drift hypothesis.
    pub odd_ok: bool,
    pub odd_residual: f64,
    /// Tail-sum hypothesis `rho_r (1 + gamma/beta) < 1`.
    pub rho_ok: bool,
    pub rho_r: f64,
    pub rho_threshold: f64,
    /// Closed-loop gain bound `beta^{-1}(beta gamma + rho_r(gamma+beta)) /
    /// (beta - rho_r(gamma+beta))` when the denominator is positive.
    pub gain_bound: Option<f64>,
    /// All hypotheses hold and epsilon > 0.
    pub ges_certified: bool,
}

/// Build the reduced-order controller from the balanced leading blocks and
/// report every certification hypothesis.
pub fn reduce_controller(
    plant: &PlantModel,
    vertices: &VertexSet,
    cert: &HinfCertificate,
    r: usize,
    override_spectral: bool,
    seed: u64,
) -> Result<(Controller, ReductionReport, BalancedRealization), HinfError> {
    if !cert.spectral_ok && !override_spectral {
        return Err(HinfError::SpectralViolated {
            lambda_max: cert.lambda_max_pq,
            gamma_sq: cert.gamma * cert.gamma,
        });
    }
    let balanced = hinf_balance(plant, vertices, cert)?;
    let reduced = balancing::truncate(&balanced, r)?;
    let pi1 = DMatrix::from_diagonal(&balanced.sigma.rows(0, r).into_owned());
    let b1 = &reduced.plant.b;
    let c1 = &reduced.plant.c;
    // observer gain (Pi_1^{-1} - g^{-2} Pi_1)^{-1} C_1' is diagonal-weighted
    let mut wdiag = DVector::zeros(r);
    for i in 0..r {
        let pii = balanced.sigma[i];
        let w = 1.0 / pii - pii / (cert.gamma * cert.gamma);
        if w.abs() < 1e-12 {
            return Err(HinfError::GainSingular);
        }
        wdiag[i] = 1.0 / w;
    }
    let l = DMatrix::from_diagonal(&wdiag) * c1.transpose();
    let btpi = b1.transpose() * &pi1;
    let a_corr = -(b1 * &btpi) * (cert.beta * cert.beta) - &l * c1;

    let oddness = check_oddness(plant, 200, 10.0, seed);
    let gap_ok = r == plant.n()
        || balanced.sigma[r - 1] - balanced.sigma[r] > 1e-10;
    let rho_r = rho(&balanced.sigma, r, cert.beta);
    let rho_threshold = rho_r * (1.0 + cert.gamma / cert.beta);
    let rho_ok = rho_threshold < 1.0;
    let denom = cert.beta - rho_r * (cert.gamma + cert.beta);
    let gain_bound = if denom > 0.0 {
        Some((cert.beta * cert.gamma + rho_r * (cert.gamma + cert.beta)) / (cert.beta * denom))
    } else {
        None
    };
    let recheck_tol = 1e-6;
    let hyps_ok = cert.spectral_ok
        && cert.p_violation <= recheck_tol
        && cert.q_violation <= recheck_tol
        && gap_ok
        && oddness.pass
        && rho_ok;
    let report = ReductionReport {
        r,
        spectral_ok: cert.spectral_ok,
        p_violation: cert.p_violation,
        q_violation: cert.q_violation,
        gap_ok,
        odd_ok: oddness.pass,
        odd_residual: oddness.max_residual,
        rho_ok,
        rho_r,
        rho_threshold,
        gain_bound,
        ges_certified: hyps_ok && plant.epsilon > 0.0,
    };
    let controller = Controller {
        order: r,
        field: reduced.plant.field.clone(),
        a_corr,
        input_map: l,
        output_gain: -btpi,
        kind: ControllerKind::HinfReduced,
        ges_certified: report.ges_certified,
    };
    Ok((controller, report, balanced))
}

/// Balance a plant against a certificate pair (`Q` covariance-like, `P`
/// cost-like).
pub fn hinf_balance(
    plant: &PlantModel,
    vertices: &VertexSet,
    cert: &HinfCertificate,
) -> Result<BalancedRealization, HinfError> {
    Ok(balancing::balance(plant, vertices, &cert.q_inf, &cert.p_inf, BalancingKind::Hinf)?)
}

/// Result of the gamma-improvement search.
#[derive(Debug, Clone)]
pub struct GammaImprovement {
    pub alpha: f64,
    pub eps2: f64,
    pub gamma_bar: f64,
    /// False when the maximal alpha is numerically zero (gamma unchanged).
    pub improved: bool,
}

/// Maximize `alpha` subject to
/// `alpha P BB' P <= eps2 P`, `alpha Q C'C Q <= eps2 Q`,
/// `alpha <= beta^2 - delta`, `2 eps2 <= eps - delta`, producing
/// `gamma_bar = gamma / sqrt(1 + alpha gamma^2)`.
pub fn improve_gamma(
    plant: &PlantModel,
    cert: &HinfCertificate,
    options: &SolveOptions,
) -> Result<GammaImprovement, HinfError> {
    if plant.epsilon <= 0.0 {
        return Err(HinfError::EpsilonZero);
    }
    let delta = 1e-9;
    let beta_sq = cert.beta * cert.beta;
    let pb = &cert.p_inf * &plant.b;
    let pbbp = &pb * pb.transpose();
    let qc = &cert.q_inf * plant.c.transpose();
    let qccq = &qc * qc.transpose();

    let mut problem = LmiProblem::new();
    problem.add_variable(LmiVariable::scalar("alpha"));
    problem.add_variable(LmiVariable::scalar("eps2"));
    let mut t1 = AffineTerm::scalar_times("alpha", pbbp);
    t1.extend(AffineTerm::scalar_times("eps2", -&cert.p_inf));
    problem.add_constraint(LmiConstraint::nsd(
        "input-energy",
        DMatrix::zeros(plant.n(), plant.n()),
        t1,
        0.0,
    ));
    let mut t2 = AffineTerm::scalar_times("alpha", qccq);
    t2.extend(AffineTerm::scalar_times("eps2", -&cert.q_inf));
    problem.add_constraint(LmiConstraint::nsd(
        "output-energy",
        DMatrix::zeros(plant.n(), plant.n()),
        t2,
        0.0,
    ));
    problem.add_constraint(LmiConstraint::nsd(
        "alpha-cap",
        DMatrix::from_element(1, 1, -(beta_sq - delta)),
        AffineTerm::scalar_times("alpha", DMatrix::identity(1, 1)),
        0.0,
    ));
    problem.add_constraint(LmiConstraint::nsd(
        "eps2-cap",
        DMatrix::from_element(1, 1, -(plant.epsilon - delta)),
        AffineTerm::scalar_times("eps2", DMatrix::from_element(1, 1, 2.0)),
        0.0,
    ));
    problem.add_constraint(LmiConstraint::psd(
        "alpha-nonneg",
        DMatrix::zeros(1, 1),
        AffineTerm::scalar_times("alpha", DMatrix::identity(1, 1)),
        0.0,
    ));
    problem.add_constraint(LmiConstraint::psd(
        "eps2-nonneg",
        DMatrix::zeros(1, 1),
        AffineTerm::scalar_times("eps2", DMatrix::identity(1, 1)),
        0.0,
    ));
    let sol = lmi::maximize_trace(&problem, "alpha", options)?;
    let SolveStatus::Feasible = sol.status else {
        return Err(HinfError::Infeasible {
            which: "gamma improvement",
            reason: status(&sol.status),
        });
    };
    let alpha = sol.assignment[0][(0, 0)].max(0.0);
    let eps2 = sol.assignment[1][(0, 0)].max(0.0);
    let improved = alpha > 1e-12;
    let gamma_bar = if improved {
        cert.gamma / (1.0 + alpha * cert.gamma * cert.gamma).sqrt()
    } else {
        cert.gamma
    };
    Ok(GammaImprovement { alpha, eps2, gamma_bar, improved })
}
