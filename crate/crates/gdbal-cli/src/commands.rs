//! The six job commands. Each validates the configuration, writes the
//! effective config alongside its outputs, and reports checker violations
//! and hypothesis status rather than bare claims.

use crate::config::{matrix_from, matrix_to, JobConfig, OrderSpec, SignalSpec};
use crate::report::{write_matrix_csv, write_table_csv, Report};
use anyhow::{anyhow, bail, Context, Result};
use gdbal_core::gdreduce::{gd_reduce, solve_gd_gramians, BoundStatus, GdError, GdReduction};
use gdbal_core::hinfsyn::{
    certify, certificate_from_solutions, improve_gamma, reduce_controller, select_order,
    synthesize_controller, CertifyOptions, HinfCertificate, HinfError,
};
use gdbal_core::lmi::kernels;
use gdbal_core::lqgsyn::{
    build_lcr, build_lqg_controller, build_rcr, lcr_gramians, lqg_balance, rcr_gramians,
    solve_gd_riccati, Controller, LqgError,
};
use gdbal_core::sim::{
    integrate, simulate_closed_loop, verify_error_bound, verify_gain, verify_ges, verify_ies,
    verify_observability_decay, Signal, Trajectory, VerifyReport,
};
use gdbal_core::sysmodel::{check_oddness, PlantModel, VertexSet, VectorField};
use gdbal_core::nalgebra::DVector;
use std::path::{Path, PathBuf};

/// Process outcome, mapped to the exit code by `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
    Infeasible,
}

pub struct Job {
    pub config: JobConfig,
    pub out: PathBuf,
}

impl Job {
    pub fn prepare(config: JobConfig, out: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        let effective = serde_json::to_string_pretty(&config)?;
        std::fs::write(out.join("effective_config.json"), effective + "\n")?;
        Ok(Job { config, out })
    }

    fn plant_and_vertices(&self) -> Result<(PlantModel, VertexSet)> {
        let plant = self.config.build_plant()?;
        let vertices = self.config.build_vertices(&plant)?;
        Ok((plant, vertices))
    }
}

fn is_infeasible_gd(e: &GdError) -> bool {
    matches!(e, GdError::Infeasible { .. })
}

fn is_infeasible_lqg(e: &LqgError) -> bool {
    matches!(e, LqgError::Infeasible { .. })
}

fn is_infeasible_hinf(e: &HinfError) -> bool {
    match e {
        HinfError::Infeasible { .. } => true,
        HinfError::Stage { source, .. } => is_infeasible_hinf(source),
        _ => false,
    }
}

fn field_json(field: &VectorField) -> serde_json::Value {
    match field {
        VectorField::Expr { exprs, .. } => serde_json::json!({
            "expressions": exprs.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        }),
        VectorField::Linear { a } => serde_json::json!({ "linear": matrix_to(a) }),
        VectorField::Transformed { inner, t, .. } => {
            let mut v = field_json(inner);
            v["transform"] = serde_json::json!(matrix_to(t));
            v
        }
        VectorField::Truncated { inner, r } => {
            let mut v = field_json(inner);
            v["truncated_to"] = serde_json::json!(r);
            v
        }
        VectorField::LinearCorrected { inner, k } => {
            let mut v = field_json(inner);
            v["linear_correction"] = serde_json::json!(matrix_to(k));
            v
        }
    }
}

fn write_controller(path: &Path, k: &Controller) -> Result<()> {
    let body = serde_json::json!({
        "order": k.order,
        "kind": format!("{:?}", k.kind),
        "ges_certified": k.ges_certified,
        "a_corr": matrix_to(&k.a_corr),
        "input_map": matrix_to(&k.input_map),
        "output_gain": matrix_to(&k.output_gain),
        "state_field": field_json(&k.field),
    });
    std::fs::write(path, serde_json::to_string_pretty(&body)? + "\n")?;
    Ok(())
}

fn push_verify(report: &mut Report, rep: &VerifyReport, all_pass: &mut bool) {
    let s = report.section(&format!("verify.{}", rep.name));
    s.flag("pass", rep.pass)
        .int("trials", rep.trials as i64)
        .num("worst_margin", rep.worst_margin)
        .text("detail", rep.detail.trim());
    *all_pass &= rep.pass;
}

// ---- gramians ----

pub fn cmd_gramians(job: &Job) -> Result<Outcome> {
    let (plant, vertices) = job.plant_and_vertices()?;
    let mut report = Report::new("gramians", job.config.seed);
    let sec = report.section("vertices");
    sec.int("count", vertices.len() as i64)
        .flag("sound", vertices.sound)
        .text("strategy", format!("{:?}", vertices.strategy));
    match solve_gd_gramians(
        &plant,
        &vertices,
        job.config.gramian_objective(),
        job.config.blocks(),
        &job.config.solve_options(),
    ) {
        Ok(g) => {
            write_matrix_csv(&job.out.join("X.csv"), &g.x)?;
            write_matrix_csv(&job.out.join("Y.csv"), &g.y)?;
            let (ex, _) = kernels::sym_eigen(&g.x);
            let (ey, _) = kernels::sym_eigen(&g.y);
            let rows: Vec<Vec<f64>> = (0..plant.n())
                .map(|k| vec![(k + 1) as f64, ex[k], ey[k]])
                .collect();
            write_table_csv(&job.out.join("eigenvalues.csv"), &["k", "eig_x", "eig_y"], &rows)?;
            let sec = report.section("gramians");
            sec.flag("feasible", true)
                .num("epsilon", g.epsilon)
                .num("x_checker_violation", g.x_violation)
                .num("y_checker_violation", g.y_violation)
                .int("newton_iterations", g.iterations as i64)
                .vector("eigenvalues_x", &ex)
                .vector("eigenvalues_y", &ey);
            for w in &g.warnings {
                report.section("warnings").text("warning", w);
            }
            report.write(&job.out)?;
            Ok(Outcome::Success)
        }
        Err(e) if is_infeasible_gd(&e) => {
            report.outcome = "infeasible".into();
            report.section("gramians").flag("feasible", false).text("reason", e.to_string());
            report.write(&job.out)?;
            Ok(Outcome::Infeasible)
        }
        Err(e) => Err(e.into()),
    }
}

// ---- reduce ----

fn run_reduction(job: &Job, plant: &PlantModel, vertices: &VertexSet) -> Result<GdReduction> {
    let spec = job
        .config
        .reduction
        .as_ref()
        .ok_or_else(|| anyhow!("`reduction` section required for this command"))?;
    let opts = job.config.solve_options();
    let objective = job.config.gramian_objective();
    match &spec.order {
        OrderSpec::Fixed(r) => Ok(gd_reduce(plant, vertices, *r, objective, &opts)?),
        OrderSpec::Auto(tag) if tag == "auto" => {
            let threshold = spec
                .threshold
                .ok_or_else(|| anyhow!("auto order selection requires `threshold`"))?;
            // full-order solve once to read the spectrum, then pick the
            // smallest admissible order under the threshold
            let probe = gd_reduce(plant, vertices, plant.n(), objective, &opts)?;
            let sigma = probe.balanced.sigma.clone();
            let n = plant.n();
            let mut chosen = None;
            for r in 1..n {
                let bound = gdbal_core::balancing::error_bound(&sigma, r);
                let gap_ok = sigma[r - 1] - sigma[r] > 1e-10;
                if bound <= threshold && gap_ok {
                    chosen = Some(r);
                    break;
                }
            }
            let r = chosen.ok_or_else(|| {
                anyhow!("no order below {n} meets the bound threshold {threshold}")
            })?;
            Ok(gd_reduce(plant, vertices, r, objective, &opts)?)
        }
        OrderSpec::Auto(other) => bail!("unknown order spec `{other}`"),
    }
}

pub fn cmd_reduce(job: &Job) -> Result<Outcome> {
    let (plant, vertices) = job.plant_and_vertices()?;
    let mut report = Report::new("reduce", job.config.seed);
    let red = match run_reduction(job, &plant, &vertices) {
        Ok(r) => r,
        Err(e) => {
            if let Some(ge) = e.downcast_ref::<GdError>() {
                if is_infeasible_gd(ge) {
                    report.outcome = "infeasible".into();
                    report.section("reduce").text("reason", ge.to_string());
                    report.write(&job.out)?;
                    return Ok(Outcome::Infeasible);
                }
            }
            return Err(e);
        }
    };
    let sigma = &red.balanced.sigma;
    let rows: Vec<Vec<f64>> = (0..plant.n())
        .map(|k| vec![(k + 1) as f64, sigma[k]])
        .collect();
    write_table_csv(&job.out.join("sigma.csv"), &["k", "sigma"], &rows)?;
    let rows: Vec<Vec<f64>> = (1..plant.n())
        .map(|r| {
            vec![
                r as f64,
                gdbal_core::balancing::error_bound(sigma, r),
                f64::from(u8::from(sigma[r - 1] - sigma[r] > 1e-10)),
            ]
        })
        .collect();
    write_table_csv(&job.out.join("bounds.csv"), &["r", "bound", "gap_ok"], &rows)?;
    let model = serde_json::json!({
        "order": red.reduced.r,
        "sigma": sigma.iter().copied().collect::<Vec<_>>(),
        "bound": red.bound,
        "bound_certified": matches!(red.bound_status, BoundStatus::Certified),
        "transform": matrix_to(&red.balanced.t),
        "b1": matrix_to(&red.reduced.plant.b),
        "c1": matrix_to(&red.reduced.plant.c),
        "state_field": field_json(&red.reduced.plant.field),
    });
    std::fs::write(
        job.out.join("reduced_model.json"),
        serde_json::to_string_pretty(&model)? + "\n",
    )?;
    let sec = report.section("reduction");
    sec.int("order", red.reduced.r as i64)
        .num("bound", red.bound)
        .vector("sigma", sigma)
        .num("x_checker_violation", red.gramians.x_violation)
        .num("y_checker_violation", red.gramians.y_violation);
    match &red.bound_status {
        BoundStatus::Certified => {
            sec.flag("bound_certified", true);
        }
        BoundStatus::NotCertified { reason } => {
            sec.flag("bound_certified", false).text("bound_certified_reason", reason);
        }
    }
    for w in &red.gramians.warnings {
        report.section("warnings").text("warning", w);
    }
    report.write(&job.out)?;
    Ok(Outcome::Success)
}

// ---- lqg ----

pub fn cmd_lqg(job: &Job) -> Result<Outcome> {
    let (plant, vertices) = job.plant_and_vertices()?;
    let mut report = Report::new("lqg", job.config.seed);
    let opts = job.config.solve_options();
    let pair = match solve_gd_riccati(&plant, &vertices, &opts) {
        Ok(p) => p,
        Err(e) if is_infeasible_lqg(&e) => {
            report.outcome = "infeasible".into();
            report.section("riccati").text("reason", e.to_string());
            report.write(&job.out)?;
            return Ok(Outcome::Infeasible);
        }
        Err(e) => return Err(e.into()),
    };
    write_matrix_csv(&job.out.join("P.csv"), &pair.p)?;
    write_matrix_csv(&job.out.join("Q.csv"), &pair.q)?;
    let sec = report.section("riccati");
    sec.num("p_quadratic_violation", pair.p_violation)
        .num("q_quadratic_violation", pair.q_violation)
        .num("epsilon", pair.epsilon)
        .int("newton_iterations", pair.iterations as i64);

    // coprime-representation certificate formulas, checker-verified
    let rcr = build_rcr(&plant, &pair.p);
    let rcr_verts = VertexSet::explicit(
        vertices
            .vertices
            .iter()
            .map(|a| a - &plant.b * (plant.b.transpose() * &pair.p))
            .collect(),
    );
    let (x_rcr, y_rcr) = rcr_gramians(&pair.p, &pair.q)?;
    let w1 = gdbal_core::lmi::check(
        &gdbal_core::gdreduce::controllability_problem(&rcr, &rcr_verts, None),
        &vec![x_rcr],
    )?
    .worst;
    let w2 = gdbal_core::lmi::check(
        &gdbal_core::gdreduce::observability_problem(&rcr, &rcr_verts, None),
        &vec![y_rcr],
    )?
    .worst;
    let lcr = build_lcr(&plant, &pair.q);
    let lcr_verts = VertexSet::explicit(
        vertices
            .vertices
            .iter()
            .map(|a| a - &pair.q * (plant.c.transpose() * &plant.c))
            .collect(),
    );
    let (x_lcr, y_lcr) = lcr_gramians(&pair.p, &pair.q)?;
    let w3 = gdbal_core::lmi::check(
        &gdbal_core::gdreduce::controllability_problem(&lcr, &lcr_verts, None),
        &vec![x_lcr],
    )?
    .worst;
    let w4 = gdbal_core::lmi::check(
        &gdbal_core::gdreduce::observability_problem(&lcr, &lcr_verts, None),
        &vec![y_lcr],
    )?
    .worst;
    let sec = report.section("coprime-gramians");
    sec.num("rcr_controllability_violation", w1)
        .num("rcr_observability_violation", w2)
        .num("lcr_controllability_violation", w3)
        .num("lcr_observability_violation", w4);

    let controller = build_lqg_controller(&plant, &pair)?;
    write_controller(&job.out.join("controller_lqg.json"), &controller)?;
    let sec = report.section("controller");
    sec.int("order", controller.order as i64).flag("ges_certified", controller.ges_certified);
    if plant.epsilon == 0.0 {
        sec.text("note", "epsilon = 0: exponential stability not certified");
    }

    // optional reduced-order observer controller (not certified for the
    // full plant)
    if let Some(spec) = &job.config.reduction {
        if let OrderSpec::Fixed(r) = spec.order {
            let bal = lqg_balance(&plant, &vertices, &pair)?;
            let kr = gdbal_core::lqgsyn::build_reduced_lqg_controller(&bal, r)?;
            write_controller(&job.out.join(format!("controller_lqg_r{r}.json")), &kr)?;
            report
                .section("reduced-controller")
                .int("order", r as i64)
                .flag("ges_certified", kr.ges_certified)
                .text("note", "stability with respect to the full plant is not certified");
        }
    }

    // closed-loop decay verification
    let v = &job.config.verify;
    let rep = verify_ges(
        &plant,
        &controller,
        v.trials,
        v.t_final.max(40.0),
        v.dt,
        v.slope_max,
        v.final_ratio,
        job.config.seed,
    )?;
    let mut all = true;
    push_verify(&mut report, &rep, &mut all);
    if !all {
        report.outcome = "verification-failed".into();
    }
    report.write(&job.out)?;
    Ok(if all { Outcome::Success } else { Outcome::VerificationFailed })
}

// ---- hinf ----

struct HinfArtifacts {
    cert: HinfCertificate,
    injected: bool,
}

fn hinf_certificate(job: &Job, plant: &PlantModel, vertices: &VertexSet) -> Result<HinfArtifacts> {
    let gamma = job
        .config
        .gamma
        .ok_or_else(|| anyhow!("`gamma` is required for disturbance-attenuation jobs"))?;
    let opts = job.config.solve_options();
    if let Some(inject) = job.config.hinf.as_ref().and_then(|h| h.inject.as_ref()) {
        let p = matrix_from(&inject.p_inf, "inject.p_inf")?;
        let q = matrix_from(&inject.q_inf, "inject.q_inf")?;
        let cert = certificate_from_solutions(
            plant,
            vertices,
            gamma,
            p,
            q,
            job.config.rinf_mode(),
            &opts,
        )?;
        return Ok(HinfArtifacts { cert, injected: true });
    }
    let copts = CertifyOptions { rinf_mode: job.config.rinf_mode(), ..CertifyOptions::default() };
    let cert = certify(plant, vertices, gamma, &copts, &opts)?;
    Ok(HinfArtifacts { cert, injected: false })
}

fn certificate_section(report: &mut Report, cert: &HinfCertificate, injected: bool) {
    let sec = report.section("certificate");
    sec.num("gamma", cert.gamma)
        .num("beta", cert.beta)
        .flag("injected", injected)
        .num("lambda_max_pq", cert.lambda_max_pq)
        .flag("spectral_condition_ok", cert.spectral_ok)
        .vector("pi", &cert.pi)
        .num("p_quadratic_violation", cert.p_violation)
        .num("q_quadratic_violation", cert.q_violation)
        .text("rinf_mode", format!("{:?}", cert.r_mode));
    if !cert.spectral_ok {
        sec.text(
            "discrepancy",
            format!(
                "spectral condition unmet: lambda_max(P Q) = {:.4} >= gamma^2 = {:.4}; \
                 observer-gain existence hypothesis fails and the gain claim is not certified",
                cert.lambda_max_pq,
                cert.gamma * cert.gamma
            ),
        );
    }
}

pub fn cmd_hinf(job: &Job) -> Result<Outcome> {
    let (plant, vertices) = job.plant_and_vertices()?;
    let mut report = Report::new("hinf", job.config.seed);
    let override_spectral =
        job.config.hinf.as_ref().map(|h| h.override_spectral).unwrap_or(false);
    let art = match hinf_certificate(job, &plant, &vertices) {
        Ok(a) => a,
        Err(e) => {
            if let Some(he) = e.downcast_ref::<HinfError>() {
                if is_infeasible_hinf(he) {
                    report.outcome = "infeasible".into();
                    report.section("certificate").text("reason", he.to_string());
                    report.write(&job.out)?;
                    return Ok(Outcome::Infeasible);
                }
            }
            return Err(e);
        }
    };
    let cert = &art.cert;
    certificate_section(&mut report, cert, art.injected);
    write_matrix_csv(&job.out.join("P_inf.csv"), &cert.p_inf)?;
    write_matrix_csv(&job.out.join("Q_inf.csv"), &cert.q_inf)?;

    let sel = select_order(&cert.pi, cert.gamma)?;
    report
        .section("order-selection")
        .int("selected_r", sel.r as i64)
        .flag("satisfied_below_full", sel.satisfied_below_full)
        .num("rho_r", sel.rho_r);

    if cert.spectral_ok || override_spectral {
        let full = synthesize_controller(&plant, cert, override_spectral)?;
        write_controller(&job.out.join("controller_full.json"), &full)?;
        report
            .section("controller.full")
            .int("order", full.order as i64)
            .flag("ges_certified", full.ges_certified);
        let orders = job
            .config
            .hinf
            .as_ref()
            .and_then(|h| h.orders.clone())
            .unwrap_or_else(|| vec![sel.r]);
        for r in orders {
            if r >= plant.n() {
                continue;
            }
            let (kr, rep, _) =
                reduce_controller(&plant, &vertices, cert, r, override_spectral, job.config.seed)?;
            write_controller(&job.out.join(format!("controller_r{r}.json")), &kr)?;
            let sec = report.section(&format!("controller.r{r}"));
            sec.flag("spectral_ok", rep.spectral_ok)
                .flag("gap_ok", rep.gap_ok)
                .flag("odd_ok", rep.odd_ok)
                .flag("rho_ok", rep.rho_ok)
                .num("rho_r", rep.rho_r)
                .num("rho_times_factor", rep.rho_threshold)
                .flag("ges_certified", rep.ges_certified);
            match rep.gain_bound {
                Some(g) => {
                    sec.num("closed_loop_gain_bound", g);
                }
                None => {
                    sec.text("closed_loop_gain_bound", "undefined (denominator not positive)");
                }
            }
        }
    } else {
        report.section("controller.full").text(
            "skipped",
            "spectral condition unmet and override not requested",
        );
    }

    if job.config.hinf.as_ref().map(|h| h.improve_gamma).unwrap_or(false) {
        match improve_gamma(&plant, cert, &job.config.solve_options()) {
            Ok(imp) => {
                let sec = report.section("gamma-improvement");
                sec.num("alpha", imp.alpha)
                    .num("eps2", imp.eps2)
                    .num("gamma_bar", imp.gamma_bar)
                    .flag("improved", imp.improved);
                if imp.improved && !art.injected {
                    let copts = CertifyOptions {
                        rinf_mode: job.config.rinf_mode(),
                        ..CertifyOptions::default()
                    };
                    match certify(
                        &plant,
                        &vertices,
                        imp.gamma_bar,
                        &copts,
                        &job.config.solve_options(),
                    ) {
                        Ok(c2) => {
                            sec.flag("recertified", true)
                                .num("recertified_lambda_max_pq", c2.lambda_max_pq);
                        }
                        Err(e) => {
                            sec.flag("recertified", false)
                                .text("recertification_outcome", e.to_string());
                        }
                    }
                }
            }
            Err(e) => {
                report.section("gamma-improvement").text("failed", e.to_string());
            }
        }
    }
    report.write(&job.out)?;
    Ok(Outcome::Success)
}

// ---- simulate ----

fn scenario_trajectory(
    job: &Job,
    plant: &PlantModel,
    vertices: &VertexSet,
    sc: &crate::config::ScenarioSpec,
    reduction: &mut Option<GdReduction>,
    lqg: &mut Option<Controller>,
    hinf: &mut Option<(HinfCertificate, Controller)>,
) -> Result<Trajectory> {
    let t_final = job.config.simulation.t_final;
    let dt = job.config.simulation.dt;
    let x0 = |n: usize| -> Result<DVector<f64>> {
        match &sc.x0 {
            None => Ok(DVector::zeros(n)),
            Some(v) => {
                if v.len() != n {
                    bail!("scenario `{}`: x0 has {} entries, expected {n}", sc.name, v.len());
                }
                Ok(DVector::from_column_slice(v))
            }
        }
    };
    let opts = job.config.solve_options();
    match sc.system.as_str() {
        "plant" => {
            let u = sc
                .input
                .clone()
                .unwrap_or(SignalSpec::Zero)
                .build(plant.m())?;
            Ok(integrate(plant, &x0(plant.n())?, &u, t_final, dt)?)
        }
        "reduced" => {
            if reduction.is_none() {
                *reduction = Some(run_reduction(job, plant, vertices)?);
            }
            let red = reduction.as_ref().unwrap();
            let rp = &red.reduced.plant;
            let u = sc.input.clone().unwrap_or(SignalSpec::Zero).build(rp.m())?;
            Ok(integrate(rp, &x0(rp.n())?, &u, t_final, dt)?)
        }
        "lqg-loop" => {
            if lqg.is_none() {
                let pair = solve_gd_riccati(plant, vertices, &opts)?;
                *lqg = Some(build_lqg_controller(plant, &pair)?);
            }
            let k = lqg.as_ref().unwrap();
            let wu = sc.input.clone().unwrap_or(SignalSpec::Zero).build(plant.m())?;
            let wy = Signal::Zero { dim: plant.p() };
            Ok(simulate_closed_loop(
                plant,
                k,
                &x0(plant.n())?,
                &DVector::zeros(k.order),
                (&wu, &wy),
                t_final,
                dt,
            )?)
        }
        "hinf-loop" | "hinf-loop-reduced" => {
            let override_spectral =
                job.config.hinf.as_ref().map(|h| h.override_spectral).unwrap_or(false);
            if hinf.is_none() {
                let art = hinf_certificate(job, plant, vertices)?;
                let full = synthesize_controller(plant, &art.cert, override_spectral)?;
                *hinf = Some((art.cert, full));
            }
            let (cert, full) = hinf.as_ref().unwrap();
            let k = if sc.system == "hinf-loop" {
                full.clone()
            } else {
                let r = sc
                    .order
                    .ok_or_else(|| anyhow!("scenario `{}` requires `order`", sc.name))?;
                let (kr, _, _) =
                    reduce_controller(plant, vertices, cert, r, override_spectral, job.config.seed)?;
                kr
            };
            let wu = sc.input.clone().unwrap_or(SignalSpec::Zero).build(plant.m())?;
            let wy = Signal::Zero { dim: plant.p() };
            Ok(simulate_closed_loop(
                plant,
                &k,
                &x0(plant.n())?,
                &DVector::zeros(k.order),
                (&wu, &wy),
                t_final,
                dt,
            )?)
        }
        other => bail!("unknown scenario system `{other}`"),
    }
}

pub fn cmd_simulate(job: &Job) -> Result<Outcome> {
    let (plant, vertices) = job.plant_and_vertices()?;
    let mut report = Report::new("simulate", job.config.seed);
    let mut reduction = None;
    let mut lqg = None;
    let mut hinf = None;
    for sc in &job.config.simulation.scenarios {
        let traj =
            scenario_trajectory(job, &plant, &vertices, sc, &mut reduction, &mut lqg, &mut hinf)?;
        let file = format!("{}.csv", sc.name);
        std::fs::write(job.out.join(&file), traj.to_csv())?;
        let sec = report.section(&format!("scenario.{}", sc.name));
        sec.text("file", &file)
            .flag("diverged", traj.diverged)
            .int("samples", traj.times.len() as i64)
            .num("final_state_norm", traj.states.last().map_or(0.0, |s| s.norm()));
        for ch in ["y", "u", "z", "w"] {
            if let Some(n) = traj.l2_norm(ch) {
                sec.num(&format!("l2_{ch}"), n);
            }
        }
    }
    if job.config.simulation.scenarios.is_empty() {
        report.section("scenarios").text("note", "no scenarios configured");
    }
    report.write(&job.out)?;
    Ok(Outcome::Success)
}

// ---- verify ----

pub fn cmd_verify(job: &Job) -> Result<Outcome> {
    let (plant, vertices) = job.plant_and_vertices()?;
    let mut report = Report::new("verify", job.config.seed);
    let v = job.config.verify.clone();
    let opts = job.config.solve_options();
    let seed = job.config.seed;
    let wants = |name: &str| -> bool {
        match &v.checks {
            None => true,
            Some(list) => list.iter().any(|c| c == name),
        }
    };
    let mut all = true;

    // oddness status feeds the error-bound hypothesis report
    let odd = check_oddness(&plant, 200, 10.0, seed);
    report
        .section("hypotheses")
        .flag("drift_odd", odd.pass)
        .num("odd_residual", odd.max_residual)
        .flag("vertices_sound", vertices.sound);

    let mut gramians = None;
    if wants("ies") || wants("observability") || wants("error-bound") {
        match solve_gd_gramians(
            &plant,
            &vertices,
            job.config.gramian_objective(),
            job.config.blocks(),
            &opts,
        ) {
            Ok(g) => gramians = Some(g),
            Err(e) if is_infeasible_gd(&e) => {
                report.section("gramians").text(
                    "skipped",
                    format!("contraction checks not applicable: {e}"),
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(g) = &gramians {
        if wants("ies") {
            let rep =
                verify_ies(&plant, &g.x, plant.epsilon, v.trials, v.t_final, v.dt, seed)?;
            push_verify(&mut report, &rep, &mut all);
        }
        if wants("observability") {
            let rep = verify_observability_decay(&plant, &g.y, v.trials, v.t_final, v.dt, seed)?;
            push_verify(&mut report, &rep, &mut all);
        }
        if wants("error-bound") {
            if job.config.reduction.is_some() {
                let red = run_reduction(job, &plant, &vertices)?;
                let inputs = vec![
                    Signal::SumOfSines { dim: plant.m(), terms: vec![(1.0, 1.0), (1.0, 3.0)] },
                    Signal::Constant(DVector::from_element(plant.m(), 1.0)),
                ];
                let rep = verify_error_bound(
                    &plant,
                    &red.reduced.plant,
                    red.bound,
                    &inputs,
                    v.t_final,
                    v.dt,
                )?;
                push_verify(&mut report, &rep, &mut all);
                if let BoundStatus::NotCertified { reason } = &red.bound_status {
                    report
                        .section("verify.error-bound.hypotheses")
                        .flag("certified", false)
                        .text("reason", reason);
                }
            } else {
                report
                    .section("verify.error-bound")
                    .text("skipped", "no `reduction` section configured");
            }
        }
    }

    if wants("lqg-ges") {
        match solve_gd_riccati(&plant, &vertices, &opts) {
            Ok(pair) => {
                let k = build_lqg_controller(&plant, &pair)?;
                let mut rep = verify_ges(
                    &plant,
                    &k,
                    v.trials,
                    v.t_final.max(40.0),
                    v.dt,
                    v.slope_max,
                    v.final_ratio,
                    seed,
                )?;
                rep.name = "lqg-ges".into();
                push_verify(&mut report, &rep, &mut all);
            }
            Err(e) if is_infeasible_lqg(&e) => {
                report
                    .section("verify.lqg-ges")
                    .text("skipped", format!("Riccati pair not available: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    if job.config.gamma.is_some() && (wants("hinf-ges") || wants("hinf-gain")) {
        let override_spectral =
            job.config.hinf.as_ref().map(|h| h.override_spectral).unwrap_or(false);
        match hinf_certificate(job, &plant, &vertices) {
            Ok(art) => {
                let cert = &art.cert;
                certificate_section(&mut report, cert, art.injected);
                if cert.spectral_ok || override_spectral {
                    let full = synthesize_controller(&plant, cert, override_spectral)?;
                    let mut controllers = vec![("full".to_string(), full, None)];
                    let orders = job
                        .config
                        .hinf
                        .as_ref()
                        .and_then(|h| h.orders.clone())
                        .unwrap_or_default();
                    for r in orders {
                        if r >= plant.n() {
                            continue;
                        }
                        let (kr, rep, _) = reduce_controller(
                            &plant,
                            &vertices,
                            cert,
                            r,
                            override_spectral,
                            seed,
                        )?;
                        controllers.push((format!("r{r}"), kr, Some(rep)));
                    }
                    for (name, k, red_rep) in &controllers {
                        if wants("hinf-ges") {
                            let rep = verify_ges(
                                &plant,
                                k,
                                v.trials,
                                v.t_final.max(40.0),
                                v.dt,
                                v.slope_max,
                                v.final_ratio,
                                seed,
                            )?;
                            let mut rep = rep;
                            rep.name = format!("hinf-ges.{name}");
                            push_verify(&mut report, &rep, &mut all);
                        }
                        if wants("hinf-gain") {
                            let claim = match red_rep {
                                None if cert.spectral_ok => Some(cert.gamma),
                                Some(rr) if rr.ges_certified => rr.gain_bound,
                                _ => None,
                            };
                            match claim {
                                Some(gamma_claim) => {
                                    let disturbances = vec![
                                        (
                                            Signal::SumOfSines {
                                                dim: plant.m(),
                                                terms: vec![(1.0, 1.0)],
                                            },
                                            Signal::SumOfSines {
                                                dim: plant.p(),
                                                terms: vec![(0.5, 2.0)],
                                            },
                                        ),
                                        (
                                            Signal::Constant(DVector::from_element(
                                                plant.m(),
                                                0.7,
                                            )),
                                            Signal::Zero { dim: plant.p() },
                                        ),
                                    ];
                                    let mut rep = verify_gain(
                                        &plant,
                                        k,
                                        gamma_claim,
                                        &disturbances,
                                        v.t_final,
                                        v.dt,
                                    )?;
                                    rep.name = format!("hinf-gain.{name}");
                                    push_verify(&mut report, &rep, &mut all);
                                }
                                None => {
                                    report.section(&format!("verify.hinf-gain.{name}")).text(
                                        "skipped",
                                        "no certified gain claim for this controller \
                                         (spectral condition or reduction hypotheses unmet)",
                                    );
                                }
                            }
                        }
                    }
                } else {
                    report.section("verify.hinf").text(
                        "skipped",
                        "spectral condition unmet and override not requested",
                    );
                }
            }
            Err(e) => {
                if let Some(he) = e.downcast_ref::<HinfError>() {
                    if is_infeasible_hinf(he) {
                        report
                            .section("verify.hinf")
                            .text("skipped", format!("certificate not available: {he}"));
                    } else {
                        return Err(e);
                    }
                } else {
                    return Err(e);
                }
            }
        }
    }

    report.outcome = if all { "all-pass".into() } else { "verification-failed".into() };
    report.write(&job.out)?;
    Ok(if all { Outcome::Success } else { Outcome::VerificationFailed })
}
