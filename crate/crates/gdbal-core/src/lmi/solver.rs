//! Log-det barrier solver with an infeasible-start phase-I and Newton
//! path-following for trace objectives.
//!
//! Phase I minimizes an auxiliary slack `s` with every constraint relaxed to
//! `G(v) <= s I`, exiting as soon as the margined problem is strictly
//! feasible (the slack minimizer itself need not exist for unbounded
//! feasible sets). The objective phase then follows the central path of
//! `t * c'v - sum_j log det(-G_j(v))` with a geometric `t` schedule.
//!
//! Everything is deterministic: no randomness is drawn anywhere, so identical
//! problems and options produce bitwise-identical solutions.

use super::kernels;
use super::{
    check, Assignment, ConstraintSense, LmiError, LmiProblem, LmiSolution, Objective,
    SolveOptions, SolveStatus, VarKind,
};
use nalgebra::{DMatrix, DVector};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Packed coordinate: one scalar entry of one variable.
#[derive(Debug, Clone, Copy)]
struct Coord {
    var: usize,
    row: usize,
    col: usize,
}

/// Internal normalized constraint: `const_shifted + linear(v) <= 0`.
struct NormConstraint {
    constant: DMatrix<f64>,
    /// (var index, left, right), already sign-normalized for NSD sense.
    terms: Vec<(usize, DMatrix<f64>, DMatrix<f64>)>,
    dim: usize,
}

struct Packed {
    coords: Vec<Coord>,
    /// coords index ranges per variable
    var_coords: Vec<Vec<usize>>,
    cons: Vec<NormConstraint>,
}

fn build_packed(problem: &LmiProblem, margin: f64) -> Packed {
    let mut coords = Vec::new();
    let mut var_coords = vec![Vec::new(); problem.vars.len()];
    for (vi, var) in problem.vars.iter().enumerate() {
        match &var.kind {
            VarKind::Scalar => {
                var_coords[vi].push(coords.len());
                coords.push(Coord { var: vi, row: 0, col: 0 });
            }
            VarKind::Matrix { dim, blocks } => {
                let blocks = blocks.clone().unwrap_or_else(|| vec![*dim]);
                let mut offset = 0;
                for b in blocks {
                    for a in 0..b {
                        for c in a..b {
                            var_coords[vi].push(coords.len());
                            coords.push(Coord { var: vi, row: offset + a, col: offset + c });
                        }
                    }
                    offset += b;
                }
            }
        }
    }
    let cons = problem
        .constraints
        .iter()
        .map(|c| {
            let d = c.dim();
            let (constant, flip) = match c.sense {
                ConstraintSense::NegSemidef { margin: m } => {
                    (&c.constant + DMatrix::identity(d, d) * (m + margin), 1.0)
                }
                ConstraintSense::PosSemidef { margin: m } => {
                    (-&c.constant + DMatrix::identity(d, d) * (m + margin), -1.0)
                }
            };
            let terms = c
                .terms
                .iter()
                .map(|t| {
                    let vi = problem.var_index(&t.var).expect("validated");
                    (vi, &t.left * flip, t.right.clone())
                })
                .collect();
            NormConstraint { constant: kernels::symmetrize(&constant), terms, dim: d }
        })
        .collect();
    Packed { coords, var_coords, cons }
}

fn unpack(packed: &Packed, problem: &LmiProblem, v: &DVector<f64>) -> Assignment {
    let mut out: Assignment = problem
        .vars
        .iter()
        .map(|var| DMatrix::zeros(var.dim(), var.dim()))
        .collect();
    for (k, c) in packed.coords.iter().enumerate() {
        if c.row == c.col {
            out[c.var][(c.row, c.col)] = v[k];
        } else {
            let val = v[k] / SQRT2;
            out[c.var][(c.row, c.col)] = val;
            out[c.var][(c.col, c.row)] = val;
        }
    }
    out
}

/// Assemble the normalized constraint `j` at packed point `v`.
fn assemble(packed: &Packed, values: &Assignment, j: usize) -> DMatrix<f64> {
    let nc = &packed.cons[j];
    let mut m = nc.constant.clone();
    for (vi, left, right) in &nc.terms {
        let a = left * &values[*vi] * right;
        m += &a + a.transpose();
    }
    kernels::symmetrize(&m)
}

/// True when every normalized constraint is strictly negative definite.
fn strictly_feasible(packed: &Packed, values: &Assignment) -> bool {
    for j in 0..packed.cons.len() {
        let g = assemble(packed, values, j);
        let d = g.nrows();
        let shifted = -g - DMatrix::identity(d, d) * 1e-14;
        if shifted.cholesky().is_none() {
            return false;
        }
    }
    true
}

fn worst_violation(packed: &Packed, values: &Assignment) -> f64 {
    (0..packed.cons.len())
        .map(|j| kernels::lambda_max(&assemble(packed, values, j)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// svec with sqrt(2) off-diagonal scaling (isometry onto packed coords).
fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let d = m.nrows();
    let mut k = 0;
    for a in 0..d {
        out[k] = m[(a, a)];
        k += 1;
        for b in (a + 1)..d {
            out[k] = SQRT2 * 0.5 * (m[(a, b)] + m[(b, a)]);
            k += 1;
        }
    }
}

/// Barrier state for one Newton step on
/// `t * c'x - sum_j log det(-(G_j(v) - s I))`, where the phase-I slack `s` is
/// an extra trailing coordinate when `slack` is set.
struct NewtonCtx<'a> {
    packed: &'a Packed,
    problem: &'a LmiProblem,
    slack: bool,
    cvec: DVector<f64>,
    n_ext: usize,
}

impl<'a> NewtonCtx<'a> {
    fn split(&self, x: &DVector<f64>) -> (Assignment, f64) {
        let n = self.packed.coords.len();
        let vals = unpack(self.packed, self.problem, &x.rows(0, n).into_owned());
        let s = if self.slack { x[n] } else { 0.0 };
        (vals, s)
    }

    /// Barrier value, or None when outside the domain.
    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let (vals, s) = self.split(x);
        let mut total = t * self.cvec.dot(x);
        for j in 0..self.packed.cons.len() {
            let g = assemble(self.packed, &vals, j);
            let d = g.nrows();
            let w = DMatrix::identity(d, d) * s - g;
            let chol = w.cholesky()?;
            let mut logdet = 0.0;
            for i in 0..d {
                let li = chol.l()[(i, i)];
                if li <= 0.0 {
                    return None;
                }
                logdet += li.ln();
            }
            total -= 2.0 * logdet;
        }
        Some(total)
    }

    /// Gradient and Hessian at a strictly feasible point.
    fn derivatives(&self, x: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.packed.coords.len();
        let (vals, s) = self.split(x);
        let mut g = &self.cvec * t;
        let mut h = DMatrix::zeros(self.n_ext, self.n_ext);
        for j in 0..self.packed.cons.len() {
            let nc = &self.packed.cons[j];
            let d = nc.dim;
            let gm = assemble(self.packed, &vals, j);
            let w = DMatrix::identity(d, d) * s - gm;
            let chol = w.cholesky()?;
            let winv = chol.inverse();
            let linv = kernels::lu_inverse(&chol.l()).ok()?; // lower triangular inverse
            // Phi rows: svec(L^{-1} dW/dx_k L^{-T}); dW/dv_k = -Lmap(B_k),
            // dW/ds = +I.
            let sd = d * (d + 1) / 2;
            let mut phi = DMatrix::zeros(self.n_ext, sd);
            let mut row = vec![0.0; sd];
            for (vi, left, right) in &nc.terms {
                // gradient pieces: +tr(Winv * Lmap(B_k)) via S = left' Winv right'
                let s_grad = left.transpose() * &winv * right.transpose();
                let s_sym = &s_grad + s_grad.transpose();
                for &k in &self.packed.var_coords[*vi] {
                    let c = self.packed.coords[k];
                    let val = if c.row == c.col {
                        s_sym[(c.row, c.col)]
                    } else {
                        SQRT2 * s_sym[(c.row, c.col)]
                    };
                    g[k] += val;
                }
                // Hessian pieces via outer products, written straight into
                // the packed rows without temporaries:
                // D = scale*(wl_col(a) rw_row(b) + [a!=b] wl_col(b) rw_row(a)),
                // row_k -= svec(D + D').
                let wl = &linv * left; // d x dv
                let rw = right * linv.transpose(); // dv x d
                for &k in &self.packed.var_coords[*vi] {
                    let c = self.packed.coords[k];
                    let scale = if c.row == c.col { 1.0 } else { 1.0 / SQRT2 };
                    let offdiag = c.row != c.col;
                    let mut idx = 0;
                    for i in 0..d {
                        for j in i..d {
                            // (D + D')[i][j] = D[i][j] + D[j][i]
                            let mut dij = wl[(i, c.row)] * rw[(c.col, j)]
                                + wl[(j, c.row)] * rw[(c.col, i)];
                            if offdiag {
                                dij += wl[(i, c.col)] * rw[(c.row, j)]
                                    + wl[(j, c.col)] * rw[(c.row, i)];
                            }
                            let v = scale * dij * if i == j { 1.0 } else { SQRT2 };
                            phi[(k, idx)] -= v;
                            idx += 1;
                        }
                    }
                }
            }
            if self.slack {
                g[n] -= winv.trace();
                svec_into(&winv, &mut row);
                for (idx, &val) in row.iter().enumerate() {
                    phi[(n, idx)] = val;
                }
            }
            h.gemm(1.0, &phi, &phi.transpose(), 1.0);
        }
        Some((g, h))
    }

    /// Damped Newton iterations; returns the final point and iteration count.
    /// Stops on small Newton decrement, domain stall, early feasibility
    /// (phase I), or budget exhaustion.
    fn minimize(
        &self,
        mut x: DVector<f64>,
        t: f64,
        budget: &mut usize,
        early_exit: bool,
    ) -> (DVector<f64>, bool) {
        let max_inner = 60usize;
        for _ in 0..max_inner {
            if *budget == 0 {
                return (x, false);
            }
            *budget -= 1;
            let Some((g, h)) = self.derivatives(&x, t) else {
                return (x, false);
            };
            // Solve H delta = -g with escalating ridge.
            let scale = h.diagonal().amax().max(1e-30);
            let mut delta = None;
            for ridge in [0.0, 1e-12, 1e-9, 1e-6] {
                let hr = &h + DMatrix::identity(self.n_ext, self.n_ext) * (ridge * scale);
                if let Some(ch) = hr.cholesky() {
                    delta = Some(ch.solve(&(-&g)));
                    break;
                }
            }
            let delta = match delta {
                Some(d) => d,
                None => -&g * (1.0 / scale),
            };
            let descent = g.dot(&delta);
            let lambda2 = -descent;
            let f0 = match self.value(&x, t) {
                Some(f) => f,
                None => return (x, false),
            };
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-13 {
                let cand = &x + &delta * step;
                if let Some(f) = self.value(&cand, t) {
                    if f <= f0 + 0.25 * step * descent || f < f0 {
                        x = cand;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                return (x, true);
            }
            if early_exit {
                let (vals, _) = self.split(&x);
                if strictly_feasible(self.packed, &vals) {
                    return (x, true);
                }
            }
            if lambda2 / 2.0 < 1e-9 {
                return (x, true);
            }
        }
        (x, true)
    }
}

pub(super) fn solve(problem: &LmiProblem, options: &SolveOptions) -> Result<LmiSolution, LmiError> {
    problem.validate()?;
    let packed = build_packed(problem, options.margin);
    let n = packed.coords.len();
    let m_total: usize = packed.cons.iter().map(|c| c.dim).sum();
    let mut budget = options.max_iter;
    let mut iterations_used = 0usize;

    // ---- Phase I: minimize slack until strictly feasible ----
    let mut x = DVector::zeros(n + 1);
    {
        let zero_vals = unpack(&packed, problem, &DVector::zeros(n));
        let s0 = (0..packed.cons.len())
            .map(|j| kernels::lambda_max(&assemble(&packed, &zero_vals, j)))
            .fold(f64::NEG_INFINITY, f64::max);
        x[n] = s0 + 1.0;
    }
    let mut cvec = DVector::zeros(n + 1);
    cvec[n] = 1.0;
    let ctx1 = NewtonCtx { packed: &packed, problem, slack: true, cvec, n_ext: n + 1 };
    let mut feasible_point: Option<DVector<f64>> = None;
    let mut t = 1.0;
    loop {
        let before = budget;
        let (nx, _ok) = ctx1.minimize(x.clone(), t, &mut budget, true);
        iterations_used += before - budget;
        x = nx;
        let (vals, _) = ctx1.split(&x);
        if strictly_feasible(&packed, &vals) {
            feasible_point = Some(x.rows(0, n).into_owned());
            break;
        }
        if (m_total + 1) as f64 / t < 1e-10 || budget == 0 {
            break;
        }
        t *= 16.0;
    }

    let vpoint = match feasible_point {
        Some(v) => v,
        None => {
            // Attempt a Farkas-type certificate from the barrier duals.
            let (vals, s) = ctx1.split(&x);
            let mut trsum = 0.0;
            let mut winvs = Vec::new();
            let mut domain_ok = true;
            for j in 0..packed.cons.len() {
                let g = assemble(&packed, &vals, j);
                let d = g.nrows();
                let w = DMatrix::identity(d, d) * s - g;
                match w.cholesky() {
                    Some(ch) => {
                        let wi = ch.inverse();
                        trsum += wi.trace();
                        winvs.push(wi);
                    }
                    None => {
                        domain_ok = false;
                        break;
                    }
                }
            }
            let status = if domain_ok && trsum > 0.0 {
                let z: Vec<DMatrix<f64>> = winvs.iter().map(|w| w / trsum).collect();
                // witness value: sum <C_j, Z_j>; adjoint residual: the packed
                // gradient of sum <Z_j, linear_j(v)>.
                let mut witness = 0.0;
                let mut adjoint = DVector::<f64>::zeros(n);
                for (j, nc) in packed.cons.iter().enumerate() {
                    witness += nc.constant.dot(&z[j]);
                    for (vi, left, right) in &nc.terms {
                        let sg = left.transpose() * &z[j] * right.transpose();
                        let ssym = &sg + sg.transpose();
                        for &k in &packed.var_coords[*vi] {
                            let c = packed.coords[k];
                            adjoint[k] += if c.row == c.col {
                                ssym[(c.row, c.col)]
                            } else {
                                SQRT2 * ssym[(c.row, c.col)]
                            };
                        }
                    }
                }
                let residual = adjoint.amax();
                if witness > 0.0 && residual <= 1e-8 * (1.0 + witness) {
                    SolveStatus::InfeasibleCertified { witness, residual }
                } else {
                    SolveStatus::Unknown {
                        reason: format!(
                            "phase I stalled (slack {s:.3e}); certificate not tight \
                             (witness {witness:.3e}, residual {residual:.3e})"
                        ),
                    }
                }
            } else {
                SolveStatus::Unknown { reason: "phase I stalled".into() }
            };
            let assignment = unpack(&packed, problem, &x.rows(0, n).into_owned());
            return Ok(LmiSolution {
                status,
                assignment,
                worst_violation: worst_violation(&packed, &unpack(&packed, problem, &x.rows(0, n).into_owned())),
                iterations: iterations_used,
                objective_value: None,
            });
        }
    };

    // ---- Objective phase ----
    let mut v = vpoint;
    let objective_var = match &problem.objective {
        Objective::None => None,
        Objective::MaximizeTrace(name) => Some((name.clone(), -1.0)),
        Objective::MinimizeTrace(name) => Some((name.clone(), 1.0)),
    };
    let mut objective_value = None;
    if let Some((name, sign)) = objective_var {
        let vi = problem
            .var_index(&name)
            .ok_or_else(|| LmiError::UnknownVariable(name.clone()))?;
        let mut cvec = DVector::zeros(n);
        for &k in &packed.var_coords[vi] {
            let c = packed.coords[k];
            if c.row == c.col {
                cvec[k] = sign;
            }
        }
        let trace_of = |vv: &DVector<f64>| -> f64 {
            packed.var_coords[vi]
                .iter()
                .filter(|&&k| packed.coords[k].row == packed.coords[k].col)
                .map(|&k| vv[k])
                .sum()
        };
        let ctx2 = NewtonCtx { packed: &packed, problem, slack: false, cvec, n_ext: n };
        let obj0 = trace_of(&v).abs().max(1.0);
        let mut t = 1.0;
        let mut diverged = false;
        loop {
            let before = budget;
            let (nv, ok) = ctx2.minimize(v.clone(), t, &mut budget, false);
            iterations_used += before - budget;
            // Keep only strictly feasible iterates (they are by construction,
            // but guard against line-search stalls).
            let (vals, _) = ctx2.split(&nv);
            if strictly_feasible(&packed, &vals) {
                v = nv;
            }
            let cur = trace_of(&v);
            if cur.abs() > 1e10 * obj0 || v.amax() > 1e12 {
                diverged = true;
                break;
            }
            let obj_gap_rel = options.tol.max(1e-7);
            if m_total as f64 / t <= obj_gap_rel * cur.abs().max(1.0) || budget == 0 || !ok {
                break;
            }
            t *= 16.0;
        }
        if diverged {
            let assignment = unpack(&packed, problem, &v);
            return Ok(LmiSolution {
                status: SolveStatus::Unknown {
                    reason: "objective diverging (problem unbounded in objective direction)"
                        .into(),
                },
                assignment,
                worst_violation: f64::NAN,
                iterations: iterations_used,
                objective_value: Some(trace_of(&v)),
            });
        }
        objective_value = Some(trace_of(&v));
    }

    let assignment = unpack(&packed, problem, &v);
    // Final verdict comes from the independent checker.
    let report = check(problem, &assignment)?;
    let status = if report.worst <= 0.0 {
        SolveStatus::Feasible
    } else {
        SolveStatus::Unknown {
            reason: format!(
                "solver point rejected by checker (violation {:.3e})",
                report.worst
            ),
        }
    };
    Ok(LmiSolution {
        status,
        assignment,
        worst_violation: report.worst,
        iterations: iterations_used,
        objective_value,
    })
}
