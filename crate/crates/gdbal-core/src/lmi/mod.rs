//! Affine symmetric matrix inequality problems over symmetric-matrix and
//! scalar decision variables, with optional trace objectives, a log-det
//! barrier solver and an independent violation checker.
//!
//! A constraint is `C + sum_k (L_k V_k R_k + R_k^T V_k^T L_k^T)` required
//! negative semidefinite below `-margin I` or positive semidefinite above
//! `margin I`. Feasible solutions are always re-verified by [`check`], which
//! shares no code with the solver's internal assembly.

pub mod kernels;
mod solver;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { context: String, expected: usize, found: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("block structure of `{name}` sums to {sum}, variable dimension is {dim}")]
    BadBlockStructure { name: String, sum: usize, dim: usize },
    #[error("solver failed: {0}")]
    Solver(String),
}

/// Kind of decision variable.
#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    /// Symmetric matrix of the given dimension; an optional block-diagonal
    /// structure restricts nonzeros to diagonal blocks of the listed sizes.
    Matrix { dim: usize, blocks: Option<Vec<usize>> },
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiVariable {
    pub name: String,
    pub kind: VarKind,
}

impl LmiVariable {
    pub fn matrix(name: impl Into<String>, dim: usize) -> Self {
        LmiVariable { name: name.into(), kind: VarKind::Matrix { dim, blocks: None } }
    }

    pub fn matrix_blocked(name: impl Into<String>, dim: usize, blocks: Vec<usize>) -> Self {
        LmiVariable { name: name.into(), kind: VarKind::Matrix { dim, blocks: Some(blocks) } }
    }

    pub fn scalar(name: impl Into<String>) -> Self {
        LmiVariable { name: name.into(), kind: VarKind::Scalar }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            VarKind::Matrix { dim, .. } => *dim,
            VarKind::Scalar => 1,
        }
    }
}

/// One affine summand of a constraint, contributing
/// `left * W * right + right^T * W^T * left^T` where `W` is the referenced
/// variable (or its transpose when `transpose` is set). The symmetrized form
/// keeps every assembled constraint matrix symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTerm {
    pub var: String,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub transpose: bool,
}

impl AffineTerm {
    /// General symmetrized pair `left V right + right^T V^T left^T`.
    pub fn pair(var: impl Into<String>, left: DMatrix<f64>, right: DMatrix<f64>) -> Self {
        AffineTerm { var: var.into(), left, right, transpose: false }
    }

    /// Contribution `coeff * V` embedded by `E V E^T`-style placement: builds
    /// `(coeff/2) E V E^T + (coeff/2) E V^T E^T`, which equals `coeff E V E^T`
    /// for symmetric `V`.
    pub fn scaled(var: impl Into<String>, coeff: f64, embed: DMatrix<f64>) -> Self {
        let right = embed.transpose();
        AffineTerm { var: var.into(), left: embed * (0.5 * coeff), right, transpose: false }
    }

    /// Contribution `v * S` for a scalar variable `v` and symmetric matrix
    /// `S`, decomposed row-wise into symmetrized rank-2 terms.
    pub fn scalar_times(var: impl Into<String>, s: DMatrix<f64>) -> Vec<Self> {
        let var = var.into();
        let d = s.nrows();
        (0..d)
            .map(|j| {
                let mut left = DMatrix::zeros(d, 1);
                left[(j, 0)] = 1.0;
                let mut right = DMatrix::zeros(1, d);
                for k in 0..d {
                    right[(0, k)] = 0.5 * s[(j, k)];
                }
                AffineTerm { var: var.clone(), left, right, transpose: false }
            })
            .collect()
    }
}

/// Sense of a constraint: `M <= -margin I` or `M >= margin I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintSense {
    NegSemidef { margin: f64 },
    PosSemidef { margin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiConstraint {
    pub label: String,
    pub constant: DMatrix<f64>,
    pub terms: Vec<AffineTerm>,
    pub sense: ConstraintSense,
}

impl LmiConstraint {
    pub fn nsd(
        label: impl Into<String>,
        constant: DMatrix<f64>,
        terms: Vec<AffineTerm>,
        margin: f64,
    ) -> Self {
        LmiConstraint {
            label: label.into(),
            constant,
            terms,
            sense: ConstraintSense::NegSemidef { margin },
        }
    }

    pub fn psd(
        label: impl Into<String>,
        constant: DMatrix<f64>,
        terms: Vec<AffineTerm>,
        margin: f64,
    ) -> Self {
        LmiConstraint {
            label: label.into(),
            constant,
            terms,
            sense: ConstraintSense::PosSemidef { margin },
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

/// Linear objective over the declared variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Objective {
    #[default]
    None,
    /// Maximize the trace of a matrix variable (or the value of a scalar).
    MaximizeTrace(String),
    /// Minimize the trace of a matrix variable (or the value of a scalar).
    MinimizeTrace(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<LmiVariable>,
    pub constraints: Vec<LmiConstraint>,
    pub objective: Objective,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, var: LmiVariable) -> &mut Self {
        self.vars.push(var);
        self
    }

    pub fn add_constraint(&mut self, c: LmiConstraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Validate shapes of every term against variable and constraint
    /// dimensions.
    pub fn validate(&self) -> Result<(), LmiError> {
        for v in &self.vars {
            if let VarKind::Matrix { dim, blocks: Some(bs) } = &v.kind {
                let sum: usize = bs.iter().sum();
                if sum != *dim {
                    return Err(LmiError::BadBlockStructure {
                        name: v.name.clone(),
                        sum,
                        dim: *dim,
                    });
                }
            }
        }
        for c in &self.constraints {
            let d = c.dim();
            if c.constant.ncols() != d {
                return Err(LmiError::Dimension {
                    context: format!("constraint `{}` constant", c.label),
                    expected: d,
                    found: c.constant.ncols(),
                });
            }
            for t in &c.terms {
                let vi = self
                    .var_index(&t.var)
                    .ok_or_else(|| LmiError::UnknownVariable(t.var.clone()))?;
                let dv = self.vars[vi].dim();
                if t.left.nrows() != d {
                    return Err(LmiError::Dimension {
                        context: format!("constraint `{}` term left rows", c.label),
                        expected: d,
                        found: t.left.nrows(),
                    });
                }
                if t.left.ncols() != dv {
                    return Err(LmiError::Dimension {
                        context: format!("constraint `{}` term left cols", c.label),
                        expected: dv,
                        found: t.left.ncols(),
                    });
                }
                if t.right.nrows() != dv {
                    return Err(LmiError::Dimension {
                        context: format!("constraint `{}` term right rows", c.label),
                        expected: dv,
                        found: t.right.nrows(),
                    });
                }
                if t.right.ncols() != d {
                    return Err(LmiError::Dimension {
                        context: format!("constraint `{}` term right cols", c.label),
                        expected: d,
                        found: t.right.ncols(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Variable assignment: one value per declared variable, in declaration
/// order. Scalars are stored as 1x1 matrices.
pub type Assignment = Vec<DMatrix<f64>>;

/// Solver outcome status.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    /// Checker-verified feasible.
    Feasible,
    /// A Farkas-type dual witness of infeasibility was found and verified;
    /// carries `(witness_value, adjoint_residual)`.
    InfeasibleCertified { witness: f64, residual: f64 },
    /// Neither feasibility nor an infeasibility certificate within budget.
    Unknown { reason: String },
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub status: SolveStatus,
    pub assignment: Assignment,
    /// Worst signed violation over all constraints as reported by the
    /// independent checker (feasible implies <= 0).
    pub worst_violation: f64,
    pub iterations: usize,
    /// Objective value (trace of the objective variable) when an objective
    /// was requested and the problem is feasible.
    pub objective_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Margin added to every constraint when solving (not when checking).
    pub margin: f64,
    /// Duality-gap style tolerance for the barrier and objective phases.
    pub tol: f64,
    /// Cap on total Newton iterations across all phases.
    pub max_iter: usize,
    /// Recorded for reproducibility; the solver itself is deterministic and
    /// draws no randomness.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { margin: 1e-7, tol: 1e-8, max_iter: 5000, seed: 0 }
    }
}

/// Per-constraint violation report from the independent checker.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    pub per_constraint: Vec<(String, f64)>,
    pub worst: f64,
}

/// Assemble one constraint directly from its definition. This is the
/// checker's own code path, separate from the solver's packed representation.
fn assemble_direct(c: &LmiConstraint, problem: &LmiProblem, values: &Assignment) -> DMatrix<f64> {
    let mut m = c.constant.clone();
    for t in &c.terms {
        let vi = problem.var_index(&t.var).expect("validated");
        let v = &values[vi];
        let w = if t.transpose { v.transpose() } else { v.clone() };
        let a = &t.left * &w * &t.right;
        m += &a + a.transpose();
    }
    m
}

/// Independent feasibility checker: per-constraint signed violation (top
/// eigenvalue relative to the sense, margin included), satisfied iff <= 0.
pub fn check(problem: &LmiProblem, values: &Assignment) -> Result<ViolationReport, LmiError> {
    problem.validate()?;
    if values.len() != problem.vars.len() {
        return Err(LmiError::Dimension {
            context: "assignment length".into(),
            expected: problem.vars.len(),
            found: values.len(),
        });
    }
    for (v, var) in values.iter().zip(&problem.vars) {
        if v.nrows() != var.dim() || v.ncols() != var.dim() {
            return Err(LmiError::Dimension {
                context: format!("assignment for `{}`", var.name),
                expected: var.dim(),
                found: v.nrows(),
            });
        }
    }
    let mut per = Vec::with_capacity(problem.constraints.len());
    let mut worst = f64::NEG_INFINITY;
    for c in &problem.constraints {
        let m = assemble_direct(c, problem, values);
        let v = match c.sense {
            ConstraintSense::NegSemidef { margin } => kernels::lambda_max(&m) + margin,
            ConstraintSense::PosSemidef { margin } => margin - kernels::lambda_min(&m),
        };
        worst = worst.max(v);
        per.push((c.label.clone(), v));
    }
    Ok(ViolationReport { per_constraint: per, worst })
}

/// Solve the problem with its declared objective.
pub fn solve(problem: &LmiProblem, options: &SolveOptions) -> Result<LmiSolution, LmiError> {
    solver::solve(problem, options)
}

/// Solve with the objective replaced by `maximize trace(variable)`.
/// The returned point's trace is never smaller than a plain feasibility
/// solve's (the objective phase starts from one and only improves).
pub fn maximize_trace(
    problem: &LmiProblem,
    variable: &str,
    options: &SolveOptions,
) -> Result<LmiSolution, LmiError> {
    if problem.var_index(variable).is_none() {
        return Err(LmiError::UnknownVariable(variable.to_string()));
    }
    let mut p = problem.clone();
    p.objective = Objective::MaximizeTrace(variable.to_string());
    solver::solve(&p, options)
}

/// Convenience: look up a variable value in a solution by name.
pub fn value_of<'a>(
    problem: &LmiProblem,
    solution: &'a LmiSolution,
    name: &str,
) -> Option<&'a DMatrix<f64>> {
    problem.var_index(name).map(|i| &solution.assignment[i])
}
