//! Plant data model, builtin example families, Jacobian polytope vertex
//! generation, and preprocessing (equilibrium shift, oddness check).

use crate::expr::{self, Expr, Interval, ParseError};
use crate::lmi::kernels;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("builtin chain requires n >= 2, got {0}")]
    ChainTooShort(usize),
    #[error(
        "Jacobian entry ({row}, {col}) is unbounded on the declared domain; \
         pass a bounded box to analyze this system locally"
    )]
    UnboundedEntry { row: usize, col: usize },
    #[error("vertex generation requires an expression- or matrix-backed field")]
    FieldNotSymbolic,
    #[error("Newton iteration did not reach |f(x)| <= {tol:e} within {iters} steps (residual {residual:e})")]
    NewtonDiverged { tol: f64, iters: usize, residual: f64 },
    #[error("equilibrium shift requires an expression- or linear-backed field")]
    ShiftUnsupported,
    #[error(transparent)]
    Kernel(#[from] kernels::KernelError),
}

/// Drift vector field `f(x)`. Wrapper variants track coordinate changes and
/// truncation so balanced/reduced systems evaluate the original expressions
/// exactly instead of re-deriving them.
#[derive(Debug, Clone)]
pub enum VectorField {
    /// Componentwise expression field over `x1..xn`.
    Expr { exprs: Vec<Expr>, dim: usize },
    /// Linear field `x -> A x`.
    Linear { a: DMatrix<f64> },
    /// `z -> T f(T^{-1} z)`.
    Transformed { inner: Box<VectorField>, t: DMatrix<f64>, t_inv: DMatrix<f64> },
    /// `x_r -> first r components of inner([x_r; 0])`.
    Truncated { inner: Box<VectorField>, r: usize },
    /// `x -> inner(x) + K x` (closed-loop style linear correction).
    LinearCorrected { inner: Box<VectorField>, k: DMatrix<f64> },
}

impl VectorField {
    pub fn from_expressions(exprs: Vec<Expr>) -> Self {
        let dim = exprs.len();
        VectorField::Expr { exprs, dim }
    }

    pub fn parse(source: &str, dim: usize) -> Result<Self, ParseError> {
        Ok(VectorField::from_expressions(expr::parse_vector_field(source, dim)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Expr { dim, .. } => *dim,
            VectorField::Linear { a } => a.nrows(),
            VectorField::Transformed { t, .. } => t.nrows(),
            VectorField::Truncated { r, .. } => *r,
            VectorField::LinearCorrected { inner, .. } => inner.dim(),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            VectorField::Expr { exprs, .. } => {
                let xs = x.as_slice();
                DVector::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval(xs)))
            }
            VectorField::Linear { a } => a * x,
            VectorField::Transformed { inner, t, t_inv } => t * inner.eval(&(t_inv * x)),
            VectorField::Truncated { inner, r } => {
                let n = inner.dim();
                let mut padded = DVector::zeros(n);
                padded.rows_mut(0, *r).copy_from(x);
                inner.eval(&padded).rows(0, *r).into_owned()
            }
            VectorField::LinearCorrected { inner, k } => inner.eval(x) + k * x,
        }
    }

    /// Numeric Jacobian at a point, exact through symbolic derivatives for
    /// expression-backed fields and chain rule for the wrappers.
    pub fn jacobian_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            VectorField::Expr { exprs, dim } => {
                let xs = x.as_slice();
                DMatrix::from_fn(exprs.len(), *dim, |i, j| exprs[i].derivative(j).eval(xs))
            }
            VectorField::Linear { a } => a.clone(),
            VectorField::Transformed { inner, t, t_inv } => {
                t * inner.jacobian_at(&(t_inv * x)) * t_inv
            }
            VectorField::Truncated { inner, r } => {
                let n = inner.dim();
                let mut padded = DVector::zeros(n);
                padded.rows_mut(0, *r).copy_from(x);
                inner.jacobian_at(&padded).view((0, 0), (*r, *r)).into_owned()
            }
            VectorField::LinearCorrected { inner, k } => inner.jacobian_at(x) + k,
        }
    }

    /// Symbolic Jacobian entries when the field is expression-backed
    /// (linear fields yield constant expressions).
    pub fn symbolic_jacobian(&self) -> Option<Vec<Vec<Expr>>> {
        match self {
            VectorField::Expr { exprs, dim } => Some(expr::jacobian(exprs, *dim)),
            VectorField::Linear { a } => Some(
                (0..a.nrows())
                    .map(|i| (0..a.ncols()).map(|j| Expr::constant(a[(i, j)])).collect())
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// Nonlinear plant `dx/dt = f(x) + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub field: VectorField,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Decay-rate parameter of the Lyapunov/Riccati inequalities.
    pub epsilon: f64,
    /// Output offset recorded by equilibrium shifting (`y_hat = y - C x*`).
    pub output_shift: DVector<f64>,
}

impl PlantModel {
    pub fn new(
        field: VectorField,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        let n = field.dim();
        if b.nrows() != n {
            return Err(ModelError::Dimension(format!(
                "B has {} rows, state dimension is {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(ModelError::Dimension(format!(
                "C has {} columns, state dimension is {n}",
                c.ncols()
            )));
        }
        if epsilon < 0.0 {
            return Err(ModelError::Dimension("epsilon must be nonnegative".into()));
        }
        let p = c.nrows();
        Ok(PlantModel { field, b, c, epsilon, output_shift: DVector::zeros(p) })
    }

    pub fn n(&self) -> usize {
        self.field.dim()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Fold a constant input `u*` into the drift: `f(x) + B u*`.
    pub fn with_constant_input(&self, u_star: &DVector<f64>) -> Result<Self, ModelError> {
        if u_star.len() != self.m() {
            return Err(ModelError::Dimension(format!(
                "u* has length {}, input dimension is {}",
                u_star.len(),
                self.m()
            )));
        }
        let offset = &self.b * u_star;
        let field = match &self.field {
            VectorField::Expr { exprs, dim } => {
                let shifted: Vec<Expr> = exprs
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        if offset[i] == 0.0 {
                            e.clone()
                        } else {
                            Expr::Add(Box::new(e.clone()), Box::new(Expr::constant(offset[i])))
                        }
                    })
                    .collect();
                VectorField::Expr { exprs: shifted, dim: *dim }
            }
            _ => return Err(ModelError::ShiftUnsupported),
        };
        let mut out = self.clone();
        out.field = field;
        Ok(out)
    }
}

/// Strategy used to generate vertex matrices covering the Jacobian family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexStrategy {
    /// Base matrix plus one deviation group at a time at its endpoints; this
    /// replicates the construction used by the builtin examples but does not
    /// cover the entrywise box when two or more groups exist.
    OneAtATime,
    /// Deviations scaled by the group count so the hull provably covers the
    /// entrywise box of Jacobian values.
    ScaledSound,
    /// Vertices supplied by the caller; coverage is not verified.
    Explicit,
}

/// Finite family of matrices whose convex hull is intended to cover
/// `df/dx(x)` over the analysis domain.
#[derive(Debug, Clone)]
pub struct VertexSet {
    pub vertices: Vec<DMatrix<f64>>,
    pub strategy: VertexStrategy,
    /// True only when the convex hull provably covers the Jacobian family:
    /// scaled-sound generation, or at most one deviation group.
    pub sound: bool,
}

impl VertexSet {
    pub fn explicit(vertices: Vec<DMatrix<f64>>) -> Self {
        assert!(!vertices.is_empty(), "vertex set must be nonempty");
        VertexSet { vertices, strategy: VertexStrategy::Explicit, sound: false }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].nrows()
    }

    /// Transform every vertex by `A -> T A T^{-1}`.
    pub fn transformed(&self, t: &DMatrix<f64>, t_inv: &DMatrix<f64>) -> VertexSet {
        VertexSet {
            vertices: self.vertices.iter().map(|a| t * a * t_inv).collect(),
            strategy: self.strategy,
            sound: self.sound,
        }
    }

    /// Leading principal `r x r` blocks of every vertex.
    pub fn truncated(&self, r: usize) -> VertexSet {
        VertexSet {
            vertices: self
                .vertices
                .iter()
                .map(|a| a.view((0, 0), (r, r)).into_owned())
                .collect(),
            strategy: self.strategy,
            sound: self.sound,
        }
    }
}

/// One scalar nonlinearity shared by a group of Jacobian entries, with its
/// coefficient pattern and range over the domain.
#[derive(Debug)]
struct EntryGroup {
    pattern: DMatrix<f64>,
    range: Interval,
}

/// Decompose the symbolic Jacobian into a constant part plus groups of
/// entries driven by one scalar nonlinearity each. Grouping is by canonical
/// printed form of the nonlinear kernel with even/odd sign normalization;
/// kernels that cannot be identified stay in their own group, which widens
/// the box but never loses soundness.
fn decompose_jacobian(
    jac: &[Vec<Expr>],
    domain: &[Interval],
) -> Result<(DMatrix<f64>, Vec<EntryGroup>), ModelError> {
    let n = jac.len();
    let mut base = DMatrix::zeros(n, n);
    let mut groups: Vec<(String, DMatrix<f64>, Interval)> = Vec::new();
    for (i, row) in jac.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            for (coeff, kernel) in split_terms(entry) {
                if coeff == 0.0 {
                    continue;
                }
                match kernel {
                    None => base[(i, j)] += coeff,
                    Some(k) => {
                        let range = k.range(domain);
                        if !range.is_bounded() {
                            return Err(ModelError::UnboundedEntry { row: i + 1, col: j + 1 });
                        }
                        if range.is_point() {
                            base[(i, j)] += coeff * range.lo;
                            continue;
                        }
                        let (key, sign) = canonical_key(&k);
                        let c = coeff * sign;
                        match groups.iter_mut().find(|(k2, _, _)| *k2 == key) {
                            Some((_, pat, _)) => pat[(i, j)] += c,
                            None => {
                                let mut pat = DMatrix::zeros(n, n);
                                pat[(i, j)] = c;
                                groups.push((key, pat, range));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        base,
        groups
            .into_iter()
            .map(|(_, pattern, range)| EntryGroup { pattern, range })
            .collect(),
    ))
}

/// Split an expression into additive terms of the form `coeff * kernel`,
/// where `kernel = None` denotes a constant term.
fn split_terms(e: &Expr) -> Vec<(f64, Option<Expr>)> {
    fn walk(e: &Expr, sign: f64, out: &mut Vec<(f64, Option<Expr>)>) {
        match e {
            Expr::Add(a, b) => {
                walk(a, sign, out);
                walk(b, sign, out);
            }
            Expr::Sub(a, b) => {
                walk(a, sign, out);
                walk(b, -sign, out);
            }
            Expr::Neg(a) => walk(a, -sign, out),
            other => {
                let (c, k) = peel_coeff(other);
                out.push((sign * c, k));
            }
        }
    }
    fn peel_coeff(e: &Expr) -> (f64, Option<Expr>) {
        match e {
            Expr::Const(c) => (*c, None),
            Expr::Neg(a) => {
                let (c, k) = peel_coeff(a);
                (-c, k)
            }
            Expr::Mul(a, b) => {
                let (ca, ka) = peel_coeff(a);
                let (cb, kb) = peel_coeff(b);
                let kernel = match (ka, kb) {
                    (None, None) => None,
                    (Some(k), None) | (None, Some(k)) => Some(k),
                    (Some(ka), Some(kb)) => Some(Expr::Mul(Box::new(ka), Box::new(kb))),
                };
                (ca * cb, kernel)
            }
            other if other.is_constant() => (other.eval(&[]), None),
            other => (1.0, Some(other.clone())),
        }
    }
    let mut out = Vec::new();
    walk(e, 1.0, &mut out);
    out
}

/// Canonical grouping key for a nonlinear kernel: sign-normalize through even
/// functions (`cos`, even powers) and pull signs out of odd functions (`sin`,
/// `tanh`, `arctan`, odd powers), then print. Two entries share a group only
/// if the canonical forms are identical, so grouping can only be too fine,
/// never unsound.
fn canonical_key(e: &Expr) -> (String, f64) {
    let (norm, sign) = normalize_sign(e);
    (norm.to_string(), sign)
}

fn normalize_sign(e: &Expr) -> (Expr, f64) {
    match e {
        Expr::Neg(a) => {
            let (n, s) = normalize_sign(a);
            (n, -s)
        }
        Expr::Sin(a) => {
            let (arg, s) = canonical_arg(a);
            (Expr::Sin(Box::new(arg)), s)
        }
        Expr::Cos(a) => {
            let (arg, _) = canonical_arg(a);
            (Expr::Cos(Box::new(arg)), 1.0)
        }
        Expr::Tanh(a) => {
            let (arg, s) = canonical_arg(a);
            (Expr::Tanh(Box::new(arg)), s)
        }
        Expr::Atan(a) => {
            let (arg, s) = canonical_arg(a);
            (Expr::Atan(Box::new(arg)), s)
        }
        Expr::Pow(a, k) => {
            let (arg, s) = canonical_arg(a);
            let sign = if k % 2 == 0 { 1.0 } else { s };
            (Expr::Pow(Box::new(arg), *k), sign)
        }
        other => (other.clone(), 1.0),
    }
}

/// Choose the lexicographically smaller of `arg` and `-arg` (in printed form)
/// as the canonical argument, returning the flip sign.
fn canonical_arg(a: &Expr) -> (Expr, f64) {
    let negated = negate(a);
    let sa = a.to_string();
    let sn = negated.to_string();
    if sn < sa {
        (negated, -1.0)
    } else {
        (a.clone(), 1.0)
    }
}

/// Structural negation pushed through sums.
fn negate(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(a) => (**a).clone(),
        Expr::Add(a, b) => Expr::Add(Box::new(negate(a)), Box::new(negate(b))),
        Expr::Sub(a, b) => Expr::Sub(Box::new((**b).clone()), Box::new((**a).clone())),
        other => Expr::Neg(Box::new(other.clone())),
    }
}

/// Build a vertex family covering the Jacobians of `plant.field` over the
/// domain box (`None` means all of R^n).
pub fn build_vertices(
    plant: &PlantModel,
    strategy: VertexStrategy,
    domain: Option<&[Interval]>,
) -> Result<VertexSet, ModelError> {
    let n = plant.n();
    let jac = plant
        .field
        .symbolic_jacobian()
        .ok_or(ModelError::FieldNotSymbolic)?;
    let whole: Vec<Interval> = vec![Interval::whole_line(); n];
    let domain = domain.unwrap_or(&whole);
    let (base, groups) = decompose_jacobian(&jac, domain)?;
    // Base matrix holds every bounded group's midpoint contribution.
    let mut a0 = base.clone();
    for g in &groups {
        a0 += &g.pattern * g.range.midpoint();
    }
    if groups.is_empty() {
        return Ok(VertexSet {
            vertices: vec![a0],
            strategy,
            sound: true,
        });
    }
    let scale = match strategy {
        VertexStrategy::OneAtATime => 1.0,
        VertexStrategy::ScaledSound => groups.len() as f64,
        VertexStrategy::Explicit => {
            return Err(ModelError::Dimension(
                "explicit strategy requires caller-supplied vertices".into(),
            ))
        }
    };
    let mut vertices = vec![a0.clone()];
    for g in &groups {
        let dev = &g.pattern * (g.range.half_width() * scale);
        vertices.push(&a0 + &dev);
        vertices.push(&a0 - &dev);
    }
    let sound = matches!(strategy, VertexStrategy::ScaledSound) || groups.len() <= 1;
    Ok(VertexSet { vertices, strategy, sound })
}

/// The coupled chain of first-order nodes used as the model-reduction
/// benchmark: node 1 is driven and measured, interior nodes couple to both
/// neighbors through sine terms.
pub fn builtin_network_chain(n: usize, epsilon: f64) -> Result<PlantModel, ModelError> {
    if n < 2 {
        return Err(ModelError::ChainTooShort(n));
    }
    let mut lines = Vec::with_capacity(n);
    for i in 1..=n {
        let mut s = format!("-3*x{i}");
        if i > 1 {
            s.push_str(&format!(" + sin(x{} - x{})", i - 1, i));
        }
        if i < n {
            s.push_str(&format!(" + sin(x{} - x{})", i + 1, i));
        }
        lines.push(s);
    }
    let field = VectorField::parse(&lines.join("\n"), n)?;
    let mut b = DMatrix::zeros(n, 1);
    b[(0, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, n);
    c[(0, 0)] = 1.0;
    PlantModel::new(field, b, c, epsilon)
}

/// Mass position/velocity driven through a motor circuit: state
/// `(z, dz/dt, i)`, voltage input, position and velocity measured.
pub fn builtin_dc_motor(epsilon: f64) -> Result<PlantModel, ModelError> {
    let field = VectorField::parse("x2\nsin(x1) - 2*x2 + x3\n-5*x2 - 5*x3", 3)?;
    let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 5.0]);
    let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    PlantModel::new(field, b, c, epsilon)
}

/// Result of the odd-symmetry check `f(-x) = -f(x)`.
#[derive(Debug, Clone)]
pub struct OddnessReport {
    pub max_residual: f64,
    pub pass: bool,
    pub samples: usize,
}

/// Sample-based check that the drift is odd; pass threshold `1e-9` on the
/// max-norm residual `|f(-x) + f(x)|`.
pub fn check_oddness(plant: &PlantModel, samples: usize, radius: f64, seed: u64) -> OddnessReport {
    let n = plant.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    for _ in 0..samples {
        let x = DVector::from_fn(n, |_, _| rng.gen_range(-radius..radius));
        let r = plant.field.eval(&(-&x)) + plant.field.eval(&x);
        max_residual = max_residual.max(r.amax());
    }
    OddnessReport { max_residual, pass: max_residual <= 1e-9, samples }
}

/// Newton-shift the plant so its equilibrium sits at the origin; returns the
/// shifted plant and the equilibrium `x*` found from `guess`.
pub fn shift_to_equilibrium(
    plant: &PlantModel,
    guess: &DVector<f64>,
) -> Result<(PlantModel, DVector<f64>), ModelError> {
    let n = plant.n();
    if guess.len() != n {
        return Err(ModelError::Dimension(format!(
            "guess has length {}, state dimension is {n}",
            guess.len()
        )));
    }
    let tol = 1e-10;
    let iters = 100;
    let mut x = guess.clone();
    let mut residual = plant.field.eval(&x).amax();
    for _ in 0..iters {
        if residual <= tol {
            break;
        }
        let j = plant.field.jacobian_at(&x);
        let f = plant.field.eval(&x);
        let step = kernels::lu_solve(&j, &DMatrix::from_column_slice(n, 1, f.as_slice()))
            .map_err(|_| ModelError::NewtonDiverged { tol, iters, residual })?;
        x -= DVector::from_column_slice(step.as_slice());
        residual = plant.field.eval(&x).amax();
    }
    if residual > tol {
        return Err(ModelError::NewtonDiverged { tol, iters, residual });
    }
    let field = match &plant.field {
        VectorField::Expr { exprs, dim } => VectorField::Expr {
            exprs: exprs.iter().map(|e| e.shift_vars(x.as_slice())).collect(),
            dim: *dim,
        },
        VectorField::Linear { a } => VectorField::Linear { a: a.clone() },
        _ => return Err(ModelError::ShiftUnsupported),
    };
    let mut shifted = plant.clone();
    shifted.field = field;
    shifted.output_shift = &plant.c * &x;
    Ok((shifted, x))
}
