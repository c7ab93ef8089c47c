//! Scalar expressions over state variables `x1..xn`: parsing, evaluation,
//! exact symbolic differentiation and interval range bounding.
//!
//! The grammar covers numeric literals, `+`, `-` (binary and unary), `*`,
//! integer powers `^k`, and the unary functions `sin`, `cos`, `tanh`,
//! `arctan`. Every operation is total on real inputs, and differentiation is
//! closed over the same operator set (the derivative of `arctan u` is written
//! as `cos(arctan(u))^2 * u'`).

mod interval;
mod parse;

pub use interval::Interval;
pub use parse::{parse_expression, parse_vector_field, ParseError};

use std::fmt;

/// Expression AST. Variables are 0-indexed internally; `Var(0)` is `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Integer power with nonnegative exponent; `Pow(e, 0)` evaluates to 1.
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Tanh(Box<Expr>),
    Atan(Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    /// Evaluate at a point. Panics only if a variable index exceeds `x.len()`,
    /// which the parser rules out for expressions built from text.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Neg(a) => -a.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k as i32),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Tanh(a) => a.eval(x).tanh(),
            Expr::Atan(a) => a.eval(x).atan(),
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Tanh(a)
            | Expr::Atan(a) => a.max_var(),
        }
    }

    /// Exact partial derivative with respect to `x_{index+1}`, lightly folded
    /// so that common cases stay readable (e.g. `d/dx1 sin(x1) = cos(x1)`).
    pub fn derivative(&self, index: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == index { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => add(a.derivative(index), b.derivative(index)),
            Expr::Sub(a, b) => sub(a.derivative(index), b.derivative(index)),
            Expr::Neg(a) => neg(a.derivative(index)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(index), (**b).clone()),
                mul((**a).clone(), b.derivative(index)),
            ),
            Expr::Pow(a, k) => match *k {
                0 => Expr::Const(0.0),
                1 => a.derivative(index),
                k => mul(
                    mul(Expr::Const(f64::from(k)), pow((**a).clone(), k - 1)),
                    a.derivative(index),
                ),
            },
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.derivative(index)),
            Expr::Cos(a) => mul(neg(Expr::Sin(a.clone())), a.derivative(index)),
            Expr::Tanh(a) => mul(
                sub(Expr::Const(1.0), pow(Expr::Tanh(a.clone()), 2)),
                a.derivative(index),
            ),
            // 1/(1+u^2) == cos(arctan u)^2, which keeps the AST closed under
            // the surface grammar and is total.
            Expr::Atan(a) => mul(
                pow(Expr::Cos(Box::new(Expr::Atan(a.clone()))), 2),
                a.derivative(index),
            ),
        }
    }

    /// Substitute `x_i -> x_i + delta[i]`, used to shift coordinates so the
    /// equilibrium moves to the origin.
    pub fn shift_vars(&self, delta: &[f64]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => {
                let d = delta.get(*i).copied().unwrap_or(0.0);
                if d == 0.0 {
                    Expr::Var(*i)
                } else {
                    add(Expr::Var(*i), Expr::Const(d))
                }
            }
            Expr::Add(a, b) => add(a.shift_vars(delta), b.shift_vars(delta)),
            Expr::Sub(a, b) => sub(a.shift_vars(delta), b.shift_vars(delta)),
            Expr::Neg(a) => neg(a.shift_vars(delta)),
            Expr::Mul(a, b) => mul(a.shift_vars(delta), b.shift_vars(delta)),
            Expr::Pow(a, k) => pow(a.shift_vars(delta), *k),
            Expr::Sin(a) => Expr::Sin(Box::new(a.shift_vars(delta))),
            Expr::Cos(a) => Expr::Cos(Box::new(a.shift_vars(delta))),
            Expr::Tanh(a) => Expr::Tanh(Box::new(a.shift_vars(delta))),
            Expr::Atan(a) => Expr::Atan(Box::new(a.shift_vars(delta))),
        }
    }

    /// Interval range over a box of per-variable intervals. Conservative:
    /// `sin`/`cos` map to `[-1, 1]`, `tanh`/`arctan` use monotonicity, powers
    /// use sign case analysis. Unbounded results carry infinite endpoints.
    pub fn range(&self, domain: &[Interval]) -> Interval {
        match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(i) => domain
                .get(*i)
                .copied()
                .unwrap_or_else(Interval::whole_line),
            Expr::Add(a, b) => a.range(domain).add(b.range(domain)),
            Expr::Sub(a, b) => a.range(domain).sub(b.range(domain)),
            Expr::Neg(a) => a.range(domain).neg(),
            Expr::Mul(a, b) => a.range(domain).mul(b.range(domain)),
            Expr::Pow(a, k) => a.range(domain).powi(*k),
            Expr::Sin(_) | Expr::Cos(_) => Interval::new(-1.0, 1.0),
            Expr::Tanh(a) => a.range(domain).monotone(f64::tanh),
            Expr::Atan(a) => a.range(domain).monotone(f64::atan),
        }
    }

    /// True when the expression contains no variables.
    pub fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }
}

// Constructors with light constant folding. Folding only removes exact
// identities (0, 1) introduced by differentiation; user input is kept as is.
fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(0.0), b) => b,
        (a, Expr::Const(0.0)) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, Expr::Const(0.0)) => a,
        (Expr::Const(0.0), b) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => Expr::Const(-x),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(0.0), _) | (_, Expr::Const(0.0)) => Expr::Const(0.0),
        (Expr::Const(1.0), b) => b,
        (a, Expr::Const(1.0)) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: u32) -> Expr {
    match k {
        0 => Expr::Const(1.0),
        1 => a,
        k => Expr::Pow(Box::new(a), k),
    }
}

/// Evaluate a parsed vector field componentwise.
pub fn eval_field(field: &[Expr], x: &[f64]) -> Vec<f64> {
    field.iter().map(|e| e.eval(x)).collect()
}

/// Exact symbolic Jacobian of a vector field: entry `(i, j)` is
/// `d f_i / d x_{j+1}`.
pub fn jacobian(field: &[Expr], n: usize) -> Vec<Vec<Expr>> {
    field
        .iter()
        .map(|fi| (0..n).map(|j| fi.derivative(j)).collect())
        .collect()
}

/// Interval range of a single Jacobian entry over a domain box.
pub fn derivative_range(entry: &Expr, domain: &[Interval]) -> Interval {
    entry.range(domain)
}

// Precedence levels used for minimal parenthesization in `Display`.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
            if precedence(e) < min_prec {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (c == &0.0 && c.is_sign_negative()) {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, k) => {
                wrap(f, a, 5)?;
                write!(f, "^{k}")
            }
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Tanh(a) => write!(f, "tanh({a})"),
            Expr::Atan(a) => write!(f, "arctan({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str, n: usize) -> Expr {
        parse_expression(src, n).unwrap()
    }

    #[test]
    fn eval_cubic_example() {
        let e = p("-x1 - x1^3", 1);
        assert_eq!(e.eval(&[2.0]), -10.0);
        assert_eq!(e.eval(&[0.0]), 0.0);
    }

    #[test]
    fn derivative_of_cubic() {
        // d/dx (-x - x^3) = -1 - 3 x^2
        let e = p("-x1 - x1^3", 1);
        let d = e.derivative(0);
        for &x in &[-2.0, -0.5, 0.0, 1.0, 3.0] {
            let expect = -1.0 - 3.0 * x * x;
            assert!((d.eval(&[x]) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_coupling_sine() {
        // d/dx2 sin(x2 - x1) = cos(x2 - x1)
        let e = p("sin(x2 - x1) - 3*x1", 2);
        let d = e.derivative(1);
        let x = [0.3, -1.2];
        assert!((d.eval(&x) - (x[1] - x[0]).cos()).abs() < 1e-12);
    }

    #[test]
    fn atan_derivative_total_and_exact() {
        let e = p("arctan(x1)", 1);
        let d = e.derivative(0);
        for &x in &[-50.0, -1.0, 0.0, 0.7, 100.0] {
            let expect = 1.0 / (1.0 + x * x);
            assert!(
                (d.eval(&[x]) - expect).abs() < 1e-12,
                "x={x}: {} vs {expect}",
                d.eval(&[x])
            );
        }
    }

    #[test]
    fn tanh_derivative() {
        let e = p("tanh(2*x1)", 1);
        let d = e.derivative(0);
        let x = 0.37f64;
        let expect = 2.0 * (1.0 - (2.0 * x).tanh().powi(2));
        assert!((d.eval(&[x]) - expect).abs() < 1e-12);
    }

    #[test]
    fn display_round_trip_simple() {
        for src in [
            "-x1 - x1^3",
            "sin(x2 - x1) - 3*x1",
            "2*x1*cos(x2) + tanh(x1 - 0.5)",
            "-(x1 + x2)^3",
            "arctan(x1)*x2 - 1.25",
        ] {
            let e = p(src, 2);
            let printed = e.to_string();
            let back = parse_expression(&printed, 2).unwrap();
            for k in 0..20 {
                let x = [(k as f64) * 0.3 - 3.0, (k as f64) * -0.17 + 1.0];
                assert_eq!(e.eval(&x), back.eval(&x), "{src} -> {printed}");
            }
        }
    }
}
