//! Fixed-step RK4 simulation of plants, reduced models, observers and closed
//! loops, plus the property verifiers for every simulation-testable claim.
//!
//! All verifiers are deterministic given a seed, trials are merged by index,
//! and divergence is reported rather than clipped.

use crate::lmi::kernels;
use crate::lqgsyn::Controller;
use crate::sysmodel::PlantModel;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dt must be positive and no larger than the horizon")]
    BadStep,
    #[error(transparent)]
    Kernel(#[from] kernels::KernelError),
}

/// Deterministic input signal.
#[derive(Debug, Clone)]
pub enum Signal {
    Zero { dim: usize },
    Constant(DVector<f64>),
    /// Sum of sines applied identically on every channel:
    /// `sum_k amp_k sin(freq_k t)`.
    SumOfSines { dim: usize, terms: Vec<(f64, f64)> },
    /// Right-continuous step function: value `values[i]` on
    /// `[times[i], times[i+1])`, last value held.
    PiecewiseConstant { times: Vec<f64>, values: Vec<DVector<f64>> },
}

impl Signal {
    pub fn dim(&self) -> usize {
        match self {
            Signal::Zero { dim } => *dim,
            Signal::Constant(v) => v.len(),
            Signal::SumOfSines { dim, .. } => *dim,
            Signal::PiecewiseConstant { values, .. } => values[0].len(),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            Signal::Zero { dim } => DVector::zeros(*dim),
            Signal::Constant(v) => v.clone(),
            Signal::SumOfSines { dim, terms } => {
                let v: f64 = terms.iter().map(|(a, w)| a * (w * t).sin()).sum();
                DVector::from_element(*dim, v)
            }
            Signal::PiecewiseConstant { times, values } => {
                let mut idx = 0;
                for (i, &ti) in times.iter().enumerate() {
                    if t >= ti {
                        idx = i;
                    } else {
                        break;
                    }
                }
                values[idx].clone()
            }
        }
    }
}

/// Uniform-grid trajectory with named output channels.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub channels: Vec<(String, Vec<DVector<f64>>)>,
    /// Set when the state max-norm exceeded 1e9; integration stops there.
    pub diverged: bool,
}

impl Trajectory {
    pub fn channel(&self, name: &str) -> Option<&[DVector<f64>]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
    }

    /// Trapezoidal L2 norm of a channel over the grid.
    pub fn l2_norm(&self, name: &str) -> Option<f64> {
        let data = self.channel(name)?;
        Some(l2_trapezoid(data, self.dt))
    }

    /// CSV with header `t,<channel components>` and full-precision decimal
    /// values (shortest round-trip formatting).
    pub fn to_csv(&self) -> String {
        let mut header = String::from("t");
        for (name, data) in &self.channels {
            let w = data.first().map_or(0, |v| v.len());
            if w == 1 {
                let _ = write!(header, ",{name}");
            } else {
                for i in 1..=w {
                    let _ = write!(header, ",{name}{i}");
                }
            }
        }
        let mut out = header;
        out.push('\n');
        for (k, &t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t}");
            for (_, data) in &self.channels {
                for v in data[k].iter() {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Trapezoidal L2 norm of a sampled vector signal.
pub fn l2_trapezoid(data: &[DVector<f64>], dt: f64) -> f64 {
    if data.len() < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, v) in data.iter().enumerate() {
        let w = if i == 0 || i == data.len() - 1 { 0.5 } else { 1.0 };
        acc += w * v.norm_squared();
    }
    (acc * dt).sqrt()
}

const DIVERGENCE_LIMIT: f64 = 1e9;

/// Named sampling function attached to a simulation run.
pub type ChannelFn<'a> = (&'a str, &'a dyn Fn(f64, &DVector<f64>) -> DVector<f64>);

/// Classical fixed-step RK4 over `[0, t_final]`; `deriv(t, x)` supplies the
/// vector field. Channels are sampled from the state after each step.
pub fn integrate_ode(
    deriv: &dyn Fn(f64, &DVector<f64>) -> DVector<f64>,
    x0: DVector<f64>,
    t_final: f64,
    dt: f64,
    channels: &[ChannelFn<'_>],
) -> Result<Trajectory, SimError> {
    if dt <= 0.0 || t_final < dt {
        return Err(SimError::BadStep);
    }
    let steps = (t_final / dt).round() as usize;
    let mut x = x0;
    let mut t = 0.0;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut chan_data: Vec<(String, Vec<DVector<f64>>)> = channels
        .iter()
        .map(|(n, _)| (n.to_string(), Vec::with_capacity(steps + 1)))
        .collect();
    let mut diverged = false;
    for step in 0..=steps {
        times.push(t);
        states.push(x.clone());
        for ((_, f), (_, data)) in channels.iter().zip(chan_data.iter_mut()) {
            data.push(f(t, &x));
        }
        if x.amax() > DIVERGENCE_LIMIT {
            diverged = true;
            break;
        }
        if step == steps {
            break;
        }
        let k1 = deriv(t, &x);
        let k2 = deriv(t + dt / 2.0, &(&x + &k1 * (dt / 2.0)));
        let k3 = deriv(t + dt / 2.0, &(&x + &k2 * (dt / 2.0)));
        let k4 = deriv(t + dt, &(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        t += dt;
    }
    Ok(Trajectory { dt, times, states, channels: chan_data, diverged })
}

/// Simulate `dx/dt = f(x) + B u(t)`, recording `x`, `y`, `u`.
pub fn integrate(
    plant: &PlantModel,
    x0: &DVector<f64>,
    u: &Signal,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    if x0.len() != plant.n() {
        return Err(SimError::Dimension(format!(
            "x0 has length {}, state dimension is {}",
            x0.len(),
            plant.n()
        )));
    }
    if u.dim() != plant.m() {
        return Err(SimError::Dimension(format!(
            "input has dimension {}, plant expects {}",
            u.dim(),
            plant.m()
        )));
    }
    let deriv = |t: f64, x: &DVector<f64>| plant.field.eval(x) + &plant.b * u.eval(t);
    let y = |_t: f64, x: &DVector<f64>| &plant.c * x;
    let uu = |t: f64, _x: &DVector<f64>| u.eval(t);
    integrate_ode(
        &deriv,
        x0.clone(),
        t_final,
        dt,
        &[("x", &|_t: f64, x: &DVector<f64>| x.clone()), ("y", &y), ("u", &uu)],
    )
}

/// Simulate the disturbance-driven loop of a plant and an output-feedback
/// controller: `dx/dt = f(x) + B(u + w_u)`, `y = Cx + w_y`, `u = F x_c`,
/// with channels `x`, `xc`, `u`, `y`, `z = (u; Cx)`, `w`.
pub fn simulate_closed_loop(
    plant: &PlantModel,
    controller: &Controller,
    x0: &DVector<f64>,
    xc0: &DVector<f64>,
    w: (&Signal, &Signal),
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    let n = plant.n();
    let nc = controller.order;
    if x0.len() != n || xc0.len() != nc {
        return Err(SimError::Dimension("initial states".into()));
    }
    if w.0.dim() != plant.m() || w.1.dim() != plant.p() {
        return Err(SimError::Dimension("disturbance dimensions".into()));
    }
    let stack = |x: &DVector<f64>| (x.rows(0, n).into_owned(), x.rows(n, nc).into_owned());
    let deriv = move |t: f64, s: &DVector<f64>| {
        let (x, xc) = stack(s);
        let wu = w.0.eval(t);
        let wy = w.1.eval(t);
        let u = controller.control_output(&xc);
        let y = &plant.c * &x + wy;
        let dx = plant.field.eval(&x) + &plant.b * (&u + wu);
        let dxc = controller.state_deriv(&xc, &y);
        let mut out = DVector::zeros(n + nc);
        out.rows_mut(0, n).copy_from(&dx);
        out.rows_mut(n, nc).copy_from(&dxc);
        out
    };
    let mut s0 = DVector::zeros(n + nc);
    s0.rows_mut(0, n).copy_from(x0);
    s0.rows_mut(n, nc).copy_from(xc0);
    let ch_x = |_t: f64, s: &DVector<f64>| s.rows(0, n).into_owned();
    let ch_xc = |_t: f64, s: &DVector<f64>| s.rows(n, nc).into_owned();
    let ch_u =
        move |_t: f64, s: &DVector<f64>| controller.control_output(&s.rows(n, nc).into_owned());
    let ch_y = move |t: f64, s: &DVector<f64>| &plant.c * s.rows(0, n).into_owned() + w.1.eval(t);
    let ch_z = move |_t: f64, s: &DVector<f64>| {
        let u = controller.control_output(&s.rows(n, nc).into_owned());
        let zy = &plant.c * s.rows(0, n).into_owned();
        let mut z = DVector::zeros(u.len() + zy.len());
        z.rows_mut(0, u.len()).copy_from(&u);
        z.rows_mut(u.len(), zy.len()).copy_from(&zy);
        z
    };
    let ch_w = move |t: f64, _s: &DVector<f64>| {
        let wu = w.0.eval(t);
        let wy = w.1.eval(t);
        let mut out = DVector::zeros(wu.len() + wy.len());
        out.rows_mut(0, wu.len()).copy_from(&wu);
        out.rows_mut(wu.len(), wy.len()).copy_from(&wy);
        out
    };
    integrate_ode(
        &deriv,
        s0,
        t_final,
        dt,
        &[
            ("x", &ch_x),
            ("xc", &ch_xc),
            ("u", &ch_u),
            ("y", &ch_y),
            ("z", &ch_z),
            ("w", &ch_w),
        ],
    )
}

/// Outcome of one verifier run.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub name: String,
    pub pass: bool,
    pub trials: usize,
    /// Worst margin over all trials and grid points; negative means the
    /// checked inequality held with room to spare.
    pub worst_margin: f64,
    pub detail: String,
}

fn trial_initial_states(
    n: usize,
    trials: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    // Uniform directions at two scales (radius 1 and 10), alternating.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|k| {
            let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            v * if k % 2 == 0 { 1.0 } else { 10.0 }
        })
        .collect()
}

// Inline Box-Muller standard normal; enough for trial directions without
// pulling in a distributions crate.
struct StandardNormal;
impl rand::distributions::Distribution<f64> for StandardNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn cycle_inputs(m: usize, trial: usize, rng: &mut ChaCha8Rng) -> Signal {
    match trial % 3 {
        0 => Signal::Zero { dim: m },
        1 => Signal::Constant(DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))),
        _ => Signal::SumOfSines { dim: m, terms: vec![(1.0, 1.0), (1.0, 3.0)] },
    }
}

/// Verify incremental exponential contraction in the `X^{-1}` metric:
/// for random state pairs under a shared input,
/// `|dx(t)|^2_{X^-1} <= e^{-eps t} |dx(0)|^2_{X^-1} (1 + 1e-6)` on the grid.
pub fn verify_ies(
    plant: &PlantModel,
    x_gram: &DMatrix<f64>,
    epsilon: f64,
    trials: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<VerifyReport, SimError> {
    let n = plant.n();
    let xinv = kernels::spd_inverse(x_gram, "verify_ies metric")?;
    let metric = |v: &DVector<f64>| (v.transpose() * &xinv * v)[(0, 0)];
    let starts_a = trial_initial_states(n, trials, seed);
    let starts_b = trial_initial_states(n, trials, seed.wrapping_add(0x9e3779b9));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst = f64::NEG_INFINITY;
    let tol = 1e-6;
    for k in 0..trials {
        let u = cycle_inputs(plant.m(), k, &mut rng);
        let ta = integrate(plant, &starts_a[k], &u, t_final, dt)?;
        let tb = integrate(plant, &starts_b[k], &u, t_final, dt)?;
        if ta.diverged || tb.diverged {
            return Ok(VerifyReport {
                name: "ies".into(),
                pass: false,
                trials,
                worst_margin: f64::INFINITY,
                detail: format!("trajectory diverged in trial {k}"),
            });
        }
        let d0 = metric(&(&starts_a[k] - &starts_b[k]));
        for (i, t) in ta.times.iter().enumerate() {
            let dx = &ta.states[i] - &tb.states[i];
            let lhs = metric(&dx);
            let rhs = (-epsilon * t).exp() * d0 * (1.0 + tol);
            worst = worst.max(lhs - rhs);
        }
    }
    Ok(VerifyReport {
        name: "ies".into(),
        pass: worst <= 0.0,
        trials,
        worst_margin: worst,
        detail: format!("worst excess over the decay envelope: {worst:.3e}"),
    })
}

/// Verify the finite-horizon output-energy bound in the `Y` metric for
/// constant inputs:
/// `int |y - y'|^2 + |dx(T)|^2_Y <= |dx(0)|^2_Y (1 + 1e-6)`.
pub fn verify_observability_decay(
    plant: &PlantModel,
    y_gram: &DMatrix<f64>,
    trials: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<VerifyReport, SimError> {
    let n = plant.n();
    let metric = |v: &DVector<f64>| (v.transpose() * y_gram * v)[(0, 0)];
    let starts_a = trial_initial_states(n, trials, seed);
    let starts_b = trial_initial_states(n, trials, seed.wrapping_add(0x517cc1b7));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mut worst = f64::NEG_INFINITY;
    let tol = 1e-6;
    for k in 0..trials {
        let u = if k % 2 == 0 {
            Signal::Zero { dim: plant.m() }
        } else {
            Signal::Constant(DVector::from_fn(plant.m(), |_, _| rng.gen_range(-1.0..1.0)))
        };
        let ta = integrate(plant, &starts_a[k], &u, t_final, dt)?;
        let tb = integrate(plant, &starts_b[k], &u, t_final, dt)?;
        if ta.diverged || tb.diverged {
            return Ok(VerifyReport {
                name: "observability-decay".into(),
                pass: false,
                trials,
                worst_margin: f64::INFINITY,
                detail: format!("trajectory diverged in trial {k}"),
            });
        }
        let ya = ta.channel("y").unwrap();
        let yb = tb.channel("y").unwrap();
        let dy: Vec<DVector<f64>> = ya.iter().zip(yb).map(|(a, b)| a - b).collect();
        let energy = l2_trapezoid(&dy, dt).powi(2);
        let terminal = metric(&(ta.states.last().unwrap() - tb.states.last().unwrap()));
        let initial = metric(&(&starts_a[k] - &starts_b[k]));
        worst = worst.max(energy + terminal - initial * (1.0 + tol));
    }
    Ok(VerifyReport {
        name: "observability-decay".into(),
        pass: worst <= 0.0,
        trials,
        worst_margin: worst,
        detail: format!("worst excess over the stored-energy bound: {worst:.3e}"),
    })
}

/// Verify the truncation output error bound from zero initial states:
/// `||y - y_r||_T <= bound * ||u||_T (1 + 1e-3)` for each input signal.
pub fn verify_error_bound(
    full: &PlantModel,
    reduced: &PlantModel,
    bound: f64,
    inputs: &[Signal],
    t_final: f64,
    dt: f64,
) -> Result<VerifyReport, SimError> {
    let mut worst = f64::NEG_INFINITY;
    let tol = 1e-3;
    let mut detail = String::new();
    for (k, u) in inputs.iter().enumerate() {
        let tf = integrate(full, &DVector::zeros(full.n()), u, t_final, dt)?;
        let tr = integrate(reduced, &DVector::zeros(reduced.n()), u, t_final, dt)?;
        if tf.diverged || tr.diverged {
            return Ok(VerifyReport {
                name: "error-bound".into(),
                pass: false,
                trials: inputs.len(),
                worst_margin: f64::INFINITY,
                detail: format!("trajectory diverged for input {k}"),
            });
        }
        let yf = tf.channel("y").unwrap();
        let yr = tr.channel("y").unwrap();
        let dy: Vec<DVector<f64>> = yf.iter().zip(yr).map(|(a, b)| a - b).collect();
        let err = l2_trapezoid(&dy, dt);
        let unorm = tf.l2_norm("u").unwrap();
        let rhs = bound * unorm * (1.0 + tol);
        worst = worst.max(err - rhs);
        let _ = writeln!(detail, "input {k}: ||y - y_r|| = {err:.6e}, bound = {rhs:.6e}");
    }
    Ok(VerifyReport {
        name: "error-bound".into(),
        pass: worst <= 0.0,
        trials: inputs.len(),
        worst_margin: worst,
        detail,
    })
}

/// Fit `log |state(t)|` on the tail half of a trajectory by least squares;
/// returns the slope. Points below 1e-300 are clamped.
fn fitted_decay_slope(traj: &Trajectory) -> f64 {
    let m = traj.times.len();
    let start = m / 2;
    let pts: Vec<(f64, f64)> = (start..m)
        .map(|i| (traj.times[i], traj.states[i].norm().max(1e-300).ln()))
        .collect();
    let k = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (k * sxy - sx * sy) / (k * sxx - sx * sx)
}

/// Verify global exponential decay of an autonomous closed loop from random
/// initial states: fitted tail slope <= `slope_max` and final norm <=
/// `final_ratio * initial norm` in every trial.
#[allow(clippy::too_many_arguments)]
pub fn verify_ges(
    plant: &PlantModel,
    controller: &Controller,
    trials: usize,
    t_final: f64,
    dt: f64,
    slope_max: f64,
    final_ratio: f64,
    seed: u64,
) -> Result<VerifyReport, SimError> {
    let n = plant.n();
    let starts = trial_initial_states(n, trials, seed);
    let zero_u = Signal::Zero { dim: plant.m() };
    let zero_y = Signal::Zero { dim: plant.p() };
    let mut worst_slope = f64::NEG_INFINITY;
    let mut pass = true;
    let mut detail = String::new();
    for (k, x0) in starts.iter().enumerate() {
        let xc0 = DVector::zeros(controller.order);
        let traj = simulate_closed_loop(
            plant,
            controller,
            x0,
            &xc0,
            (&zero_u, &zero_y),
            t_final,
            dt,
        )?;
        if traj.diverged {
            pass = false;
            let _ = writeln!(detail, "trial {k}: diverged");
            worst_slope = f64::INFINITY;
            continue;
        }
        let slope = fitted_decay_slope(&traj);
        let init = traj.states.first().unwrap().norm();
        let fin = traj.states.last().unwrap().norm();
        let ok = slope <= slope_max && fin <= final_ratio * init;
        if !ok {
            pass = false;
            let _ = writeln!(
                detail,
                "trial {k}: slope {slope:.4e}, final/initial {:.3e}",
                fin / init
            );
        }
        worst_slope = worst_slope.max(slope);
    }
    Ok(VerifyReport {
        name: "ges".into(),
        pass,
        trials,
        worst_margin: worst_slope - slope_max,
        detail: if detail.is_empty() {
            format!("worst fitted slope {worst_slope:.4e}")
        } else {
            detail
        },
    })
}

/// Verify the finite-horizon disturbance gain from zero initial states:
/// `||z||_T <= gamma_claim ||w||_T (1 + 1e-3)` for each disturbance pair.
pub fn verify_gain(
    plant: &PlantModel,
    controller: &Controller,
    gamma_claim: f64,
    disturbances: &[(Signal, Signal)],
    t_final: f64,
    dt: f64,
) -> Result<VerifyReport, SimError> {
    let mut worst = f64::NEG_INFINITY;
    let tol = 1e-3;
    let mut detail = String::new();
    for (k, (wu, wy)) in disturbances.iter().enumerate() {
        let traj = simulate_closed_loop(
            plant,
            controller,
            &DVector::zeros(plant.n()),
            &DVector::zeros(controller.order),
            (wu, wy),
            t_final,
            dt,
        )?;
        if traj.diverged {
            return Ok(VerifyReport {
                name: "gain".into(),
                pass: false,
                trials: disturbances.len(),
                worst_margin: f64::INFINITY,
                detail: format!("loop diverged for disturbance {k}"),
            });
        }
        let znorm = traj.l2_norm("z").unwrap();
        let wnorm = traj.l2_norm("w").unwrap();
        let rhs = gamma_claim * wnorm * (1.0 + tol);
        worst = worst.max(znorm - rhs);
        let _ = writeln!(detail, "disturbance {k}: ||z|| = {znorm:.6e}, bound = {rhs:.6e}");
    }
    Ok(VerifyReport {
        name: "gain".into(),
        pass: worst <= 0.0,
        trials: disturbances.len(),
        worst_margin: worst,
        detail,
    })
}
