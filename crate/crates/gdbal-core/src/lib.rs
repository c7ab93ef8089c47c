//! Balancing-based model and controller reduction for nonlinear systems of the
//! form `dx/dt = f(x) + B u`, `y = C x`, certified through polytopic linear
//! matrix inequalities and checked by simulation.
//!
//! The crate is organized as a pipeline:
//!
//! * [`expr`] — parsing, evaluation, symbolic differentiation and interval
//!   bounding of vector fields supplied as text.
//! * [`sysmodel`] — plant records, builtin example families, Jacobian
//!   polytope vertex generation and preprocessing.
//! * [`lmi`] — affine symmetric matrix inequality problems, a log-det barrier
//!   solver and an independent feasibility checker.
//! * [`balancing`] — contragredient transformations, coordinate changes and
//!   balanced truncation with error bounds.
//! * [`gdreduce`] — generalized differential (GD) Gramians and model reduction.
//! * [`lqgsyn`] — GD Riccati pairs, coprime representations, observers and
//!   observer-based dynamic controllers.
//! * [`hinfsyn`] — H-infinity certificates, controller synthesis, gamma
//!   improvement and reduced-order controllers with condition reports.
//! * [`sim`] — fixed-step RK4 simulation and property verifiers for every
//!   simulation-testable claim the pipeline makes.

pub use nalgebra;

pub mod balancing;
pub mod expr;
pub mod gdreduce;
pub mod hinfsyn;
pub mod lmi;
pub mod lqgsyn;
pub mod sim;
pub mod sysmodel;

pub use balancing::{BalancedRealization, BalancingKind, ReducedModel};
pub use expr::{Expr, Interval, ParseError};
pub use gdreduce::{GdGramians, GdReduction};
pub use hinfsyn::{HinfCertificate, OrderSelection, ReductionReport};
pub use lmi::{
    AffineTerm, ConstraintSense, LmiConstraint, LmiProblem, LmiSolution, LmiVariable, Objective,
    SolveOptions, SolveStatus, VarKind,
};
pub use lqgsyn::{Controller, ControllerKind, RiccatiPair};
pub use sim::{Signal, Trajectory};
pub use sysmodel::{PlantModel, VectorField, VertexSet, VertexStrategy};
