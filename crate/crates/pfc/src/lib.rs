//! Phase-field crystal growth on periodic-free rectangular domains.
//!
//! The free energy
//!
//! ```text
//! F[phi] = int  phi/2 (lap^2 + 2a lap + alpha) phi  +  phi^4/4  dr
//! ```
//!
//! drives either a relaxation flow (`ModelKind::Ac`, with penalty and
//! Lagrange variants that restore mass conservation) or a conserved flow
//! (`ModelKind::Ch`). Each model is discretized by two linear second-order
//! steppers that are energy stable for every step size: a quadratized
//! auxiliary-field variant (EQ) and a scalar-auxiliary variant (SAV). See
//! [`schemes::SchemeId`] for the eight combinations.
//!
//! The crate is layered bottom-up:
//!
//! * [`grid`] — cell-centered fields with reflective boundaries, the
//!   Laplacian/biharmonic stencils, and the discrete inner product;
//! * [`energy`] — free energy, chemical potential, auxiliary variables;
//! * [`linsolve`] — matrix-free conjugate-gradient / BiCGstab solvers, a
//!   cosine-transform preconditioner, and the bordered (low-rank-coupled)
//!   solve the nonlocal schemes need;
//! * [`schemes`] — the eight steppers;
//! * [`stability`] — linear growth/decay rates about uniform states, both
//!   predicted and measured;
//! * [`scenarios`] — ready-made parameter presets and initial conditions;
//! * [`harness`] — configuration files, snapshots, diagnostics CSV, and the
//!   run/convergence/comparison drivers behind the command-line tool.

pub mod energy;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linsolve;
pub mod scenarios;
pub mod schemes;
pub mod stability;

pub use energy::{ModelKind, ModelParams};
pub use error::{Error, Result};
pub use grid::{Field, GridSpec};
pub use schemes::{
    AuxState, PrecondKind, ProbedSystem, SchemeId, StepOpts, StepReport, Stepper, StepperState,
};
