// Crate-wide error type. Variants carry enough context to act on: config
// errors name the line, snapshot errors the byte offset, solver failures the
// iteration count and last residual.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// API misuse that is recoverable at the config boundary (bad sizes,
    /// bad parameter ranges, overlapping seeds, ...).
    Usage(String),
    /// Config file problem, with 1-based line number where applicable.
    Config { line: usize, msg: String },
    /// Snapshot file problem, with byte offset into the file.
    Snapshot { offset: u64, msg: String },
    /// Krylov solve did not reach tolerance within maxit.
    SolverDiverged { iters: usize, residual: f64 },
    /// Reduced bordered system is numerically singular.
    SingularReduction { pivot: f64 },
    /// Growth-rate fit has no usable signal (zero amplitude, sign flips,
    /// underflow).
    FitFailed(String),
    /// Step committed a physics violation (energy increase beyond guard).
    EnergyGuard { step: u64, before: f64, after: f64 },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Config { line, msg } => write!(f, "config error (line {line}): {msg}"),
            Error::Snapshot { offset, msg } => {
                write!(f, "snapshot error (byte {offset}): {msg}")
            }
            Error::SolverDiverged { iters, residual } => write!(
                f,
                "linear solver diverged: {iters} iterations, residual {residual:.3e}"
            ),
            Error::SingularReduction { pivot } => write!(
                f,
                "bordered reduction is singular: pivot magnitude {pivot:.3e}"
            ),
            Error::FitFailed(m) => write!(f, "growth-rate fit failed: {m}"),
            Error::EnergyGuard { step, before, after } => write!(
                f,
                "energy guard tripped at step {step}: {before:.17e} -> {after:.17e}"
            ),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
