// Near-equilibrium linear analysis: closed-form growth rates of cosine
// perturbations about a uniform state on [-pi,pi]^2, and a simulation-based
// measurement that fits the observed mode amplitude against those rates.

use crate::energy::{ModelKind, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::schemes::{PrecondKind, SchemeId, StepOpts, Stepper, StepperState};

/// Analysis domain, fixed for comparability of the closed forms.
const DOMAIN_EXTENT: f64 = 2.0 * std::f64::consts::PI;
const MEASURE_CELLS: usize = 64;

/// One perturbation mode cos(kx)cos(ly) about the uniform state phi_ss on
/// [-pi,pi]^2.
#[derive(Debug, Clone)]
pub struct StabilityQuery {
    pub model: ModelKind,
    pub k: u32,
    pub l: u32,
    pub phi_ss: f64,
    pub p: ModelParams,
}

/// The coefficient lambda in d(amplitude)/dt = lambda * amplitude for the
/// linearized flow. Positive lambda marks an unstable (growing) mode.
///
/// The relaxation rate is -M [s^2 - 2 a s + alpha + 3 phi_ss^2] with
/// s = k^2 + l^2. The conserved flow multiplies the bracket by -M s (so the
/// mean mode is exactly neutral). The penalty model damps the mean mode by
/// an extra -M eta |domain|; the Lagrange model pins it to zero.
pub fn growth_rate(q: &StabilityQuery) -> f64 {
    let s = (q.k * q.k + q.l * q.l) as f64;
    let m = q.p.mobility;
    let bracket = s * s - 2.0 * q.p.a * s + q.p.alpha + 3.0 * q.phi_ss * q.phi_ss;
    let mean_mode = q.k == 0 && q.l == 0;
    match q.model {
        ModelKind::Ac => -m * bracket,
        ModelKind::Ch => -m * s * bracket,
        ModelKind::AcPenalty => {
            let area = DOMAIN_EXTENT * DOMAIN_EXTENT;
            -m * bracket - if mean_mode { m * q.p.eta * area } else { 0.0 }
        }
        ModelKind::AcLagrange => {
            if mean_mode {
                0.0
            } else {
                -m * bracket
            }
        }
    }
}

/// Run `scheme` from phi_ss + amplitude cos(kx)cos(ly) and fit the decay or
/// growth rate of the projected mode amplitude. The fit uses the second half
/// of the step window (the first step bootstraps the extrapolation and is
/// only first-order), on log|amplitude| against time.
pub fn measure_rate(
    scheme: SchemeId,
    q: &StabilityQuery,
    amplitude: f64,
    dt: f64,
    steps: usize,
) -> Result<f64> {
    if scheme.model() != q.model {
        return Err(Error::Usage(format!(
            "scheme {scheme} does not integrate the queried model"
        )));
    }
    if steps < 4 {
        return Err(Error::Usage(format!(
            "rate measurement needs at least 4 steps, got {steps}"
        )));
    }
    let grid = GridSpec::new(MEASURE_CELLS, MEASURE_CELLS, DOMAIN_EXTENT, DOMAIN_EXTENT)?;
    let pi = std::f64::consts::PI;
    let (k, l) = (q.k as f64, q.l as f64);
    // grid coordinates run over [0, 2pi]; shift so the mode reads as
    // cos(kx)cos(ly) on [-pi,pi]
    let mode = Field::from_fn(grid, |x, y| (k * (x - pi)).cos() * (l * (y - pi)).cos());
    let mode_norm2 = mode.inner(&mode);
    let mut ic = mode.clone();
    ic.scale(amplitude);
    ic.add_scalar(q.phi_ss);

    let mut p = q.p;
    p.m0 = if q.model == ModelKind::AcLagrange {
        ic.integrate()
    } else {
        q.phi_ss * grid.area()
    };
    let mut state = StepperState::init(scheme, ic, &p);
    let mut stepper = Stepper::new(
        scheme,
        grid,
        p,
        dt,
        StepOpts {
            tol: 1e-12,
            maxit: None,
            precond: PrecondKind::Dct,
        },
    )?;

    let mut track = Vec::with_capacity(steps + 1);
    let mut scratch = Field::zeros(grid);
    let project = |phi: &Field, scratch: &mut Field| -> f64 {
        scratch.copy_from(phi);
        scratch.add_scalar(-q.phi_ss);
        scratch.inner(&mode) / mode_norm2
    };
    track.push((0.0, project(&state.phi, &mut scratch)));
    for _ in 0..steps {
        stepper.step(&mut state)?;
        track.push((state.t, project(&state.phi, &mut scratch)));
    }

    // Least squares on log|amp| over the second half of the window. The
    // absolute value matters: strongly damped modes (|lambda| dt > 2) decay
    // through a negative per-step amplification factor, so the projection
    // alternates sign while |amplitude| still shrinks geometrically.
    let window = &track[steps / 2..];
    let mut pts = Vec::with_capacity(window.len());
    for &(t, a) in window {
        if a.abs() < 1e-250 {
            return Err(Error::FitFailed(format!(
                "mode ({},{}) amplitude underflow at t = {t}",
                q.k, q.l
            )));
        }
        pts.push((t, a.abs().ln()));
    }
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom <= 0.0 {
        return Err(Error::FitFailed("degenerate fit window".into()));
    }
    Ok((n * sty - st * sy) / denom)
}
