// Python bindings: a Simulation class wrapping one stepper + state, plus the
// closed-form growth-rate oracle. Mirrors the CLI's preset vocabulary.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pfc::scenarios::{preset, PresetName};
use pfc::stability;
use pfc::{ModelKind, SchemeId, StepOpts, StepReport, Stepper, StepperState};

fn usage_err(e: pfc::Error) -> PyErr {
    match e {
        pfc::Error::Usage(_) | pfc::Error::Config { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// One scheme integrating one preset scenario.
#[pyclass]
struct Simulation {
    stepper: Stepper,
    state: StepperState,
    last: Option<StepReport>,
}

#[pymethods]
impl Simulation {
    /// Simulation(scheme, preset="crystal", scale=4.0, dt=None, tol=1e-10)
    #[new]
    #[pyo3(signature = (scheme, preset_name="crystal", scale=4.0, dt=None, tol=1e-10))]
    fn new(
        scheme: &str,
        preset_name: &str,
        scale: f64,
        dt: Option<f64>,
        tol: f64,
    ) -> PyResult<Self> {
        let scheme = SchemeId::parse(scheme).map_err(usage_err)?;
        let name = PresetName::parse(preset_name).map_err(usage_err)?;
        let ps = preset(name).scaled(scale).map_err(usage_err)?;
        let ic = ps.initial_field().map_err(usage_err)?;
        let mut params = ps.params;
        params.m0 = ic.integrate();
        let state = StepperState::init(scheme, ic, &params);
        let stepper = Stepper::new(
            scheme,
            ps.grid,
            params,
            dt.unwrap_or(ps.dt),
            StepOpts {
                tol,
                ..StepOpts::default()
            },
        )
        .map_err(usage_err)?;
        Ok(Simulation {
            stepper,
            state,
            last: None,
        })
    }

    /// Advance n steps; returns the new simulation time.
    fn step(&mut self, n: u64) -> PyResult<f64> {
        for _ in 0..n {
            self.last = Some(self.stepper.step(&mut self.state).map_err(usage_err)?);
        }
        Ok(self.state.t)
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.state.step
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.state.mass()
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.stepper.energy(&self.state)
    }

    /// Lagrange multiplier of the last step (AC-L schemes; else 0).
    #[getter]
    fn lagrange(&self) -> f64 {
        self.last.map(|r| r.lagrange).unwrap_or(0.0)
    }

    /// Energy dissipated by the last step, -dt M ||mu - L||^2, where defined.
    #[getter]
    fn last_dissipation(&self) -> Option<f64> {
        self.last.and_then(|r| r.dissipation)
    }

    #[getter]
    fn last_solver_iters(&self) -> usize {
        self.last.map(|r| r.solve.iters).unwrap_or(0)
    }

    /// (nx, ny, lx, ly)
    fn grid(&self) -> (usize, usize, f64, f64) {
        let g = self.state.phi.grid();
        (g.nx(), g.ny(), g.lx(), g.ly())
    }

    /// Row-major copy of the field (x fastest).
    fn phi(&self) -> Vec<f64> {
        self.state.phi.as_slice().to_vec()
    }

    fn scheme(&self) -> String {
        self.stepper.scheme().name().to_string()
    }
}

/// Closed-form near-equilibrium growth rate of mode cos(kx)cos(ly) on
/// [-pi,pi]^2 about the uniform state phi_ss.
#[pyfunction]
#[pyo3(signature = (model, k, l, phi_ss=0.0, a=1.0, alpha=0.675, mobility=1.0, eta=1e3))]
#[allow(clippy::too_many_arguments)]
fn growth_rate(
    model: &str,
    k: u32,
    l: u32,
    phi_ss: f64,
    a: f64,
    alpha: f64,
    mobility: f64,
    eta: f64,
) -> PyResult<f64> {
    let model = match model.to_ascii_lowercase().as_str() {
        "ac" => ModelKind::Ac,
        "ch" => ModelKind::Ch,
        "ac-p" => ModelKind::AcPenalty,
        "ac-l" => ModelKind::AcLagrange,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown model {other:?}; expected ac, ch, ac-p, ac-l"
            )))
        }
    };
    Ok(stability::growth_rate(&stability::StabilityQuery {
        model,
        k,
        l,
        phi_ss,
        p: pfc::ModelParams {
            a,
            alpha,
            mobility,
            eta,
            c0: 1e4,
            m0: 0.0,
        },
    }))
}

#[pymodule]
fn pfc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(growth_rate, m)?)?;
    Ok(())
}
