// Linear, second-order, unconditionally energy-stable time steppers.
//
// All eight steppers share one template. Freeze the nonlinear multiplier at
// the half step by extrapolation (qbar = 3 phi^n - phi^{n-1}, approximating
// 2 phi, for the quadratized family; gbar = 1.5 g(phi^n) - 0.5 g(phi^{n-1})
// for the scalar-auxiliary family), treat the quadratic operator by
// Crank-Nicolson, and update the auxiliary variable by its own increment
// rule, never by re-evaluating it from phi. The result of each step is one
// linear solve
//
//     A x + sum_i <c_i, x> d_i = b,
//
// with A from `linsolve` and at most two nonlocal border terms (scalar
// auxiliary coupling, penalty mass coupling, Lagrange multiplier coupling).
// The increment rules make the modified energy decrease exactly in exact
// arithmetic, independent of step size; the conserved and Lagrange variants
// keep the mass invariant at the same time.
//
// The very first step has no history to extrapolate, so it freezes the
// multipliers at their current values instead. That keeps every dissipation
// and conservation identity intact and costs one O(dt^2) local error, which
// leaves the global order at two.

use crate::energy::{self, ModelKind, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::linsolve::{
    default_maxit, solve_bordered, OpFamily, SchemeOperator, SolveCtx, SolveOpts, SolveReport,
    SpectralPrecond,
};

/// The eight steppers: four models, each in a quadratized (EQ) and a
/// scalar-auxiliary (SAV) variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    AcEq,
    AcSav,
    ChEq,
    ChSav,
    AcPenaltyEq,
    AcPenaltySav,
    AcLagrangeEq,
    AcLagrangeSav,
}

impl SchemeId {
    pub const ALL: [SchemeId; 8] = [
        SchemeId::AcEq,
        SchemeId::AcSav,
        SchemeId::ChEq,
        SchemeId::ChSav,
        SchemeId::AcPenaltyEq,
        SchemeId::AcPenaltySav,
        SchemeId::AcLagrangeEq,
        SchemeId::AcLagrangeSav,
    ];

    pub fn model(self) -> ModelKind {
        match self {
            SchemeId::AcEq | SchemeId::AcSav => ModelKind::Ac,
            SchemeId::ChEq | SchemeId::ChSav => ModelKind::Ch,
            SchemeId::AcPenaltyEq | SchemeId::AcPenaltySav => ModelKind::AcPenalty,
            SchemeId::AcLagrangeEq | SchemeId::AcLagrangeSav => ModelKind::AcLagrange,
        }
    }

    pub fn is_sav(self) -> bool {
        matches!(
            self,
            SchemeId::AcSav | SchemeId::ChSav | SchemeId::AcPenaltySav | SchemeId::AcLagrangeSav
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::AcEq => "ac-eq",
            SchemeId::AcSav => "ac-sav",
            SchemeId::ChEq => "ch-eq",
            SchemeId::ChSav => "ch-sav",
            SchemeId::AcPenaltyEq => "ac-p-eq",
            SchemeId::AcPenaltySav => "ac-p-sav",
            SchemeId::AcLagrangeEq => "ac-l-eq",
            SchemeId::AcLagrangeSav => "ac-l-sav",
        }
    }

    pub fn parse(s: &str) -> Result<SchemeId> {
        let t = s.trim().to_ascii_lowercase();
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == t)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown scheme {s:?}; expected one of ac-eq, ac-sav, ch-eq, ch-sav, \
                     ac-p-eq, ac-p-sav, ac-l-eq, ac-l-sav"
                ))
            })
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The auxiliary variable a stepper carries besides phi.
#[derive(Debug, Clone)]
pub enum AuxState {
    /// Quadratized field q tracking phi^2 by increments.
    Eq { q: Field },
    /// Scalar tracking sqrt(int phi^4/4 + C0) by increments.
    Sav { r: f64 },
}

/// Full time-stepping state. `zeta` is live only for the penalty model.
#[derive(Debug, Clone)]
pub struct StepperState {
    pub t: f64,
    pub step: u64,
    pub phi: Field,
    pub phi_prev: Field,
    pub aux: AuxState,
    pub zeta: f64,
}

impl StepperState {
    /// Initial state: q = phi^2, r = sqrt(int phi^4/4 + C0), zeta from the
    /// mass defect against p.m0.
    pub fn init(scheme: SchemeId, phi0: Field, p: &ModelParams) -> StepperState {
        let aux = if scheme.is_sav() {
            AuxState::Sav {
                r: energy::sav_r(&phi0, p),
            }
        } else {
            let mut q = phi0.clone();
            q.mul_field(&phi0);
            AuxState::Eq { q }
        };
        let zeta = if scheme.model() == ModelKind::AcPenalty {
            energy::penalty_zeta(&phi0, p)
        } else {
            0.0
        };
        StepperState {
            t: 0.0,
            step: 0,
            phi_prev: phi0.clone(),
            phi: phi0,
            aux,
            zeta,
        }
    }

    pub fn mass(&self) -> f64 {
        self.phi.integrate()
    }
}

/// out = 1.5 curr - 0.5 prev, the second-order half-step extrapolation.
pub fn extrapolate_into(prev: &Field, curr: &Field, out: &mut Field) {
    out.linear2(1.5, curr, -0.5, prev);
}

/// The scalar the diagnostics column `aux` reports: zeta for the penalty
/// model, else ||q|| or r.
pub fn aux_scalar(model: ModelKind, aux: &AuxState, zeta: f64) -> f64 {
    match (aux, model) {
        (_, ModelKind::AcPenalty) => zeta,
        (AuxState::Eq { q }, _) => q.norm(),
        (AuxState::Sav { r }, _) => *r,
    }
}

/// What one step did: solver effort, energies of the dissipated functional
/// before and after, mass, the auxiliary value (||q||, r, or zeta), the
/// Lagrange multiplier where applicable, and for the relaxation-family
/// steppers the exact dissipation -dt M ||mu - L||^2 of this step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub step: u64,
    pub t: f64,
    pub solve: SolveReport,
    pub energy_before: f64,
    pub energy_after: f64,
    pub mass: f64,
    pub aux_value: f64,
    pub lagrange: f64,
    pub dissipation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    /// Plain (unpreconditioned) Krylov iteration.
    None,
    /// Spectral inverse of the constant-coefficient surrogate.
    Dct,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOpts {
    pub tol: f64,
    /// `None` selects the 10 sqrt(nx ny) default.
    pub maxit: Option<usize>,
    pub precond: PrecondKind,
}

impl Default for StepOpts {
    fn default() -> StepOpts {
        StepOpts {
            tol: 1e-10,
            maxit: None,
            precond: PrecondKind::Dct,
        }
    }
}

/// Time stepper for one scheme at fixed step size. Owns all solver buffers,
/// so repeated stepping does not allocate.
pub struct Stepper {
    scheme: SchemeId,
    p: ModelParams,
    grid: GridSpec,
    dt: f64,
    opts: SolveOpts,
    precond: Option<SpectralPrecond>,
    ctx: SolveCtx,
    x: Field,
    /// Frozen multiplier: qbar (approximating 2 phi) or gbar.
    mult: Field,
    /// Explicit half of the frozen chemical potential.
    expl: Field,
    rhs: Field,
    scr: Field,
    scr2: Field,
    ones: Field,
    cdir: Field,
    ddir: Field,
    ddir2: Field,
    energy_cache: Option<(u64, f64)>,
}

impl Stepper {
    pub fn new(
        scheme: SchemeId,
        grid: GridSpec,
        p: ModelParams,
        dt: f64,
        opts: StepOpts,
    ) -> Result<Stepper> {
        p.validate()?;
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::Usage(format!("time step must be positive, got {dt}")));
        }
        let solve_opts = SolveOpts {
            tol: opts.tol,
            maxit: opts.maxit.unwrap_or_else(|| default_maxit(grid)),
        };
        let precond = match opts.precond {
            PrecondKind::None => None,
            PrecondKind::Dct => Some(SpectralPrecond::new(grid)),
        };
        Ok(Stepper {
            scheme,
            p,
            grid,
            dt,
            opts: solve_opts,
            precond,
            ctx: SolveCtx::new(grid),
            x: Field::zeros(grid),
            mult: Field::zeros(grid),
            expl: Field::zeros(grid),
            rhs: Field::zeros(grid),
            scr: Field::zeros(grid),
            scr2: Field::zeros(grid),
            ones: Field::constant(grid, 1.0),
            cdir: Field::zeros(grid),
            ddir: Field::zeros(grid),
            ddir2: Field::zeros(grid),
            energy_cache: None,
        })
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn params(&self) -> &ModelParams {
        &self.p
    }

    pub fn energy(&self, state: &StepperState) -> f64 {
        energy::discrete_energy(&state.phi, &state.aux, state.zeta, self.scheme.model(), &self.p)
    }

    /// Advance one step. At step 0 the extrapolation has no history, so the
    /// multipliers are frozen at their current values (first-order bootstrap,
    /// same dissipation and conservation algebra).
    pub fn step(&mut self, state: &mut StepperState) -> Result<StepReport> {
        assert_eq!(state.phi.grid(), self.grid, "step: grid mismatch");
        assert_eq!(
            matches!(state.aux, AuxState::Sav { .. }),
            self.scheme.is_sav(),
            "step: auxiliary kind does not match scheme"
        );
        let scheme = self.scheme;
        let model = scheme.model();
        let p = self.p;
        let grid = self.grid;
        let dt = self.dt;
        let c = dt * p.mobility;
        let area = grid.area();
        let first = state.step == 0;

        let energy_before = match self.energy_cache {
            Some((step, e)) if step == state.step => e,
            _ => energy::discrete_energy(&state.phi, &state.aux, state.zeta, model, &p),
        };

        let Stepper {
            precond,
            ctx,
            x,
            mult,
            expl,
            rhs,
            scr,
            scr2,
            ones,
            cdir,
            ddir,
            ddir2,
            ..
        } = self;

        let mass_n = state.phi.integrate();
        let op = assemble_system(
            scheme, &p, grid, c, first, state, mult, expl, rhs, scr, scr2, ones, cdir, ddir,
            ddir2,
        );
        let couplings = coupling_refs(scheme, mult, ones, cdir, ddir, ddir2);

        // solve, warm-started from phi^n
        if let Some(pre) = precond.as_mut() {
            pre.update(&op)?;
        }
        x.copy_from(&state.phi);
        let sol = solve_bordered(
            &op,
            &couplings,
            rhs,
            x,
            op.is_symmetric(),
            precond.as_mut(),
            ctx,
            &self.opts,
        )?;

        // Lagrange: refit the multiplier direction so the mass constraint
        // holds to roundoff instead of to solver tolerance
        let mut lagrange = 0.0;
        if model == ModelKind::AcLagrange {
            let dir = sol.dirs.last().expect("lagrange coupling present");
            let denom = dir.integrate();
            if denom.abs() > 1e-300 {
                let delta = (x.integrate() - p.m0) / denom;
                x.axpy(-delta, dir);
            }
        }

        // penalty mass-defect update (needs the solved x, pre-rotation mass)
        let zeta_new = if model == ModelKind::AcPenalty {
            state.zeta + p.eta.sqrt() * (x.integrate() - mass_n)
        } else {
            0.0
        };

        // relaxation-family dissipation: mu~ = (K+W)x + expl [+ gbar<gbar,x>]
        // [+ sqrt(eta) zeta^{n+1/2}] [- L^{n+1/2}]
        let mut dissipation = None;
        if op.family() == OpFamily::Ac {
            op.stiffness_into(x, scr, scr2);
            scr.add_assign(expl);
            if scheme.is_sav() {
                let gx = mult.inner(x);
                scr.axpy(gx, mult);
            }
            match model {
                ModelKind::AcPenalty => {
                    scr.add_scalar(p.eta.sqrt() * 0.5 * (state.zeta + zeta_new));
                }
                ModelKind::AcLagrange => {
                    lagrange = scr.integrate() / area;
                    scr.add_scalar(-lagrange);
                }
                _ => {}
            }
            dissipation = Some(-c * scr.inner(scr));
        }

        // auxiliary increment updates against the pre-rotation phi^n
        match &mut state.aux {
            AuxState::Eq { q } => {
                for ((qv, &qb), (&xv, &fv)) in q
                    .as_mut_slice()
                    .iter_mut()
                    .zip(mult.as_slice())
                    .zip(x.as_slice().iter().zip(state.phi.as_slice()))
                {
                    *qv += qb * (xv - fv);
                }
            }
            AuxState::Sav { r } => {
                scr.linear2(1.0, x, -1.0, &state.phi);
                *r += mult.inner(scr);
            }
        }
        state.zeta = zeta_new;

        std::mem::swap(&mut state.phi_prev, &mut state.phi);
        state.phi.copy_from(x);
        state.step += 1;
        state.t = state.step as f64 * dt;

        let energy_after =
            energy::discrete_energy(&state.phi, &state.aux, state.zeta, model, &p);
        self.energy_cache = Some((state.step, energy_after));

        let aux_value = aux_scalar(model, &state.aux, state.zeta);
        Ok(StepReport {
            step: state.step,
            t: state.t,
            solve: sol.report,
            energy_before,
            energy_after,
            mass: state.phi.integrate(),
            aux_value,
            lagrange,
            dissipation,
        })
    }

    /// Assemble (without solving) the implicit system the next `step` call
    /// would solve: the operator A, the nonlocal couplings (c_i, d_i) of
    /// A x + sum_i <c_i, x> d_i = b, and the right-hand side b. Built by the
    /// same code path as `step` (including the first-step bootstrap rule),
    /// so it is exact for solver diagnostics and external verification.
    pub fn probe_system(&mut self, state: &StepperState) -> ProbedSystem {
        assert_eq!(state.phi.grid(), self.grid, "probe: grid mismatch");
        assert_eq!(
            matches!(state.aux, AuxState::Sav { .. }),
            self.scheme.is_sav(),
            "probe: auxiliary kind does not match scheme"
        );
        let scheme = self.scheme;
        let p = self.p;
        let grid = self.grid;
        let c = self.dt * p.mobility;
        let first = state.step == 0;
        let Stepper {
            mult,
            expl,
            rhs,
            scr,
            scr2,
            ones,
            cdir,
            ddir,
            ddir2,
            ..
        } = self;
        let op = assemble_system(
            scheme, &p, grid, c, first, state, mult, expl, rhs, scr, scr2, ones, cdir, ddir,
            ddir2,
        );
        let couplings = coupling_refs(scheme, mult, ones, cdir, ddir, ddir2)
            .into_iter()
            .map(|(cf, df)| (cf.clone(), df.clone()))
            .collect();
        ProbedSystem {
            op,
            couplings,
            rhs: rhs.clone(),
        }
    }
}

/// One step's implicit problem A x + sum_i <c_i, x> d_i = b in owned form,
/// as returned by [`Stepper::probe_system`].
pub struct ProbedSystem {
    pub op: SchemeOperator,
    /// The (c_i, d_i) coupling pairs; empty for the plain local schemes.
    pub couplings: Vec<(Field, Field)>,
    pub rhs: Field,
}

/// Fill the frozen multiplier, explicit part, right-hand side, and coupling
/// buffers for one step; returns the implicit operator. Single source of
/// truth for the per-step linear system, shared by `step` and
/// `probe_system`.
#[allow(clippy::too_many_arguments)]
fn assemble_system(
    scheme: SchemeId,
    p: &ModelParams,
    grid: GridSpec,
    c: f64,
    first: bool,
    state: &StepperState,
    mult: &mut Field,
    expl: &mut Field,
    rhs: &mut Field,
    scr: &mut Field,
    scr2: &mut Field,
    ones: &Field,
    cdir: &mut Field,
    ddir: &mut Field,
    ddir2: &mut Field,
) -> SchemeOperator {
    let model = scheme.model();
    let area = grid.area();

    // frozen multiplier at the half step
    if scheme.is_sav() {
        energy::sav_g_into(&state.phi, p, scr);
        if first {
            mult.copy_from(scr);
        } else {
            energy::sav_g_into(&state.phi_prev, p, scr2);
            mult.linear2(1.5, scr, -0.5, scr2);
        }
    } else if first {
        mult.copy_from(&state.phi);
        mult.scale(2.0);
    } else {
        // 2 * (1.5 phi^n - 0.5 phi^{n-1})
        mult.linear2(3.0, &state.phi, -1.0, &state.phi_prev);
    }

    let family = if model == ModelKind::Ch {
        OpFamily::Ch
    } else {
        OpFamily::Ac
    };
    let weight = if scheme.is_sav() { None } else { Some(&*mult) };
    let op = SchemeOperator::new(family, grid, p.a, p.alpha, c, weight);

    // explicit half of the frozen chemical potential
    op.stiffness_into(&state.phi, expl, scr);
    match &state.aux {
        AuxState::Eq { q } => {
            // (K+W) phi^n + qbar (q^n - qbar phi^n)/2  =  K phi^n
            //   + qbar q^n / 2 - W phi^n
            for (((ev, &qb), &qv), &fv) in expl
                .as_mut_slice()
                .iter_mut()
                .zip(mult.as_slice())
                .zip(q.as_slice())
                .zip(state.phi.as_slice())
            {
                *ev += 0.5 * qb * (qv - qb * fv);
            }
        }
        AuxState::Sav { r } => {
            // + (2 r^n - <gbar, phi^n>) gbar
            let gphi = mult.inner(&state.phi);
            expl.axpy(2.0 * r - gphi, mult);
        }
    }

    // right-hand side and nonlocal couplings
    let mass_n = state.phi.integrate();
    match family {
        OpFamily::Ac => rhs.linear2(1.0, &state.phi, -c, expl),
        OpFamily::Ch => {
            expl.laplacian_into(scr);
            rhs.linear2(1.0, &state.phi, c, scr);
        }
    }
    if scheme.is_sav() {
        match model {
            ModelKind::Ch => {
                mult.laplacian_into(ddir);
                ddir.scale(-c);
            }
            _ => {
                ddir.copy_from(mult);
                ddir.scale(c);
                if model == ModelKind::AcLagrange {
                    ddir.add_scalar(-c * mult.integrate() / area);
                }
            }
        }
    }
    match model {
        ModelKind::AcPenalty => {
            rhs.add_scalar(-c * p.eta.sqrt() * state.zeta + c * 0.5 * p.eta * mass_n);
            ddir2.fill(c * 0.5 * p.eta);
        }
        ModelKind::AcLagrange => {
            rhs.add_scalar(c * expl.integrate() / area);
            op.stiffness_into(ones, cdir, scr);
            ddir2.fill(-c / area);
        }
        _ => {}
    }
    op
}

/// The coupling pairs (c_i, d_i) of the assembled system, in the fixed
/// order: scalar-auxiliary coupling first, then the mass coupling.
fn coupling_refs<'f>(
    scheme: SchemeId,
    mult: &'f Field,
    ones: &'f Field,
    cdir: &'f Field,
    ddir: &'f Field,
    ddir2: &'f Field,
) -> Vec<(&'f Field, &'f Field)> {
    let mut couplings: Vec<(&Field, &Field)> = Vec::with_capacity(2);
    if scheme.is_sav() {
        couplings.push((mult, ddir));
    }
    match scheme.model() {
        ModelKind::AcPenalty => couplings.push((ones, ddir2)),
        ModelKind::AcLagrange => couplings.push((cdir, ddir2)),
        _ => {}
    }
    couplings
}
