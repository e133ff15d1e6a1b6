// Free energy and chemical potential for the crystal-growth model
//
//   F[phi] = int phi/2 (Lap^2 + 2a Lap + alpha) phi + phi^4/4 dr,
//   mu = dF/dphi = Lap^2 phi + 2a Lap phi + alpha phi + phi^3,
//
// together with the auxiliary quantities the quadratized (q = phi^2) and
// scalar-auxiliary (r = sqrt(int phi^4/4 + C0)) time steppers track, and the
// modified energies those steppers dissipate exactly.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::schemes::AuxState;

/// Which dynamics the chemical potential drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Non-conserved relaxation: phi_t = -M mu.
    Ac,
    /// Conserved flux form: phi_t = div(M grad mu).
    Ch,
    /// Non-conserved with a quadratic penalty restoring the initial mass.
    AcPenalty,
    /// Non-conserved with a Lagrange multiplier enforcing the mass exactly.
    AcLagrange,
}

impl ModelKind {
    pub fn conserves_mass_exactly(self) -> bool {
        matches!(self, ModelKind::Ch | ModelKind::AcLagrange)
    }
}

/// Model constants. `alpha` plays the role of 1 - epsilon when comparing to
/// the undercooling form of the model; `m0` is the mass the penalty and
/// Lagrange variants hold on to (normally the mass of the initial data).
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub a: f64,
    pub alpha: f64,
    pub mobility: f64,
    /// Penalty strength (AC-P only; ignored elsewhere).
    pub eta: f64,
    /// Energy shift keeping the scalar auxiliary variable real and positive.
    pub c0: f64,
    /// Reference mass for the penalty/Lagrange constraint.
    pub m0: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a.is_finite()
            && self.alpha.is_finite()
            && self.mobility.is_finite()
            && self.mobility > 0.0
            && self.eta.is_finite()
            && self.eta >= 0.0
            && self.c0.is_finite()
            && self.c0 > 0.0
            && self.m0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Usage(format!("invalid model parameters: {self:?}")))
        }
    }
}

/// mu = Lap^2 phi + 2a Lap phi + alpha phi + phi^3, written into `out`.
pub fn chemical_potential_into(phi: &Field, p: &ModelParams, out: &mut Field, scratch: &mut Field) {
    phi.laplacian_into(scratch);
    scratch.laplacian_into(out);
    let a2 = 2.0 * p.a;
    for ((o, &l), &f) in out
        .as_mut_slice()
        .iter_mut()
        .zip(scratch.as_slice())
        .zip(phi.as_slice())
    {
        *o += a2 * l + p.alpha * f + f * f * f;
    }
}

pub fn chemical_potential(phi: &Field, p: &ModelParams) -> Field {
    let mut out = Field::zeros(phi.grid());
    let mut scratch = Field::zeros(phi.grid());
    chemical_potential_into(phi, p, &mut out, &mut scratch);
    out
}

/// Quadratic part of the energy: <phi/2, (Lap^2 + 2a Lap + alpha) phi>.
/// Uses <phi, Lap^2 phi> = ||Lap phi||^2 (self-adjointness of the stencil).
pub fn quadratic_energy(phi: &Field, p: &ModelParams, scratch: &mut Field) -> f64 {
    phi.laplacian_into(scratch);
    0.5 * scratch.inner(scratch) + p.a * phi.inner(scratch) + 0.5 * p.alpha * phi.inner(phi)
}

/// int phi^4/4 dr.
pub fn quartic_energy(phi: &Field) -> f64 {
    let mut acc = 0.0;
    for &v in phi.as_slice() {
        let s = v * v;
        acc += s * s;
    }
    0.25 * acc * phi.grid().hx() * phi.grid().hy()
}

/// The model free energy F[phi].
pub fn free_energy(phi: &Field, p: &ModelParams) -> f64 {
    let mut scratch = Field::zeros(phi.grid());
    quadratic_energy(phi, p, &mut scratch) + quartic_energy(phi)
}

/// sqrt(int phi^4/4 + C0); always positive since C0 > 0.
pub fn sav_r(phi: &Field, p: &ModelParams) -> f64 {
    (quartic_energy(phi) + p.c0).sqrt()
}

/// g = phi^3 / (2 sqrt(int phi^4/4 + C0)), the variational derivative of the
/// scalar auxiliary variable.
pub fn sav_g_into(phi: &Field, p: &ModelParams, out: &mut Field) {
    let inv = 0.5 / sav_r(phi, p);
    assert_eq!(phi.grid(), out.grid(), "sav_g: grid mismatch");
    for (o, &v) in out.as_mut_slice().iter_mut().zip(phi.as_slice()) {
        *o = inv * v * v * v;
    }
}

pub fn sav_g(phi: &Field, p: &ModelParams) -> Field {
    let mut out = Field::zeros(phi.grid());
    sav_g_into(phi, p, &mut out);
    out
}

/// zeta = sqrt(eta) (int phi - m0), the penalty mass defect variable.
pub fn penalty_zeta(phi: &Field, p: &ModelParams) -> f64 {
    p.eta.sqrt() * (phi.integrate() - p.m0)
}

///// The energy the time steppers actually dissipate: quadratic part plus the
/// auxiliary-variable energy (||q||^2/4 or r^2 - C0) plus zeta^2/2 for the
/// penalty model. For exact auxiliaries it coincides with `free_energy`.
pub fn discrete_energy(
    phi: &Field,
    aux: &AuxState,
    zeta: f64,
    kind: ModelKind,
    p: &ModelParams,
) -> f64 {
    let mut scratch = Field::zeros(phi.grid());
    let mut e = quadratic_energy(phi, p, &mut scratch);
    e += match aux {
        AuxState::Eq { q } => 0.25 * q.inner(q),
        AuxState::Sav { r } => r * r - p.c0,
    };
    if kind == ModelKind::AcPenalty {
        e += 0.5 * zeta * zeta;
    }
    e
}

/// F(phi1,aux1) - F(phi0,aux0) evaluated in telescoped difference form,
/// <L d, L s>/2 + a <d, L s> + alpha/2 <d, s> + aux terms with d = phi1-phi0,
/// s = phi1+phi0. Algebraically identical to differencing `discrete_energy`
/// but avoids the catastrophic cancellation that evaluation at O(1) energies
/// incurs, so per-step energy increments are trustworthy down to ~1e-15
/// relative to the increment itself.
#[allow(clippy::too_many_arguments)]
pub fn discrete_energy_delta(
    phi0: &Field,
    aux0: &AuxState,
    zeta0: f64,
    phi1: &Field,
    aux1: &AuxState,
    zeta1: f64,
    kind: ModelKind,
    p: &ModelParams,
) -> f64 {
    let grid = phi0.grid();
    let mut d = Field::zeros(grid);
    let mut s = Field::zeros(grid);
    d.linear2(1.0, phi1, -1.0, phi0);
    s.linear2(1.0, phi1, 1.0, phi0);
    let ls = s.laplacian();
    let ld = d.laplacian();
    let mut delta = 0.5 * ld.inner(&ls) + p.a * d.inner(&ls) + 0.5 * p.alpha * d.inner(&s);
    match (aux0, aux1) {
        (AuxState::Eq { q: q0 }, AuxState::Eq { q: q1 }) => {
            d.linear2(1.0, q1, -1.0, q0);
            s.linear2(1.0, q1, 1.0, q0);
            delta += 0.25 * d.inner(&s);
        }
        (AuxState::Sav { r: r0 }, AuxState::Sav { r: r1 }) => {
            delta += (r1 - r0) * (r1 + r0);
        }
        _ => panic!("energy delta: mismatched auxiliary kinds"),
    }
    if kind == ModelKind::AcPenalty {
        delta += 0.5 * (zeta1 - zeta0) * (zeta1 + zeta0);
    }
    delta
}
