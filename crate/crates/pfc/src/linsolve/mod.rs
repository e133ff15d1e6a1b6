// Matrix-free linear algebra for the implicit half of each time step.
//
// Every scheme reduces to (possibly bordered) solves with one of two
// operator shapes, built from frozen extrapolated data:
//
//   relaxation family:  A f = f + dt*M ( Lap^2/2 + a Lap + alpha/2 + W ) f
//   conserved family:   A f = f - dt*M Lap ( Lap^2/2 + a Lap + alpha/2 + W ) f
//
// with W the pointwise weight (qbar/2)^2 for the quadratized steppers and
// absent otherwise. The relaxation operators and the constant-weight
// conserved operators are self-adjoint positive definite in the discrete
// inner product, so preconditioned CG applies; the conserved operator with a
// spatially varying weight is *not* self-adjoint (Lap and W do not commute)
// and is solved with left-preconditioned BiCGstab instead. Convergence is
// always judged on the preconditioned residual P(b - Ax): P undoes the
// per-mode amplification of A, so that norm tracks the solution error and
// stays computable in floating point even when ||A|| is huge. Nonlocal terms
// never enter A: they are rank-one or rank-two borders eliminated by the
// Sherman-Morrison reduction.

pub mod dct;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

pub use dct::{DctPlan2d, SpectralPrecond};

/// Scratch fields for operator application.
pub struct Workspace {
    t1: Field,
    t2: Field,
}

impl Workspace {
    pub fn new(grid: GridSpec) -> Workspace {
        Workspace {
            t1: Field::zeros(grid),
            t2: Field::zeros(grid),
        }
    }
}

pub trait LinOp {
    fn grid(&self) -> GridSpec;
    fn apply(&self, x: &Field, out: &mut Field, ws: &mut Workspace);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpFamily {
    /// I + dt*M*(K + W)
    Ac,
    /// I - dt*M*Lap(K + W)
    Ch,
}

/// The frozen implicit operator of one time step.
pub struct SchemeOperator {
    grid: GridSpec,
    family: OpFamily,
    /// dt * mobility
    c: f64,
    a: f64,
    alpha: f64,
    /// Pointwise weight (qbar/2)^2; `None` for the scalar-auxiliary steppers.
    weight: Option<Field>,
}

impl SchemeOperator {
    /// `qbar` is the extrapolated 2*phi multiplier; the operator stores its
    /// pointwise square over 4.
    pub fn new(
        family: OpFamily,
        grid: GridSpec,
        a: f64,
        alpha: f64,
        dt_m: f64,
        qbar: Option<&Field>,
    ) -> SchemeOperator {
        let weight = qbar.map(|q| {
            let mut w = q.clone();
            for v in w.as_mut_slice() {
                *v = 0.25 * *v * *v;
            }
            w
        });
        SchemeOperator {
            grid,
            family,
            c: dt_m,
            a,
            alpha,
            weight,
        }
    }

    pub fn family(&self) -> OpFamily {
        self.family
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn has_weight(&self) -> bool {
        self.weight.is_some()
    }

    /// Spatial mean of the weight (0 when absent); the constant-coefficient
    /// surrogate the preconditioner inverts exactly.
    pub fn mean_weight(&self) -> f64 {
        match &self.weight {
            Some(w) => w.integrate() / self.grid.area(),
            None => 0.0,
        }
    }

    /// Self-adjoint in the discrete inner product? False only for the
    /// conserved family with a spatially varying weight.
    pub fn is_symmetric(&self) -> bool {
        self.family == OpFamily::Ac || self.weight.is_none()
    }

    /// out = (Lap^2/2 + a Lap + alpha/2 + W) x
    pub fn stiffness_into(&self, x: &Field, out: &mut Field, scratch: &mut Field) {
        x.laplacian_into(scratch);
        scratch.laplacian_into(out);
        let half_alpha = 0.5 * self.alpha;
        match &self.weight {
            Some(w) => {
                for (((o, &l), &f), &wv) in out
                    .as_mut_slice()
                    .iter_mut()
                    .zip(scratch.as_slice())
                    .zip(x.as_slice())
                    .zip(w.as_slice())
                {
                    *o = 0.5 * *o + self.a * l + (half_alpha + wv) * f;
                }
            }
            None => {
                for ((o, &l), &f) in out
                    .as_mut_slice()
                    .iter_mut()
                    .zip(scratch.as_slice())
                    .zip(x.as_slice())
                {
                    *o = 0.5 * *o + self.a * l + half_alpha * f;
                }
            }
        }
    }
}

impl LinOp for SchemeOperator {
    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn apply(&self, x: &Field, out: &mut Field, ws: &mut Workspace) {
        assert_eq!(x.grid(), self.grid, "operator: grid mismatch");
        let Workspace { t1, t2 } = ws;
        match self.family {
            OpFamily::Ac => {
                self.stiffness_into(x, out, t1);
                for (o, &f) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    *o = f + self.c * *o;
                }
            }
            OpFamily::Ch => {
                self.stiffness_into(x, t2, t1);
                t2.laplacian_into(out);
                for (o, &f) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    *o = f - self.c * *o;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOpts {
    /// Relative residual target in the preconditioned norm:
    /// ||P(b - Ax)|| <= tol * ||P b|| with P the preconditioner (identity
    /// when none is supplied). P is spectrally equivalent to A^{-1}, so this
    /// norm tracks the solution error directly and, unlike the raw residual,
    /// its rounding floor does not grow with the operator norm (which
    /// reaches ~1e9 for the conserved family on fine grids).
    pub tol: f64,
    pub maxit: usize,
}

impl SolveOpts {
    pub fn with_default_maxit(tol: f64, grid: GridSpec) -> SolveOpts {
        SolveOpts {
            tol,
            maxit: default_maxit(grid),
        }
    }
}

/// 10 sqrt(nx*ny), the default iteration budget.
pub fn default_maxit(grid: GridSpec) -> usize {
    (10.0 * (grid.cells() as f64).sqrt()).ceil() as usize
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveReport {
    pub iters: usize,
    /// Final relative residual in the preconditioned norm (the plain
    /// relative residual when no preconditioner is in use), recomputed from
    /// the returned iterate rather than trusted from the recurrence.
    pub residual: f64,
}

/// Persistent iteration vectors, allocated once per stepper.
pub struct SolveCtx {
    pub ws: Workspace,
    r: Field,
    z: Field,
    p: Field,
    q: Field,
    s: Field,
    t: Field,
    u: Field,
    v: Field,
}

impl SolveCtx {
    pub fn new(grid: GridSpec) -> SolveCtx {
        SolveCtx {
            ws: Workspace::new(grid),
            r: Field::zeros(grid),
            z: Field::zeros(grid),
            p: Field::zeros(grid),
            q: Field::zeros(grid),
            s: Field::zeros(grid),
            t: Field::zeros(grid),
            u: Field::zeros(grid),
            v: Field::zeros(grid),
        }
    }
}

fn precond_apply(pre: &mut Option<&mut SpectralPrecond>, r: &Field, z: &mut Field) {
    match pre {
        Some(p) => p.apply(r, z),
        None => z.copy_from(r),
    }
}

/// out = P A v, with `tmp` holding the unpreconditioned product.
fn apply_pre<O: LinOp>(
    op: &O,
    pre: &mut Option<&mut SpectralPrecond>,
    v: &Field,
    out: &mut Field,
    tmp: &mut Field,
    ws: &mut Workspace,
) {
    op.apply(v, tmp, ws);
    precond_apply(pre, tmp, out);
}

/// Preconditioned conjugate gradients for self-adjoint positive definite
/// operators. `x` carries the initial guess in and the solution out.
/// Convergence is judged on z = P r and only declared after recomputing it
/// from b - Ax (the recurrence residual drifts).
pub fn solve_spd<O: LinOp>(
    op: &O,
    b: &Field,
    x: &mut Field,
    mut pre: Option<&mut SpectralPrecond>,
    ctx: &mut SolveCtx,
    opts: &SolveOpts,
) -> Result<SolveReport> {
    precond_apply(&mut pre, b, &mut ctx.z);
    let bnorm = ctx.z.norm();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport {
            iters: 0,
            residual: 0.0,
        });
    }
    op.apply(x, &mut ctx.q, &mut ctx.ws);
    ctx.r.linear2(1.0, b, -1.0, &ctx.q);
    precond_apply(&mut pre, &ctx.r, &mut ctx.z);
    let mut res = ctx.z.norm() / bnorm;
    ctx.p.copy_from(&ctx.z);
    let mut rz = ctx.r.inner(&ctx.z);
    let mut iters = 0;
    loop {
        if res <= opts.tol {
            // recursion residual can drift; trust only b - Ax
            op.apply(x, &mut ctx.q, &mut ctx.ws);
            ctx.r.linear2(1.0, b, -1.0, &ctx.q);
            precond_apply(&mut pre, &ctx.r, &mut ctx.z);
            let true_res = ctx.z.norm() / bnorm;
            if true_res <= opts.tol {
                return Ok(SolveReport {
                    iters,
                    residual: true_res,
                });
            }
            res = true_res;
            ctx.p.copy_from(&ctx.z);
            rz = ctx.r.inner(&ctx.z);
        }
        if iters >= opts.maxit {
            return Err(Error::SolverDiverged {
                iters,
                residual: res,
            });
        }
        iters += 1;
        op.apply(&ctx.p, &mut ctx.q, &mut ctx.ws);
        let pap = ctx.p.inner(&ctx.q);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::SolverDiverged {
                iters,
                residual: res,
            });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &ctx.p);
        ctx.r.axpy(-alpha, &ctx.q);
        precond_apply(&mut pre, &ctx.r, &mut ctx.z);
        res = ctx.z.norm() / bnorm;
        let rz_new = ctx.r.inner(&ctx.z);
        let beta = rz_new / rz;
        rz = rz_new;
        ctx.p.scale(beta);
        ctx.p.add_assign(&ctx.z);
    }
}

/// Left-preconditioned BiCGstab on P A x = P b for the non-symmetric
/// conserved-family operator. Every recurrence vector lives in the
/// preconditioned space, so the recurrence residual is the convergence
/// metric directly; same guess/solution convention and recompute-on-converge
/// discipline as `solve_spd`.
pub fn solve_gen<O: LinOp>(
    op: &O,
    b: &Field,
    x: &mut Field,
    mut pre: Option<&mut SpectralPrecond>,
    ctx: &mut SolveCtx,
    opts: &SolveOpts,
) -> Result<SolveReport> {
    // names: u = P b (fixed), r residual of P A x = P b, z shadow residual,
    // p search, q = P A p, s intermediate residual, t = P A s, v scratch
    let SolveCtx {
        ws,
        r,
        z,
        p,
        q,
        s,
        t,
        u,
        v,
    } = ctx;
    precond_apply(&mut pre, b, u);
    let bnorm = u.norm();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport {
            iters: 0,
            residual: 0.0,
        });
    }
    apply_pre(op, &mut pre, x, q, v, ws);
    r.linear2(1.0, u, -1.0, q);
    let mut res = r.norm() / bnorm;
    z.copy_from(r);
    p.fill(0.0);
    q.fill(0.0);
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut iters = 0;
    let tiny = 1e-300;
    loop {
        if res <= opts.tol {
            apply_pre(op, &mut pre, x, q, v, ws);
            r.linear2(1.0, u, -1.0, q);
            let true_res = r.norm() / bnorm;
            if true_res <= opts.tol {
                return Ok(SolveReport {
                    iters,
                    residual: true_res,
                });
            }
            res = true_res;
            z.copy_from(r);
            p.fill(0.0);
            q.fill(0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
        }
        if iters >= opts.maxit {
            return Err(Error::SolverDiverged {
                iters,
                residual: res,
            });
        }
        iters += 1;
        let rho_new = z.inner(r);
        if rho_new.abs() < tiny || omega.abs() < tiny {
            // shadow residual breakdown: restart from the current iterate
            z.copy_from(r);
            p.fill(0.0);
            q.fill(0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        // p = r + beta (p - omega q)
        p.axpy(-omega, q);
        p.scale(beta);
        p.add_assign(r);
        apply_pre(op, &mut pre, p, q, v, ws);
        let zq = z.inner(q);
        if zq.abs() < tiny {
            z.copy_from(r);
            p.fill(0.0);
            q.fill(0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        alpha = rho / zq;
        s.linear2(1.0, r, -alpha, q);
        if s.norm() / bnorm <= opts.tol {
            x.axpy(alpha, p);
            apply_pre(op, &mut pre, x, q, v, ws);
            r.linear2(1.0, u, -1.0, q);
            res = r.norm() / bnorm;
            if res <= opts.tol {
                return Ok(SolveReport {
                    iters,
                    residual: res,
                });
            }
            z.copy_from(r);
            p.fill(0.0);
            q.fill(0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        apply_pre(op, &mut pre, s, t, v, ws);
        let tt = t.inner(t);
        if tt < tiny {
            return Err(Error::SolverDiverged {
                iters,
                residual: res,
            });
        }
        omega = t.inner(s) / tt;
        x.axpy(alpha, p);
        x.axpy(omega, s);
        r.linear2(1.0, s, -omega, t);
        res = r.norm() / bnorm;
    }
}

/// Result of a bordered solve: the aggregate Krylov report, the reduced-system
/// coefficients s_i = <c_i, x>, and the elimination directions x_i = A^{-1} d_i.
#[derive(Debug)]
pub struct BorderedSolve {
    pub report: SolveReport,
    pub coeffs: Vec<f64>,
    pub dirs: Vec<Field>,
}

/// Solves A x + sum_i <c_i, x> d_i = b by the Sherman-Morrison reduction:
/// k+1 plain solves against A, then a k x k reduced system. `x` carries the
/// initial guess for the A y = b solve. `symmetric` selects CG vs BiCGstab.
#[allow(clippy::too_many_arguments)]
pub fn solve_bordered<O: LinOp>(
    op: &O,
    couplings: &[(&Field, &Field)],
    b: &Field,
    x: &mut Field,
    symmetric: bool,
    mut pre: Option<&mut SpectralPrecond>,
    ctx: &mut SolveCtx,
    opts: &SolveOpts,
) -> Result<BorderedSolve> {
    let k = couplings.len();
    let solve = |op: &O,
                 b: &Field,
                 x: &mut Field,
                 pre: &mut Option<&mut SpectralPrecond>,
                 ctx: &mut SolveCtx|
     -> Result<SolveReport> {
        if symmetric {
            solve_spd(op, b, x, pre.as_deref_mut(), ctx, opts)
        } else {
            solve_gen(op, b, x, pre.as_deref_mut(), ctx, opts)
        }
    };

    let mut report = solve(op, b, x, &mut pre, ctx)?;
    let mut dirs = Vec::with_capacity(k);
    for (_, d) in couplings {
        let mut xi = Field::zeros(op.grid());
        let rep = solve(op, d, &mut xi, &mut pre, ctx)?;
        report.iters += rep.iters;
        report.residual = report.residual.max(rep.residual);
        dirs.push(xi);
    }
    if k == 0 {
        return Ok(BorderedSolve {
            report,
            coeffs: Vec::new(),
            dirs,
        });
    }

    // reduced system (I + G) s = g, G[i][j] = <c_i, x_j>, g[i] = <c_i, y>
    let mut m = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = couplings[i].0.inner(&dirs[j]) + if i == j { 1.0 } else { 0.0 };
        }
        m[i][k] = couplings[i].0.inner(x);
    }
    let coeffs = solve_small(&mut m)?;
    for (si, xi) in coeffs.iter().zip(&dirs) {
        x.axpy(-si, xi);
    }
    Ok(BorderedSolve {
        report,
        coeffs,
        dirs,
    })
}

/// Gaussian elimination with partial pivoting on a k x (k+1) augmented
/// system; k is 1 or 2 in practice.
#[allow(clippy::needless_range_loop)]
fn solve_small(m: &mut [Vec<f64>]) -> Result<Vec<f64>> {
    let k = m.len();
    let scale = m
        .iter()
        .flat_map(|row| row[..k].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..k {
        let (piv, mag) = (col..k)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if mag <= 1e-14 * scale {
            return Err(Error::SingularReduction { pivot: mag });
        }
        m.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            for c in col..=k {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut s = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = m[row][k];
        for c in row + 1..k {
            acc -= m[row][c] * s[c];
        }
        s[row] = acc / m[row][row];
    }
    Ok(s)
}
