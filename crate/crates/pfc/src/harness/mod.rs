// Simulation drivers: single runs with diagnostics and snapshots, the
// step-halving convergence study, and multi-scheme comparison runs. All
// file formats live in the submodules; everything here is deterministic
// except the wall-clock column.

pub mod config;
pub mod snapshot;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::schemes::{aux_scalar, SchemeId, StepReport, Stepper, StepperState};
pub use config::RunConfig;

/// Relative slack the energy guard allows per step: the dissipation law is
/// exact in exact arithmetic, so anything beyond roundoff means broken
/// physics and the run is aborted.
pub const ENERGY_GUARD_REL: f64 = 1e-12;

/// One diagnostics row.
#[derive(Debug, Clone, Copy)]
pub struct DiagRecord {
    pub step: u64,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub aux: f64,
    pub lagrange: f64,
    pub solver_iters: usize,
    pub residual: f64,
    pub wall_ms: f64,
}

impl DiagRecord {
    pub const CSV_HEADER: &'static str =
        "step,t,mass,energy,aux,L,solver_iters,residual,wall_ms";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            f17(self.t),
            f17(self.mass),
            f17(self.energy),
            f17(self.aux),
            f17(self.lagrange),
            self.solver_iters,
            f17(self.residual),
            f17(self.wall_ms)
        )
    }
}

/// 17 significant digits: lossless f64 round-trip.
fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct RunOutput {
    pub scheme: SchemeId,
    pub final_state: StepperState,
    pub records: Vec<DiagRecord>,
    pub diag_path: PathBuf,
    pub snapshots: Vec<PathBuf>,
    /// Linear-solver iterations summed over every step (not just sampled ones).
    pub total_iters: u64,
    /// Stepping wall time summed over every step, milliseconds.
    pub total_wall_ms: f64,
}

/// Run one scheme to t_end, writing `diag.csv` and `snap_<step>.bin` files
/// under the configured output directory. Aborts on the first step whose
/// energy rises beyond roundoff or whose solve diverges; on abort the last
/// good field is flushed to `last_good.bin`.
pub fn run(cfg: &RunConfig, scheme: SchemeId) -> Result<RunOutput> {
    run_with_diag_name(cfg, scheme, "diag.csv")
}

fn run_with_diag_name(cfg: &RunConfig, scheme: SchemeId, diag_name: &str) -> Result<RunOutput> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let diag_path = cfg.output_dir.join(diag_name);
    let file = std::fs::File::create(&diag_path)?;
    let mut diag = std::io::BufWriter::new(file);
    writeln!(diag, "{}", DiagRecord::CSV_HEADER)?;

    let ic = cfg.preset.initial_field()?;
    let mut params = cfg.preset.params;
    params.m0 = ic.integrate();
    let mut state = StepperState::init(scheme, ic, &params);
    let mut stepper = Stepper::new(scheme, cfg.preset.grid, params, cfg.preset.dt, cfg.opts)?;
    let n_steps = cfg.n_steps();

    let mut records = Vec::with_capacity((n_steps / cfg.diag_every + 2) as usize);
    let first = DiagRecord {
        step: 0,
        t: 0.0,
        mass: state.mass(),
        energy: stepper.energy(&state),
        aux: aux_scalar(scheme.model(), &state.aux, state.zeta),
        lagrange: 0.0,
        solver_iters: 0,
        residual: 0.0,
        wall_ms: 0.0,
    };
    writeln!(diag, "{}", first.to_csv_row())?;
    records.push(first);

    let mut snapshots = Vec::new();
    let mut last_good = state.phi.clone();
    let mut last_good_t = 0.0;
    let mut total_iters: u64 = 0;
    let mut total_wall_ms = 0.0;
    for step in 1..=n_steps {
        let t0 = Instant::now();
        let rep = match stepper.step(&mut state) {
            Ok(rep) => rep,
            Err(e) => {
                flush_last_good(cfg, &last_good, last_good_t);
                return Err(e);
            }
        };
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        total_iters += rep.solve.iters as u64;
        total_wall_ms += wall_ms;
        if let Err(e) = check_energy_guard(&rep) {
            flush_last_good(cfg, &last_good, last_good_t);
            return Err(e);
        }
        if step % cfg.diag_every == 0 || step == n_steps {
            let rec = DiagRecord {
                step,
                t: rep.t,
                mass: rep.mass,
                energy: rep.energy_after,
                aux: rep.aux_value,
                lagrange: rep.lagrange,
                solver_iters: rep.solve.iters,
                residual: rep.solve.residual,
                wall_ms,
            };
            writeln!(diag, "{}", rec.to_csv_row())?;
            records.push(rec);
        }
        if step % cfg.snapshot_every == 0 || step == n_steps {
            let path = cfg.output_dir.join(format!("snap_{step:08}.bin"));
            snapshot::write_snapshot(&state.phi, state.t, &path)?;
            snapshots.push(path);
        }
        last_good.copy_from(&state.phi);
        last_good_t = state.t;
    }
    diag.flush()?;
    Ok(RunOutput {
        scheme,
        final_state: state,
        records,
        diag_path,
        snapshots,
        total_iters,
        total_wall_ms,
    })
}

fn check_energy_guard(rep: &StepReport) -> Result<()> {
    if rep.energy_after > rep.energy_before + ENERGY_GUARD_REL * rep.energy_before.abs() {
        return Err(Error::EnergyGuard {
            step: rep.step,
            before: rep.energy_before,
            after: rep.energy_after,
        });
    }
    Ok(())
}

fn flush_last_good(cfg: &RunConfig, phi: &Field, t: f64) {
    let path = cfg.output_dir.join("last_good.bin");
    // best effort: the primary error is already on its way out
    let _ = snapshot::write_snapshot(phi, t, &path);
}

/// One row of the step-halving study between adjacent step sizes.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    pub l2_error: f64,
    /// log2(previous error / this error); absent on the first row.
    pub order: Option<f64>,
}

/// Run `scheme` at dt, dt/2, ..., dt/2^(levels-1) to the configured t_end
/// and difference the final fields of adjacent levels. Writes
/// `converge.csv` and returns the rows.
pub fn converge(cfg: &RunConfig, scheme: SchemeId, levels: usize) -> Result<Vec<ConvergenceRow>> {
    if levels < 2 {
        return Err(Error::Usage(format!(
            "convergence study needs at least 2 step sizes, got {levels}"
        )));
    }
    let t_end = cfg.preset.t_end;
    let ic = cfg.preset.initial_field()?;
    let mut params = cfg.preset.params;
    params.m0 = ic.integrate();

    let mut finals: Vec<Field> = Vec::with_capacity(levels);
    for k in 0..levels {
        let dt = cfg.preset.dt / (1u64 << k) as f64;
        let n = (t_end / dt).round();
        if n < 1.0 || (n * dt - t_end).abs() > 1e-9 * t_end {
            return Err(Error::Usage(format!(
                "t_end = {t_end} is not an integer number of steps of dt = {dt}"
            )));
        }
        let mut state = StepperState::init(scheme, ic.clone(), &params);
        let mut stepper = Stepper::new(scheme, cfg.preset.grid, params, dt, cfg.opts)?;
        for _ in 0..n as u64 {
            let rep = stepper.step(&mut state)?;
            check_energy_guard(&rep)?;
        }
        finals.push(state.phi);
    }

    let mut rows = Vec::with_capacity(levels - 1);
    let mut diff = Field::zeros(cfg.preset.grid);
    let mut prev_err: Option<f64> = None;
    for k in 0..levels - 1 {
        diff.linear2(1.0, &finals[k], -1.0, &finals[k + 1]);
        let err = diff.norm();
        let order = prev_err.map(|p| (p / err).log2());
        rows.push(ConvergenceRow {
            dt_coarse: cfg.preset.dt / (1u64 << k) as f64,
            dt_fine: cfg.preset.dt / (1u64 << (k + 1)) as f64,
            l2_error: err,
            order,
        });
        prev_err = Some(err);
    }

    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("converge.csv");
    let mut out = String::from("dt_coarse,dt_fine,l2_error,order\n");
    for r in &rows {
        let order = r.order.map(f17).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{order}\n",
            f17(r.dt_coarse),
            f17(r.dt_fine),
            f17(r.l2_error)
        ));
    }
    std::fs::write(&path, out)?;
    Ok(rows)
}

pub struct CompareRun {
    pub output: RunOutput,
    /// First time the energy is within 1% of its final drop.
    pub plateau_t: Option<f64>,
}

/// Run each scheme on the identical setup; per-scheme diagnostics land in
/// `diag_<scheme>.csv` and aligned mass/energy columns in `compare.csv`.
pub fn compare(cfg: &RunConfig, schemes: &[SchemeId]) -> Result<Vec<CompareRun>> {
    if schemes.is_empty() {
        return Err(Error::Usage("no schemes to compare".into()));
    }
    let mut runs = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let output = run_with_diag_name(cfg, scheme, &format!("diag_{scheme}.csv"))?;
        let plateau_t = time_to_reach_band(&output.records, 0.01);
        runs.push(CompareRun { output, plateau_t });
    }

    let rows = runs[0].output.records.len();
    for r in &runs {
        if r.output.records.len() != rows {
            return Err(Error::Usage(
                "comparison runs produced different record counts".into(),
            ));
        }
    }
    let mut merged = String::from("step,t");
    for &scheme in schemes {
        merged.push_str(&format!(",mass_{scheme},energy_{scheme}"));
    }
    merged.push('\n');
    for i in 0..rows {
        let base = &runs[0].output.records[i];
        merged.push_str(&format!("{},{}", base.step, f17(base.t)));
        for r in &runs {
            let rec = &r.output.records[i];
            merged.push_str(&format!(",{},{}", f17(rec.mass), f17(rec.energy)));
        }
        merged.push('\n');
    }
    let path = cfg.output_dir.join("compare.csv");
    std::fs::write(path, merged)?;
    Ok(runs)
}

/// First diagnostics time at which the energy has come within `frac` of its
/// total drop, i.e. F(t) <= F_final + frac * (F_initial - F_final).
pub fn time_to_reach_band(records: &[DiagRecord], frac: f64) -> Option<f64> {
    let first = records.first()?;
    let last = records.last()?;
    let threshold = last.energy + frac * (first.energy - last.energy);
    records.iter().find(|r| r.energy <= threshold).map(|r| r.t)
}

/// Read a diagnostics CSV back into records (used by tests and tooling).
pub fn read_diag_csv(path: &Path) -> Result<Vec<DiagRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == DiagRecord::CSV_HEADER => {}
        other => {
            return Err(Error::Usage(format!(
                "not a diagnostics file (header {other:?})"
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::Usage(format!(
                "diagnostics line {} has {} columns, expected 9",
                i + 2,
                cols.len()
            )));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Usage(format!("bad float {s:?} on line {}", i + 2)))
        };
        out.push(DiagRecord {
            step: cols[0]
                .parse()
                .map_err(|_| Error::Usage(format!("bad step {:?}", cols[0])))?,
            t: f(cols[1])?,
            mass: f(cols[2])?,
            energy: f(cols[3])?,
            aux: f(cols[4])?,
            lagrange: f(cols[5])?,
            solver_iters: cols[6]
                .parse()
                .map_err(|_| Error::Usage(format!("bad iters {:?}", cols[6])))?,
            residual: f(cols[7])?,
            wall_ms: f(cols[8])?,
        });
    }
    Ok(out)
}
