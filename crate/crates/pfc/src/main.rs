// Command-line front end: run / converge / compare / stability, each driven
// by a key = value config file. Exit code 0 only if every guard held.

use pfc::error::{Error, Result};
use pfc::harness::config::{take_modes, take_scheme, take_scheme_list, KvFile, RunConfig};
use pfc::harness::{compare, converge, run, DiagRecord};
use pfc::stability::{growth_rate, measure_rate, StabilityQuery};
use pfc::ModelParams;

const USAGE: &str = "usage: pfc <run|converge|compare|stability> <config-file>

subcommands:
  run        integrate one scheme; writes diag.csv and snap_*.bin
  converge   step-halving temporal refinement study; writes converge.csv
  compare    run several schemes on one setup; writes compare.csv
  stability  predicted vs measured mode growth rates; writes stability.csv";

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = match dispatch(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config { .. } => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

fn dispatch(args: &[String]) -> Result<()> {
    if args.len() != 3 {
        return Err(Error::Usage(USAGE.into()));
    }
    let path = std::path::Path::new(&args[2]);
    let mut kv = KvFile::load(path)?;
    match args[1].as_str() {
        "run" => cmd_run(&mut kv),
        "converge" => cmd_converge(&mut kv),
        "compare" => cmd_compare(&mut kv),
        "stability" => cmd_stability(&mut kv),
        other => Err(Error::Usage(format!("unknown subcommand {other:?}\n\n{USAGE}"))),
    }
}

fn cmd_run(kv: &mut KvFile) -> Result<()> {
    let scheme = take_scheme(kv)?;
    let cfg = RunConfig::from_kv(kv)?;
    kv.expect_consumed()?;
    println!(
        "run {scheme}: {}x{} grid, dt = {:e}, t_end = {}, {} steps",
        cfg.preset.grid.nx(),
        cfg.preset.grid.ny(),
        cfg.preset.dt,
        cfg.preset.t_end,
        cfg.n_steps()
    );
    let out = run(&cfg, scheme)?;
    let first = &out.records[0];
    let last = out.records.last().expect("at least one record");
    println!("  energy  {:+.9e} -> {:+.9e}", first.energy, last.energy);
    println!(
        "  mass    {:+.9e} -> {:+.9e}  (rel drift {:.3e})",
        first.mass,
        last.mass,
        (last.mass - first.mass).abs() / first.mass.abs().max(f64::MIN_POSITIVE)
    );
    println!(
        "  solver  {} total iterations, wall {:.1} ms",
        out.total_iters, out.total_wall_ms
    );
    println!("  wrote {}", out.diag_path.display());
    for s in &out.snapshots {
        println!("  wrote {}", s.display());
    }
    Ok(())
}

fn cmd_converge(kv: &mut KvFile) -> Result<()> {
    let scheme = take_scheme(kv)?;
    let levels = kv.get_u64("levels")?.unwrap_or(5) as usize;
    let cfg = RunConfig::from_kv(kv)?;
    kv.expect_consumed()?;
    println!(
        "converge {scheme}: {}x{} grid, dt = {:e} .. {:e}, t_end = {}",
        cfg.preset.grid.nx(),
        cfg.preset.grid.ny(),
        cfg.preset.dt,
        cfg.preset.dt / (1u64 << (levels - 1)) as f64,
        cfg.preset.t_end
    );
    let rows = converge(&cfg, scheme, levels)?;
    println!("  {:>12}  {:>12}  {:>14}  {:>6}", "dt_coarse", "dt_fine", "l2_error", "order");
    for r in &rows {
        let order = r
            .order
            .map(|o| format!("{o:.3}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "  {:>12.5e}  {:>12.5e}  {:>14.6e}  {order:>6}",
            r.dt_coarse, r.dt_fine, r.l2_error
        );
    }
    println!("  wrote {}", cfg.output_dir.join("converge.csv").display());
    Ok(())
}

fn cmd_compare(kv: &mut KvFile) -> Result<()> {
    let schemes = take_scheme_list(kv)?;
    let cfg = RunConfig::from_kv(kv)?;
    kv.expect_consumed()?;
    println!(
        "compare {:?}: {}x{} grid, dt = {:e}, t_end = {}",
        schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        cfg.preset.grid.nx(),
        cfg.preset.grid.ny(),
        cfg.preset.dt,
        cfg.preset.t_end
    );
    let runs = compare(&cfg, &schemes)?;
    println!(
        "  {:>9}  {:>14}  {:>14}  {:>12}  {:>10}",
        "scheme", "final energy", "mass drift", "plateau t", "wall ms"
    );
    for r in &runs {
        let recs: &[DiagRecord] = &r.output.records;
        let drift = (recs.last().unwrap().mass - recs[0].mass).abs()
            / recs[0].mass.abs().max(f64::MIN_POSITIVE);
        let plateau = r
            .plateau_t
            .map(|t| format!("{t:.4}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "  {:>9}  {:>14.6e}  {:>14.3e}  {plateau:>12}  {:>10.1}",
            r.output.scheme.name(),
            recs.last().unwrap().energy,
            drift,
            r.output.total_wall_ms
        );
    }
    println!("  wrote {}", cfg.output_dir.join("compare.csv").display());
    Ok(())
}

fn cmd_stability(kv: &mut KvFile) -> Result<()> {
    let scheme = take_scheme(kv)?;
    let modes = take_modes(kv)?;
    let phi_ss = kv.get_f64("phi_ss")?.unwrap_or(0.0);
    let amplitude = kv.get_f64("amplitude")?.unwrap_or(1e-6);
    let dt = kv.get_f64("dt")?.unwrap_or(1e-3);
    let steps = kv.get_u64("steps")?.unwrap_or(200) as usize;
    let p = ModelParams {
        a: kv.get_f64("a")?.unwrap_or(1.0),
        alpha: kv.get_f64("alpha")?.unwrap_or(0.675),
        mobility: kv.get_f64("mobility")?.unwrap_or(1.0),
        eta: kv.get_f64("eta")?.unwrap_or(1e3),
        c0: kv.get_f64("c0")?.unwrap_or(1e4),
        m0: 0.0,
    };
    let configured = kv.get_str("output_dir").unwrap_or_else(|| "out".into());
    let output_dir = match std::env::var_os("PFC_OUTPUT_DIR") {
        Some(dir) => std::path::PathBuf::from(dir),
        None => std::path::PathBuf::from(configured),
    };
    kv.expect_consumed()?;

    println!(
        "stability {scheme}: phi_ss = {phi_ss}, amplitude = {amplitude:e}, dt = {dt:e}, {steps} steps"
    );
    println!(
        "  {:>3} {:>3}  {:>14}  {:>14}  {:>9}",
        "k", "l", "predicted", "measured", "rel err"
    );
    let mut csv = String::from("k,l,predicted,measured,rel_error\n");
    for &(k, l) in &modes {
        let q = StabilityQuery {
            model: scheme.model(),
            k,
            l,
            phi_ss,
            p,
        };
        let predicted = growth_rate(&q);
        let measured = measure_rate(scheme, &q, amplitude, dt, steps)?;
        let rel = if predicted != 0.0 {
            (measured - predicted).abs() / predicted.abs()
        } else {
            measured.abs()
        };
        println!("  {k:>3} {l:>3}  {predicted:>14.6e}  {measured:>14.6e}  {rel:>9.3e}");
        csv.push_str(&format!(
            "{k},{l},{predicted:.16e},{measured:.16e},{rel:.16e}\n"
        ));
    }
    std::fs::create_dir_all(&output_dir)?;
    let path = output_dir.join("stability.csv");
    std::fs::write(&path, csv)?;
    println!("  wrote {}", path.display());
    Ok(())
}
