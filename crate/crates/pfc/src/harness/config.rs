// Plain-text `key = value` configuration files: `#` starts a comment, blank
// lines are skipped, duplicate or unknown keys are hard errors so typos
// cannot silently fall back to defaults.

use std::path::{Path, PathBuf};

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scenarios::{self, IcKind, Preset, PresetName};
use crate::schemes::{PrecondKind, SchemeId, StepOpts};

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    taken: bool,
}

/// A parsed config file whose keys are consumed by typed getters; anything
/// left unconsumed at the end is reported as an unknown key.
#[derive(Debug)]
pub struct KvFile {
    entries: Vec<Entry>,
}

impl KvFile {
    pub fn parse_str(text: &str) -> Result<KvFile> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some(eq) = stripped.find('=') else {
                return Err(Error::Config {
                    line,
                    msg: format!("expected `key = value`, got {stripped:?}"),
                });
            };
            let key = stripped[..eq].trim().to_string();
            let value = stripped[eq + 1..].trim().to_string();
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: "empty key".into(),
                });
            }
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: format!("key `{key}` has no value"),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
            entries.push(Entry {
                key,
                value,
                line,
                taken: false,
            });
        }
        Ok(KvFile { entries })
    }

    pub fn load(path: &Path) -> Result<KvFile> {
        let text = std::fs::read_to_string(path)?;
        KvFile::parse_str(&text)
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        for e in &mut self.entries {
            if e.key == key {
                e.taken = true;
                return Some((e.value.clone(), e.line));
            }
        }
        None
    }

    pub fn get_str(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(v, _)| v)
    }

    pub fn get_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<f64>().map(Some).map_err(|_| Error::Config {
                line,
                msg: format!("key `{key}`: {v:?} is not a number"),
            }),
        }
    }

    pub fn get_u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<u64>().map(Some).map_err(|_| Error::Config {
                line,
                msg: format!("key `{key}`: {v:?} is not a non-negative integer"),
            }),
        }
    }

    /// Error out on any key no getter asked for.
    pub fn expect_consumed(&self) -> Result<()> {
        match self.entries.iter().find(|e| !e.taken) {
            None => Ok(()),
            Some(e) => Err(Error::Config {
                line: e.line,
                msg: format!("unknown key `{}`", e.key),
            }),
        }
    }
}

/// Everything a simulation run needs, resolved from a preset plus overrides
/// or from explicit grid/model keys.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Preset,
    pub snapshot_every: u64,
    pub diag_every: u64,
    pub opts: StepOpts,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Read the keys shared by every subcommand. Scheme keys and
    /// subcommand-specific keys are consumed by the callers.
    pub fn from_kv(kv: &mut KvFile) -> Result<RunConfig> {
        let mut preset = match kv.get_str("preset") {
            Some(name) => scenarios::preset(PresetName::parse(&name)?),
            None => explicit_preset(kv)?,
        };
        if let Some(scale) = kv.get_f64("scale")? {
            preset = preset.scaled(scale)?;
        }
        if let Some(v) = kv.get_f64("dt")? {
            preset.dt = v;
        }
        if let Some(v) = kv.get_f64("t_end")? {
            preset.t_end = v;
        }
        if let Some(v) = kv.get_f64("a")? {
            preset.params.a = v;
        }
        if let Some(v) = kv.get_f64("alpha")? {
            preset.params.alpha = v;
        }
        if let Some(v) = kv.get_f64("mobility")? {
            preset.params.mobility = v;
        }
        if let Some(v) = kv.get_f64("eta")? {
            preset.params.eta = v;
        }
        if let Some(v) = kv.get_f64("c0")? {
            preset.params.c0 = v;
        }
        if !preset.dt.is_finite() || preset.dt <= 0.0 {
            return Err(Error::Usage(format!(
                "dt must be positive and finite, got {}",
                preset.dt
            )));
        }
        if preset.t_end < preset.dt {
            return Err(Error::Usage(format!(
                "t_end = {} is shorter than one step dt = {}",
                preset.t_end, preset.dt
            )));
        }
        let n_steps = (preset.t_end / preset.dt).round().max(1.0) as u64;
        let snapshot_every = kv.get_u64("snapshot_every")?.unwrap_or(n_steps);
        let diag_every = kv.get_u64("diag_every")?.unwrap_or(1);
        if snapshot_every == 0 || diag_every == 0 {
            return Err(Error::Usage(
                "snapshot_every and diag_every must be at least 1".into(),
            ));
        }
        let mut opts = StepOpts::default();
        if let Some(v) = kv.get_f64("tol")? {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Usage(format!("tol must be positive and finite, got {v}")));
            }
            opts.tol = v;
        }
        if let Some(v) = kv.get_u64("maxit")? {
            opts.maxit = Some(v as usize);
        }
        if let Some(v) = kv.get_str("precond") {
            opts.precond = match v.as_str() {
                "dct" => PrecondKind::Dct,
                "none" => PrecondKind::None,
                other => {
                    return Err(Error::Usage(format!(
                        "unknown preconditioner {other:?}; expected dct or none"
                    )))
                }
            };
        }
        let configured = kv.get_str("output_dir").unwrap_or_else(|| "out".into());
        let output_dir = match std::env::var_os("PFC_OUTPUT_DIR") {
            Some(dir) => PathBuf::from(dir),
            None => PathBuf::from(configured),
        };
        Ok(RunConfig {
            preset,
            snapshot_every,
            diag_every,
            opts,
            output_dir,
        })
    }

    pub fn n_steps(&self) -> u64 {
        (self.preset.t_end / self.preset.dt).round().max(1.0) as u64
    }
}

/// Build a preset-shaped bundle from explicit keys when no `preset` is named.
fn explicit_preset(kv: &mut KvFile) -> Result<Preset> {
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| Error::Usage(format!("missing required key `{key}` (or use `preset`)")))
    };
    let nx = need(kv.get_u64("nx")?.map(|v| v as f64), "nx")? as usize;
    let ny = need(kv.get_u64("ny")?.map(|v| v as f64), "ny")? as usize;
    let lx = need(kv.get_f64("lx")?, "lx")?;
    let ly = need(kv.get_f64("ly")?, "ly")?;
    let grid = GridSpec::new(nx, ny, lx, ly)?;
    let kind = match kv.get_str("ic").as_deref() {
        None | Some("smooth") => IcKind::Smooth,
        Some("crystallite") => IcKind::Crystallite,
        Some("polycrystal") => IcKind::Polycrystal,
        Some(other) => {
            return Err(Error::Usage(format!(
                "unknown ic {other:?}; expected smooth, crystallite, or polycrystal"
            )))
        }
    };
    let mut scenario = scenarios::preset(PresetName::Crystal).scenario;
    scenario.kind = kind;
    if kind == IcKind::Crystallite {
        scenario.centers = vec![(lx / 2.0, ly / 2.0)];
        scenario.thetas = vec![0.0];
    }
    if let Some(v) = kv.get_f64("phi_bar")? {
        scenario.phi_bar = v;
    }
    if let Some(v) = kv.get_f64("amp")? {
        scenario.amp = v;
    }
    if let Some(v) = kv.get_f64("d0")? {
        scenario.d0 = v;
    }
    Ok(Preset {
        name: PresetName::Crystal,
        grid,
        params: ModelParams {
            a: 1.0,
            alpha: 0.9,
            mobility: 1.0,
            eta: 1e3,
            c0: 1e4,
            m0: 0.0,
        },
        scenario,
        dt: 1e-3,
        t_end: 1.0,
    })
}

/// Consume a required `scheme` key.
pub fn take_scheme(kv: &mut KvFile) -> Result<SchemeId> {
    match kv.get_str("scheme") {
        Some(s) => SchemeId::parse(&s),
        None => Err(Error::Usage("missing required key `scheme`".into())),
    }
}

/// Consume a `schemes` key: comma-separated list.
pub fn take_scheme_list(kv: &mut KvFile) -> Result<Vec<SchemeId>> {
    match kv.get_str("schemes") {
        None => Err(Error::Usage("missing required key `schemes`".into())),
        Some(s) => {
            let list: Result<Vec<SchemeId>> =
                s.split(',').map(SchemeId::parse).collect();
            let list = list?;
            if list.is_empty() {
                return Err(Error::Usage("`schemes` list is empty".into()));
            }
            Ok(list)
        }
    }
}

/// Consume a `modes` key: semicolon-separated `k,l` pairs.
pub fn take_modes(kv: &mut KvFile) -> Result<Vec<(u32, u32)>> {
    let Some(s) = kv.get_str("modes") else {
        return Err(Error::Usage("missing required key `modes`".into()));
    };
    let mut out = Vec::new();
    for tok in s.split(';') {
        let tok = tok.trim();
        let mut it = tok.split(',');
        let (Some(ks), Some(ls), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Usage(format!("mode {tok:?} is not of the form k,l")));
        };
        let k = ks.trim().parse::<u32>();
        let l = ls.trim().parse::<u32>();
        match (k, l) {
            (Ok(k), Ok(l)) => out.push((k, l)),
            _ => return Err(Error::Usage(format!("mode {tok:?} is not of the form k,l"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blank_lines_and_values() {
        let mut kv = KvFile::parse_str(
            "# a comment\n\nscheme = ac-l-eq  # trailing\npreset = crystal\nscale = 4\n",
        )
        .unwrap();
        assert_eq!(take_scheme(&mut kv).unwrap(), SchemeId::AcLagrangeEq);
        let rc = RunConfig::from_kv(&mut kv).unwrap();
        kv.expect_consumed().unwrap();
        assert_eq!(rc.preset.grid.nx(), 64);
        assert_eq!(rc.diag_every, 1);
        assert_eq!(rc.opts.tol, 1e-10);
        // default snapshot cadence: final step only
        assert_eq!(rc.snapshot_every, rc.n_steps());
    }

    #[test]
    fn unknown_and_duplicate_and_malformed_keys_are_errors() {
        let mut kv = KvFile::parse_str("preset = crystal\nbogus_key = 3\n").unwrap();
        let _ = RunConfig::from_kv(&mut kv).unwrap();
        let err = kv.expect_consumed().unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");

        let err = KvFile::parse_str("a = 1\na = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));

        let err = KvFile::parse_str("just words\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));

        let mut kv = KvFile::parse_str("preset = crystal\ndt = fast\n").unwrap();
        let err = RunConfig::from_kv(&mut kv).unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let mut kv = KvFile::parse_str(
            "preset = crystal\nscale = 8\nmobility = 2.5\ndt = 0.01\nt_end = 0.1\ntol = 1e-13\nprecond = none\n",
        )
        .unwrap();
        let rc = RunConfig::from_kv(&mut kv).unwrap();
        kv.expect_consumed().unwrap();
        assert_eq!(rc.preset.grid.nx(), 32);
        assert_eq!(rc.preset.params.mobility, 2.5);
        assert_eq!(rc.preset.params.alpha, 0.675);
        assert_eq!(rc.n_steps(), 10);
        assert_eq!(rc.opts.precond, PrecondKind::None);
    }

    #[test]
    fn explicit_grid_without_preset() {
        let mut kv = KvFile::parse_str(
            "nx = 32\nny = 16\nlx = 2.0\nly = 1.0\nalpha = 0.8\ndt = 0.1\nt_end = 1\n",
        )
        .unwrap();
        let rc = RunConfig::from_kv(&mut kv).unwrap();
        kv.expect_consumed().unwrap();
        assert_eq!((rc.preset.grid.nx(), rc.preset.grid.ny()), (32, 16));
        assert_eq!(rc.preset.params.alpha, 0.8);
        assert_eq!(rc.preset.scenario.kind, IcKind::Smooth);
    }

    #[test]
    fn scheme_and_mode_lists() {
        let mut kv = KvFile::parse_str("schemes = ch-eq, ac-l-eq\nmodes = 1,0; 1,1; 0,0\n").unwrap();
        let list = take_scheme_list(&mut kv).unwrap();
        assert_eq!(list, vec![SchemeId::ChEq, SchemeId::AcLagrangeEq]);
        let modes = take_modes(&mut kv).unwrap();
        assert_eq!(modes, vec![(1, 0), (1, 1), (0, 0)]);
        kv.expect_consumed().unwrap();

        let mut kv = KvFile::parse_str("modes = 1;2,3\n").unwrap();
        assert!(take_modes(&mut kv).is_err());
    }
}
