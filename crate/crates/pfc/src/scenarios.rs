// Initial conditions and parameter presets for the three standard runs:
// the smooth-cosine accuracy study, single-crystallite growth, and a
// two-grain polycrystal with mismatched lattice orientations.

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// Which initial field a scenario builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    Smooth,
    Crystallite,
    Polycrystal,
}

/// Geometry of the initial data: mean density, lattice amplitude and
/// wavenumber, bump radius, and the seed positions/orientations.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub kind: IcKind,
    pub phi_bar: f64,
    pub amp: f64,
    /// Hexagonal lattice wavenumber q; the lattice is
    /// cos(q y/sqrt3) cos(q x) - cos(2 q y/sqrt3)/2.
    pub qlat: f64,
    /// Crystallite bump radius.
    pub d0: f64,
    pub centers: Vec<(f64, f64)>,
    pub thetas: Vec<f64>,
    /// Domain multipliers: the lattice-fitted box is
    /// [0, 2 pi a / q] x [0, sqrt3 pi b / q].
    pub domain_mult_a: u32,
    pub domain_mult_b: u32,
}

impl ScenarioParams {
    /// Lattice-commensurate domain extents for the stored multipliers.
    pub fn domain(&self) -> (f64, f64) {
        let pi = std::f64::consts::PI;
        let lx = 2.0 * pi * self.domain_mult_a as f64 / self.qlat;
        let ly = 3f64.sqrt() * pi * self.domain_mult_b as f64 / self.qlat;
        (lx, ly)
    }

    /// Build the initial field on `grid`.
    pub fn initial_field(&self, grid: GridSpec) -> Result<Field> {
        match self.kind {
            IcKind::Smooth => Ok(ic_smooth(grid)),
            IcKind::Crystallite => ic_crystallite(grid, self),
            IcKind::Polycrystal => ic_polycrystal(grid, self),
        }
    }
}

/// phi = 1/2 + cos(pi x) cos(pi y) / 2, the smooth accuracy-study datum
/// (meant for the unit square; works on any box).
pub fn ic_smooth(grid: GridSpec) -> Field {
    let pi = std::f64::consts::PI;
    Field::from_fn(grid, |x, y| 0.5 + 0.5 * (pi * x).cos() * (pi * y).cos())
}

/// One-dimensional cross-section of the hexagonal ground state at
/// wavenumber q, evaluated in coordinates already rotated into the grain
/// frame: cos(q y/sqrt3) cos(q x) - cos(2 q y/sqrt3)/2. Range [-3/2, 3/4].
pub fn hex_lattice_at(qlat: f64, x: f64, y: f64) -> f64 {
    let s3 = 3f64.sqrt();
    (qlat * y / s3).cos() * (qlat * x).cos() - 0.5 * (2.0 * qlat * y / s3).cos()
}

/// Quartic bump window: (1 - (r/d0)^2)^2 inside r <= d0, zero outside.
/// C^1 at the rim.
pub fn bump(r: f64, d0: f64) -> f64 {
    if r <= d0 {
        let u = 1.0 - (r / d0) * (r / d0);
        u * u
    } else {
        0.0
    }
}

fn seeded_lattice(grid: GridSpec, sp: &ScenarioParams) -> Result<Field> {
    if sp.centers.len() != sp.thetas.len() {
        return Err(Error::Usage(format!(
            "scenario has {} centers but {} orientations",
            sp.centers.len(),
            sp.thetas.len()
        )));
    }
    if !sp.d0.is_finite() || sp.d0 <= 0.0 {
        return Err(Error::Usage(format!(
            "bump radius must be positive and finite, got {}",
            sp.d0
        )));
    }
    for (i, &(xi, yi)) in sp.centers.iter().enumerate() {
        for &(xj, yj) in sp.centers.iter().skip(i + 1) {
            let dist = (xi - xj).hypot(yi - yj);
            if dist < 2.0 * sp.d0 {
                return Err(Error::Usage(format!(
                    "crystallite bumps overlap: centers {dist:.3} apart, radius {:.3}",
                    sp.d0
                )));
            }
        }
    }
    let rots: Vec<(f64, f64)> = sp.thetas.iter().map(|t| (t.cos(), t.sin())).collect();
    Ok(Field::from_fn(grid, |x, y| {
        let mut v = sp.phi_bar;
        for (&(cx, cy), &(ct, st)) in sp.centers.iter().zip(&rots) {
            let w = bump((x - cx).hypot(y - cy), sp.d0);
            if w > 0.0 {
                // rotate the sampling coordinates; the window stays put
                let xr = ct * x + st * y;
                let yr = -st * x + ct * y;
                v += w * sp.amp * hex_lattice_at(sp.qlat, xr, yr);
            }
        }
        v
    }))
}

/// Mean density plus one windowed hexagonal seed at the domain center.
pub fn ic_crystallite(grid: GridSpec, sp: &ScenarioParams) -> Result<Field> {
    let mut one = sp.clone();
    one.centers = vec![(grid.lx() / 2.0, grid.ly() / 2.0)];
    one.thetas = vec![0.0];
    seeded_lattice(grid, &one)
}

/// Mean density plus the configured list of windowed, rotated seeds.
/// Overlapping seeds are rejected.
pub fn ic_polycrystal(grid: GridSpec, sp: &ScenarioParams) -> Result<Field> {
    seeded_lattice(grid, sp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Accuracy,
    Crystal,
    Polycrystal,
}

impl PresetName {
    pub fn name(self) -> &'static str {
        match self {
            PresetName::Accuracy => "accuracy",
            PresetName::Crystal => "crystal",
            PresetName::Polycrystal => "polycrystal",
        }
    }

    pub fn parse(s: &str) -> Result<PresetName> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" => Ok(PresetName::Accuracy),
            "crystal" => Ok(PresetName::Crystal),
            "polycrystal" => Ok(PresetName::Polycrystal),
            other => Err(Error::Usage(format!(
                "unknown preset {other:?}; expected accuracy, crystal, or polycrystal"
            ))),
        }
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete run setup: grid, model parameters, initial-data geometry, and
/// default step size / horizon. `params.m0` is a placeholder until the
/// initial field is built; drivers set it to the initial mass.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub scenario: ScenarioParams,
    pub dt: f64,
    pub t_end: f64,
}

impl Preset {
    /// Shrink the grid counts by `scale` (everything else unchanged), for
    /// desk-scale runs of the full-size setups.
    pub fn scaled(mut self, scale: f64) -> Result<Preset> {
        if scale < 1.0 || !scale.is_finite() {
            return Err(Error::Usage(format!("scale must be >= 1, got {scale}")));
        }
        let nx = ((self.grid.nx() as f64 / scale).round() as usize).max(4);
        let ny = ((self.grid.ny() as f64 / scale).round() as usize).max(4);
        self.grid = GridSpec::new(nx, ny, self.grid.lx(), self.grid.ly())?;
        Ok(self)
    }

    pub fn initial_field(&self) -> Result<Field> {
        self.scenario.initial_field(self.grid)
    }
}

/// The frozen parameter bundles behind the named presets (full resolution).
pub fn preset(name: PresetName) -> Preset {
    let pi = std::f64::consts::PI;
    match name {
        PresetName::Accuracy => {
            let grid = GridSpec::new(256, 256, 1.0, 1.0).expect("static grid");
            Preset {
                name,
                grid,
                params: ModelParams {
                    a: 1.0,
                    alpha: 0.9, // epsilon = 0.1
                    mobility: 1e-3,
                    eta: 1e3,
                    c0: 1e4,
                    m0: 0.0,
                },
                scenario: ScenarioParams {
                    kind: IcKind::Smooth,
                    phi_bar: 0.5,
                    amp: 0.5,
                    qlat: 3f64.sqrt() / 2.0,
                    d0: 1.0,
                    centers: vec![],
                    thetas: vec![],
                    domain_mult_a: 1,
                    domain_mult_b: 1,
                },
                dt: 0.05,
                t_end: 1.0,
            }
        }
        PresetName::Crystal | PresetName::Polycrystal => {
            let eps: f64 = 0.325;
            let phi_bar = eps.sqrt() / 2.0;
            let amp = 0.8 * (phi_bar + (15.0 * eps - 36.0 * phi_bar * phi_bar).sqrt() / 3.0);
            let qlat = 3f64.sqrt() / 2.0;
            let (mult_a, mult_b) = (10u32, 12u32);
            let lx = 2.0 * pi * mult_a as f64 / qlat;
            let ly = 3f64.sqrt() * pi * mult_b as f64 / qlat;
            let grid = GridSpec::new(256, 256, lx, ly).expect("static grid");
            let d0 = lx / 6.0;
            let (kind, centers, thetas, t_end) = if name == PresetName::Crystal {
                (
                    IcKind::Crystallite,
                    vec![(lx / 2.0, ly / 2.0)],
                    vec![0.0],
                    10.0,
                )
            } else {
                (
                    IcKind::Polycrystal,
                    vec![(lx / 4.0, ly / 4.0), (3.0 * lx / 4.0, 3.0 * ly / 4.0)],
                    vec![0.0, pi / 8.0],
                    20.0,
                )
            };
            Preset {
                name,
                grid,
                params: ModelParams {
                    a: 1.0,
                    alpha: 1.0 - eps,
                    mobility: 1.0,
                    eta: 1e3,
                    c0: 1e4,
                    m0: 0.0,
                },
                scenario: ScenarioParams {
                    kind,
                    phi_bar,
                    amp,
                    qlat,
                    d0,
                    centers,
                    thetas,
                    domain_mult_a: mult_a,
                    domain_mult_b: mult_b,
                },
                dt: 1e-3,
                t_end,
            }
        }
    }
}
