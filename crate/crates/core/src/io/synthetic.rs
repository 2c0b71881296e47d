//! Deterministic synthetic AMR data for tests and benchmarks.
//!
//! The domain is a block of `root_cells` cells on `max_level`, anchored at the
//! origin. Each cell is refined into its eight children while
//! `|grad f(center)| * width >= threshold(level)`, so steep regions end up on
//! finer levels. No 2:1 balancing is applied, which lets level jumps larger
//! than one occur naturally.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{CellSet, LevelCoord};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Radial Gaussian bump centered in the domain.
    Gaussian,
    /// `f = x` in world units.
    Ramp,
    /// Sum of randomly oriented sine waves over several octaves.
    Turbulence,
    Constant,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Gaussian => "gaussian",
            FieldKind::Ramp => "ramp",
            FieldKind::Turbulence => "turbulence",
            FieldKind::Constant => "constant",
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "ramp" => Ok(Self::Ramp),
            "turbulence" => Ok(Self::Turbulence),
            "constant" => Ok(Self::Constant),
            _ => Err(Error::InvalidParameter(format!("unknown field kind '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub field: FieldKind,
    /// Domain size in cells of the coarsest level.
    pub root_cells: [u32; 3],
    pub max_level: u8,
    /// Refinement threshold for cells on level `l` (index `l - 1`). A single
    /// entry applies to every level.
    pub thresholds: Vec<f64>,
    pub seed: u64,
    /// Probability that any visited cell (with its would-be children) is left out.
    pub hole_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            field: FieldKind::Gaussian,
            root_cells: [4, 4, 4],
            max_level: 3,
            thresholds: vec![0.05],
            seed: 0,
            hole_fraction: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.root_cells.contains(&0) {
            return Err(Error::InvalidParameter("root cell counts must be positive".into()));
        }
        if self.max_level > 20 {
            return Err(Error::InvalidParameter("max level must be at most 20".into()));
        }
        let n = self.thresholds.len();
        if self.max_level > 0 && n != 1 && n != self.max_level as usize {
            return Err(Error::InvalidParameter(format!(
                "expected 1 or {} thresholds, got {n}",
                self.max_level
            )));
        }
        if self.thresholds.iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err(Error::InvalidParameter("thresholds must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.hole_fraction) {
            return Err(Error::InvalidParameter("hole fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn threshold(&self, level: u8) -> f64 {
        if self.thresholds.len() == 1 {
            self.thresholds[0]
        } else {
            self.thresholds[level as usize - 1]
        }
    }

    /// World-space extent of the domain.
    pub fn extent(&self) -> DVec3 {
        DVec3::new(
            self.root_cells[0] as f64,
            self.root_cells[1] as f64,
            self.root_cells[2] as f64,
        ) * (1u64 << self.max_level) as f64
    }
}

/// Analytic scalar field with its gradient.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    kind: FieldKind,
    center: DVec3,
    sigma: f64,
    waves: Vec<(DVec3, f64, f64)>,
}

impl AnalyticField {
    pub fn new(kind: FieldKind, extent: DVec3, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = extent.min_element();
        let mut waves = Vec::new();
        if kind == FieldKind::Turbulence {
            for octave in 0..5 {
                let freq = std::f64::consts::TAU * (1u32 << octave) as f64 * 1.5 / size;
                let amp = 0.5f64.powi(octave);
                for _ in 0..3 {
                    let dir = loop {
                        let v = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        let l = v.length();
                        if l > 0.1 && l <= 1.0 {
                            break v / l;
                        }
                    };
                    waves.push((dir * freq, amp, rng.gen_range(0.0..std::f64::consts::TAU)));
                }
            }
        }
        Self { kind, center: 0.5 * extent, sigma: 0.15 * size, waves }
    }

    pub fn eval(&self, p: DVec3) -> (f64, DVec3) {
        match self.kind {
            FieldKind::Gaussian => {
                let d = p - self.center;
                let f = (-d.length_squared() / (2.0 * self.sigma * self.sigma)).exp();
                (f, -d * f / (self.sigma * self.sigma))
            }
            FieldKind::Ramp => (p.x, DVec3::X),
            FieldKind::Turbulence => self.waves.iter().fold((0.0, DVec3::ZERO), |(f, g), &(k, a, phi)| {
                let arg = k.dot(p) + phi;
                (f + a * arg.sin(), g + k * (a * arg.cos()))
            }),
            FieldKind::Constant => (1.0, DVec3::ZERO),
        }
    }
}

/// Uniform `[0, 1)` hash of a cell and seed (splitmix64 finalizer).
fn cell_hash(seed: u64, c: &LevelCoord) -> f64 {
    let mut z = seed
        ^ (c.i as u32 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (c.j as u32 as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f)
        ^ (c.k as u32 as u64).wrapping_mul(0x1656_67b1_9e37_79f9)
        ^ (c.level as u64) << 56;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Generates the refined cell list, depth first from each root cell.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<CellSet, Error> {
    spec.validate()?;
    let field = AnalyticField::new(spec.field, spec.extent(), spec.seed);
    let mut cells = CellSet::single_field(spec.field.name());
    let w = 1i32 << spec.max_level;
    let mut stack = Vec::new();
    for k in (0..spec.root_cells[2] as i32).rev() {
        for j in (0..spec.root_cells[1] as i32).rev() {
            for i in (0..spec.root_cells[0] as i32).rev() {
                stack.push(LevelCoord::new(i * w, j * w, k * w, spec.max_level));
            }
        }
    }
    while let Some(c) = stack.pop() {
        if spec.hole_fraction > 0.0 && cell_hash(spec.seed, &c) < spec.hole_fraction {
            continue;
        }
        let (f, g) = field.eval(c.center());
        if c.level > 0 && g.length() * c.width() >= spec.threshold(c.level) {
            let h = 1i32 << (c.level - 1);
            for n in (0..8).rev() {
                let (dx, dy, dz) = (n & 1, (n >> 1) & 1, n >> 2);
                stack.push(LevelCoord::new(c.i + dx * h, c.j + dy * h, c.k + dz * h, c.level - 1));
            }
        } else {
            cells.push(c, &[f as f32]);
        }
    }
    Ok(cells)
}
