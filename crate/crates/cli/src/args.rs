//! Flag definitions and value parsers.

use std::path::PathBuf;

use amrvol_core::{ClipPlane, DVec3};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "amrvol", version, about = "Build, render, benchmark and serve cell-centered AMR volumes")]
pub struct Cli {
    /// JSON file with default settings; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Write a synthetic multi-level cell list.
    Generate(GenerateArgs),
    /// Convert a raw little-endian f32 voxel grid into a cell list.
    Import(ImportArgs),
    /// Build bricks and regions from a cell list and save them.
    Build(BuildArgs),
    /// Print brick and region statistics of a built artifact.
    Info(InfoArgs),
    /// Render one frame.
    Render(RenderArgs),
    /// Time an orbit of frames and print one CSV row per view.
    Bench(BenchArgs),
    /// Run the frame-streaming service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Gaussian,
    Ramp,
    Turbulence,
    Constant,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub field: FieldArg,
    /// Domain size in coarsest-level cells.
    #[arg(long, value_parser = parse_u32x3, default_value = "4,4,4")]
    pub root: [u32; 3],
    #[arg(long, default_value_t = 3)]
    pub max_level: u8,
    /// Refinement threshold per level (finest-but-one first); one value applies to all.
    #[arg(long = "threshold", num_args = 1.., default_values_t = [0.05])]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of cells dropped to create holes.
    #[arg(long, default_value_t = 0.0)]
    pub holes: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Raw voxel file, x fastest.
    pub input: PathBuf,
    #[arg(long, value_parser = parse_usizex3)]
    pub dims: [usize; 3],
    /// Merge 2x2x2 blocks whose values span at most this much (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    #[arg(long, default_value = "value")]
    pub name: String,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub max_brick_width: Option<u32>,
    /// Keep the brick split tree (needed by `bench --mode celllocation`).
    #[arg(long)]
    pub retain_tree: bool,
    /// Print statistics as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub artifact: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Debug, Args)]
pub struct ViewArgs {
    /// Transfer function JSON file {domain:[lo,hi], rgba:[[r,g,b,a] x 256]}.
    #[arg(long)]
    pub tf: Option<PathBuf>,
    /// Field name; the first field by default.
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long, value_parser = parse_res)]
    pub res: Option<(u32, u32)>,
    #[arg(long)]
    pub rate_scale: Option<f64>,
    /// analytic, central, clamped or none.
    #[arg(long)]
    pub gradient: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reconstruct with the nearest cell instead of the basis method.
    #[arg(long)]
    pub nearest: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub artifact: PathBuf,
    #[command(flatten)]
    pub view: ViewArgs,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub pos: Option<DVec3>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub look: Option<DVec3>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub up: Option<DVec3>,
    #[arg(long)]
    pub fov: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub iso: Option<f64>,
    /// Clip plane nx,ny,nz,d keeping n.x >= d; repeat for up to 6 planes.
    #[arg(long = "clip", value_parser = parse_clip, allow_hyphen_values = true)]
    pub clip: Vec<ClipPlane>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the raw RGBA8 pixels here.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// Also write the frame statistics JSON here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    Region,
    Celllocation,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub artifact: PathBuf,
    #[command(flatten)]
    pub view: ViewArgs,
    #[arg(long, value_enum, default_value = "region")]
    pub mode: BenchMode,
    /// Number of viewpoints on the orbit.
    #[arg(long, default_value_t = 8)]
    pub orbit: u32,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pub elevation: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub artifact: PathBuf,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub tf: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<String>,
}

fn parse_list<T: std::str::FromStr, const N: usize>(s: &str) -> Result<[T; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated values, got '{s}'"));
    }
    let mut out = Vec::with_capacity(N);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("'{p}' is not a valid number"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

pub fn parse_vec3(s: &str) -> Result<DVec3, String> {
    let v: [f64; 3] = parse_list(s)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(format!("'{s}' has non-finite components"));
    }
    Ok(DVec3::from(v))
}

pub fn parse_u32x3(s: &str) -> Result<[u32; 3], String> {
    parse_list(s)
}

pub fn parse_usizex3(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)
}

pub fn parse_res(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in '{s}'"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in '{s}'"))?;
    if w == 0 || h == 0 || w > 16384 || h > 16384 {
        return Err(format!("resolution must be between 1x1 and 16384x16384, got '{s}'"));
    }
    Ok((w, h))
}

pub fn parse_clip(s: &str) -> Result<ClipPlane, String> {
    let v: [f64; 4] = parse_list(s)?;
    let normal = DVec3::new(v[0], v[1], v[2]);
    if !(normal.length() > 0.0) || !v[3].is_finite() {
        return Err(format!("clip plane needs a non-zero normal and finite offset, got '{s}'"));
    }
    Ok(ClipPlane { normal, offset: v[3] })
}
