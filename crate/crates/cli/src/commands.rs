use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use amrvol_core::io::{
    generate_synthetic, import_structured, load_artifact, load_cells, save_artifact, save_cells,
    write_png, write_raw, FieldKind, SyntheticSpec,
};
use amrvol_core::{
    brick_stats, region_stats, render_frame, BrickBuildParams, Camera, Filter, Frame, GradientMode,
    MarchParams, SampleLookup, Scene, TransferFunction, VolumeData,
};
use anyhow::{anyhow, Context};
use serde::Serialize;

use crate::args::{
    BenchArgs, BenchMode, BuildArgs, FieldArg, GenerateArgs, ImportArgs, InfoArgs, RenderArgs, ServeArgs, ViewArgs,
};
use crate::config::CliConfig;
use crate::{usage, CliError};

/// Opacity ceiling of the transfer function used when none is given.
const DEFAULT_MAX_ALPHA: f32 = 0.25;

pub fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let field = match a.field {
        FieldArg::Gaussian => FieldKind::Gaussian,
        FieldArg::Ramp => FieldKind::Ramp,
        FieldArg::Turbulence => FieldKind::Turbulence,
        FieldArg::Constant => FieldKind::Constant,
    };
    let spec = SyntheticSpec {
        field,
        root_cells: a.root,
        max_level: a.max_level,
        thresholds: a.thresholds,
        seed: a.seed,
        hole_fraction: a.holes,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let cells = generate_synthetic(&spec)?;
    save_cells(&a.output, &cells).with_context(|| format!("writing {}", a.output.display()))?;
    println!("wrote {} cells to {}", cells.len(), a.output.display());
    Ok(())
}

pub fn import(a: ImportArgs) -> Result<(), CliError> {
    if a.dims.contains(&0) {
        return Err(usage("--dims must be positive"));
    }
    if !(a.tolerance >= 0.0 && a.tolerance.is_finite()) {
        return Err(usage("--tolerance must be a non-negative number"));
    }
    let bytes = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let n: usize = a.dims.iter().product();
    if bytes.len() != n * 4 {
        return Err(anyhow!(
            "{} holds {} bytes but {}x{}x{} f32 voxels need {}",
            a.input.display(),
            bytes.len(),
            a.dims[0],
            a.dims[1],
            a.dims[2],
            n * 4
        ).into());
    }
    let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let cells = import_structured(a.dims, &values, a.tolerance, &a.name)?;
    save_cells(&a.output, &cells).with_context(|| format!("writing {}", a.output.display()))?;
    println!("wrote {} cells ({} voxels) to {}", cells.len(), n, a.output.display());
    Ok(())
}

/// Brick and region statistics in the shape of a summary table.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelStats {
    pub cells: usize,
    pub bricks: usize,
    pub regions: usize,
    pub avg_bricks_per_region: f64,
    pub avg_bricks_per_region_by_volume: f64,
    pub max_bricks_per_region: usize,
    pub cells_per_level: Vec<usize>,
    pub bricks_per_level: Vec<usize>,
    pub brick_dims_min: [u32; 3],
    pub brick_dims_max: [u32; 3],
    pub brick_dims_mean: [f64; 3],
}

fn model_stats(data: &VolumeData) -> ModelStats {
    let b = brick_stats(&data.model);
    let r = region_stats(&data.regions);
    ModelStats {
        cells: b.cells,
        bricks: b.bricks,
        regions: r.regions,
        avg_bricks_per_region: r.avg_bricks_by_count,
        avg_bricks_per_region_by_volume: r.avg_bricks_by_volume,
        max_bricks_per_region: r.max_bricks,
        cells_per_level: b.cells_per_level,
        bricks_per_level: b.bricks_per_level,
        brick_dims_min: b.dims_min,
        brick_dims_max: b.dims_max,
        brick_dims_mean: b.dims_mean,
    }
}

fn print_stats(s: &ModelStats, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(s).expect("stats serialize"));
        return;
    }
    let mut out = String::new();
    let _ = writeln!(out, "cells                      {}", s.cells);
    let _ = writeln!(out, "bricks                     {}", s.bricks);
    let _ = writeln!(out, "regions                    {}", s.regions);
    let _ = writeln!(out, "avg bricks/region (count)  {:.3}", s.avg_bricks_per_region);
    let _ = writeln!(out, "avg bricks/region (volume) {:.3}", s.avg_bricks_per_region_by_volume);
    let _ = writeln!(out, "max bricks/region          {}", s.max_bricks_per_region);
    for (l, (c, b)) in s.cells_per_level.iter().zip(&s.bricks_per_level).enumerate() {
        let _ = writeln!(out, "level {l:<2} cells {c:>10} bricks {b:>8}");
    }
    if s.bricks > 0 {
        let _ = writeln!(
            out,
            "brick dims min {:?} max {:?} mean [{:.2}, {:.2}, {:.2}]",
            s.brick_dims_min, s.brick_dims_max, s.brick_dims_mean[0], s.brick_dims_mean[1], s.brick_dims_mean[2]
        );
    }
    print!("{out}");
}

pub fn build(a: BuildArgs, config: &CliConfig) -> Result<(), CliError> {
    let width = a.max_brick_width.unwrap_or(config.max_brick_width);
    if width == 0 {
        return Err(usage("--max-brick-width must be positive"));
    }
    let params = BrickBuildParams { max_brick_width: width, retain_tree: a.retain_tree };
    let cells = load_cells(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let start = Instant::now();
    let data = VolumeData::from_cells(&cells, &params)?;
    log::info!("built bricks and regions in {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    save_artifact(&a.output, &data, &params).with_context(|| format!("writing {}", a.output.display()))?;
    print_stats(&model_stats(&data), a.json);
    Ok(())
}

pub fn info(a: InfoArgs) -> Result<(), CliError> {
    let (data, params) = load(&a.artifact)?;
    let stats = model_stats(&data);
    if a.json {
        print_stats(&stats, true);
    } else {
        println!("fields                     {}", data.model.fields.join(", "));
        let b = data.model.bounds;
        println!("bounds                     {:?} .. {:?}", b.lo.to_array(), b.hi.to_array());
        println!("max brick width            {}", params.max_brick_width);
        println!("cell-location tree         {}", if data.kd_tree.is_some() { "retained" } else { "absent" });
        print_stats(&stats, false);
    }
    Ok(())
}

fn load(path: &Path) -> Result<(VolumeData, BrickBuildParams), CliError> {
    Ok(load_artifact(path).with_context(|| format!("loading artifact {}", path.display()))?)
}

fn load_tf(path: &Path) -> Result<TransferFunction, CliError> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TransferFunction::from_json(&text).with_context(|| format!("transfer function {}", path.display()))?)
}

fn default_tf(data: &VolumeData, field: usize) -> TransferFunction {
    let (lo, hi) = data.model.value_range(field);
    let (lo, hi) = (lo as f64, hi as f64);
    let domain = if lo < hi {
        [lo, hi]
    } else if lo.is_finite() {
        [lo - 0.5, lo + 0.5]
    } else {
        [0.0, 1.0]
    };
    TransferFunction::cool_warm(domain, DEFAULT_MAX_ALPHA)
}

/// Validated settings shared by `render` and `bench`.
struct View {
    params: MarchParams,
    res: (u32, u32),
    tf: Option<TransferFunction>,
}

fn view_settings(v: &ViewArgs, config: &CliConfig) -> Result<View, CliError> {
    let mut params = config.march.clone();
    if let Some(r) = v.rate_scale {
        params.rate_scale = r;
    }
    if let Some(g) = &v.gradient {
        params.gradient = g.parse::<GradientMode>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(s) = v.seed {
        params.seed = s;
    }
    if v.nearest {
        params.filter = Filter::Nearest;
    }
    params.validate().map_err(|e| usage(e.to_string()))?;
    let res = v.res.unwrap_or((config.resolution[0], config.resolution[1]));
    let tf = v.tf.as_deref().map(load_tf).transpose()?;
    Ok(View { params, res, tf })
}

fn scene(data: VolumeData, field: Option<&str>, tf: Option<TransferFunction>) -> Result<Scene, CliError> {
    let index = match field {
        Some(name) => data.model.field_index(name).ok_or_else(|| {
            anyhow!("no field '{name}' (available: {})", data.model.fields.join(", "))
        })?,
        None => 0,
    };
    let tf = tf.unwrap_or_else(|| default_tf(&data, index));
    Ok(Scene::new(Arc::new(data), index, tf)?)
}

pub fn render(a: RenderArgs, config: &CliConfig) -> Result<(), CliError> {
    let mut view = view_settings(&a.view, config)?;
    if a.clip.len() > 6 {
        return Err(usage("at most 6 --clip planes"));
    }
    view.params.clip_planes = a.clip.clone();
    let fov = a.fov.unwrap_or(config.fov);
    if !(fov > 0.0 && fov < 180.0) {
        return Err(usage("--fov must lie in (0, 180)"));
    }
    if a.iso.is_some_and(|v| !v.is_finite()) {
        return Err(usage("--iso must be finite"));
    }

    let (data, _) = load(&a.artifact)?;
    let bounds = data.model.bounds;
    let mut scene = scene(data, a.view.field.as_deref(), view.tf.take())?;
    let mut rebuild_ms = scene.rebuild_ms;
    if a.iso.is_some() {
        scene = scene.with_iso(a.iso);
        rebuild_ms += scene.rebuild_ms;
    }
    let (w, h) = view.res;
    let camera = match a.pos {
        Some(pos) => {
            let look = a.look.unwrap_or(bounds.center());
            let up = a.up.unwrap_or(amrvol_core::DVec3::Y);
            Camera::look_at(pos, look, up, fov, w, h).map_err(|e| usage(e.to_string()))?
        }
        None => {
            if a.look.is_some() || a.up.is_some() {
                return Err(usage("--look and --up need --pos"));
            }
            Camera::orbit(&bounds, 35.0, 25.0, 1.8, fov, w, h)?
        }
    };
    let mut frame = render_frame(&scene, &camera, &view.params)?;
    frame.stats.bvh_rebuild_ms = rebuild_ms;
    write_png(&a.output, &frame).with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(raw) = &a.raw {
        write_raw(raw, &frame).with_context(|| format!("writing {}", raw.display()))?;
    }
    let stats = serde_json::to_string(&frame.stats).expect("stats serialize");
    if let Some(path) = &a.stats {
        std::fs::write(path, &stats).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{stats}");
    Ok(())
}

fn orbit_frame(scene: &Scene, params: &MarchParams, view: u32, views: u32, elevation: f64, res: (u32, u32)) -> Result<Frame, CliError> {
    let az = 360.0 * view as f64 / views as f64;
    let camera = Camera::orbit(&scene.model().bounds, az, elevation, 1.8, 45.0, res.0, res.1)?;
    Ok(render_frame(scene, &camera, params)?)
}

pub fn bench(a: BenchArgs, config: &CliConfig) -> Result<(), CliError> {
    let mut view = view_settings(&a.view, config)?;
    if a.orbit == 0 {
        return Err(usage("--orbit must be at least 1"));
    }
    if !(a.elevation.abs() < 90.0) {
        return Err(usage("--elevation must lie in (-90, 90)"));
    }
    if a.view.nearest && a.mode != BenchMode::Region {
        return Err(usage("--nearest only works with --mode region"));
    }
    let (data, _) = load(&a.artifact)?;
    if a.mode != BenchMode::Region && data.kd_tree.is_none() {
        return Err(anyhow!("cell-location mode needs an artifact built with --retain-tree").into());
    }
    let scene = scene(data, a.view.field.as_deref(), view.tf.take())?;
    eprintln!("# volume hierarchy build {:.2} ms", scene.rebuild_ms);

    let modes: &[(SampleLookup, &str)] = match a.mode {
        BenchMode::Region => &[(SampleLookup::Regions, "region")],
        BenchMode::Celllocation => &[(SampleLookup::CellLocation, "celllocation")],
        BenchMode::Both => &[(SampleLookup::Regions, "region"), (SampleLookup::CellLocation, "celllocation")],
    };
    let both = modes.len() > 1;
    println!("{}view,ms,regions,samples", if both { "mode," } else { "" });
    let mut totals = vec![0.0; modes.len()];
    for v in 0..a.orbit {
        let mut reference: Option<Frame> = None;
        for (m, (lookup, name)) in modes.iter().enumerate() {
            let params = MarchParams { lookup: *lookup, ..view.params.clone() };
            let f = orbit_frame(&scene, &params, v, a.orbit, a.elevation, view.res)?;
            let prefix = if both { format!("{name},") } else { String::new() };
            println!("{prefix}{v},{:.3},{},{}", f.stats.ms, f.stats.regions, f.stats.samples);
            totals[m] += f.stats.ms;
            if let Some(r) = &reference {
                if r.pixels != f.pixels || r.stats.samples != f.stats.samples {
                    return Err(anyhow!("view {v}: {name} frame differs from the region frame").into());
                }
            } else {
                reference = Some(f);
            }
        }
    }
    for ((_, name), total) in modes.iter().zip(&totals) {
        eprintln!("# {name}: mean {:.3} ms over {} views", total / a.orbit as f64, a.orbit);
    }
    if both {
        eprintln!("# speedup {:.2}x", totals[1] / totals[0]);
    }
    Ok(())
}

pub fn serve(a: ServeArgs, config: &CliConfig) -> Result<(), CliError> {
    let port = a.port.unwrap_or(config.port);
    let addr: std::net::SocketAddr = format!("{}:{port}", a.host)
        .parse()
        .map_err(|_| usage(format!("'{}' is not a valid host address", a.host)))?;
    let tf = a.tf.as_deref().map(load_tf).transpose()?;
    let (data, _) = load(&a.artifact)?;
    let scene = scene(data, a.field.as_deref(), tf)?;
    let session = Arc::new(amrvol_service::Session::new(scene, Default::default()));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = amrvol_service::bind(addr).await?;
        println!("listening on ws://{}/ws", listener.local_addr()?);
        amrvol_service::serve(listener, session, async {
            let _ = tokio::signal::ctrl_c().await;
            eprintln!("shutting down");
        })
        .await?;
        Ok::<_, CliError>(())
    })
}
