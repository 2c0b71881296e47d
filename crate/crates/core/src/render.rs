//! Ray marching through active brick regions.
//!
//! Each ray walks the volume hierarchy region by region. Inside a region the
//! step is a fixed fraction of the region's finest cell width; the global
//! sample lattice `dt * (k + rho)` is used only to place interval delimiters,
//! and every interval is sampled once at its midpoint with its opacity
//! corrected for the interval length. Regions are therefore always sampled at
//! least once and adjacent regions of different step size composite without
//! gaps or overlaps.

use std::time::Instant;

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geom::{Box3, ClipPlane, Ray};
use crate::recon::{
    basis_sample_bricks, basis_sample_gradient_bricks, basis_sample_gradient_celllocation,
    basis_sample_celllocation, gradient_central, gradient_central_clamped, nearest_in_brick,
    GradientResult, SampleResult, DEFAULT_OFFSET_SCALE,
};
use crate::scene::Scene;

pub const AMBIENT: f32 = 0.2;
pub const DIFFUSE: f32 = 0.8;
const ISO_BISECTION_STEPS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum GradientMode {
    #[default]
    Analytic,
    Central,
    ClampedCentral,
    None,
}

impl std::str::FromStr for GradientMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "central" => Ok(Self::Central),
            "clamped" | "clampedCentral" | "clamped-central" => Ok(Self::ClampedCentral),
            "none" => Ok(Self::None),
            _ => Err(Error::InvalidParameter(format!("unknown gradient mode '{s}'"))),
        }
    }
}

/// Reconstruction filter. Nearest-neighbor mode walks bricks instead of regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Filter {
    #[default]
    Basis,
    Nearest,
}

/// How basis samples find their contributing bricks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum SampleLookup {
    /// The current region's brick list.
    #[default]
    Regions,
    /// A k-d tree walk per sample (requires a retained brick tree).
    CellLocation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MarchParams {
    /// Samples per finest cell width at `rate_scale == 1`.
    pub samples_per_cell: f64,
    pub rate_scale: f64,
    pub early_termination: f64,
    pub seed: u64,
    pub gradient: GradientMode,
    pub offset_scale: f64,
    pub clip_planes: Vec<ClipPlane>,
    pub filter: Filter,
    pub lookup: SampleLookup,
    /// Straight (non-premultiplied) background color.
    pub background: [f32; 4],
}

impl Default for MarchParams {
    fn default() -> Self {
        Self {
            samples_per_cell: 2.0,
            rate_scale: 1.0,
            early_termination: 0.98,
            seed: 0,
            gradient: GradientMode::Analytic,
            offset_scale: DEFAULT_OFFSET_SCALE,
            clip_planes: Vec::new(),
            filter: Filter::Basis,
            lookup: SampleLookup::Regions,
            background: [0.1, 0.1, 0.12, 1.0],
        }
    }
}

impl MarchParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.samples_per_cell > 0.0 && self.samples_per_cell.is_finite()) {
            return Err(Error::InvalidParameter("samples per cell must be positive".into()));
        }
        if !(self.rate_scale > 0.0 && self.rate_scale.is_finite()) {
            return Err(Error::InvalidParameter("rate scale must be positive".into()));
        }
        if !(self.early_termination > 0.0 && self.early_termination <= 1.0) {
            return Err(Error::InvalidParameter(
                "early termination threshold must lie in (0, 1]".into(),
            ));
        }
        if self.clip_planes.len() > 6 {
            return Err(Error::InvalidParameter("at most 6 clip planes".into()));
        }
        Ok(())
    }
}

/// Pinhole camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: DVec3,
    pub forward: DVec3,
    pub up: DVec3,
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn look_at(
        position: DVec3,
        target: DVec3,
        up: DVec3,
        fov_deg: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, Error> {
        let cam = Self { position, forward: target - position, up, fov_deg, width, height };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera on a sphere around `bounds` looking at its center. The sphere's
    /// radius is `distance_scale` times the bounding-sphere radius.
    pub fn orbit(
        bounds: &Box3,
        azimuth_deg: f64,
        elevation_deg: f64,
        distance_scale: f64,
        fov_deg: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, Error> {
        let center = bounds.center();
        let radius = 0.5 * bounds.extent().length();
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians().clamp(-1.5, 1.5));
        let dir = DVec3::new(el.cos() * az.cos(), el.sin(), el.cos() * az.sin());
        Self::look_at(center + dir * radius * distance_scale, center, DVec3::Y, fov_deg, width, height)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image size must be non-zero".into()));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::InvalidParameter("field of view must lie in (0, 180)".into()));
        }
        let f = self.forward.normalize_or_zero();
        if f == DVec3::ZERO || f.cross(self.up).length_squared() < 1e-12 {
            return Err(Error::InvalidParameter(
                "camera forward must be non-zero and not parallel to up".into(),
            ));
        }
        Ok(())
    }

    /// Ray through the center of pixel `(x, y)`; `y = 0` is the top row.
    pub fn ray(&self, x: u32, y: u32) -> Ray {
        let f = self.forward.normalize();
        let r = f.cross(self.up).normalize();
        let u = r.cross(f);
        let half = (0.5 * self.fov_deg.to_radians()).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((x as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * half * aspect;
        let sy = (1.0 - (y as f64 + 0.5) / self.height as f64 * 2.0) * half;
        Ray::new(self.position, (f + r * sx + u * sy).normalize())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RayStats {
    /// Volume samples (one per interval).
    pub samples: u64,
    /// Region (or brick) intervals traversed.
    pub regions: u64,
    /// Reconstructions spent on iso-surface search.
    pub iso_samples: u64,
}

impl std::ops::AddAssign for RayStats {
    fn add_assign(&mut self, o: Self) {
        self.samples += o.samples;
        self.regions += o.regions;
        self.iso_samples += o.iso_samples;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FrameStats {
    pub ms: f64,
    pub regions: u64,
    pub samples: u64,
    pub bvh_rebuild_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    /// RGBA8, row-major, top row first.
    pub pixels: Vec<u8>,
    pub stats: FrameStats,
}

/// Sub-intervals of `[t_in, t_out]` delimited by the lattice points
/// `dt * (k + rho)` strictly inside it. Always yields at least one interval.
#[derive(Clone, Debug)]
pub struct Intervals {
    start: f64,
    next: f64,
    k: f64,
    dt: f64,
    rho: f64,
    t_out: f64,
    done: bool,
}

impl Iterator for Intervals {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        if self.done {
            return None;
        }
        if self.next < self.t_out {
            let iv = (self.start, self.next);
            self.start = self.next;
            self.k += 1.0;
            self.next = self.dt * (self.k + self.rho);
            Some(iv)
        } else {
            self.done = true;
            Some((self.start, self.t_out))
        }
    }
}

pub fn make_intervals(t_in: f64, t_out: f64, dt: f64, rho: f64) -> Intervals {
    debug_assert!(t_in < t_out && dt > 0.0);
    let mut k = (t_in / dt - rho).floor() + 1.0;
    let mut next = dt * (k + rho);
    while next <= t_in {
        k += 1.0;
        next = dt * (k + rho);
    }
    Intervals { start: t_in, next, k, dt, rho, t_out, done: false }
}

/// Opacity of a segment of length `s` given opacity `alpha` per base step `s1`.
#[inline]
pub fn opacity_correct(alpha: f64, s: f64, s1: f64) -> f64 {
    (1.0 - (1.0 - alpha).powf(s / s1)).clamp(0.0, 1.0)
}

/// Headlight Lambertian shading; a zero gradient leaves only the ambient term.
pub fn shade(color: [f32; 3], gradient: DVec3, ray_dir: DVec3) -> [f32; 3] {
    let n = gradient.normalize_or_zero();
    let diffuse = if n == DVec3::ZERO { 0.0 } else { n.dot(ray_dir.normalize()).abs() as f32 };
    let k = AMBIENT + DIFFUSE * diffuse;
    color.map(|c| c * k)
}

/// Per-pixel lattice offset in `[0, 1)` for interleaved sampling.
pub fn pixel_offset(pixel_index: u64, seed: u64) -> f64 {
    let mut z = (pixel_index ^ seed).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Per-thread scratch and counters.
#[derive(Default)]
pub struct RayContext {
    pub stats: RayStats,
    scratch: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoHit {
    pub t: f64,
    pub gradient: DVec3,
    pub region: usize,
}

fn sample_basis(
    scene: &Scene,
    region: usize,
    p: DVec3,
    params: &MarchParams,
    with_gradient: bool,
    scratch: &mut Vec<u32>,
) -> (SampleResult, Option<GradientResult>) {
    let model = scene.model();
    let ids = &scene.regions()[region].brick_ids;
    match (params.lookup, with_gradient) {
        (SampleLookup::Regions, false) => (basis_sample_bricks(model, scene.field, ids, p), None),
        (SampleLookup::Regions, true) => {
            let (s, g) = basis_sample_gradient_bricks(model, scene.field, ids, p);
            (s, Some(g))
        }
        (SampleLookup::CellLocation, grad) => {
            let tree = scene.data.kd_tree.as_ref().expect("cell location needs a retained brick tree");
            if grad {
                let (s, g) = basis_sample_gradient_celllocation(model, tree, scene.field, p, scratch);
                (s, Some(g))
            } else {
                (basis_sample_celllocation(model, tree, scene.field, p, scratch), None)
            }
        }
    }
}

/// First crossing of the iso-value along `ray` within `[t0, t1]`, searched in
/// the regions of the iso hierarchy and refined by bisection.
pub fn iso_intersect(
    scene: &Scene,
    ray: &Ray,
    t0: f64,
    t1: f64,
    params: &MarchParams,
    rho: f64,
    ctx: &mut RayContext,
) -> Option<IsoHit> {
    let iso = scene.iso.as_ref()?;
    let model = scene.model();
    let regions = scene.regions();
    for iv in iso.bvh.hits(ray, t0, t1) {
        let rid = iv.id as usize;
        let region = &regions[rid];
        let eval = |tp: f64| basis_sample_bricks(model, scene.field, &region.brick_ids, ray.at(tp));
        let dt = region.finest_cell_width / (params.samples_per_cell * params.rate_scale);
        let points = std::iter::once(iv.t_in)
            .chain(make_intervals(iv.t_in, iv.t_out, dt, rho).map(|(_, b)| b));
        let mut prev: Option<(f64, f64)> = None;
        for tp in points {
            let s = eval(tp);
            ctx.stats.iso_samples += 1;
            if !s.valid {
                prev = None;
                continue;
            }
            let f = s.value - iso.value;
            let hit_t = if f == 0.0 {
                Some(tp)
            } else {
                match prev {
                    Some((tq, fq)) if (fq < 0.0) != (f < 0.0) => {
                        let (mut lo, mut hi, flo) = (tq, tp, fq);
                        for _ in 0..ISO_BISECTION_STEPS {
                            let mid = 0.5 * (lo + hi);
                            let sm = eval(mid);
                            ctx.stats.iso_samples += 1;
                            let fm = sm.value - iso.value;
                            if !sm.valid || fm == 0.0 {
                                lo = mid;
                                hi = mid;
                                break;
                            }
                            if (fm < 0.0) == (flo < 0.0) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        Some(0.5 * (lo + hi))
                    }
                    _ => None,
                }
            };
            if let Some(th) = hit_t {
                let g = basis_sample_gradient_bricks(model, scene.field, &region.brick_ids, ray.at(th)).1;
                return Some(IsoHit { t: th, gradient: g.gradient, region: rid });
            }
            prev = Some((tp, f));
        }
    }
    None
}

/// Integrates one ray front to back. Returns premultiplied RGBA before the
/// background is applied.
pub fn integrate_ray(
    scene: &Scene,
    ray: &Ray,
    params: &MarchParams,
    rho: f64,
    ctx: &mut RayContext,
) -> [f64; 4] {
    let mut t0 = 0.0;
    let mut t1 = f64::INFINITY;
    for plane in &params.clip_planes {
        match plane.clip(ray, t0, t1) {
            Some((a, b)) => (t0, t1) = (a, b),
            None => return [0.0; 4],
        }
    }

    let iso_hit = if params.filter == Filter::Basis {
        iso_intersect(scene, ray, t0, t1, params, rho, ctx)
    } else {
        None
    };
    if let Some(h) = iso_hit {
        t1 = h.t;
    }

    let mut acc = [0.0f64; 4];
    let terminated = match params.filter {
        Filter::Basis => march_regions(scene, ray, t0, t1, params, rho, ctx, &mut acc),
        Filter::Nearest => march_bricks(scene, ray, t0, t1, params, rho, ctx, &mut acc),
    };

    if let (Some(h), false) = (iso_hit, terminated) {
        let c = scene.tf.eval(scene.iso.as_ref().map_or(0.0, |i| i.value));
        let shaded = shade([c[0], c[1], c[2]], h.gradient, ray.dir);
        let rem = 1.0 - acc[3];
        for ch in 0..3 {
            acc[ch] += rem * shaded[ch] as f64;
        }
        acc[3] = 1.0;
    }
    acc
}

#[inline]
fn composite(acc: &mut [f64; 4], color: [f32; 3], alpha: f64) {
    let w = (1.0 - acc[3]) * alpha;
    for ch in 0..3 {
        acc[ch] += w * color[ch] as f64;
    }
    acc[3] += w;
}

#[allow(clippy::too_many_arguments)]
fn march_regions(
    scene: &Scene,
    ray: &Ray,
    t0: f64,
    t1: f64,
    params: &MarchParams,
    rho: f64,
    ctx: &mut RayContext,
    acc: &mut [f64; 4],
) -> bool {
    let regions = scene.regions();
    let analytic = params.gradient == GradientMode::Analytic;
    for iv in scene.volume_bvh.hits(ray, t0, t1) {
        ctx.stats.regions += 1;
        let rid = iv.id as usize;
        let region = &regions[rid];
        let s1 = region.finest_cell_width / params.samples_per_cell;
        let dt = s1 / params.rate_scale;
        for (a, b) in make_intervals(iv.t_in, iv.t_out, dt, rho) {
            ctx.stats.samples += 1;
            let p = ray.at(0.5 * (a + b));
            let (s, g) = sample_basis(scene, rid, p, params, analytic, &mut ctx.scratch);
            if !s.valid {
                continue;
            }
            let rgba = scene.tf.eval(s.value);
            let alpha = opacity_correct(rgba[3] as f64, b - a, s1);
            if alpha <= 0.0 {
                continue;
            }
            let base = [rgba[0], rgba[1], rgba[2]];
            let color = match params.gradient {
                GradientMode::None => base,
                GradientMode::Analytic => shade(base, g.map_or(DVec3::ZERO, |g| g.gradient), ray.dir),
                GradientMode::Central => {
                    let g = gradient_central(
                        scene.model(),
                        regions,
                        &scene.data.region_lookup,
                        scene.field,
                        p,
                        params.offset_scale,
                    );
                    shade(base, g.gradient, ray.dir)
                }
                GradientMode::ClampedCentral => {
                    let g = gradient_central_clamped(scene.model(), region, scene.field, p, params.offset_scale);
                    shade(base, g.gradient, ray.dir)
                }
            };
            composite(acc, color, alpha);
            if acc[3] >= params.early_termination {
                return true;
            }
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn march_bricks(
    scene: &Scene,
    ray: &Ray,
    t0: f64,
    t1: f64,
    params: &MarchParams,
    rho: f64,
    ctx: &mut RayContext,
    acc: &mut [f64; 4],
) -> bool {
    let model = scene.model();
    for iv in scene.brick_bvh.hits(ray, t0, t1) {
        ctx.stats.regions += 1;
        let b = iv.id as usize;
        let s1 = model.bricks[b].cell_width() / params.samples_per_cell;
        let dt = s1 / params.rate_scale;
        for (a, c) in make_intervals(iv.t_in, iv.t_out, dt, rho) {
            ctx.stats.samples += 1;
            let s = nearest_in_brick(model, b, scene.field, ray.at(0.5 * (a + c)));
            let rgba = scene.tf.eval(s.value);
            let alpha = opacity_correct(rgba[3] as f64, c - a, s1);
            if alpha <= 0.0 {
                continue;
            }
            composite(acc, [rgba[0], rgba[1], rgba[2]], alpha);
            if acc[3] >= params.early_termination {
                return true;
            }
        }
    }
    false
}

fn to_u8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Renders one frame. Rows are rendered in parallel; the result does not
/// depend on scheduling.
pub fn render_frame(scene: &Scene, camera: &Camera, params: &MarchParams) -> Result<Frame, Error> {
    camera.validate()?;
    params.validate()?;
    if params.lookup == SampleLookup::CellLocation && scene.data.kd_tree.is_none() {
        return Err(Error::InvalidParameter(
            "cell-location lookup requires an artifact built with a retained brick tree".into(),
        ));
    }
    let start = Instant::now();
    let (w, h) = (camera.width, camera.height);
    let bg = params.background.map(|c| c as f64);
    let rows: Vec<(Vec<u8>, RayStats)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut ctx = RayContext::default();
            let mut row = Vec::with_capacity(w as usize * 4);
            for x in 0..w {
                let idx = y as u64 * w as u64 + x as u64;
                let rho = pixel_offset(idx, params.seed);
                let c = integrate_ray(scene, &camera.ray(x, y), params, rho, &mut ctx);
                let rem = 1.0 - c[3];
                row.extend_from_slice(&[
                    to_u8(c[0] + rem * bg[0] * bg[3]),
                    to_u8(c[1] + rem * bg[1] * bg[3]),
                    to_u8(c[2] + rem * bg[2] * bg[3]),
                    to_u8(c[3] + rem * bg[3]),
                ]);
            }
            (row, ctx.stats)
        })
        .collect();
    let mut pixels = Vec::with_capacity(w as usize * h as usize * 4);
    let mut stats = RayStats::default();
    for (row, s) in rows {
        pixels.extend_from_slice(&row);
        stats += s;
    }
    Ok(Frame {
        width: w,
        height: h,
        pixels,
        stats: FrameStats {
            ms: start.elapsed().as_secs_f64() * 1e3,
            regions: stats.regions,
            samples: stats.samples,
            bvh_rebuild_ms: 0.0,
        },
    })
}
