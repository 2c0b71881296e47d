//! Scalar-field reconstruction with the hat-basis ("basis") method and its
//! gradients.
//!
//! Every cell `C` of width `w` carries the weight
//! `H(p) = h(|cx - px| / w) * h(|cy - py| / w) * h(|cz - pz| / w)` with
//! `h(x) = max(1 - x, 0)`, and a sample is the normalized weighted sum of all
//! cell values with nonzero weight. All paths below sum in the same order
//! (ascending brick id, then x-fastest within a brick) and skip zero weights,
//! so the region path, the cell-location path and the linear-scan oracle agree
//! bit for bit.

use glam::DVec3;

use crate::accel::{Bvh, RegionBvh};
use crate::bricks::BrickKdTree;
use crate::model::{AmrModel, Brick, CellSet, LevelCoord};
use crate::regions::ActiveBrickRegion;

/// Weight sums at or below this are treated as "outside the support union".
pub const WEIGHT_EPSILON: f64 = 1e-12;

/// Default central-difference offset as a fraction of the region's finest cell width.
pub const DEFAULT_OFFSET_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleResult {
    pub value: f64,
    pub weight_sum: f64,
    pub valid: bool,
}

impl SampleResult {
    pub const INVALID: SampleResult = SampleResult { value: 0.0, weight_sum: 0.0, valid: false };
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradientResult {
    pub gradient: DVec3,
    pub valid: bool,
}

impl GradientResult {
    pub const INVALID: GradientResult = GradientResult { gradient: DVec3::ZERO, valid: false };
}

#[inline]
fn hat(x: f64) -> f64 {
    (1.0 - x).max(0.0)
}

/// Per-axis hat factor of a cell centered at `c` with width `w`.
#[inline]
fn axis_weight(c: f64, p: f64, w: f64) -> f64 {
    hat((c - p).abs() / w)
}

/// Derivative of the per-axis factor with respect to `p` inside the support.
/// At the kink `c == p` the `c - p >= 0` branch is taken.
#[inline]
fn axis_slope(c: f64, p: f64, w: f64) -> f64 {
    if c - p >= 0.0 {
        1.0 / w
    } else {
        -1.0 / w
    }
}

pub fn hat_weight(cell: &LevelCoord, p: DVec3) -> f64 {
    let c = cell.center();
    let w = cell.width();
    axis_weight(c.x, p.x, w) * axis_weight(c.y, p.y, w) * axis_weight(c.z, p.z, w)
}

/// Running sums for the weighted average and its derivative. Values enter
/// relative to the first contributing cell, so a locally constant field
/// reconstructs to exactly that constant with an exactly zero gradient.
#[derive(Clone, Copy, Default)]
struct Accum {
    sw: f64,
    reference: Option<f64>,
    swd: f64,
    dsw: DVec3,
    dswd: DVec3,
}

impl Accum {
    fn sample(&self) -> SampleResult {
        if self.sw > WEIGHT_EPSILON {
            let base = self.reference.unwrap_or(0.0);
            SampleResult { value: base + self.swd / self.sw, weight_sum: self.sw, valid: true }
        } else {
            SampleResult { weight_sum: self.sw, ..SampleResult::INVALID }
        }
    }

    /// Quotient rule on `ref + swd / sw`.
    fn gradient(&self) -> GradientResult {
        if self.sw > WEIGHT_EPSILON {
            let g = (self.dswd * self.sw - self.dsw * self.swd) / (self.sw * self.sw);
            GradientResult { gradient: g, valid: true }
        } else {
            GradientResult::INVALID
        }
    }
}

/// Candidate cells along one axis: the (at most two) cells of the brick whose
/// centers lie within one cell width of `p`, clipped to the brick.
#[inline]
fn lattice_span(origin: f64, w: f64, n: u32, p: f64) -> (u32, u32) {
    let u = (p - origin) / w - 0.5;
    let c0 = u.floor();
    let first = c0.max(0.0);
    let last = (c0 + 1.0).min(n as f64 - 1.0);
    if first > last {
        (1, 0)
    } else {
        (first as u32, last as u32)
    }
}

#[inline]
fn accumulate_brick<const GRAD: bool>(
    brick: &Brick,
    values: &[f32],
    p: DVec3,
    acc: &mut Accum,
) {
    let w = brick.cell_width();
    let o = brick.origin();
    let (x0, x1) = lattice_span(o.x, w, brick.dims[0], p.x);
    let (y0, y1) = lattice_span(o.y, w, brick.dims[1], p.y);
    let (z0, z1) = lattice_span(o.z, w, brick.dims[2], p.z);
    if x0 > x1 || y0 > y1 || z0 > z1 {
        return;
    }
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = brick.cell_center(x, y, z);
                let hx = axis_weight(c.x, p.x, w);
                let hy = axis_weight(c.y, p.y, w);
                let hz = axis_weight(c.z, p.z, w);
                let h = hx * hy * hz;
                if h == 0.0 {
                    continue;
                }
                let v = values[brick.local_index(x, y, z)] as f64;
                let d = v - *acc.reference.get_or_insert(v);
                acc.sw += h;
                acc.swd += h * d;
                if GRAD {
                    let dh = DVec3::new(
                        hy * hz * axis_slope(c.x, p.x, w),
                        hx * hz * axis_slope(c.y, p.y, w),
                        hx * hy * axis_slope(c.z, p.z, w),
                    );
                    acc.dsw += dh;
                    acc.dswd += dh * d;
                }
            }
        }
    }
}

fn accumulate<const GRAD: bool>(model: &AmrModel, field: usize, ids: &[u32], p: DVec3) -> Accum {
    let mut acc = Accum::default();
    for &b in ids {
        let b = b as usize;
        accumulate_brick::<GRAD>(&model.bricks[b], model.brick_values(b, field), p, &mut acc);
    }
    acc
}

/// Basis sample over an explicit, ascending brick list.
pub fn basis_sample_bricks(model: &AmrModel, field: usize, ids: &[u32], p: DVec3) -> SampleResult {
    accumulate::<false>(model, field, ids, p).sample()
}

/// Basis sample and its analytic gradient over an explicit brick list, from a
/// single pass over the same cells.
pub fn basis_sample_gradient_bricks(
    model: &AmrModel,
    field: usize,
    ids: &[u32],
    p: DVec3,
) -> (SampleResult, GradientResult) {
    let acc = accumulate::<true>(model, field, ids, p);
    (acc.sample(), acc.gradient())
}

/// Basis sample at `p` (inside `region`) using only the region's brick list.
pub fn basis_sample_region(
    model: &AmrModel,
    region: &ActiveBrickRegion,
    field: usize,
    p: DVec3,
) -> SampleResult {
    basis_sample_bricks(model, field, &region.brick_ids, p)
}

/// Reference reconstruction: a linear scan over every cell.
///
/// Pass the cells in brick order (see [`AmrModel::to_cells`]) to reproduce the
/// region path's summation order exactly.
pub fn basis_sample_oracle(cells: &CellSet, field: usize, p: DVec3) -> SampleResult {
    let mut acc = Accum::default();
    for (c, &v) in cells.coords.iter().zip(&cells.values[field]) {
        let h = hat_weight(c, p);
        if h == 0.0 {
            continue;
        }
        let v = v as f64;
        let d = v - *acc.reference.get_or_insert(v);
        acc.sw += h;
        acc.swd += h * d;
    }
    acc.sample()
}

/// Basis sample using a per-sample walk of the brick k-d tree to find the
/// contributing bricks. Same numbers as the region path, more work.
pub fn basis_sample_celllocation(
    model: &AmrModel,
    tree: &BrickKdTree,
    field: usize,
    p: DVec3,
    scratch: &mut Vec<u32>,
) -> SampleResult {
    tree.bricks_at(model, p, scratch);
    basis_sample_bricks(model, field, scratch, p)
}

pub fn basis_sample_gradient_celllocation(
    model: &AmrModel,
    tree: &BrickKdTree,
    field: usize,
    p: DVec3,
    scratch: &mut Vec<u32>,
) -> (SampleResult, GradientResult) {
    tree.bricks_at(model, p, scratch);
    basis_sample_gradient_bricks(model, field, scratch, p)
}

/// Value of the cell containing `p`, found through a hierarchy over brick boxes.
pub fn nearest_sample(model: &AmrModel, bricks: &Bvh, field: usize, p: DVec3) -> SampleResult {
    match bricks.point_query(p) {
        Some(b) => nearest_in_brick(model, b, field, p),
        None => SampleResult::INVALID,
    }
}

/// Value of the cell of brick `b` containing `p` (clamped into the brick).
pub fn nearest_in_brick(model: &AmrModel, b: usize, field: usize, p: DVec3) -> SampleResult {
    let brick = &model.bricks[b];
    let w = brick.cell_width();
    let local = (p - brick.origin()) / w;
    let idx: [u32; 3] = std::array::from_fn(|a| {
        (local[a].floor().max(0.0) as u32).min(brick.dims[a] - 1)
    });
    let v = model.brick_values(b, field)[brick.local_index(idx[0], idx[1], idx[2])];
    SampleResult { value: v as f64, weight_sum: 1.0, valid: true }
}

/// Analytic gradient of the basis reconstruction at `p`, from the same cells
/// and weights as [`basis_sample_region`].
pub fn gradient_analytic(
    model: &AmrModel,
    region: &ActiveBrickRegion,
    field: usize,
    p: DVec3,
) -> GradientResult {
    basis_sample_gradient_bricks(model, field, &region.brick_ids, p).1
}

/// Central differences with offsets of `offset_scale` times the region's
/// finest cell width. Offset points are located through `lookup`, which should
/// hold every region; points outside the support union fall back to one-sided
/// differences.
pub fn gradient_central(
    model: &AmrModel,
    regions: &[ActiveBrickRegion],
    lookup: &RegionBvh,
    field: usize,
    p: DVec3,
    offset_scale: f64,
) -> GradientResult {
    let Some(r) = lookup.point_query(p) else { return GradientResult::INVALID };
    let h = offset_scale * regions[r].finest_cell_width;
    let center = basis_sample_region(model, &regions[r], field, p);
    let located = |q: DVec3| match lookup.point_query(q) {
        Some(i) => basis_sample_region(model, &regions[i], field, q),
        None => SampleResult::INVALID,
    };
    let mut g = DVec3::ZERO;
    for a in 0..3 {
        let mut e = DVec3::ZERO;
        e[a] = h;
        let fwd = located(p + e);
        let back = located(p - e);
        g[a] = match (back.valid, fwd.valid, center.valid) {
            (true, true, _) => (fwd.value - back.value) / (2.0 * h),
            (false, true, true) => (fwd.value - center.value) / h,
            (true, false, true) => (center.value - back.value) / h,
            _ => 0.0,
        };
    }
    GradientResult { gradient: g, valid: center.valid }
}

/// Central differences with the offset points clamped into the region, so
/// no other region is consulted. The divisor is the actual clamped distance.
pub fn gradient_central_clamped(
    model: &AmrModel,
    region: &ActiveBrickRegion,
    field: usize,
    p: DVec3,
    offset_scale: f64,
) -> GradientResult {
    let h = offset_scale * region.finest_cell_width;
    let center = basis_sample_region(model, region, field, p);
    let mut g = DVec3::ZERO;
    for a in 0..3 {
        let mut e = DVec3::ZERO;
        e[a] = h;
        let qf = region.bounds.clamp_point(p + e);
        let qb = region.bounds.clamp_point(p - e);
        let mut fwd = (qf[a], basis_sample_region(model, region, field, qf));
        let mut back = (qb[a], basis_sample_region(model, region, field, qb));
        if !fwd.1.valid {
            fwd = (p[a], center);
        }
        if !back.1.valid {
            back = (p[a], center);
        }
        let d = fwd.0 - back.0;
        g[a] = if d > 0.0 && fwd.1.valid && back.1.valid {
            (fwd.1.value - back.1.value) / d
        } else {
            0.0
        };
    }
    GradientResult { gradient: g, valid: center.valid }
}
