//! Active brick regions: a disjoint box decomposition of the union of brick
//! supports in which every region lists exactly the bricks influencing it.
//!
//! Construction starts from one support fragment per brick and recursively
//! splits the current region at fragment faces until no face lies strictly
//! inside a region. At that point every fragment left in the region covers it
//! completely, so the fragment brick ids are the region's brick list.

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::accel::RegionBvh;
use crate::geom::Box3;
use crate::model::AmrModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveBrickRegion {
    pub bounds: Box3,
    /// Ascending ids of every brick whose support overlaps the region interior.
    pub brick_ids: Vec<u32>,
    /// Per field: min/max over all cells whose support overlaps the region.
    pub value_ranges: Vec<(f32, f32)>,
    /// Smallest cell width among the listed bricks.
    pub finest_cell_width: f64,
}

impl ActiveBrickRegion {
    pub fn value_range(&self, field: usize) -> (f32, f32) {
        self.value_ranges[field]
    }
}

#[derive(Clone, Copy, Debug)]
struct Fragment {
    bounds: Box3,
    brick: u32,
}

/// Builds the region decomposition of `model`. Output order is the
/// depth-first (left child first) leaf order of the partitioning.
pub fn build_regions(model: &AmrModel) -> Vec<ActiveBrickRegion> {
    let frags: Vec<Fragment> = model
        .bricks
        .iter()
        .enumerate()
        .map(|(i, b)| Fragment { bounds: b.support(), brick: i as u32 })
        .collect();
    if frags.is_empty() {
        return Vec::new();
    }
    let root = frags.iter().fold(Box3::EMPTY, |acc, f| acc.union(&f.bounds));

    let mut out = Vec::new();
    let mut stack = vec![(root, frags)];
    while let Some((region, frags)) = stack.pop() {
        if frags.is_empty() {
            continue;
        }
        match choose_plane(&region, &frags) {
            None => {
                let mut ids: Vec<u32> = frags.iter().map(|f| f.brick).collect();
                ids.sort_unstable();
                ids.dedup();
                out.push(make_region(model, region, ids));
            }
            Some((axis, pos)) => {
                let mut left_box = region;
                left_box.hi[axis] = pos;
                let mut right_box = region;
                right_box.lo[axis] = pos;
                let mut left = Vec::new();
                let mut right = Vec::new();
                for f in frags {
                    if f.bounds.lo[axis] < pos {
                        let mut g = f;
                        g.bounds.hi[axis] = g.bounds.hi[axis].min(pos);
                        left.push(g);
                    }
                    if f.bounds.hi[axis] > pos {
                        let mut g = f;
                        g.bounds.lo[axis] = g.bounds.lo[axis].max(pos);
                        right.push(g);
                    }
                }
                stack.push((right_box, right));
                stack.push((left_box, left));
            }
        }
    }
    out
}

/// Picks the fragment face strictly inside `region` closest to its center,
/// trying axes from widest to narrowest and breaking distance ties toward the
/// lower coordinate.
fn choose_plane(region: &Box3, frags: &[Fragment]) -> Option<(usize, f64)> {
    let ext = region.extent();
    let center = region.center();
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| ext[b].total_cmp(&ext[a]));
    for a in axes {
        let (lo, hi, c) = (region.lo[a], region.hi[a], center[a]);
        let mut best: Option<(f64, f64)> = None;
        for f in frags {
            for face in [f.bounds.lo[a], f.bounds.hi[a]] {
                if face > lo && face < hi {
                    let d = (face - c).abs();
                    let better = match best {
                        None => true,
                        Some((bd, bp)) => d < bd || (d == bd && face < bp),
                    };
                    if better {
                        best = Some((d, face));
                    }
                }
            }
        }
        if let Some((_, pos)) = best {
            return Some((a, pos));
        }
    }
    None
}

/// Inclusive range of local cell indices along one axis whose supports
/// overlap the open interval `(lo, hi)`.
fn overlapping_cells(origin: f64, w: f64, n: u32, lo: f64, hi: f64) -> Option<(u32, u32)> {
    // support of cell c: (origin + (c - 0.5) w, origin + (c + 1.5) w)
    let first = ((lo - origin) / w - 1.5).floor() as i64 + 1;
    let last = ((hi - origin) / w + 0.5).ceil() as i64 - 1;
    let first = first.max(0);
    let last = last.min(n as i64 - 1);
    (first <= last).then_some((first as u32, last as u32))
}

fn make_region(model: &AmrModel, bounds: Box3, brick_ids: Vec<u32>) -> ActiveBrickRegion {
    let nf = model.fields.len();
    let mut ranges = vec![(f32::INFINITY, f32::NEG_INFINITY); nf];
    let mut finest = f64::INFINITY;
    for &bi in &brick_ids {
        let b = &model.bricks[bi as usize];
        let w = b.cell_width();
        finest = finest.min(w);
        let o = b.origin();
        let r: Option<Vec<(u32, u32)>> = (0..3)
            .map(|a| overlapping_cells(o[a], w, b.dims[a], bounds.lo[a], bounds.hi[a]))
            .collect();
        let Some(r) = r else { continue };
        for (f, range) in ranges.iter_mut().enumerate() {
            let vals = model.brick_values(bi as usize, f);
            for z in r[2].0..=r[2].1 {
                for y in r[1].0..=r[1].1 {
                    for x in r[0].0..=r[0].1 {
                        let v = vals[b.local_index(x, y, z)];
                        range.0 = range.0.min(v);
                        range.1 = range.1.max(v);
                    }
                }
            }
        }
    }
    ActiveBrickRegion { bounds, brick_ids, value_ranges: ranges, finest_cell_width: finest }
}

/// Region containing `p` under the half-open face rule, found through the
/// region hierarchy.
pub fn point_to_region(lookup: &RegionBvh, p: DVec3) -> Option<usize> {
    lookup.point_query(p)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub regions: usize,
    /// Mean brick-list length, unweighted.
    pub avg_bricks_by_count: f64,
    /// Mean brick-list length weighted by region volume.
    pub avg_bricks_by_volume: f64,
    pub max_bricks: usize,
    pub total_volume: f64,
}

pub fn region_stats(regions: &[ActiveBrickRegion]) -> RegionStats {
    if regions.is_empty() {
        return RegionStats::default();
    }
    let mut count_sum = 0.0;
    let mut vol_sum = 0.0;
    let mut weighted = 0.0;
    let mut max_bricks = 0;
    for r in regions {
        let n = r.brick_ids.len();
        let v = r.bounds.volume();
        count_sum += n as f64;
        vol_sum += v;
        weighted += n as f64 * v;
        max_bricks = max_bricks.max(n);
    }
    RegionStats {
        regions: regions.len(),
        avg_bricks_by_count: count_sum / regions.len() as f64,
        avg_bricks_by_volume: if vol_sum > 0.0 { weighted / vol_sum } else { 0.0 },
        max_bricks,
        total_volume: vol_sum,
    }
}
