#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use amrvol_core::io::{generate_synthetic, FieldKind, SyntheticSpec};
use amrvol_core::{Box3, CellSet, DVec3, LevelCoord};
use rand::Rng;

/// Multi-level models with holes, from ~10^3 to ~10^5 cells.
pub fn test_models() -> Vec<(&'static str, CellSet)> {
    let specs = [
        ("turbulence-a", FieldKind::Turbulence, [3, 3, 3], 3, vec![3.0, 3.0, 3.0], 3, 0.02),
        ("turbulence-b", FieldKind::Turbulence, [3, 3, 3], 3, vec![2.0, 3.0, 4.0], 3, 0.02),
        ("turbulence-c", FieldKind::Turbulence, [6, 6, 6], 3, vec![1.2, 2.0, 3.0], 3, 0.02),
        ("gaussian-a", FieldKind::Gaussian, [8, 8, 8], 3, vec![0.03], 3, 0.02),
        ("gaussian-b", FieldKind::Gaussian, [10, 10, 10], 3, vec![0.03], 3, 0.02),
    ];
    specs
        .into_iter()
        .map(|(name, field, root_cells, max_level, thresholds, seed, hole_fraction)| {
            let spec = SyntheticSpec { field, root_cells, max_level, thresholds, seed, hole_fraction };
            (name, generate_synthetic(&spec).unwrap())
        })
        .collect()
}

pub fn level_count(cells: &CellSet) -> usize {
    cells.coords.iter().map(|c| c.level).collect::<HashSet<_>>().len()
}

/// Largest level difference between face-adjacent cells.
pub fn max_level_jump(cells: &CellSet) -> u8 {
    let set: HashSet<LevelCoord> = cells.coords.iter().copied().collect();
    let mut levels: Vec<u8> = cells.coords.iter().map(|c| c.level).collect::<HashSet<_>>().into_iter().collect();
    levels.sort_unstable();
    let find = |p: DVec3| -> Option<u8> {
        levels.iter().copied().find(|&l| {
            let w = (1i64 << l) as f64;
            let a = (p / w).floor() * w;
            set.contains(&LevelCoord::new(a.x as i32, a.y as i32, a.z as i32, l))
        })
    };
    let mut jump = 0;
    for c in &cells.coords {
        let b = c.bounds();
        let mid = b.center();
        for axis in 0..3 {
            for side in [-1.0, 1.0] {
                let mut p = mid;
                p[axis] = if side < 0.0 { b.lo[axis] - 0.5 } else { b.hi[axis] + 0.5 };
                if let Some(l) = find(p) {
                    jump = jump.max(l.abs_diff(c.level));
                }
            }
        }
    }
    jump
}

/// Volume of a union of boxes by sweeping slabs along x and y and merging
/// intervals along z.
pub fn union_volume(boxes: &[Box3]) -> f64 {
    let mut xs: Vec<f64> = boxes.iter().flat_map(|b| [b.lo.x, b.hi.x]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut by_lo: Vec<&Box3> = boxes.iter().filter(|b| !b.is_empty()).collect();
    by_lo.sort_by(|a, b| a.lo.x.total_cmp(&b.lo.x));
    let mut total = 0.0;
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let slab: Vec<&Box3> = by_lo
            .iter()
            .take_while(|b| b.lo.x <= x0)
            .filter(|b| b.hi.x >= x1)
            .copied()
            .collect();
        total += (x1 - x0) * union_area(&slab);
    }
    total
}

fn union_area(rects: &[&Box3]) -> f64 {
    let mut ys: Vec<f64> = rects.iter().flat_map(|b| [b.lo.y, b.hi.y]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    let mut iv: Vec<(f64, f64)> = Vec::new();
    for w in ys.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        iv.clear();
        iv.extend(rects.iter().filter(|b| b.lo.y <= y0 && b.hi.y >= y1).map(|b| (b.lo.z, b.hi.z)));
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut len = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for &(a, b) in &iv {
            match cur {
                Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    len += cb - ca;
                    cur = Some((a, b));
                }
                None => cur = Some((a, b)),
            }
        }
        if let Some((ca, cb)) = cur {
            len += cb - ca;
        }
        area += (y1 - y0) * len;
    }
    area
}

pub fn uniform_point(rng: &mut impl Rng, b: &Box3) -> DVec3 {
    DVec3::new(
        rng.gen_range(b.lo.x..b.hi.x),
        rng.gen_range(b.lo.y..b.hi.y),
        rng.gen_range(b.lo.z..b.hi.z),
    )
}

/// Cells keyed by coordinate, for independent lookups.
pub fn cell_map(cells: &CellSet) -> HashMap<LevelCoord, usize> {
    cells.coords.iter().enumerate().map(|(i, &c)| (c, i)).collect()
}
