//! Re-organizes an unordered cell list into disjoint same-level bricks.
//!
//! Top-down k-d partitioning: a node becomes a brick once all of its cells are
//! on one level, fill their bounding box, and fit the width limit. Otherwise
//! it is split along the longest axis of its bounding box at the midpoint,
//! rounded to a multiple of the coarsest cell width in the node so no cell is
//! ever cut.

use glam::{DVec3, I64Vec3};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{AmrModel, Brick, CellSet, LevelCoord};
use crate::geom::Box3;

pub const DEFAULT_MAX_BRICK_WIDTH: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickBuildParams {
    /// Maximum number of cells along any brick axis.
    pub max_brick_width: u32,
    /// Keep the split-plane tree for per-sample cell location.
    pub retain_tree: bool,
}

impl Default for BrickBuildParams {
    fn default() -> Self {
        Self { max_brick_width: DEFAULT_MAX_BRICK_WIDTH, retain_tree: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KdNode {
    Inner {
        axis: u8,
        /// Split position in world units.
        pos: f64,
        left: u32,
        right: u32,
        /// Largest half cell width in each subtree, used to widen the descent
        /// test from brick boxes to brick supports.
        left_reach: f64,
        right_reach: f64,
    },
    /// Contiguous run of brick ids (a single brick unless the node had to be
    /// broken up cell by cell).
    Leaf { first: u32, count: u32 },
}

/// Split-plane tree produced by [`build_bricks`] when asked to retain it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BrickKdTree {
    pub nodes: Vec<KdNode>,
}

impl BrickKdTree {
    pub fn root(&self) -> Option<u32> {
        (!self.nodes.is_empty()).then_some(0)
    }

    /// Collects, in ascending order, every brick whose support contains `p`
    /// in its open interior. This is the per-sample cell-location walk that the
    /// region lists make unnecessary; it is kept as a baseline.
    pub fn bricks_at(&self, model: &AmrModel, p: DVec3, out: &mut Vec<u32>) {
        out.clear();
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = [0u32; 128];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            match &self.nodes[stack[sp] as usize] {
                KdNode::Inner { axis, pos, left, right, left_reach, right_reach } => {
                    let x = p[*axis as usize];
                    if x > pos - right_reach {
                        stack[sp] = *right;
                        sp += 1;
                    }
                    if x < pos + left_reach {
                        stack[sp] = *left;
                        sp += 1;
                    }
                }
                KdNode::Leaf { first, count } => {
                    for b in *first..first + count {
                        if model.bricks[b as usize].support().contains_open(p) {
                            out.push(b);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Number of leaves visited when locating `p` (for diagnostics and tests).
    pub fn leaves_visited(&self, p: DVec3) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut n = 0;
        let mut stack = vec![0u32];
        while let Some(i) = stack.pop() {
            match &self.nodes[i as usize] {
                KdNode::Inner { axis, pos, left, right, left_reach, right_reach } => {
                    let x = p[*axis as usize];
                    if x > pos - right_reach {
                        stack.push(*right);
                    }
                    if x < pos + left_reach {
                        stack.push(*left);
                    }
                }
                KdNode::Leaf { .. } => n += 1,
            }
        }
        n
    }
}

struct Builder<'a> {
    cells: &'a CellSet,
    max_width: i64,
    retain: bool,
    bricks: Vec<Brick>,
    scalars: Vec<Vec<f32>>,
    nodes: Vec<KdNode>,
}

/// Builds bricks from `cells`. Invalid cell lists are rejected with their
/// validation report.
pub fn build_bricks(
    cells: &CellSet,
    params: &BrickBuildParams,
) -> Result<(AmrModel, Option<BrickKdTree>), Error> {
    if params.max_brick_width == 0 {
        return Err(Error::InvalidParameter("max_brick_width must be at least 1".into()));
    }
    if cells.values.len() != cells.fields.len()
        || cells.values.iter().any(|col| col.len() != cells.len())
    {
        return Err(Error::InvalidParameter("field columns must match the cell count".into()));
    }
    let report = crate::model::validate_cells(&cells.coords);
    if !report.is_valid() {
        return Err(Error::InvalidCells(report));
    }

    let mut order: Vec<u32> = (0..cells.len() as u32).collect();
    order.sort_unstable_by_key(|&i| {
        let c = &cells.coords[i as usize];
        (c.level, c.k, c.j, c.i)
    });

    let mut b = Builder {
        cells,
        max_width: params.max_brick_width as i64,
        retain: params.retain_tree,
        bricks: Vec::new(),
        scalars: vec![Vec::with_capacity(cells.len()); cells.fields.len()],
        nodes: Vec::new(),
    };
    if !order.is_empty() {
        b.build(order);
    }

    let bounds = b.bricks.iter().fold(Box3::EMPTY, |acc, br| acc.union(&br.bounds()));
    let model = AmrModel {
        fields: cells.fields.clone(),
        bricks: b.bricks,
        scalars: b.scalars,
        bounds,
    };
    let tree = params.retain_tree.then_some(BrickKdTree { nodes: b.nodes });
    Ok((model, tree))
}

fn bounds_of(cells: &CellSet, idx: &[u32]) -> (I64Vec3, I64Vec3, u8, u8) {
    let mut lo = I64Vec3::MAX;
    let mut hi = I64Vec3::MIN;
    let mut lmin = u8::MAX;
    let mut lmax = 0u8;
    for &i in idx {
        let c = &cells.coords[i as usize];
        let a = c.anchor().as_i64vec3();
        lo = lo.min(a);
        hi = hi.max(a + I64Vec3::splat(c.width_units()));
        lmin = lmin.min(c.level);
        lmax = lmax.max(c.level);
    }
    (lo, hi, lmin, lmax)
}

impl Builder<'_> {
    /// Returns the node id (only meaningful when the tree is retained) and the
    /// largest half cell width in the subtree.
    fn build(&mut self, idx: Vec<u32>) -> (u32, f64) {
        let (lo, hi, lmin, lmax) = bounds_of(self.cells, &idx);
        let ext = hi - lo;
        let reach = 0.5 * (1i64 << lmax) as f64;

        if lmin == lmax {
            let w = 1i64 << lmin;
            let box_cells = (ext.x / w) * (ext.y / w) * (ext.z / w);
            let fits = ext.max_element() / w <= self.max_width;
            if box_cells == idx.len() as i64 && fits {
                let id = self.emit_brick(&idx, lo, ext / w, lmin);
                return (self.leaf(id, 1), reach);
            }
        }

        let axis = longest_axis(ext);
        let coarse = 1i64 << lmax;
        let Some(split) = split_position(lo[axis], hi[axis], coarse) else {
            // no interior multiple of the coarsest width: one brick per cell
            let first = self.bricks.len() as u32;
            for &i in &idx {
                let c = self.cells.coords[i as usize];
                self.emit_brick(&[i], c.anchor().as_i64vec3(), I64Vec3::ONE, c.level);
            }
            return (self.leaf(first, idx.len() as u32), reach);
        };

        let (left, right): (Vec<u32>, Vec<u32>) = idx
            .into_iter()
            .partition(|&i| (self.cells.coords[i as usize].anchor()[axis] as i64) < split);
        debug_assert!(!left.is_empty() && !right.is_empty());

        let node = self.nodes.len() as u32;
        if self.retain {
            self.nodes.push(KdNode::Leaf { first: 0, count: 0 });
        }
        let (l, left_reach) = self.build(left);
        let (r, right_reach) = self.build(right);
        if self.retain {
            self.nodes[node as usize] = KdNode::Inner {
                axis: axis as u8,
                pos: split as f64,
                left: l,
                right: r,
                left_reach,
                right_reach,
            };
        }
        (node, reach)
    }

    fn leaf(&mut self, first: u32, count: u32) -> u32 {
        let id = self.nodes.len() as u32;
        if self.retain {
            self.nodes.push(KdNode::Leaf { first, count });
        }
        id
    }

    fn emit_brick(&mut self, idx: &[u32], lo: I64Vec3, dims: I64Vec3, level: u8) -> u32 {
        let w = 1i64 << level;
        let brick = Brick {
            lower: LevelCoord::new(lo.x as i32, lo.y as i32, lo.z as i32, level),
            dims: [dims.x as u32, dims.y as u32, dims.z as u32],
            offset: self.scalars.first().map_or(0, Vec::len),
        };
        let n = brick.cell_count();
        for (f, col) in self.scalars.iter_mut().enumerate() {
            let start = col.len();
            col.resize(start + n, 0.0);
            for &i in idx {
                let c = &self.cells.coords[i as usize];
                let local = (c.anchor().as_i64vec3() - lo) / w;
                let slot = brick.local_index(local.x as u32, local.y as u32, local.z as u32);
                col[start + slot] = self.cells.values[f][i as usize];
            }
        }
        self.bricks.push(brick);
        (self.bricks.len() - 1) as u32
    }
}

/// Longest axis, ties broken toward x then y.
fn longest_axis(ext: I64Vec3) -> usize {
    if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    }
}

/// Midpoint of `[lo, hi]` rounded to the nearest multiple of `w`, or `None`
/// when that multiple is not strictly inside the interval. If the nearest
/// multiple is a boundary the interval is at most `w` long, so no other
/// interior multiple exists either.
fn split_position(lo: i64, hi: i64, w: i64) -> Option<i64> {
    let mid2 = lo + hi; // twice the midpoint, kept integral
    let rounded = (mid2 + w).div_euclid(2 * w) * w;
    (rounded > lo && rounded < hi).then_some(rounded)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BrickStats {
    pub cells: usize,
    pub bricks: usize,
    /// Indexed by level.
    pub bricks_per_level: Vec<usize>,
    pub cells_per_level: Vec<usize>,
    pub dims_min: [u32; 3],
    pub dims_max: [u32; 3],
    pub dims_mean: [f64; 3],
}

pub fn brick_stats(model: &AmrModel) -> BrickStats {
    let mut s = BrickStats { bricks: model.bricks.len(), ..Default::default() };
    if model.bricks.is_empty() {
        return s;
    }
    s.dims_min = [u32::MAX; 3];
    for b in &model.bricks {
        let l = b.level() as usize;
        if s.bricks_per_level.len() <= l {
            s.bricks_per_level.resize(l + 1, 0);
            s.cells_per_level.resize(l + 1, 0);
        }
        s.bricks_per_level[l] += 1;
        s.cells_per_level[l] += b.cell_count();
        s.cells += b.cell_count();
        for a in 0..3 {
            s.dims_min[a] = s.dims_min[a].min(b.dims[a]);
            s.dims_max[a] = s.dims_max[a].max(b.dims[a]);
            s.dims_mean[a] += b.dims[a] as f64;
        }
    }
    for m in &mut s.dims_mean {
        *m /= model.bricks.len() as f64;
    }
    s
}
