//! Binary bounding-volume hierarchy over disjoint boxes (regions or bricks).
//!
//! Rays iterate the boxes they cross in ascending order through repeated
//! closest-hit queries: [`Bvh::next_hit`] returns the box with the smallest
//! entry distance at or after `t_start`, and the caller resumes at its exit.
//! Boxes are treated as half-open so abutting boxes never share a sample.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::geom::{Box3, Ray};
use crate::regions::ActiveBrickRegion;
use crate::tf::TransferFunction;

const MAX_LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvhNode {
    /// Single-precision bounds rounded outward, to keep nodes small. Node
    /// bounds only steer the search; hits are computed from the exact
    /// primitive boxes.
    pub lo: [f32; 3],
    pub hi: [f32; 3],
    /// Inner node: index of the left child (the right child follows its
    /// subtree). Leaf: first primitive.
    pub index: u32,
    /// Zero for inner nodes, otherwise the primitive count.
    pub count: u32,
    /// Inner node only: index of the right child.
    pub right: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prim {
    pub bounds: Box3,
    /// Index into the caller's array (region or brick id).
    pub id: u32,
}

/// Span of a ray inside one box, `t_in < t_out`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayInterval {
    pub t_in: f64,
    pub t_out: f64,
    pub id: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    pub prims: Vec<Prim>,
    /// Wall-clock build time.
    pub build_ms: f64,
}

/// Hierarchy over active brick regions.
pub type RegionBvh = Bvh;

impl Bvh {
    /// Builds over `(id, box)` pairs with a median split of the box centroids
    /// along the longest centroid axis. Empty boxes are dropped.
    pub fn build(items: impl IntoIterator<Item = (u32, Box3)>) -> Self {
        let start = Instant::now();
        let mut prims: Vec<Prim> = items
            .into_iter()
            .filter(|(_, b)| !b.is_empty())
            .map(|(id, bounds)| Prim { bounds, id })
            .collect();
        let mut nodes = Vec::with_capacity(2 * prims.len() / MAX_LEAF_SIZE + 1);
        if !prims.is_empty() {
            let n = prims.len();
            build_node(&mut nodes, &mut prims, 0, n);
        }
        Self { nodes, prims, build_ms: start.elapsed().as_secs_f64() * 1e3 }
    }

    pub fn is_empty(&self) -> bool {
        self.prims.is_empty()
    }

    pub fn len(&self) -> usize {
        self.prims.len()
    }

    /// Ids of all primitives, ascending.
    pub fn ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.prims.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Leaf-order primitive ids; identical for identical builds.
    pub fn leaf_order(&self) -> Vec<u32> {
        self.prims.iter().map(|p| p.id).collect()
    }

    /// Closest box whose overlap with the ray, clipped to `[t_start, t_max]`,
    /// has positive length. Ties on entry distance go to the lower id.
    pub fn next_hit(&self, ray: &Ray, t_start: f64, t_max: f64) -> Option<RayInterval> {
        if self.nodes.is_empty() || !(t_start < t_max) {
            return None;
        }
        let slab = Slab::new(ray);
        // Entry distance of a node, if the ray reaches it after `t_start`.
        let entry = |n: u32| {
            let (t0, t1) = slab.overlap(&self.nodes[n as usize].bounds())?;
            (t1 > t_start).then_some(t0.max(t_start))
        };
        let root_t = entry(0)?;
        let mut best: Option<RayInterval> = None;
        let mut stack = [(0u32, 0.0f64); 64];
        stack[0] = (0, root_t);
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let (ni, t_node) = stack[sp];
            // `>` rather than `>=` keeps equal entries alive for the id tie-break
            if t_node > best.map_or(t_max, |b| b.t_in) {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.count > 0 {
                let first = node.index as usize;
                for prim in &self.prims[first..first + node.count as usize] {
                    let Some((p0, p1)) = slab.overlap(&prim.bounds) else { continue };
                    let t_in = p0.max(t_start);
                    let t_out = p1.min(t_max);
                    if t_out <= t_in {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some(b) => t_in < b.t_in || (t_in == b.t_in && prim.id < b.id),
                    };
                    if better {
                        best = Some(RayInterval { t_in, t_out, id: prim.id });
                    }
                }
            } else {
                // push the farther child first so the nearer one is visited first
                let (l, r) = (entry(node.index), entry(node.right));
                let mut push = |n: u32, t: Option<f64>| {
                    if let Some(t) = t {
                        stack[sp] = (n, t);
                        sp += 1;
                    }
                };
                match (l, r) {
                    (Some(tl), Some(tr)) if tr < tl => {
                        push(node.index, l);
                        push(node.right, r);
                    }
                    _ => {
                        push(node.right, r);
                        push(node.index, l);
                    }
                }
            }
        }
        best
    }

    /// All hits in `[t_start, t_max]` in ray order: the same sequence as
    /// calling [`Bvh::next_hit`] repeatedly and resuming at each exit, from a
    /// single ordered walk instead of one descent per hit.
    pub fn hits<'a>(&'a self, ray: &Ray, t_start: f64, t_max: f64) -> Hits<'a> {
        let mut hits = Hits { bvh: self, slab: Slab::new(ray), t: t_start, t_max, heap: BinaryHeap::new(), cand: Vec::new() };
        if !self.nodes.is_empty() && t_start < t_max {
            hits.push(Pending::NODE, 0, &self.nodes[0].bounds());
        }
        hits
    }

    /// Box containing `p` under the half-open rule `[lo, hi)`.
    pub fn point_query(&self, p: DVec3) -> Option<usize> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut found: Option<u32> = None;
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !node.bounds().contains(p) {
                continue;
            }
            if node.count > 0 {
                let first = node.index as usize;
                for prim in &self.prims[first..first + node.count as usize] {
                    if prim.bounds.contains_half_open(p) && found.is_none_or(|f| prim.id < f) {
                        found = Some(prim.id);
                    }
                }
            } else {
                stack[sp] = node.right;
                stack[sp + 1] = node.index;
                sp += 2;
            }
        }
        found.map(|f| f as usize)
    }
}

impl BvhNode {
    pub fn bounds(&self) -> Box3 {
        Box3::new(self.lo.map(f64::from).into(), self.hi.map(f64::from).into())
    }
}

fn outward_f32(b: &Box3) -> ([f32; 3], [f32; 3]) {
    let down = |x: f64| {
        let f = x as f32;
        if f as f64 > x { f.next_down() } else { f }
    };
    let up = |x: f64| {
        let f = x as f32;
        if (f as f64) < x { f.next_up() } else { f }
    };
    (b.lo.to_array().map(down), b.hi.to_array().map(up))
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    t0: f64,
    t1: f64,
    kind: u8,
    index: u32,
}

impl Pending {
    const NODE: u8 = 0;
    const PRIM: u8 = 1;
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Pending {
    // reversed so the max-heap pops the smallest entry first
    fn cmp(&self, o: &Self) -> Ordering {
        o.t0.total_cmp(&self.t0).then(o.kind.cmp(&self.kind)).then(o.index.cmp(&self.index))
    }
}

/// Iterator returned by [`Bvh::hits`].
pub struct Hits<'a> {
    bvh: &'a Bvh,
    slab: Slab,
    t: f64,
    t_max: f64,
    heap: BinaryHeap<Pending>,
    cand: Vec<Pending>,
}

impl Hits<'_> {
    fn push(&mut self, kind: u8, index: u32, b: &Box3) {
        if let Some((t0, t1)) = self.slab.overlap(b) {
            if t1 > self.t && t0.max(self.t) <= self.t_max {
                self.heap.push(Pending { t0, t1, kind, index });
            }
        }
    }
}

impl Iterator for Hits<'_> {
    type Item = RayInterval;

    fn next(&mut self) -> Option<RayInterval> {
        let bvh = self.bvh;
        while self.t < self.t_max {
            // Every entry keyed at or below the current front has effective
            // entry `m`; open all such nodes, then let the lowest id win.
            let m = self.heap.peek()?.t0.max(self.t);
            while self.heap.peek().is_some_and(|e| e.t0 <= m) {
                let e = self.heap.pop().unwrap();
                if e.t1 <= self.t {
                    continue;
                }
                if e.kind == Pending::PRIM {
                    self.cand.push(e);
                    continue;
                }
                let node = bvh.nodes[e.index as usize];
                if node.count > 0 {
                    for i in node.index..node.index + node.count {
                        self.push(Pending::PRIM, i, &bvh.prims[i as usize].bounds);
                    }
                } else {
                    self.push(Pending::NODE, node.index, &bvh.nodes[node.index as usize].bounds());
                    self.push(Pending::NODE, node.right, &bvh.nodes[node.right as usize].bounds());
                }
            }
            let t_max = self.t_max;
            self.cand.retain(|c| c.t1.min(t_max) > m);
            let Some(best) = self.cand.iter().min_by_key(|c| bvh.prims[c.index as usize].id).copied() else {
                continue;
            };
            for c in self.cand.drain(..) {
                if c.index != best.index {
                    self.heap.push(c);
                }
            }
            let hit = RayInterval { t_in: m, t_out: best.t1.min(t_max), id: bvh.prims[best.index as usize].id };
            self.t = hit.t_out;
            return Some(hit);
        }
        None
    }
}

/// Ray prepared for repeated box tests. Gives the same numbers as
/// [`Box3::ray_overlap`] without a division per test.
struct Slab {
    origin: DVec3,
    inv: DVec3,
    zero: [bool; 3],
    neg: [bool; 3],
}

impl Slab {
    fn new(ray: &Ray) -> Self {
        let d = ray.dir;
        Self {
            origin: ray.origin,
            inv: DVec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z),
            zero: [d.x == 0.0, d.y == 0.0, d.z == 0.0],
            neg: [d.x < 0.0, d.y < 0.0, d.z < 0.0],
        }
    }

    #[inline]
    fn overlap(&self, b: &Box3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let o = self.origin[a];
            if self.zero[a] {
                if o < b.lo[a] || o >= b.hi[a] {
                    return None;
                }
                continue;
            }
            let (near, far) = if self.neg[a] { (b.hi[a], b.lo[a]) } else { (b.lo[a], b.hi[a]) };
            t0 = t0.max((near - o) * self.inv[a]);
            t1 = t1.min((far - o) * self.inv[a]);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

fn build_node(nodes: &mut Vec<BvhNode>, prims: &mut [Prim], first: usize, end: usize) -> u32 {
    let slice = &mut prims[first..end];
    let bounds = slice.iter().fold(Box3::EMPTY, |acc, p| acc.union(&p.bounds));
    let me = nodes.len() as u32;
    let (lo, hi) = outward_f32(&bounds);
    nodes.push(BvhNode { lo, hi, index: first as u32, count: slice.len() as u32, right: 0 });
    if slice.len() <= MAX_LEAF_SIZE {
        return me;
    }
    let mut cb = Box3::EMPTY;
    for p in slice.iter() {
        cb.grow_point(p.bounds.center());
    }
    let axis = cb.longest_axis();
    slice.sort_unstable_by(|a, b| {
        a.bounds.center()[axis]
            .total_cmp(&b.bounds.center()[axis])
            .then(a.id.cmp(&b.id))
    });
    let mid = first + slice.len() / 2;
    let left = build_node(nodes, prims, first, mid);
    let right = build_node(nodes, prims, mid, end);
    nodes[me as usize] = BvhNode { lo, hi, index: left, count: 0, right };
    me
}

/// Hierarchy over the regions the transfer function can make visible.
/// Fully transparent regions are left out entirely.
pub fn build_volume_bvh(
    regions: &[ActiveBrickRegion],
    tf: &TransferFunction,
    field: usize,
) -> RegionBvh {
    let start = Instant::now();
    let mut bvh = Bvh::build(regions.iter().enumerate().filter_map(|(i, r)| {
        let (lo, hi) = r.value_range(field);
        (tf.max_opacity(lo as f64, hi as f64) > 0.0).then_some((i as u32, r.bounds))
    }));
    bvh.build_ms = start.elapsed().as_secs_f64() * 1e3;
    bvh
}

/// Hierarchy over the regions whose value range brackets `iso`.
pub fn build_iso_bvh(regions: &[ActiveBrickRegion], iso: f64, field: usize) -> RegionBvh {
    let start = Instant::now();
    let mut bvh = Bvh::build(regions.iter().enumerate().filter_map(|(i, r)| {
        let (lo, hi) = r.value_range(field);
        (lo as f64 <= iso && iso <= hi as f64).then_some((i as u32, r.bounds))
    }));
    bvh.build_ms = start.elapsed().as_secs_f64() * 1e3;
    bvh
}

/// Hierarchy over every region, used for point location.
pub fn build_full_bvh(regions: &[ActiveBrickRegion]) -> RegionBvh {
    Bvh::build(regions.iter().enumerate().map(|(i, r)| (i as u32, r.bounds)))
}

/// Next active region along `ray` at or after `t_start`.
pub fn next_region(bvh: &RegionBvh, ray: &Ray, t_start: f64, t_max: f64) -> Option<RayInterval> {
    bvh.next_hit(ray, t_start, t_max)
}

pub fn max_opacity(tf: &TransferFunction, range: (f64, f64)) -> f64 {
    tf.max_opacity(range.0, range.1)
}
