//! Axis-aligned boxes and rays in world space (finest-cell units).

use glam::DVec3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: DVec3,
    pub hi: DVec3,
}

impl Box3 {
    pub const EMPTY: Box3 = Box3 {
        lo: DVec3::splat(f64::INFINITY),
        hi: DVec3::splat(f64::NEG_INFINITY),
    };

    pub fn new(lo: DVec3, hi: DVec3) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.x > self.hi.x || self.lo.y > self.hi.y || self.lo.z > self.hi.z
    }

    pub fn extent(&self) -> DVec3 {
        if self.is_empty() {
            DVec3::ZERO
        } else {
            self.hi - self.lo
        }
    }

    pub fn center(&self) -> DVec3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn grow(&mut self, other: &Box3) {
        self.lo = self.lo.min(other.lo);
        self.hi = self.hi.max(other.hi);
    }

    pub fn union(mut self, other: &Box3) -> Box3 {
        self.grow(other);
        self
    }

    pub fn grow_point(&mut self, p: DVec3) {
        self.lo = self.lo.min(p);
        self.hi = self.hi.max(p);
    }

    pub fn dilate(&self, r: f64) -> Box3 {
        Box3::new(self.lo - DVec3::splat(r), self.hi + DVec3::splat(r))
    }

    pub fn intersection(&self, other: &Box3) -> Box3 {
        Box3::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Closed containment.
    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.lo).all() && p.cmple(self.hi).all()
    }

    /// Half-open containment `[lo, hi)` on every axis.
    pub fn contains_half_open(&self, p: DVec3) -> bool {
        p.cmpge(self.lo).all() && p.cmplt(self.hi).all()
    }

    /// Strict containment in the open interior.
    pub fn contains_open(&self, p: DVec3) -> bool {
        p.cmpgt(self.lo).all() && p.cmplt(self.hi).all()
    }

    /// True when the open interiors of both boxes intersect.
    pub fn overlaps_interior(&self, other: &Box3) -> bool {
        (0..3).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }

    pub fn contains_box(&self, other: &Box3) -> bool {
        (0..3).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn clamp_point(&self, p: DVec3) -> DVec3 {
        p.clamp(self.lo, self.hi)
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Parametric overlap of `ray` with this box.
    ///
    /// Axes where the direction is zero use the half-open rule `lo <= o < hi`
    /// so that a ray running along a shared face belongs to exactly one box.
    pub fn ray_overlap(&self, ray: &Ray) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let o = ray.origin[a];
            let d = ray.dir[a];
            if d == 0.0 {
                if o < self.lo[a] || o >= self.hi[a] {
                    return None;
                }
            } else {
                let inv = 1.0 / d;
                let (mut near, mut far) = ((self.lo[a] - o) * inv, (self.hi[a] - o) * inv);
                if near > far {
                    std::mem::swap(&mut near, &mut far);
                }
                t0 = t0.max(near);
                t1 = t1.min(far);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    pub dir: DVec3,
}

impl Ray {
    pub fn new(origin: DVec3, dir: DVec3) -> Self {
        Self { origin, dir }
    }

    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + self.dir * t
    }
}

/// Oriented clipping plane; points with `normal · p >= offset` are kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipPlane {
    pub normal: DVec3,
    pub offset: f64,
}

impl ClipPlane {
    /// Restricts `[t0, t1]` to the kept half-space along `ray`.
    pub fn clip(&self, ray: &Ray, t0: f64, t1: f64) -> Option<(f64, f64)> {
        let dn = self.normal.dot(ray.dir);
        let on = self.normal.dot(ray.origin) - self.offset;
        if dn == 0.0 {
            return (on >= 0.0).then_some((t0, t1));
        }
        let t = -on / dn;
        let (a, b) = if dn > 0.0 { (t0.max(t), t1) } else { (t0, t1.min(t)) };
        (a < b).then_some((a, b))
    }
}
