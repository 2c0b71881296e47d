//! Cells, bricks and the level/coordinate conventions.
//!
//! Level 0 is the finest level and a cell on level `l` is `2^l` units wide.
//! Cell anchors `(i, j, k)` are lower-left corners in finest-level units and
//! must be multiples of `2^l`.

use std::collections::HashMap;

use glam::{DVec3, IVec3};
use serde::{Deserialize, Serialize};

use crate::geom::Box3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelCoord {
    pub i: i32,
    pub j: i32,
    pub k: i32,
    pub level: u8,
}

impl LevelCoord {
    pub const fn new(i: i32, j: i32, k: i32, level: u8) -> Self {
        Self { i, j, k, level }
    }

    pub fn anchor(&self) -> IVec3 {
        IVec3::new(self.i, self.j, self.k)
    }

    /// Width in finest-level units (`2^level`).
    pub fn width_units(&self) -> i64 {
        1i64 << self.level
    }

    pub fn width(&self) -> f64 {
        self.width_units() as f64
    }

    pub fn is_aligned(&self) -> bool {
        let w = self.width_units();
        [self.i, self.j, self.k].iter().all(|&c| (c as i64).rem_euclid(w) == 0)
    }

    pub fn center(&self) -> DVec3 {
        self.anchor().as_dvec3() + DVec3::splat(0.5 * self.width())
    }

    /// World box `[anchor, anchor + 2^l]`.
    pub fn bounds(&self) -> Box3 {
        let lo = self.anchor().as_dvec3();
        Box3::new(lo, lo + DVec3::splat(self.width()))
    }

    /// Region where the cell's hat basis is nonzero: bounds dilated by half a cell.
    pub fn support(&self) -> Box3 {
        self.bounds().dilate(0.5 * self.width())
    }
}

/// One AMR cell with a value per declared field.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub coord: LevelCoord,
    pub values: Vec<f32>,
}

pub fn cell_bounds(cell: &Cell) -> Box3 {
    cell.coord.bounds()
}

pub fn cell_support(cell: &Cell) -> Box3 {
    cell.coord.support()
}

/// Unordered cell list stored column-wise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellSet {
    pub fields: Vec<String>,
    pub coords: Vec<LevelCoord>,
    /// One column per field, each `coords.len()` long.
    pub values: Vec<Vec<f32>>,
}

impl CellSet {
    pub fn new(fields: Vec<String>) -> Self {
        let values = vec![Vec::new(); fields.len()];
        Self { fields, coords: Vec::new(), values }
    }

    pub fn single_field(name: &str) -> Self {
        Self::new(vec![name.to_string()])
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn push(&mut self, coord: LevelCoord, values: &[f32]) {
        assert_eq!(values.len(), self.fields.len(), "one value per field");
        self.coords.push(coord);
        for (col, &v) in self.values.iter_mut().zip(values) {
            col.push(v);
        }
    }

    pub fn push_cell(&mut self, cell: Cell) {
        self.push(cell.coord, &cell.values);
    }

    pub fn cell(&self, idx: usize) -> Cell {
        Cell {
            coord: self.coords[idx],
            values: self.values.iter().map(|col| col[idx]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    pub fn bounds(&self) -> Box3 {
        let mut b = Box3::EMPTY;
        for c in &self.coords {
            b.grow(&c.bounds());
        }
        b
    }
}

impl FromIterator<Cell> for CellSet {
    /// Collects single- or multi-field cells; the field count is taken from the first cell.
    fn from_iter<T: IntoIterator<Item = Cell>>(iter: T) -> Self {
        let mut iter = iter.into_iter().peekable();
        let nfields = iter.peek().map_or(1, |c| c.values.len());
        let names = (0..nfields).map(|i| format!("field{i}")).collect();
        let mut set = CellSet::new(names);
        for c in iter {
            set.push_cell(c);
        }
        set
    }
}

/// Grid of same-level cells without holes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Brick {
    pub lower: LevelCoord,
    pub dims: [u32; 3],
    /// Offset of this brick's first scalar in the model's per-field arrays.
    pub offset: usize,
}

impl Brick {
    pub fn level(&self) -> u8 {
        self.lower.level
    }

    pub fn cell_width(&self) -> f64 {
        self.lower.width()
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn origin(&self) -> DVec3 {
        self.lower.anchor().as_dvec3()
    }

    pub fn bounds(&self) -> Box3 {
        let lo = self.origin();
        let w = self.cell_width();
        let d = DVec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64);
        Box3::new(lo, lo + d * w)
    }

    /// Brick bounds dilated by half a cell width; the union of its cells' supports.
    pub fn support(&self) -> Box3 {
        self.bounds().dilate(0.5 * self.cell_width())
    }

    /// Slot of local cell `(x, y, z)` in x-fastest order.
    pub fn local_index(&self, x: u32, y: u32, z: u32) -> usize {
        x as usize + self.dims[0] as usize * (y as usize + self.dims[1] as usize * z as usize)
    }

    pub fn cell_coord(&self, x: u32, y: u32, z: u32) -> LevelCoord {
        let w = self.lower.width_units() as i32;
        LevelCoord::new(
            self.lower.i + x as i32 * w,
            self.lower.j + y as i32 * w,
            self.lower.k + z as i32 * w,
            self.lower.level,
        )
    }

    /// Center of local cell `(x, y, z)`.
    #[inline]
    pub fn cell_center(&self, x: u32, y: u32, z: u32) -> DVec3 {
        let w = self.cell_width();
        self.origin() + DVec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * w
    }
}

pub fn brick_support(brick: &Brick) -> Box3 {
    brick.support()
}

/// Bricked AMR data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmrModel {
    pub fields: Vec<String>,
    pub bricks: Vec<Brick>,
    /// Per-field scalar arrays; brick `b` occupies `b.offset .. b.offset + b.cell_count()`.
    pub scalars: Vec<Vec<f32>>,
    pub bounds: Box3,
}

impl AmrModel {
    pub fn empty(fields: Vec<String>) -> Self {
        let scalars = vec![Vec::new(); fields.len()];
        Self { fields, bricks: Vec::new(), scalars, bounds: Box3::EMPTY }
    }

    pub fn cell_count(&self) -> usize {
        self.bricks.iter().map(Brick::cell_count).sum()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }

    pub fn brick_values(&self, brick: usize, field: usize) -> &[f32] {
        let b = &self.bricks[brick];
        &self.scalars[field][b.offset..b.offset + b.cell_count()]
    }

    pub fn value_range(&self, field: usize) -> (f32, f32) {
        self.scalars[field]
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn brick_range(&self, brick: usize, field: usize) -> (f32, f32) {
        self.brick_values(brick, field)
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Expands the bricks back into a cell list (brick order, x-fastest).
    pub fn to_cells(&self) -> CellSet {
        let mut set = CellSet::new(self.fields.clone());
        for b in &self.bricks {
            for z in 0..b.dims[2] {
                for y in 0..b.dims[1] {
                    for x in 0..b.dims[0] {
                        let idx = b.offset + b.local_index(x, y, z);
                        set.coords.push(b.cell_coord(x, y, z));
                        for (f, col) in set.values.iter_mut().enumerate() {
                            col.push(self.scalars[f][idx]);
                        }
                    }
                }
            }
        }
        set
    }

    pub fn support_bounds(&self) -> Box3 {
        self.bricks.iter().fold(Box3::EMPTY, |acc, b| acc.union(&b.support()))
    }
}

/// Problems found in a raw cell list. Holes and level jumps are allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// Cells whose anchor is not a multiple of their width.
    pub misaligned: Vec<usize>,
    /// `(coarse, fine)` pairs where the coarse cell covers the fine one.
    pub overlaps: Vec<(usize, usize)>,
    /// Pairs of identical `(i, j, k; l)` cells, lower index first.
    pub duplicates: Vec<(usize, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.misaligned.is_empty() && self.overlaps.is_empty() && self.duplicates.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.misaligned.len() + self.overlaps.len() + self.duplicates.len()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} misaligned, {} overlapping, {} duplicate cell(s)",
            self.misaligned.len(),
            self.overlaps.len(),
            self.duplicates.len()
        )?;
        for &i in self.misaligned.iter().take(8) {
            write!(f, "\n  misaligned cell #{i}")?;
        }
        for &(a, b) in self.overlaps.iter().take(8) {
            write!(f, "\n  cell #{a} overlaps cell #{b}")?;
        }
        for &(a, b) in self.duplicates.iter().take(8) {
            write!(f, "\n  cell #{b} duplicates cell #{a}")?;
        }
        Ok(())
    }
}

/// Checks alignment, overlap and duplication of a raw cell list.
///
/// Two aligned cells overlap exactly when the coarser one contains the finer
/// one's anchor, so each cell only has to probe its ancestors on the levels
/// that actually occur.
pub fn validate_cells(coords: &[LevelCoord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut first: HashMap<LevelCoord, usize> = HashMap::with_capacity(coords.len());
    let mut levels: Vec<u8> = Vec::new();
    for (idx, c) in coords.iter().enumerate() {
        if !c.is_aligned() {
            report.misaligned.push(idx);
            continue;
        }
        match first.get(c) {
            Some(&prev) => report.duplicates.push((prev, idx)),
            None => {
                first.insert(*c, idx);
            }
        }
        if !levels.contains(&c.level) {
            levels.push(c.level);
        }
    }
    levels.sort_unstable();
    for (idx, c) in coords.iter().enumerate() {
        if !c.is_aligned() || first.get(c) != Some(&idx) {
            continue;
        }
        for &l in levels.iter().filter(|&&l| l > c.level) {
            let mask = !((1i32 << l) - 1);
            let parent = LevelCoord::new(c.i & mask, c.j & mask, c.k & mask, l);
            if let Some(&coarse) = first.get(&parent) {
                report.overlaps.push((coarse, idx));
            }
        }
    }
    report.overlaps.sort_unstable();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_bounds_and_centers() {
        let c = LevelCoord::new(0, 0, 0, 0);
        assert_eq!(c.bounds(), Box3::new(DVec3::ZERO, DVec3::ONE));
        assert_eq!(c.center(), DVec3::splat(0.5));
        let c = LevelCoord::new(2, 0, 0, 1);
        assert_eq!(c.bounds(), Box3::new(DVec3::new(2.0, 0.0, 0.0), DVec3::new(4.0, 2.0, 2.0)));
        assert_eq!(c.center(), DVec3::new(3.0, 1.0, 1.0));
        let c = LevelCoord::new(0, 0, 0, 2);
        assert_eq!(c.bounds(), Box3::new(DVec3::ZERO, DVec3::splat(4.0)));
        assert_eq!(c.center(), DVec3::splat(2.0));
    }

    #[test]
    fn cell_supports() {
        let c = LevelCoord::new(0, 0, 0, 0);
        assert_eq!(c.support(), Box3::new(DVec3::splat(-0.5), DVec3::splat(1.5)));
        let c = LevelCoord::new(2, 0, 0, 1);
        assert_eq!(
            c.support(),
            Box3::new(DVec3::new(1.0, -1.0, -1.0), DVec3::new(5.0, 3.0, 3.0))
        );
        for l in 0..5u8 {
            let c = LevelCoord::new(-(1 << l), 0, 3 << l, l);
            assert_eq!(c.support().volume(), (2.0 * c.width()).powi(3));
            assert!(c.support().contains_box(&c.bounds()));
            assert_eq!(c.support().center(), c.center());
        }
    }

    #[test]
    fn brick_supports() {
        let b = Brick { lower: LevelCoord::new(0, 0, 0, 0), dims: [1, 1, 1], offset: 0 };
        assert_eq!(b.support(), Box3::new(DVec3::splat(-0.5), DVec3::splat(1.5)));
        let b = Brick { lower: LevelCoord::new(0, 0, 0, 1), dims: [4, 2, 1], offset: 0 };
        assert_eq!(
            b.support(),
            Box3::new(DVec3::new(-1.0, -1.0, -1.0), DVec3::new(9.0, 5.0, 3.0))
        );
    }

    #[test]
    fn brick_support_is_union_of_cell_supports() {
        let b = Brick { lower: LevelCoord::new(-4, 8, 0, 2), dims: [3, 1, 5], offset: 0 };
        let mut u = Box3::EMPTY;
        for z in 0..5 {
            for x in 0..3 {
                u.grow(&b.cell_coord(x, 0, z).support());
            }
        }
        assert_eq!(u, b.support());
    }

    #[test]
    fn validation_cases() {
        assert!(validate_cells(&[LevelCoord::new(0, 0, 0, 0)]).is_valid());

        let r = validate_cells(&[LevelCoord::new(0, 0, 0, 1), LevelCoord::new(1, 0, 0, 1)]);
        assert_eq!(r.misaligned, vec![1]);
        assert!(r.overlaps.is_empty());

        let r = validate_cells(&[LevelCoord::new(0, 0, 0, 0), LevelCoord::new(0, 0, 0, 1)]);
        assert_eq!(r.overlaps, vec![(1, 0)]);

        let r = validate_cells(&[LevelCoord::new(4, 4, 4, 2), LevelCoord::new(4, 4, 4, 2)]);
        assert_eq!(r.duplicates, vec![(0, 1)]);
    }

    #[test]
    fn holes_and_level_jumps_are_valid() {
        // level-0 cell next to a level-3 cell, with empty space elsewhere
        let r = validate_cells(&[
            LevelCoord::new(-1, 0, 0, 0),
            LevelCoord::new(0, 0, 0, 3),
            LevelCoord::new(64, 64, 64, 1),
        ]);
        assert!(r.is_valid());
    }

    #[test]
    fn negative_coordinates_overlap() {
        let r = validate_cells(&[LevelCoord::new(-4, -4, -4, 2), LevelCoord::new(-3, -2, -1, 0)]);
        assert_eq!(r.overlaps, vec![(0, 1)]);
    }
}
