//! Import of regular voxel grids with optional bottom-up coarsening.

use crate::error::Error;
use crate::model::{CellSet, LevelCoord};

/// Merge state of one aligned block: `None` once any descendant refused to merge.
#[derive(Clone, Copy)]
struct Block {
    mean: f64,
    min: f32,
    max: f32,
}

/// One level-0 cell per voxel (`values` x-fastest). With `tolerance > 0`,
/// aligned 2x2x2 groups of same-level cells are merged into their parent
/// while the raw voxels they cover span at most `tolerance`. Blocks that would
/// extend past the grid are never formed, so non-power-of-two dimensions
/// simply stop coarsening at the largest block that fits.
pub fn import_structured(
    dims: [usize; 3],
    values: &[f32],
    tolerance: f64,
    field_name: &str,
) -> Result<CellSet, Error> {
    if dims.contains(&0) {
        return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
    }
    let n = dims.iter().product::<usize>();
    if values.len() != n {
        return Err(Error::InvalidParameter(format!(
            "grid {}x{}x{} needs {n} values, got {}",
            dims[0],
            dims[1],
            dims[2],
            values.len()
        )));
    }
    if dims.iter().any(|&d| d > i32::MAX as usize) {
        return Err(Error::InvalidParameter("grid dimension exceeds i32 range".into()));
    }

    let mut levels: Vec<([usize; 3], Vec<Option<Block>>)> = vec![(
        dims,
        values.iter().map(|&v| Some(Block { mean: v as f64, min: v, max: v })).collect(),
    )];
    if tolerance > 0.0 {
        loop {
            let (d, prev) = levels.last().unwrap();
            let nd = d.map(|x| x / 2);
            if nd.contains(&0) {
                break;
            }
            let mut next = Vec::with_capacity(nd.iter().product());
            for z in 0..nd[2] {
                for y in 0..nd[1] {
                    for x in 0..nd[0] {
                        let mut acc = Some(Block { mean: 0.0, min: f32::INFINITY, max: f32::NEG_INFINITY });
                        for c in 0..8 {
                            let (cx, cy, cz) = (2 * x + (c & 1), 2 * y + ((c >> 1) & 1), 2 * z + (c >> 2));
                            let child = prev[cx + d[0] * (cy + d[1] * cz)];
                            acc = match (acc, child) {
                                (Some(a), Some(b)) => Some(Block {
                                    mean: a.mean + b.mean / 8.0,
                                    min: a.min.min(b.min),
                                    max: a.max.max(b.max),
                                }),
                                _ => None,
                            };
                        }
                        next.push(acc.filter(|b| (b.max as f64 - b.min as f64) <= tolerance));
                    }
                }
            }
            if next.iter().all(Option::is_none) {
                break;
            }
            levels.push((nd, next));
        }
    }

    let mut cells = CellSet::single_field(field_name);
    let top = levels.len() - 1;
    for (l, (d, blocks)) in levels.iter().enumerate() {
        let w = 1i32 << l;
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    let Some(b) = blocks[x + d[0] * (y + d[1] * z)] else { continue };
                    let merged_above = l < top && {
                        let (pd, parents) = &levels[l + 1];
                        let (px, py, pz) = (x / 2, y / 2, z / 2);
                        px < pd[0] && py < pd[1] && pz < pd[2]
                            && parents[px + pd[0] * (py + pd[1] * pz)].is_some()
                    };
                    if !merged_above {
                        let c = LevelCoord::new(x as i32 * w, y as i32 * w, z as i32 * w, l as u8);
                        cells.push(c, &[b.mean as f32]);
                    }
                }
            }
        }
    }
    Ok(cells)
}
