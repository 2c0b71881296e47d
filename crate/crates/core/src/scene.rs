//! Immutable render scenes.
//!
//! [`VolumeData`] bundles everything derived from the cells alone. A
//! [`Scene`] adds the parts that depend on the transfer function and the
//! iso-value; edits produce a new scene that shares whatever did not change.

use std::sync::Arc;

use crate::accel::{build_full_bvh, build_iso_bvh, build_volume_bvh, Bvh, RegionBvh};
use crate::bricks::{build_bricks, BrickBuildParams, BrickKdTree};
use crate::error::Error;
use crate::model::{AmrModel, CellSet};
use crate::regions::{build_regions, ActiveBrickRegion};
use crate::tf::TransferFunction;

#[derive(Debug)]
pub struct VolumeData {
    pub model: AmrModel,
    pub regions: Vec<ActiveBrickRegion>,
    /// Present only when the brick build retained its split planes.
    pub kd_tree: Option<BrickKdTree>,
    /// Every region, for point location.
    pub region_lookup: RegionBvh,
    /// `[brick][field]` value ranges, used when bricks are traversed directly.
    pub brick_ranges: Vec<Vec<(f32, f32)>>,
}

impl VolumeData {
    pub fn new(model: AmrModel, regions: Vec<ActiveBrickRegion>, kd_tree: Option<BrickKdTree>) -> Self {
        let region_lookup = build_full_bvh(&regions);
        let brick_ranges = (0..model.bricks.len())
            .map(|b| (0..model.fields.len()).map(|f| model.brick_range(b, f)).collect())
            .collect();
        Self { model, regions, kd_tree, region_lookup, brick_ranges }
    }

    pub fn from_cells(cells: &CellSet, params: &BrickBuildParams) -> Result<Self, Error> {
        let (model, tree) = build_bricks(cells, params)?;
        let regions = build_regions(&model);
        Ok(Self::new(model, regions, tree))
    }
}

#[derive(Clone, Debug)]
pub struct IsoSurface {
    pub value: f64,
    pub bvh: Arc<RegionBvh>,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub data: Arc<VolumeData>,
    pub field: usize,
    pub tf: Arc<TransferFunction>,
    /// Regions with nonzero maximum opacity under `tf`.
    pub volume_bvh: Arc<RegionBvh>,
    /// Bricks with nonzero maximum opacity under `tf` (nearest-neighbor mode).
    pub brick_bvh: Arc<Bvh>,
    pub iso: Option<IsoSurface>,
    /// Milliseconds spent rebuilding hierarchies to produce this scene.
    pub rebuild_ms: f64,
}

impl Scene {
    pub fn new(data: Arc<VolumeData>, field: usize, tf: TransferFunction) -> Result<Self, Error> {
        if field >= data.model.fields.len() {
            return Err(Error::InvalidParameter(format!(
                "field index {field} out of range ({} fields)",
                data.model.fields.len()
            )));
        }
        tf.validate()?;
        let (volume_bvh, brick_bvh) = volume_hierarchies(&data, field, &tf);
        let rebuild_ms = volume_bvh.build_ms + brick_bvh.build_ms;
        Ok(Self {
            data,
            field,
            tf: Arc::new(tf),
            volume_bvh: Arc::new(volume_bvh),
            brick_bvh: Arc::new(brick_bvh),
            iso: None,
            rebuild_ms,
        })
    }

    /// New scene for a different transfer function; rebuilds the volume hierarchies.
    pub fn with_tf(&self, tf: TransferFunction) -> Result<Self, Error> {
        tf.validate()?;
        let (volume_bvh, brick_bvh) = volume_hierarchies(&self.data, self.field, &tf);
        Ok(Self {
            rebuild_ms: volume_bvh.build_ms + brick_bvh.build_ms,
            tf: Arc::new(tf),
            volume_bvh: Arc::new(volume_bvh),
            brick_bvh: Arc::new(brick_bvh),
            ..self.clone()
        })
    }

    /// New scene with the iso-surface set or removed; the volume hierarchy is shared.
    pub fn with_iso(&self, iso: Option<f64>) -> Self {
        let iso = iso.map(|value| IsoSurface {
            value,
            bvh: Arc::new(build_iso_bvh(&self.data.regions, value, self.field)),
        });
        Self {
            rebuild_ms: iso.as_ref().map_or(0.0, |i| i.bvh.build_ms),
            iso,
            ..self.clone()
        }
    }

    /// Same scene with every region kept in the volume hierarchy (no space
    /// skipping). Renders identically; useful as a reference.
    pub fn unpruned(&self) -> Self {
        Self {
            volume_bvh: Arc::new(build_full_bvh(&self.data.regions)),
            brick_bvh: Arc::new(Bvh::build(
                self.data.model.bricks.iter().enumerate().map(|(i, b)| (i as u32, b.bounds())),
            )),
            ..self.clone()
        }
    }

    pub fn model(&self) -> &AmrModel {
        &self.data.model
    }

    pub fn regions(&self) -> &[ActiveBrickRegion] {
        &self.data.regions
    }
}

fn volume_hierarchies(data: &VolumeData, field: usize, tf: &TransferFunction) -> (RegionBvh, Bvh) {
    let volume = build_volume_bvh(&data.regions, tf, field);
    let start = std::time::Instant::now();
    let mut bricks = Bvh::build(data.model.bricks.iter().enumerate().filter_map(|(i, b)| {
        let (lo, hi) = data.brick_ranges[i][field];
        (tf.max_opacity(lo as f64, hi as f64) > 0.0).then_some((i as u32, b.bounds()))
    }));
    bricks.build_ms = start.elapsed().as_secs_f64() * 1e3;
    (volume, bricks)
}
