//! Rendering of cell-centered adaptive mesh refinement (AMR) volumes.
//!
//! The pipeline: a raw cell list is partitioned into same-level [`Brick`]s,
//! the overlap pattern of the bricks' basis supports is cut into disjoint
//! [`ActiveBrickRegion`]s, and a [`Bvh`] over those regions drives ray
//! marching. Every point inside a region is reconstructed from the region's
//! brick list alone, so no per-sample cell location is needed.

pub mod accel;
pub mod bricks;
pub mod error;
pub mod geom;
pub mod io;
pub mod model;
pub mod recon;
pub mod regions;
pub mod render;
pub mod scene;
pub mod tf;

pub use accel::{Bvh, RayInterval, RegionBvh};
pub use bricks::{brick_stats, build_bricks, BrickBuildParams, BrickKdTree, BrickStats};
pub use error::Error;
pub use geom::{Box3, ClipPlane, Ray};
pub use model::{validate_cells, AmrModel, Brick, Cell, CellSet, LevelCoord, ValidationReport};
pub use recon::{GradientResult, SampleResult};
pub use regions::{build_regions, region_stats, ActiveBrickRegion, RegionStats};
pub use render::{render_frame, Camera, Filter, Frame, FrameStats, GradientMode, MarchParams, SampleLookup};
pub use scene::{Scene, VolumeData};
pub use tf::TransferFunction;

pub use glam::DVec3;
