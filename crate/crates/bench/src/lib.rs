//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use amrvol_core::io::{generate_synthetic, FieldKind, SyntheticSpec};
use amrvol_core::regions::point_to_region;
use amrvol_core::{BrickBuildParams, CellSet, DVec3, Scene, TransferFunction, VolumeData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Turbulent multi-level model; `root` coarse cells per axis.
pub fn turbulence_cells(root: u32) -> CellSet {
    let spec = SyntheticSpec {
        field: FieldKind::Turbulence,
        root_cells: [root; 3],
        max_level: 3,
        thresholds: vec![0.36],
        seed: 1,
        hole_fraction: 0.0,
    };
    generate_synthetic(&spec).expect("valid spec")
}

/// Scene with a retained brick tree, so both sample lookups work.
pub fn scene(cells: &CellSet) -> Scene {
    let params = BrickBuildParams { retain_tree: true, ..Default::default() };
    let data = VolumeData::from_cells(cells, &params).expect("generated cells are valid");
    let (lo, hi) = data.model.value_range(0);
    Scene::new(Arc::new(data), 0, TransferFunction::cool_warm([lo as f64, hi as f64], 0.25)).expect("field 0 exists")
}

/// Random points inside the support union, each with its region.
pub fn sample_points(scene: &Scene, n: usize, seed: u64) -> Vec<(DVec3, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = scene.model().support_bounds();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = DVec3::new(
            rng.gen_range(b.lo.x..b.hi.x),
            rng.gen_range(b.lo.y..b.hi.y),
            rng.gen_range(b.lo.z..b.hi.z),
        );
        if let Some(r) = point_to_region(&scene.data.region_lookup, p) {
            out.push((p, r));
        }
    }
    out
}
