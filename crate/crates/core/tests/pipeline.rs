mod common;

use std::sync::Arc;

use amrvol_core::io::{
    generate_synthetic, import_structured, load_artifact, save_artifact, FieldKind, SyntheticSpec,
};
use amrvol_core::recon::{basis_sample_region, nearest_sample};
use amrvol_core::regions::point_to_region;
use amrvol_core::render::{integrate_ray, pixel_offset, RayContext};
use amrvol_core::{
    brick_stats, build_bricks, build_regions, region_stats, render_frame, validate_cells, Box3,
    BrickBuildParams, Bvh, Camera, CellSet, ClipPlane, DVec3, Filter, GradientMode, LevelCoord,
    MarchParams, SampleLookup, Scene, TransferFunction, VolumeData,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        field: FieldKind::Gaussian,
        root_cells: [4, 4, 4],
        max_level: 2,
        thresholds: vec![0.05],
        seed,
        hole_fraction: 0.02,
    }
}

fn scene_from(cells: &CellSet, retain_tree: bool, max_alpha: f32) -> Scene {
    let params = BrickBuildParams { retain_tree, ..Default::default() };
    let data = VolumeData::from_cells(cells, &params).unwrap();
    let (lo, hi) = data.model.value_range(0);
    let tf = TransferFunction::cool_warm([lo as f64, hi as f64], max_alpha);
    Scene::new(Arc::new(data), 0, tf).unwrap()
}

fn camera(scene: &Scene, az: f64, res: u32) -> Camera {
    Camera::orbit(&scene.model().bounds, az, 25.0, 1.8, 40.0, res, res).unwrap()
}

#[test]
fn single_cell_gives_one_region() {
    let mut cells = CellSet::single_field("f");
    cells.push(LevelCoord::new(0, 0, 0, 0), &[2.5]);
    let (model, _) = build_bricks(&cells, &BrickBuildParams::default()).unwrap();
    let regions = build_regions(&model);
    assert_eq!(model.bricks.len(), 1);
    assert_eq!(regions.len(), 1);
    assert_eq!(regions[0].bounds, Box3::new(DVec3::splat(-0.5), DVec3::splat(1.5)));
    assert_eq!(regions[0].brick_ids, vec![0]);
    assert_eq!(regions[0].finest_cell_width, 1.0);
    assert_eq!(regions[0].value_range(0), (2.5, 2.5));
    let s = brick_stats(&model);
    assert_eq!((s.cells, s.bricks), (1, 1));
}

#[test]
fn two_cells_give_three_regions() {
    let mut cells = CellSet::single_field("f");
    cells.push(LevelCoord::new(0, 0, 0, 0), &[1.0]);
    cells.push(LevelCoord::new(1, 0, 0, 0), &[2.0]);
    // a width limit of 1 keeps the cells in separate bricks
    let params = BrickBuildParams { max_brick_width: 1, ..Default::default() };
    let (model, _) = build_bricks(&cells, &params).unwrap();
    let mut regions = build_regions(&model);
    regions.sort_by(|a, b| a.bounds.lo.x.total_cmp(&b.bounds.lo.x));
    let xs: Vec<(f64, f64)> = regions.iter().map(|r| (r.bounds.lo.x, r.bounds.hi.x)).collect();
    assert_eq!(xs, vec![(-0.5, 0.5), (0.5, 1.5), (1.5, 2.5)]);
    let sizes: Vec<usize> = regions.iter().map(|r| r.brick_ids.len()).collect();
    assert_eq!(sizes, vec![1, 2, 1]);
}

#[test]
fn generators_and_importer_produce_valid_cells() {
    for seed in 0..4 {
        let cells = generate_synthetic(&small_spec(seed)).unwrap();
        assert!(validate_cells(&cells.coords).is_valid());
    }
    let dims = [9, 7, 5];
    let values: Vec<f32> = (0..dims.iter().product::<usize>()).map(|i| (i % 11) as f32).collect();
    let cells = import_structured(dims, &values, 0.0, "v").unwrap();
    assert!(validate_cells(&cells.coords).is_valid());
}

#[test]
fn structured_import_stays_within_tolerance() {
    let dims = [16, 12, 10];
    let mut values = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                // smooth in one half, noisy in the other
                let smooth = 0.01 * (x + y + z) as f32;
                let noise = if x >= 8 { ((x * 7 + y * 13 + z * 5) % 9) as f32 } else { 0.0 };
                values.push(smooth + noise);
            }
        }
    }
    let tolerance = 0.05;
    let cells = import_structured(dims, &values, tolerance, "v").unwrap();
    assert!(cells.len() < values.len(), "smooth half should coarsen");
    assert!(validate_cells(&cells.coords).is_valid());
    let (model, _) = build_bricks(&cells, &BrickBuildParams::default()).unwrap();
    let bricks = Bvh::build(model.bricks.iter().enumerate().map(|(i, b)| (i as u32, b.bounds())));
    let mut worst = 0.0f64;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = DVec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5);
                let s = nearest_sample(&model, &bricks, 0, p);
                assert!(s.valid);
                let raw = values[x + dims[0] * (y + dims[1] * z)] as f64;
                worst = worst.max((s.value - raw).abs());
            }
        }
    }
    assert!(worst <= tolerance + 1e-6, "worst {worst}");
}

#[test]
fn nearest_matches_brute_force_cell() {
    let cells = generate_synthetic(&small_spec(1)).unwrap();
    let map = common::cell_map(&cells);
    let (model, _) = build_bricks(&cells, &BrickBuildParams::default()).unwrap();
    let bricks = Bvh::build(model.bricks.iter().enumerate().map(|(i, b)| (i as u32, b.bounds())));
    let levels: Vec<u8> = (0..=2).collect();
    let bounds = model.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut hits = 0;
    for _ in 0..5000 {
        let p = common::uniform_point(&mut rng, &bounds);
        let owner = levels.iter().find_map(|&l| {
            let w = (1i64 << l) as f64;
            let a = (p / w).floor() * w;
            map.get(&LevelCoord::new(a.x as i32, a.y as i32, a.z as i32, l)).copied()
        });
        let s = nearest_sample(&model, &bricks, 0, p);
        match owner {
            Some(i) => {
                hits += 1;
                assert!(s.valid);
                assert_eq!(s.value, cells.values[0][i] as f64);
            }
            None => assert!(!s.valid, "{p:?} is in a hole"),
        }
    }
    assert!(hits > 4000);
}

#[test]
fn region_value_ranges_bound_samples() {
    let cells = generate_synthetic(&SyntheticSpec {
        field: FieldKind::Turbulence,
        root_cells: [3, 3, 3],
        max_level: 3,
        thresholds: vec![3.0],
        seed: 4,
        hole_fraction: 0.02,
    })
    .unwrap();
    let data = VolumeData::from_cells(&cells, &BrickBuildParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..5000 {
        let p = common::uniform_point(&mut rng, &data.model.support_bounds());
        let Some(r) = point_to_region(&data.region_lookup, p) else { continue };
        let region = &data.regions[r];
        let s = basis_sample_region(&data.model, region, 0, p);
        if !s.valid {
            continue;
        }
        let (lo, hi) = region.value_range(0);
        assert!(lo as f64 <= s.value && s.value <= hi as f64);
        checked += 1;
    }
    assert!(checked > 1000);
}

#[test]
fn region_stats_match_recount() {
    let cells = generate_synthetic(&small_spec(3)).unwrap();
    let data = VolumeData::from_cells(&cells, &BrickBuildParams::default()).unwrap();
    let stats = region_stats(&data.regions);
    assert_eq!(stats.regions, data.regions.len());
    let total: usize = data.regions.iter().map(|r| r.brick_ids.len()).sum();
    let by_count = total as f64 / data.regions.len() as f64;
    assert!((stats.avg_bricks_by_count - by_count).abs() < 1e-12);
    let vol = |b: &Box3| b.extent().x * b.extent().y * b.extent().z;
    let weighted: f64 = data.regions.iter().map(|r| vol(&r.bounds) * r.brick_ids.len() as f64).sum();
    let volume: f64 = data.regions.iter().map(|r| vol(&r.bounds)).sum();
    assert!((stats.avg_bricks_by_volume - weighted / volume).abs() < 1e-9);
    let b = brick_stats(&data.model);
    assert_eq!(b.cells, cells.len());
    assert_eq!(b.cells_per_level.iter().sum::<usize>(), cells.len());
    assert_eq!(b.bricks_per_level.iter().sum::<usize>(), b.bricks);
}

#[test]
fn cell_location_frames_match_region_frames() {
    let cells = generate_synthetic(&small_spec(5)).unwrap();
    let scene = scene_from(&cells, true, 0.3).with_iso(Some(0.4));
    for gradient in [GradientMode::Analytic, GradientMode::None] {
        let base = MarchParams { gradient, ..Default::default() };
        let a = render_frame(&scene, &camera(&scene, 30.0, 48), &base).unwrap();
        let params = MarchParams { lookup: SampleLookup::CellLocation, ..base };
        let b = render_frame(&scene, &camera(&scene, 30.0, 48), &params).unwrap();
        assert_eq!(a.pixels, b.pixels);
        assert_eq!((a.stats.samples, a.stats.regions), (b.stats.samples, b.stats.regions));
        assert!(a.stats.samples > 0);
    }
}

#[test]
fn cell_location_without_tree_is_an_error() {
    let cells = generate_synthetic(&small_spec(5)).unwrap();
    let scene = scene_from(&cells, false, 0.3);
    let params = MarchParams { lookup: SampleLookup::CellLocation, ..Default::default() };
    assert!(render_frame(&scene, &camera(&scene, 0.0, 8), &params).is_err());
}

#[test]
fn frames_are_deterministic_and_seed_dependent() {
    let cells = generate_synthetic(&small_spec(6)).unwrap();
    let scene = scene_from(&cells, false, 0.3);
    let cam = camera(&scene, 60.0, 40);
    let p = MarchParams { seed: 9, rate_scale: 0.5, ..Default::default() };
    let a = render_frame(&scene, &cam, &p).unwrap();
    let b = render_frame(&scene, &cam, &p).unwrap();
    assert_eq!(a.pixels, b.pixels);
    assert_eq!(a.stats.samples, b.stats.samples);
    let c = render_frame(&scene, &cam, &MarchParams { seed: 10, ..p }).unwrap();
    assert_ne!(a.pixels, c.pixels);
}

#[test]
fn frame_stats_equal_per_ray_recount() {
    let cells = generate_synthetic(&small_spec(7)).unwrap();
    let scene = scene_from(&cells, false, 0.2).with_iso(Some(0.5));
    let cam = camera(&scene, 100.0, 24);
    let params = MarchParams { seed: 3, ..Default::default() };
    let frame = render_frame(&scene, &cam, &params).unwrap();
    let (mut samples, mut regions) = (0, 0);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut ctx = RayContext::default();
            let rho = pixel_offset((y * cam.width + x) as u64, params.seed);
            integrate_ray(&scene, &cam.ray(x, y), &params, rho, &mut ctx);
            samples += ctx.stats.samples;
            regions += ctx.stats.regions;
        }
    }
    assert_eq!((frame.stats.samples, frame.stats.regions), (samples, regions));
}

#[test]
fn transparent_tf_renders_background() {
    let cells = generate_synthetic(&small_spec(2)).unwrap();
    let scene = scene_from(&cells, false, 0.3);
    let (lo, hi) = scene.model().value_range(0);
    let scene = scene.with_tf(TransferFunction::transparent([lo as f64, hi as f64])).unwrap();
    let params = MarchParams { background: [0.2, 0.4, 0.6, 1.0], ..Default::default() };
    let f = render_frame(&scene, &camera(&scene, 0.0, 16), &params).unwrap();
    assert_eq!(f.stats.samples, 0);
    assert!(f.pixels.chunks(4).all(|p| p == [51, 102, 153, 255]));
}

#[test]
fn opaque_tf_terminates_after_one_sample() {
    let spec = SyntheticSpec {
        field: FieldKind::Constant,
        root_cells: [2, 2, 2],
        max_level: 2,
        thresholds: vec![0.0],
        seed: 0,
        hole_fraction: 0.0,
    };
    let cells = generate_synthetic(&spec).unwrap();
    let data = VolumeData::from_cells(&cells, &BrickBuildParams::default()).unwrap();
    let tf = TransferFunction::constant([0.0, 2.0], [1.0, 1.0, 1.0, 1.0]);
    let scene = Scene::new(Arc::new(data), 0, tf).unwrap();
    let params = MarchParams { gradient: GradientMode::None, background: [0.0; 4], ..Default::default() };
    let f = render_frame(&scene, &camera(&scene, 15.0, 32), &params).unwrap();
    let covered = f.pixels.chunks(4).filter(|p| p[3] == 255).count();
    assert!(covered > 100);
    assert_eq!(f.stats.samples as usize, covered);
}

#[test]
fn clip_planes_remove_geometry() {
    let cells = generate_synthetic(&small_spec(4)).unwrap();
    let scene = scene_from(&cells, false, 0.5);
    let cam = camera(&scene, 20.0, 32);
    let full = render_frame(&scene, &cam, &MarchParams::default()).unwrap();
    let c = scene.model().bounds.center();
    let half = MarchParams {
        clip_planes: vec![ClipPlane { normal: DVec3::X, offset: c.x }],
        ..Default::default()
    };
    let clipped = render_frame(&scene, &cam, &half).unwrap();
    assert!(clipped.stats.samples > 0 && clipped.stats.samples < full.stats.samples);
    // two opposing planes with an empty slab between them cull everything
    let none = MarchParams {
        clip_planes: vec![
            ClipPlane { normal: DVec3::X, offset: c.x + 1.0 },
            ClipPlane { normal: -DVec3::X, offset: -c.x },
        ],
        ..Default::default()
    };
    let empty = render_frame(&scene, &cam, &none).unwrap();
    assert_eq!(empty.stats.samples, 0);
    let bg = render_frame(&scene.with_tf(TransferFunction::transparent([0.0, 1.0])).unwrap(), &cam, &none).unwrap();
    assert_eq!(empty.pixels, bg.pixels);
    // a plane that keeps the whole volume changes nothing
    let lo = scene.model().support_bounds().lo.x;
    let all = MarchParams { clip_planes: vec![ClipPlane { normal: DVec3::X, offset: lo - 1.0 }], ..Default::default() };
    let same = render_frame(&scene, &cam, &all).unwrap();
    assert_eq!(same.pixels, full.pixels);
    assert_eq!(same.stats.samples, full.stats.samples);
}

#[test]
fn nearest_filter_renders_and_skips() {
    let cells = generate_synthetic(&small_spec(8)).unwrap();
    let scene = scene_from(&cells, false, 0.4);
    let cam = camera(&scene, 45.0, 32);
    let params = MarchParams { filter: Filter::Nearest, ..Default::default() };
    let a = render_frame(&scene, &cam, &params).unwrap();
    let b = render_frame(&scene.unpruned(), &cam, &params).unwrap();
    assert!(a.stats.samples > 0);
    assert_eq!(a.pixels, b.pixels);
    assert!(a.stats.regions <= b.stats.regions);
}

#[test]
fn artifact_round_trip() {
    let cells = generate_synthetic(&small_spec(9)).unwrap();
    let params = BrickBuildParams { retain_tree: true, max_brick_width: 8 };
    let data = VolumeData::from_cells(&cells, &params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bricks");
    save_artifact(&path, &data, &params).unwrap();
    let (back, back_params) = load_artifact(&path).unwrap();
    assert_eq!(back_params, params);
    assert_eq!(back.model, data.model);
    assert_eq!(back.regions, data.regions);
    assert_eq!(back.kd_tree, data.kd_tree);

    std::fs::write(&path, b"AMRB\x01\0\0\0garbage").unwrap();
    assert!(load_artifact(&path).is_err());
}

#[test]
fn transfer_function_json_round_trip() {
    let tf = TransferFunction::cool_warm([-1.0, 3.0], 0.7);
    let back = TransferFunction::from_json(&tf.to_json()).unwrap();
    assert_eq!(back, tf);
    assert!(TransferFunction::from_json(r#"{"domain":[0,1],"rgba":[[0,0,0,0]]}"#).is_err());
    assert!(TransferFunction::from_json(r#"{"domain":[1,0],"rgba":[]}"#).is_err());
}
