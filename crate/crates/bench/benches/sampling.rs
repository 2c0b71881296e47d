use amrvol_bench::{sample_points, scene, turbulence_cells};
use amrvol_core::recon::{basis_sample_bricks, basis_sample_celllocation, basis_sample_gradient_bricks};
use amrvol_core::{render_frame, Camera, MarchParams, SampleLookup};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const POINTS: usize = 4096;

/// Per-sample cost: the region's brick list against a k-d walk per sample.
fn per_sample(c: &mut Criterion) {
    let scene = scene(&turbulence_cells(8));
    let model = scene.model();
    let tree = scene.data.kd_tree.as_ref().unwrap();
    let points = sample_points(&scene, POINTS, 7);
    let mut group = c.benchmark_group("sample");
    group.throughput(Throughput::Elements(POINTS as u64));
    group.bench_function("region", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for (p, r) in &points {
                acc += basis_sample_bricks(model, 0, &scene.regions()[*r].brick_ids, *p).value;
            }
            black_box(acc)
        })
    });
    group.bench_function("celllocation", |b| {
        let mut scratch = Vec::new();
        b.iter(|| {
            let mut acc = 0.0;
            for (p, _) in &points {
                acc += basis_sample_celllocation(model, tree, 0, *p, &mut scratch).value;
            }
            black_box(acc)
        })
    });
    group.bench_function("region+gradient", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for (p, r) in &points {
                let (s, g) = basis_sample_gradient_bricks(model, 0, &scene.regions()[*r].brick_ids, *p);
                acc += s.value + g.gradient.x;
            }
            black_box(acc)
        })
    });
    group.finish();
}

/// Whole frames in both lookup modes.
fn frames(c: &mut Criterion) {
    let scene = scene(&turbulence_cells(8));
    let camera = Camera::orbit(&scene.model().bounds, 25.0, 20.0, 1.8, 45.0, 128, 128).unwrap();
    let mut group = c.benchmark_group("frame128");
    group.sample_size(10);
    for (lookup, name) in [(SampleLookup::Regions, "region"), (SampleLookup::CellLocation, "celllocation")] {
        let params = MarchParams { lookup, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &params, |b, params| {
            b.iter(|| black_box(render_frame(&scene, &camera, params).unwrap().stats.samples))
        });
    }
    group.finish();
}

criterion_group!(benches, per_sample, frames);
criterion_main!(benches);
