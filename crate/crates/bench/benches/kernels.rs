use criterion::{black_box, criterion_group, criterion_main, Criterion};
use domain_lab::conditions::{self, Sampler};
use domain_lab::{discretize, intrinsic_distance, CapacityProblem, Point, VisibilityGraph};
use domain_lab_bench::{domain, grid};

fn geometry(c: &mut Criterion) {
    let slit = domain("slit_disk");
    c.bench_function("discretize slit_disk h=1/128", |b| {
        b.iter(|| discretize(black_box(&slit), 1.0 / 128.0).unwrap())
    });
    let l = domain("l_shape");
    c.bench_function("intrinsic_distance l_shape", |b| {
        b.iter(|| intrinsic_distance(&l, black_box(Point::new(0.9, 0.25)), Point::new(0.25, 0.9)).unwrap())
    });
    let vis = VisibilityGraph::new(&slit);
    c.bench_function("visibility shortest path slit_disk", |b| {
        b.iter(|| vis.distance(black_box(Point::new(0.5, 0.05)), Point::new(0.5, -0.05)).unwrap())
    });
}

fn conditions_bench(c: &mut Criterion) {
    let g = grid("square", 1.0 / 64.0);
    let s = Sampler::new(0, 64, 8);
    c.bench_function("quasiconvexity square h=1/64", |b| {
        b.iter(|| conditions::quasiconvexity_constant(&g, black_box(&s)).unwrap())
    });
    c.bench_function("uniformity square h=1/64", |b| {
        b.iter(|| conditions::uniformity_estimate(&g, black_box(&s)).unwrap())
    });
}

fn analysis(c: &mut Criterion) {
    let g = grid("disk", 1.0 / 64.0);
    c.bench_function("localize+verify disk h=1/64", |b| {
        b.iter(|| {
            let res = domain_lab::localize(&g, Point::new(0.0, 0.0), 0.1, 1.0).unwrap();
            domain_lab::verify_localization(&g, res, Point::new(0.0, 0.0), 0.1).unwrap()
        })
    });
    let prob = CapacityProblem::annulus(&g, Point::new(0.0, 0.0), 0.1, 0.4, 2.0).unwrap();
    c.bench_function("capacity p=2 disk h=1/64", |b| {
        b.iter(|| domain_lab::capacity(&g, black_box(&prob)).unwrap())
    });
    c.bench_function("sp_sweep one cell disk h=1/64", |b| {
        b.iter(|| domain_lab::sp_sweep(&g, 2.0, &[Point::new(0.2, 0.1)], &[0.25], 2.0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = geometry, conditions_bench, analysis
}
criterion_main!(benches);
