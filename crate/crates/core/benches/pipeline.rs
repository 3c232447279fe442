//! Stage timings on the airplane fixture. With the `parallel` feature each
//! stage runs in a one-thread pool and in the default pool; without it only the
//! sequential build is measured.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcgraph::aggregate::{aggregate_enhanced, AggregationSpec};
use pcgraph::construct::build_adjacency;
use pcgraph::fixtures::{make_fixture, FixtureKind};
use pcgraph::geometry::{cylindrical_all, local_frames};
use pcgraph::smooth::{optimize, smooth};
use pcgraph::{PointCloud, SmoothingConfig};

const EPS: f64 = 1e-9;

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, rayon::ThreadPool)> {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    vec![("sequential", pool(1)), ("parallel", pool(0))]
}

#[cfg(feature = "parallel")]
fn run_in<R: Send>(mode: &(&'static str, rayon::ThreadPool), f: impl FnOnce() -> R + Send) -> R {
    mode.1.install(f)
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, ())> {
    vec![("sequential", ())]
}

#[cfg(not(feature = "parallel"))]
fn run_in<R>(_: &(&'static str, ()), f: impl FnOnce() -> R) -> R {
    f()
}

fn stages(c: &mut Criterion) {
    let cfg = SmoothingConfig::default();
    let fixture = make_fixture(FixtureKind::AirplaneLike, 4096, 0).unwrap();
    let cloud = fixture.cloud.clone();
    let featured: PointCloud = cloud
        .clone()
        .with_features(pcgraph::Matrix::from_rows(cloud.points.iter().map(|p| vec![p.x, p.y, p.z]).collect()).unwrap())
        .unwrap();
    let opt = optimize(&cloud, &cfg).unwrap();
    let frames = local_frames(&cloud, &opt.neighbors, EPS).unwrap();
    let cyl = cylindrical_all(&cloud, &opt.neighbors, &frames, EPS).unwrap();
    let spec = AggregationSpec::random_enhanced(3, 32, 16, 0);

    for mode in modes() {
        let name = mode.0;
        let mut group = c.benchmark_group("airplane-4096");
        group.sample_size(20);
        group.bench_function(BenchmarkId::new("ball_query", name), |b| {
            b.iter(|| run_in(&mode, || build_adjacency(black_box(&cloud), &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("smooth", name), |b| {
            b.iter(|| run_in(&mode, || smooth(black_box(&opt.normalized), &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("frames", name), |b| {
            b.iter(|| run_in(&mode, || local_frames(black_box(&cloud), &opt.neighbors, EPS).unwrap()))
        });
        group.bench_function(BenchmarkId::new("aggregate", name), |b| {
            b.iter(|| {
                run_in(&mode, || {
                    aggregate_enhanced(black_box(&featured), &opt.neighbors, &frames, &cyl, &spec).unwrap()
                })
            })
        });
        group.finish();
    }
}

criterion_group!(benches, stages);
criterion_main!(benches);
