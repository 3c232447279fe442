mod common;

use common::*;
use nalgebra::DMatrix;
use pcgraph::construct::{ball_query_all, build_adjacency, degree_report, farthest_point_sample};
use pcgraph::fixtures::{make_fixture, FixtureKind};
use pcgraph::index::SpatialIndex;
use pcgraph::smooth::{boundary_junction_classify, NodeRole};
use pcgraph::{PointCloud, SmoothingConfig};
use proptest::prelude::*;

/// Radius of the `k`-th nearest point, counting the point itself.
fn kth_distance(cloud: &PointCloud, i: usize, k: usize) -> f64 {
    let mut d: Vec<f64> = cloud.points.iter().map(|p| sq_dist(cloud.point(i), p)).collect();
    d.sort_by(f64::total_cmp);
    d.get(k - 1).copied().unwrap_or(f64::INFINITY).sqrt()
}

fn count_within(cloud: &PointCloud, i: usize, r: f64) -> usize {
    cloud.points.iter().filter(|p| sq_dist(cloud.point(i), p) <= r * r).count()
}

#[test]
fn random_200_points_match_exhaustive_evaluation() {
    let mut rng = rng(11);
    let cloud = random_cloud(&mut rng, 200, 1.0, 0);
    let cfg = SmoothingConfig::new(0.2, 16);
    let lists = ball_query_all(&SpatialIndex::build(&cloud), &cfg).unwrap();
    for i in 0..cloud.len() {
        assert_eq!(lists.get(i), brute_ball_query(&cloud, i, 0.2, 16).as_slice(), "point {i}");
    }
}

#[test]
fn random_100_point_adjacency_matches_exhaustive_evaluation() {
    let mut rng = rng(12);
    let cloud = random_cloud(&mut rng, 100, 1.0, 0);
    let cfg = SmoothingConfig::new(0.45, 10);
    let adj = build_adjacency(&cloud, &cfg).unwrap();
    let expected = DMatrix::from_fn(100, 100, |i, j| {
        if brute_ball_query(&cloud, i, 0.45, 10).contains(&j) {
            1.0
        } else {
            0.0
        }
    });
    assert_eq!(to_dense(&adj), expected);
}

#[test]
fn mixed_density_cloud_has_one_way_edges() {
    let fixture = make_fixture(FixtureKind::AirplaneLike, 1024, 3).unwrap();
    let cfg = SmoothingConfig::default();
    let cloud = &fixture.cloud;
    let (alpha, beta): (Vec<usize>, Vec<usize>) =
        (0..cloud.len()).partition(|&i| kth_distance(cloud, i, cfg.k) <= cfg.radius);
    assert!(!alpha.is_empty() && !beta.is_empty(), "fixture should contain both classes");
    let adj = build_adjacency(cloud, &cfg).unwrap();
    let witness = (0..cloud.len()).any(|i| adj.row(i).0.iter().any(|&j| !adj.contains(j, i)));
    assert!(witness, "no directional edge found");
}

#[test]
fn row_lengths_follow_the_two_classes() {
    let fixture = make_fixture(FixtureKind::AirplaneLike, 1024, 4).unwrap();
    let cfg = SmoothingConfig::default();
    let cloud = &fixture.cloud;
    let report = degree_report(&build_adjacency(cloud, &cfg).unwrap());
    let n = cloud.len();
    for i in 0..n {
        assert!(report.out_degree[i] <= n && report.in_degree[i] <= n);
        if kth_distance(cloud, i, cfg.k) <= cfg.radius {
            assert_eq!(report.out_degree[i], cfg.k, "dense point {i}");
        } else {
            assert_eq!(report.out_degree[i], count_within(cloud, i, cfg.radius), "sparse point {i}");
        }
    }
}

// Points with sparse surroundings keep every point within r, and anything that
// selects them lies within r too, so the column count never exceeds the row
// count for them.
#[test]
fn sparse_points_are_included_at_most_as_often_as_they_include() {
    let fixture = make_fixture(FixtureKind::AirplaneLike, 2048, 0).unwrap();
    let cfg = SmoothingConfig::default();
    let cloud = &fixture.cloud;
    let report = degree_report(&build_adjacency(cloud, &cfg).unwrap());
    let mut sparse = 0;
    for i in 0..cloud.len() {
        if kth_distance(cloud, i, cfg.k) > cfg.radius {
            sparse += 1;
            assert!(report.in_degree[i] <= report.out_degree[i], "point {i}");
            assert!(report.out_degree[i] <= cfg.k, "point {i}");
        }
    }
    assert!(sparse > 0);
}

#[test]
fn boundary_like_points_of_the_transpose_sit_near_free_edges() {
    let fixture = make_fixture(FixtureKind::AirplaneLike, 2048, 0).unwrap();
    let cfg = SmoothingConfig::default();
    let adj = build_adjacency(&fixture.cloud, &cfg).unwrap();
    // The transpose swaps rows and columns: boundary-like now means a point is
    // selected by fewer others than it selects itself.
    let roles = boundary_junction_classify(&adj.transpose(), cfg.k);
    let edge = fixture.edge_distance.unwrap();
    let flag: Vec<f64> = roles.iter().map(|r| f64::from(u8::from(*r == NodeRole::BoundaryLike))).collect();
    let hits = flag.iter().sum::<f64>();
    assert!(hits > 0.0);

    let n = flag.len() as f64;
    let (mf, me) = (hits / n, edge.iter().sum::<f64>() / n);
    let cov: f64 = flag.iter().zip(&edge).map(|(f, e)| (f - mf) * (-e + me)).sum();
    assert!(cov >= 0.0, "boundary-like points are not nearer the rim: covariance {cov}");
}

#[test]
fn symmetric_graph_is_all_interior() {
    let mut rng = rng(13);
    let a = symmetric_binary(&mut rng, 40, 0.2);
    let roles = boundary_junction_classify(&to_sparse(&a, true), 4);
    assert!(roles.iter().all(|&r| r == NodeRole::Interior));
}

#[test]
fn farthest_point_sampling_is_repeatable_and_spread_out() {
    let fixture = make_fixture(FixtureKind::Sphere, 500, 5).unwrap();
    let first = farthest_point_sample(&fixture.cloud, 64, 0).unwrap();
    assert_eq!(first, farthest_point_sample(&fixture.cloud, 64, 0).unwrap());
    let mut sorted = first.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 64);

    // Each pick is the farthest remaining point from those chosen before it.
    let cloud = &fixture.cloud;
    let gap = |chosen: &[usize], j: usize| {
        chosen.iter().map(|&c| sq_dist(cloud.point(c), cloud.point(j))).fold(f64::INFINITY, f64::min)
    };
    for step in 1..first.len() {
        let chosen = &first[..step];
        let best = (0..cloud.len()).filter(|j| !chosen.contains(j)).map(|j| gap(chosen, j)).fold(0.0, f64::max);
        assert_eq!(gap(chosen, first[step]), best, "step {step}");
    }
}

#[cfg(feature = "parallel")]
#[test]
fn neighbor_lists_do_not_depend_on_thread_count() {
    let fixture = make_fixture(FixtureKind::TwoPlanesCross, 2048, 6).unwrap();
    let cfg = SmoothingConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ball_query_all(&SpatialIndex::build(&fixture.cloud), &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_query_equals_brute_force(
        seed in any::<u64>(),
        n in 1usize..300,
        grid in prop_oneof![Just(0u32), Just(3u32), Just(6u32)],
        r in 0.05f64..0.8,
        k in 1usize..24,
    ) {
        let mut rng = rng(seed);
        let cloud = random_cloud(&mut rng, n, 1.0, grid);
        let lists = ball_query_all(&SpatialIndex::build(&cloud), &SmoothingConfig::new(r, k)).unwrap();
        for i in 0..n {
            let expected = brute_ball_query(&cloud, i, r, k);
            prop_assert_eq!(lists.get(i), expected.as_slice());
        }
    }

    #[test]
    fn degree_sums_agree(seed in any::<u64>(), n in 1usize..60, p in 0.0f64..0.5) {
        let mut rng = rng(seed);
        let adj = to_sparse(&random_binary(&mut rng, n, p, false), false);
        let report = degree_report(&adj);
        prop_assert_eq!(report.out_degree.iter().sum::<usize>(), adj.nnz());
        prop_assert_eq!(report.in_degree.iter().sum::<usize>(), adj.nnz());
    }

    #[test]
    fn symmetric_graphs_have_equal_degrees(seed in any::<u64>(), n in 1usize..60, p in 0.0f64..0.5) {
        let mut rng = rng(seed);
        let report = degree_report(&to_sparse(&symmetric_binary(&mut rng, n, p), true));
        prop_assert_eq!(report.out_degree, report.in_degree);
    }
}
