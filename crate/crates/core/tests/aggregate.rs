mod common;

use common::*;
use nalgebra::Vector3;
use pcgraph::aggregate::{aggregate_baseline, aggregate_enhanced, AggregationSpec, Pool};
use pcgraph::geometry::{cylindrical_all, local_frames};
use pcgraph::smooth::optimize;
use pcgraph::{Matrix, NeighborList, PointCloud, SmoothingConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

const EPS: f64 = 1e-9;

fn featured_cloud(seed: u64, n: usize, eta: usize) -> PointCloud {
    let mut rng = rng(seed);
    let cloud = random_cloud(&mut rng, n, 1.0, 0);
    let feats = (0..n * eta).map(|_| rng.gen_range(-1.0..1.0)).collect();
    cloud.with_features(Matrix::from_vec(n, eta, feats).unwrap()).unwrap()
}

fn enhanced(cloud: &PointCloud, nl: &NeighborList, spec: &AggregationSpec) -> Matrix {
    let frames = local_frames(cloud, nl, EPS).unwrap();
    let cyl = cylindrical_all(cloud, nl, &frames, EPS).unwrap();
    aggregate_enhanced(cloud, nl, &frames, &cyl, spec).unwrap()
}

fn assert_rows_close(m: &Matrix, expected: &[Vec<f64>], tol: f64) {
    assert_eq!(m.rows(), expected.len());
    for (i, row) in expected.iter().enumerate() {
        assert_eq!(m.row(i).len(), row.len());
        for (a, b) in m.row(i).iter().zip(row) {
            assert!((a - b).abs() <= tol, "row {i}: {a} vs {b}");
        }
    }
}

#[test]
fn baseline_on_40_points_matches_double_loop() {
    let cloud = featured_cloud(41, 40, 4);
    let nl = optimize(&cloud, &SmoothingConfig::new(0.6, 8)).unwrap().raw;
    let spec = AggregationSpec::random_baseline(4, 6, 41);
    let out = aggregate_baseline(&cloud, &nl, &spec).unwrap();
    let expected = naive_baseline(&cloud, nl.lists(), &spec.weight_psi, spec.bias_psi.as_deref());
    assert_rows_close(&out, &expected, 1e-10);
}

#[test]
fn enhanced_on_40_points_matches_double_loop() {
    let cloud = featured_cloud(42, 40, 3);
    let nl = optimize(&cloud, &SmoothingConfig::new(0.6, 12).with_top_k(8)).unwrap().neighbors;
    assert!(nl.iter().all(|l| l.len() <= 8));
    let spec = AggregationSpec::random_enhanced(3, 5, 4, 42);
    let frames: Vec<_> = local_frames(&cloud, &nl, EPS)
        .unwrap()
        .iter()
        .map(|f| (f.eigenvalues, [f.axis(0), f.axis(1), f.axis(2)]))
        .collect();
    let expected = naive_enhanced(
        &cloud,
        nl.lists(),
        &frames,
        (&spec.weight_psi, spec.bias_psi.as_deref()),
        (spec.weight_phi.as_ref().unwrap(), spec.bias_phi.as_deref()),
        EPS,
    );
    assert_rows_close(&enhanced(&cloud, &nl, &spec), &expected, 1e-10);
}

#[test]
fn self_only_lists_reduce_to_a_single_affine_map() {
    let cloud = featured_cloud(43, 10, 2);
    let nl = NeighborList::new((0..10).map(|i| vec![i]).collect(), 1).unwrap();
    let spec = AggregationSpec::random_enhanced(2, 3, 2, 43);
    let out = enhanced(&cloud, &nl, &spec);
    for i in 0..10 {
        let mut x = cloud.features.as_ref().unwrap().row(i).to_vec();
        x.extend([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let pooled: Vec<f64> = naive_affine(&x, &spec.weight_psi, spec.bias_psi.as_deref())
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        assert_eq!(&out.row(i)[..3], pooled.as_slice());
    }
}

#[test]
fn translation_leaves_enhanced_output_unchanged() {
    let cloud = featured_cloud(44, 64, 3);
    let nl = optimize(&cloud, &SmoothingConfig::new(0.5, 10)).unwrap().neighbors;
    let spec = AggregationSpec::random_enhanced(3, 8, 4, 44);
    let before = enhanced(&cloud, &nl, &spec);
    let shift = Vector3::new(3.5, -7.25, 12.0);
    let moved = PointCloud::new(
        cloud.points.iter().map(|p| p + shift).collect(),
        cloud.features.clone(),
    )
    .unwrap();
    let after = enhanced(&moved, &nl, &spec);
    for i in 0..64 {
        for (a, b) in before.row(i).iter().zip(after.row(i)) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn mean_pool_ignores_neighbor_order() {
    let mut rng = rng(45);
    let cloud = featured_cloud(45, 30, 3);
    let nl = optimize(&cloud, &SmoothingConfig::new(0.7, 10)).unwrap().neighbors;
    let spec = AggregationSpec::random_baseline(3, 4, 45).with_pool(Pool::Mean);
    let out = aggregate_baseline(&cloud, &nl, &spec).unwrap();
    let mut lists = nl.lists().to_vec();
    for l in &mut lists {
        l.shuffle(&mut rng);
    }
    let shuffled = NeighborList::new(lists, nl.max_size()).unwrap();
    assert_eq!(out, aggregate_baseline(&cloud, &shuffled, &spec).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn output_widths_follow_the_weights(
        seed in any::<u64>(), n in 1usize..40, eta in 1usize..5, out in 1usize..6, phi in 1usize..4,
    ) {
        let cloud = featured_cloud(seed, n, eta);
        let nl = optimize(&cloud, &SmoothingConfig::new(0.5, 6)).unwrap().neighbors;
        let b = aggregate_baseline(&cloud, &nl, &AggregationSpec::random_baseline(eta, out, seed)).unwrap();
        prop_assert_eq!((b.rows(), b.cols()), (n, out));
        let e = enhanced(&cloud, &nl, &AggregationSpec::random_enhanced(eta, out, phi, seed));
        prop_assert_eq!((e.rows(), e.cols()), (n, out + phi));
        prop_assert!(b.is_finite() && e.is_finite());
    }

    #[test]
    fn wrong_feature_width_is_rejected(seed in any::<u64>(), n in 1usize..20, eta in 1usize..5) {
        let cloud = featured_cloud(seed, n, eta);
        let nl = NeighborList::new((0..n).map(|i| vec![i]).collect(), 1).unwrap();
        let spec = AggregationSpec::random_baseline(eta + 1, 3, seed);
        prop_assert!(aggregate_baseline(&cloud, &nl, &spec).is_err());
    }
}
