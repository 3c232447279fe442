//! Graph quality measures used by diagnostics and the pipeline manifest.

use crate::cloud::PointCloud;
use crate::index::SpatialIndex;
use crate::neighbors::NeighborList;

/// Fraction of `i`'s neighbors (itself excluded) carrying a different label.
/// Zero for a self-only list.
pub fn cross_label_fraction(list: &[usize], i: usize, labels: &[u32]) -> f64 {
    let others = list.iter().filter(|&&j| j != i);
    let total = others.clone().count();
    if total == 0 {
        return 0.0;
    }
    let cross = others.filter(|&&j| labels[j] != labels[i]).count();
    cross as f64 / total as f64
}

/// Mean [`cross_label_fraction`] over `points`; zero if `points` is empty.
pub fn mean_cross_label_fraction(neighbors: &NeighborList, labels: &[u32], points: &[usize]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points
        .iter()
        .map(|&i| cross_label_fraction(neighbors.get(i), i, labels))
        .sum::<f64>()
        / points.len() as f64
}

/// Points that have at least one differently labelled point within `radius`.
pub fn junction_band(cloud: &PointCloud, labels: &[u32], radius: f64) -> Vec<usize> {
    let index = SpatialIndex::build(cloud);
    (0..cloud.len())
        .filter(|&i| {
            index
                .radius_query(cloud.point(i), radius)
                .iter()
                .any(|&j| labels[j] != labels[i])
        })
        .collect()
}

/// Number of degrees strictly below `low` or strictly above `high`.
pub fn extreme_count(degrees: &[usize], low: usize, high: usize) -> usize {
    degrees.iter().filter(|&&d| d < low || d > high).count()
}

/// Extreme-degree thresholds for neighborhood size `k`, scaled from (20, 35) at k = 32.
pub fn extreme_thresholds(k: usize) -> (usize, usize) {
    let scale = k as f64 / 32.0;
    ((20.0 * scale).round() as usize, (35.0 * scale).round() as usize)
}
