//! Radius-capped kNN neighborhoods, their binary adjacency, degree statistics
//! and farthest point sampling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, PointCloud};
use crate::config::SmoothingConfig;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::neighbors::NeighborList;
use crate::par;
use crate::sparse::SparseAdjacency;

/// Ball query of point `i`: the points with `ρ_ij <= min(ρ_i(k), r)`, at most `k`
/// of them.
///
/// Ordered by `(distance, index)` ascending. The query point itself always comes
/// first, ahead of any duplicate at distance zero, so the list always contains `i`.
pub fn ball_query(index: &SpatialIndex, i: usize, cfg: &SmoothingConfig) -> Vec<usize> {
    index
        .nearest_within(index.point(i), cfg.k, cfg.radius, Some(i))
        .into_iter()
        .map(|(j, _)| j)
        .collect()
}

/// Ball query neighborhoods `N(i)` for every point.
pub fn ball_query_all(index: &SpatialIndex, cfg: &SmoothingConfig) -> Result<NeighborList> {
    cfg.validate()?;
    let lists = par::map_indices(index.len(), |i| ball_query(index, i, cfg));
    NeighborList::new(lists, cfg.k)
}

/// Binary adjacency with `a_ij = 1` iff `p_j` is in the ball query of `p_i`.
///
/// Diagonal entries are always present. The result is generally asymmetric and
/// is not flagged symmetric.
pub fn build_adjacency(cloud: &PointCloud, cfg: &SmoothingConfig) -> Result<SparseAdjacency> {
    let index = SpatialIndex::build(cloud);
    Ok(ball_query_all(&index, cfg)?.to_adjacency())
}

/// min / max / mean / population standard deviation of a degree sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub stddev: f64,
}

impl Summary {
    pub fn of(values: &[usize]) -> Self {
        if values.is_empty() {
            return Self {
                min: 0,
                max: 0,
                mean: 0.0,
                stddev: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = values
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        Self {
            min: *values.iter().min().unwrap(),
            max: *values.iter().max().unwrap(),
            mean,
            stddev: var.sqrt(),
        }
    }
}

/// Per-point out/in degrees of a directed adjacency.
///
/// `out_degree[i]` is the nonzero count of row `i`, `in_degree[i]` that of column `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeReport {
    pub out_degree: Vec<usize>,
    pub in_degree: Vec<usize>,
    pub out_histogram: BTreeMap<usize, usize>,
    pub in_histogram: BTreeMap<usize, usize>,
    pub out_summary: Summary,
    pub in_summary: Summary,
}

impl DegreeReport {
    pub fn from_degrees(out_degree: Vec<usize>, in_degree: Vec<usize>) -> Self {
        Self {
            out_histogram: histogram(&out_degree),
            in_histogram: histogram(&in_degree),
            out_summary: Summary::of(&out_degree),
            in_summary: Summary::of(&in_degree),
            out_degree,
            in_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.out_degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_degree.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.out_degree.iter().sum()
    }
}

fn histogram(values: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

pub fn degree_report(adj: &SparseAdjacency) -> DegreeReport {
    let out = (0..adj.n()).map(|i| adj.row_nnz(i)).collect();
    DegreeReport::from_degrees(out, adj.column_counts())
}

/// Greedy max-min subset of size `m`, starting from `seed_index`.
///
/// Each step picks the point farthest from the already chosen set (ties go to
/// the smaller index). Distances to the set are cached, so the cost is `O(n·m)`.
pub fn farthest_point_sample(cloud: &PointCloud, m: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::out_of_range("sample size", format!("{m} not in 1..={n}")));
    }
    if seed_index >= n {
        return Err(Error::out_of_range("seed index", format!("{seed_index} >= {n}")));
    }
    let mut chosen = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut current = seed_index;
    loop {
        chosen.push(current);
        taken[current] = true;
        if chosen.len() == m {
            break;
        }
        let c = cloud.points[current];
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let d = dist2(&c, &cloud.points[j]);
            if d < nearest[j] {
                nearest[j] = d;
            }
            if best.is_none_or(|(_, b)| nearest[j] > b) {
                best = Some((j, nearest[j]));
            }
        }
        current = best.expect("m <= n leaves an untaken point").0;
    }
    Ok(chosen)
}
