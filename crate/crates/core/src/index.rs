//! Exact spatial queries over a static point set.
//!
//! A median-split kd-tree. Both query kinds are exact: radius queries return
//! precisely the points with `d² <= r²` and capped kNN queries return the
//! smallest keys under the ordering `(d², index)`. A query may name a
//! "self" index, which then ranks ahead of any other point at distance zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

use crate::cloud::{dist2, PointCloud};

const LEAF_SIZE: usize = 12;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    fn of<'a>(points: impl Iterator<Item = &'a Point3<f64>>) -> Self {
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        Self { min, max }
    }

    fn widest_axis(&self) -> usize {
        let ext = self.max - self.min;
        let mut axis = 0;
        for a in 1..3 {
            if ext[a] > ext[axis] {
                axis = a;
            }
        }
        axis
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    bounds: Aabb,
}

/// Heap entry ordered by `(d², rank)`; `rank` is 0 for the preferred self index.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    d2: f64,
    rank: usize,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.rank.cmp(&other.rank))
    }
}

fn rank_of(index: usize, self_index: Option<usize>) -> usize {
    if self_index == Some(index) {
        0
    } else {
        index + 1
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points.clone())
    }

    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        let bounds = Aabb::of(points.iter());
        let mut index = Self {
            perm: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
            bounds,
        };
        if !index.points.is_empty() {
            index.build_node(0, index.points.len());
        }
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = Aabb::of(self.perm[start..end].iter().map(|&i| &self.points[i])).widest_axis();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[self.perm[mid]][axis];
        // Placeholder; children are pushed after this node.
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn point(&self, i: usize) -> &Point3<f64> {
        &self.points[i]
    }

    /// All indices `j` with `‖p_j − p‖² <= r²`, ordered by `(d², j)`.
    pub fn radius_query(&self, p: &Point3<f64>, r: f64) -> Vec<usize> {
        let r2 = r * r;
        let mut hits = Vec::new();
        if !self.nodes.is_empty() {
            self.radius_rec(0, p, r2, &mut hits);
        }
        hits.sort_unstable();
        hits.into_iter().map(|c| c.index).collect()
    }

    fn radius_rec(&self, node: usize, p: &Point3<f64>, r2: f64, hits: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.perm[start..end] {
                    let d2 = dist2(p, &self.points[j]);
                    if d2 <= r2 {
                        hits.push(Candidate {
                            d2,
                            rank: j + 1,
                            index: j,
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = p[axis] - value;
                let plane2 = diff * diff;
                if diff <= 0.0 || plane2 <= r2 {
                    self.radius_rec(left, p, r2, hits);
                }
                if diff >= 0.0 || plane2 <= r2 {
                    self.radius_rec(right, p, r2, hits);
                }
            }
        }
    }

    /// The `k` nearest indices to `p`, ordered by `(d², j)`.
    pub fn knn_query(&self, p: &Point3<f64>, k: usize) -> Vec<usize> {
        self.nearest_within(p, k, f64::INFINITY, None)
            .into_iter()
            .map(|(j, _)| j)
            .collect()
    }

    /// Up to `k` points with `d² <= r²`, smallest `(d², rank)` first, returned as
    /// `(index, d²)` pairs. `self_index` (if any) ranks ahead of every other index.
    pub fn nearest_within(
        &self,
        p: &Point3<f64>,
        k: usize,
        r: f64,
        self_index: Option<usize>,
    ) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let r2 = r * r;
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, p, k, r2, self_index, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.index, c.d2))
            .collect()
    }

    fn knn_rec(
        &self,
        node: usize,
        p: &Point3<f64>,
        k: usize,
        r2: f64,
        self_index: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.perm[start..end] {
                    let d2 = dist2(p, &self.points[j]);
                    if d2 > r2 {
                        continue;
                    }
                    let cand = Candidate {
                        d2,
                        rank: rank_of(j, self_index),
                        index: j,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = p[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, p, k, r2, self_index, heap);
                // Visit on equality: a tie at the bound may still win on rank.
                let bound = if heap.len() < k { r2 } else { heap.peek().unwrap().d2 };
                if diff * diff <= bound {
                    self.knn_rec(far, p, k, r2, self_index, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect()
    }

    fn brute_sorted(points: &[Point3<f64>], p: &Point3<f64>) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let (dx, dy, dz) = (p.x - q.x, p.y - q.y, p.z - q.z);
                (dx * dx + dy * dy + dz * dz, j)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    #[test]
    fn singleton_cloud() {
        let idx = SpatialIndex::from_points(vec![Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(idx.radius_query(&Point3::new(1.0, 2.0, 3.0), 0.5), vec![0]);
        assert_eq!(idx.knn_query(&Point3::origin(), 3), vec![0]);
    }

    #[test]
    fn grid_spacing_radius_gives_six_connectivity() {
        let mut pts = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    pts.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let idx = SpatialIndex::from_points(pts.clone());
        for (i, p) in pts.iter().enumerate() {
            let got = idx.radius_query(p, 1.0);
            let axis_neighbors = pts
                .iter()
                .filter(|q| {
                    let d = (*q - p).abs();
                    d.x + d.y + d.z == 1.0
                })
                .count();
            assert_eq!(got.len(), axis_neighbors + 1, "point {i}");
            assert_eq!(got[0], i);
        }
        // The center point has all six axis neighbors.
        assert_eq!(idx.radius_query(&pts[13], 1.0).len(), 7);
    }

    #[test]
    fn random_queries_match_brute_force() {
        let pts = random_points(500, 3);
        let idx = SpatialIndex::from_points(pts.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q = Point3::new(rng.gen(), rng.gen(), rng.gen());
            let r: f64 = rng.gen_range(0.01..0.4);
            let k = rng.gen_range(1..40);
            let brute = brute_sorted(&pts, &q);
            let within: Vec<usize> = brute.iter().filter(|e| e.0 <= r * r).map(|e| e.1).collect();
            assert_eq!(idx.radius_query(&q, r), within);
            let knn: Vec<usize> = brute.iter().take(k).map(|e| e.1).collect();
            assert_eq!(idx.knn_query(&q, k), knn);
            let capped: Vec<usize> = within.iter().take(k).copied().collect();
            let got: Vec<usize> = idx.nearest_within(&q, k, r, None).into_iter().map(|e| e.0).collect();
            assert_eq!(got, capped);
        }
    }

    #[test]
    fn duplicates_break_ties_by_index_with_self_first() {
        let p = Point3::new(0.5, 0.5, 0.5);
        let pts = vec![p; 20];
        let idx = SpatialIndex::from_points(pts);
        assert_eq!(idx.knn_query(&p, 3), vec![0, 1, 2]);
        let got: Vec<usize> = idx.nearest_within(&p, 3, 1.0, Some(17)).into_iter().map(|e| e.0).collect();
        assert_eq!(got, vec![17, 0, 1]);
    }
}
