//! Brute-force references shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Point3, Rotation3, Vector3};
use pcgraph::{Matrix, PointCloud, SparseAdjacency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in `[-scale, scale]³`. With `grid > 0`, coordinates are
/// snapped to multiples of `scale / grid`, producing exact distance ties and
/// coincident points.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, scale: f64, grid: u32) -> PointCloud {
    let mut coord = || {
        let v: f64 = rng.gen_range(-scale..=scale);
        if grid > 0 {
            let step = scale / grid as f64;
            (v / step).round() * step
        } else {
            v
        }
    };
    let points = (0..n).map(|_| Point3::new(coord(), coord(), coord())).collect();
    PointCloud::new(points, None).unwrap()
}

pub fn sq_dist(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    dx * dx + dy * dy + dz * dz
}

/// Ball query by exhaustive scan: every point within `r`, ordered by distance
/// with the query point ahead of its duplicates and index breaking other ties,
/// truncated to `k`.
pub fn brute_ball_query(cloud: &PointCloud, i: usize, r: f64, k: usize) -> Vec<usize> {
    let p = cloud.point(i);
    let mut inside: Vec<(f64, bool, usize)> = (0..cloud.len())
        .map(|j| (sq_dist(p, cloud.point(j)), j != i, j))
        .filter(|(d2, _, _)| *d2 <= r * r)
        .collect();
    inside.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    inside.truncate(k);
    inside.into_iter().map(|e| e.2).collect()
}

/// Random binary directed graph; `self_loops` forces every diagonal entry on.
pub fn random_binary(rng: &mut ChaCha8Rng, n: usize, p: f64, self_loops: bool) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if (i == j && self_loops) || rng.gen_bool(p) {
            1.0
        } else {
            0.0
        }
    })
}

pub fn symmetric_binary(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        for j in 0..i {
            if rng.gen_bool(p) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

pub fn to_sparse(a: &DMatrix<f64>, symmetric: bool) -> SparseAdjacency {
    let rows = (0..a.nrows())
        .map(|i| {
            (0..a.ncols())
                .filter(|&j| a[(i, j)] != 0.0)
                .map(|j| (j, a[(i, j)]))
                .collect()
        })
        .collect();
    SparseAdjacency::from_rows(a.nrows(), rows, symmetric).unwrap()
}

pub fn to_dense(a: &SparseAdjacency) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.n(), a.n());
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            d[(i, j)] = w;
        }
    }
    d
}

/// `⌊(A + Aᵀ)/2⌋` entry by entry.
pub fn dense_floor_refine(a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| ((a[(i, j)] + a[(j, i)]) / 2.0).floor())
}

/// `D^{-1/2} A D^{-1/2}` with `d_i` the number of nonzeros in row `i`.
pub fn dense_normalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let deg: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| a[(i, j)] != 0.0).count() as f64)
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        if a[(i, j)] == 0.0 {
            0.0
        } else {
            a[(i, j)] / (deg[i] * deg[j]).sqrt()
        }
    })
}

/// `Σ_{t=0}^{order} (α Ã)^t` by explicit dense powers.
pub fn dense_power_sum(a: &DMatrix<f64>, alpha: f64, order: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let scaled = a * alpha;
    let mut power = DMatrix::identity(n, n);
    let mut sum = power.clone();
    for _ in 0..order {
        power = &scaled * &power;
        sum += &power;
    }
    sum
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Infinity norm: largest absolute row sum.
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Centroid-centred covariance with `1/m` normalization, plain loops.
pub fn covariance(points: &[Point3<f64>]) -> Matrix3<f64> {
    let m = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    for v in &mut c {
        *v /= m;
    }
    let mut cov = Matrix3::zeros();
    for p in points {
        for a in 0..3 {
            for b in 0..3 {
                cov[(a, b)] += (p[a] - c[a]) * (p[b] - c[b]);
            }
        }
    }
    cov / m
}

/// Eigenvalues of a symmetric 3×3 matrix from the closed-form roots of its
/// characteristic cubic (trigonometric form), descending.
pub fn cubic_eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = b.determinant() / 2.0;
    let phi = if r <= -1.0 {
        std::f64::consts::PI / 3.0
    } else if r >= 1.0 {
        0.0
    } else {
        r.acos() / 3.0
    };
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// `xᵀW + b` with plain loops.
pub fn naive_affine(x: &[f64], w: &Matrix, b: Option<&[f64]>) -> Vec<f64> {
    (0..w.cols())
        .map(|c| {
            let mut acc = b.map_or(0.0, |b| b[c]);
            for (r, xv) in x.iter().enumerate() {
                acc += xv * w.get(r, c);
            }
            acc
        })
        .collect()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    use std::f64::consts::PI;
    Rotation3::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI))
}

/// Randomly rotated anisotropic box sample around a random centre.
pub fn random_neighborhood(rng: &mut ChaCha8Rng, m: usize) -> Vec<Point3<f64>> {
    let centre = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let scales = [rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)];
    let rot = random_rotation(rng);
    (0..m)
        .map(|_| {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0) * scales[0],
                rng.gen_range(-1.0..1.0) * scales[1],
                rng.gen_range(-1.0..1.0) * scales[2],
            );
            Point3::from(centre + rot * v)
        })
        .collect()
}

fn relu_max_into(pooled: &mut [f64], values: Vec<f64>) {
    for (slot, v) in pooled.iter_mut().zip(values) {
        *slot = slot.max(v.max(0.0));
    }
}

/// Baseline aggregation by a per-neighbor double loop: max over `j` of
/// `ReLU(ψ([x_j ‖ p_i − p_j]))`.
pub fn naive_baseline(cloud: &PointCloud, lists: &[Vec<usize>], w: &Matrix, b: Option<&[f64]>) -> Vec<Vec<f64>> {
    let f = cloud.features.as_ref().unwrap();
    (0..cloud.len())
        .map(|i| {
            let mut pooled = vec![f64::NEG_INFINITY; w.cols()];
            for &j in &lists[i] {
                let (pi, pj) = (cloud.point(i), cloud.point(j));
                let mut x = f.row(j).to_vec();
                x.extend([pi.x - pj.x, pi.y - pj.y, pi.z - pj.z]);
                relu_max_into(&mut pooled, naive_affine(&x, w, b));
            }
            pooled
        })
        .collect()
}

/// Enhanced aggregation by plain loops. Frames come in as `(Λ, [v1, v2, v3])`
/// so this function never touches the cylindrical transform under test.
pub fn naive_enhanced(
    cloud: &PointCloud,
    lists: &[Vec<usize>],
    frames: &[([f64; 3], [Vector3<f64>; 3])],
    psi: (&Matrix, Option<&[f64]>),
    phi: (&Matrix, Option<&[f64]>),
    eps: f64,
) -> Vec<Vec<f64>> {
    let f = cloud.features.as_ref().unwrap();
    (0..cloud.len())
        .map(|i| {
            let pi = cloud.point(i);
            let (lambda, [v1, v2, v3]) = &frames[i];
            let raw: Vec<(f64, f64, f64)> = lists[i]
                .iter()
                .map(|&j| {
                    let d = cloud.point(j) - pi;
                    let (x, y, z) = (d.dot(v2), d.dot(v3), d.dot(v1));
                    let w = (x * x + y * y).sqrt();
                    (z, w, if w < eps { 1.0 } else { x / w })
                })
                .collect();
            let h_max = raw.iter().map(|r| r.0.abs()).fold(0.0, f64::max);
            let w_max = raw.iter().map(|r| r.1).fold(0.0, f64::max);
            let mut pooled = vec![f64::NEG_INFINITY; psi.0.cols()];
            for (&j, &(h, w, cos)) in lists[i].iter().zip(&raw) {
                let pj = cloud.point(j);
                let mut x = f.row(j).to_vec();
                x.extend([pi.x - pj.x, pi.y - pj.y, pi.z - pj.z]);
                x.push(if h_max < eps { 0.0 } else { h / h_max });
                x.push(if w_max < eps { 0.0 } else { w / w_max });
                x.push(cos);
                relu_max_into(&mut pooled, naive_affine(&x, psi.0, psi.1));
            }
            pooled.extend(naive_affine(lambda, phi.0, phi.1));
            pooled
        })
        .collect()
}
