//! Per-neighborhood covariance frames and the features derived from them.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::neighbors::NeighborList;
use crate::par;

/// Eigen-decomposition of a neighborhood covariance.
///
/// Eigenvalues are descending and clamped at zero. Eigenvector columns are
/// orthonormal and each has its largest-magnitude component positive (ties go
/// to the earliest axis).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFrame {
    pub eigenvalues: [f64; 3],
    /// Columns `v1, v2, v3`, matching `eigenvalues`.
    pub eigenvectors: Matrix3<f64>,
    pub centroid: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    /// Number of eigenvalues at or below `eps · λ1` (all three when `λ1 = 0`).
    pub degenerate_rank: u8,
    /// Size of the neighborhood the frame was computed from.
    pub support: usize,
    pub eps: f64,
}

impl LocalFrame {
    pub fn axis(&self, a: usize) -> Vector3<f64> {
        self.eigenvectors.column(a).into_owned()
    }
}

/// Covariance `C = (1/m) Σ (p_j − c)(p_j − c)ᵀ` about the neighborhood centroid
/// `c`, and its eigen-decomposition.
///
/// Directions whose eigenvalue is at or below `eps · λ1` are not determined by
/// the data; they are rebuilt by Gram-Schmidt against the canonical axes. The
/// sums run over the indices in sorted order, so the frame does not depend on
/// the order of `neighborhood`.
pub fn local_frame(cloud: &PointCloud, neighborhood: &[usize], eps: f64) -> Result<LocalFrame> {
    if neighborhood.is_empty() {
        return Err(Error::InvalidCloud("local frame of an empty neighborhood".into()));
    }
    let n = cloud.len();
    if let Some(&bad) = neighborhood.iter().find(|&&j| j >= n) {
        return Err(Error::out_of_range("neighbor index", format!("{bad} >= {n}")));
    }
    let mut sorted = neighborhood.to_vec();
    sorted.sort_unstable();
    let m = sorted.len() as f64;

    let mut centroid = Vector3::zeros();
    for &j in &sorted {
        centroid += cloud.point(j).coords;
    }
    centroid /= m;

    let mut cov = Matrix3::zeros();
    for &j in &sorted {
        let d = cloud.point(j).coords - centroid;
        cov += d * d.transpose();
    }
    cov /= m;
    // Exact symmetry for the solver.
    cov = (cov + cov.transpose()) * 0.5;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.map(|a| eig.eigenvalues[a].max(0.0));

    let threshold = eps * eigenvalues[0];
    let determined = if eigenvalues[0] <= 0.0 {
        0
    } else {
        eigenvalues.iter().filter(|&&l| l > threshold).count()
    };

    let mut basis: Vec<Vector3<f64>> = Vec::with_capacity(3);
    for &a in order.iter().take(determined) {
        let mut v: Vector3<f64> = eig.eigenvectors.column(a).into_owned();
        for b in &basis {
            v -= *b * b.dot(&v);
        }
        basis.push(canonical_sign(v.normalize()));
    }
    complete_basis(&mut basis);

    Ok(LocalFrame {
        eigenvalues,
        eigenvectors: Matrix3::from_columns(&basis),
        centroid,
        covariance: cov,
        degenerate_rank: (3 - determined) as u8,
        support: sorted.len(),
        eps,
    })
}

/// Flips `v` so that its largest-magnitude component is positive.
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut lead = 0;
    for a in 1..3 {
        if v[a].abs() > v[lead].abs() {
            lead = a;
        }
    }
    if v[lead] < 0.0 {
        -v
    } else {
        v
    }
}

/// Extends an orthonormal set to three vectors using the canonical axis with
/// the largest residual at each step (earliest axis on ties).
fn complete_basis(basis: &mut Vec<Vector3<f64>>) {
    while basis.len() < 3 {
        let mut best: Option<(Vector3<f64>, f64)> = None;
        for axis in 0..3 {
            let mut r = Vector3::zeros();
            r[axis] = 1.0;
            for b in basis.iter() {
                r -= *b * b.dot(&r);
            }
            let norm = r.norm();
            if best.is_none_or(|(_, bn)| norm > bn) {
                best = Some((r, norm));
            }
        }
        let (r, norm) = best.unwrap();
        basis.push(canonical_sign(r / norm));
    }
}

/// Local frames over every neighborhood of `neighbors`.
pub fn local_frames(cloud: &PointCloud, neighbors: &NeighborList, eps: f64) -> Result<Vec<LocalFrame>> {
    par::map_indices(neighbors.len(), |i| local_frame(cloud, neighbors.get(i), eps))
        .into_iter()
        .collect()
}

/// Classical eigenvalue descriptors plus the raw eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    pub linearity: f64,
    pub planarity: f64,
    pub sphericity: f64,
    pub eigenvalues: [f64; 3],
}

/// `((λ1−λ2)/λ1, (λ2−λ3)/λ1, λ3/λ1)`; all zero when `λ1 <= eps`.
pub fn shape_descriptors(frame: &LocalFrame) -> ShapeDescriptors {
    let [l1, l2, l3] = frame.eigenvalues;
    if l1 <= frame.eps {
        return ShapeDescriptors {
            linearity: 0.0,
            planarity: 0.0,
            sphericity: 0.0,
            eigenvalues: frame.eigenvalues,
        };
    }
    ShapeDescriptors {
        linearity: (l1 - l2) / l1,
        planarity: (l2 - l3) / l1,
        sphericity: l3 / l1,
        eigenvalues: frame.eigenvalues,
    }
}

/// Cylindrical coordinates of one neighbor about the principal axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylindricalEntry {
    pub index: usize,
    /// Axial coordinate `Δp·v1`.
    pub h: f64,
    /// Radial distance from the principal axis.
    pub omega: f64,
    pub cos_theta: f64,
    /// `h / max |h|` over the neighborhood.
    pub h_norm: f64,
    /// `omega / max omega` over the neighborhood.
    pub omega_norm: f64,
}

impl CylindricalEntry {
    /// The normalized triple `(h′, ω′, cosθ)`.
    pub fn normalized(&self) -> [f64; 3] {
        [self.h_norm, self.omega_norm, self.cos_theta]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylindricalCoords {
    pub query: usize,
    /// One entry per neighbor, in neighborhood order.
    pub entries: Vec<CylindricalEntry>,
}

/// Projects `Δp_j = p_j − p_i` onto `(v2, v3, v1)` giving `(x′, y′, z′)`, then
/// `h = z′`, `ω = √(x′² + y′²)`, `cosθ = x′/ω` (1 when `ω < eps`).
/// `h′ = h / max|h|` and `ω′ = ω / max ω`, each 0 when its maximum is below `eps`.
pub fn cylindrical_transform(
    cloud: &PointCloud,
    i: usize,
    neighborhood: &[usize],
    frame: &LocalFrame,
    eps: f64,
) -> Result<CylindricalCoords> {
    if neighborhood.len() != frame.support {
        return Err(Error::Shape {
            what: "cylindrical transform neighborhood vs frame support",
            expected: frame.support,
            found: neighborhood.len(),
        });
    }
    let n = cloud.len();
    if i >= n {
        return Err(Error::out_of_range("query index", format!("{i} >= {n}")));
    }
    let mut centroid = Vector3::zeros();
    for &j in neighborhood {
        if j >= n {
            return Err(Error::out_of_range("neighbor index", format!("{j} >= {n}")));
        }
        centroid += cloud.point(j).coords;
    }
    centroid /= neighborhood.len() as f64;
    let scale = frame.eigenvalues[0].sqrt().max(centroid.amax()).max(1.0);
    if (centroid - frame.centroid).amax() > 1e-9 * scale {
        return Err(Error::Invariant(format!(
            "frame of point {i} was computed from a different neighborhood"
        )));
    }

    let (v1, v2, v3) = (frame.axis(0), frame.axis(1), frame.axis(2));
    let origin = cloud.point(i).coords;
    let mut entries: Vec<CylindricalEntry> = neighborhood
        .iter()
        .map(|&j| {
            let d = cloud.point(j).coords - origin;
            let (x, y, z) = (d.dot(&v2), d.dot(&v3), d.dot(&v1));
            let omega = (x * x + y * y).sqrt();
            let cos_theta = if omega < eps {
                1.0
            } else {
                (x / omega).clamp(-1.0, 1.0)
            };
            CylindricalEntry {
                index: j,
                h: z,
                omega,
                cos_theta,
                h_norm: 0.0,
                omega_norm: 0.0,
            }
        })
        .collect();

    let h_max = entries.iter().map(|e| e.h.abs()).fold(0.0, f64::max);
    let w_max = entries.iter().map(|e| e.omega).fold(0.0, f64::max);
    for e in &mut entries {
        e.h_norm = if h_max < eps { 0.0 } else { e.h / h_max };
        e.omega_norm = if w_max < eps { 0.0 } else { e.omega / w_max };
    }
    Ok(CylindricalCoords { query: i, entries })
}

/// Cylindrical coordinates for every neighborhood, using the matching frames.
pub fn cylindrical_all(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    frames: &[LocalFrame],
    eps: f64,
) -> Result<Vec<CylindricalCoords>> {
    if frames.len() != neighbors.len() {
        return Err(Error::Shape {
            what: "frame count",
            expected: neighbors.len(),
            found: frames.len(),
        });
    }
    par::map_indices(neighbors.len(), |i| {
        cylindrical_transform(cloud, i, neighbors.get(i), &frames[i], eps)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EPS: f64 = 1e-9;

    #[test]
    fn singleton_has_zero_spectrum_and_identity_frame() {
        let cloud = PointCloud::from_xyz(&[[0.3, -1.0, 2.0]]).unwrap();
        let f = local_frame(&cloud, &[0], EPS).unwrap();
        assert_eq!(f.eigenvalues, [0.0; 3]);
        assert_eq!(f.eigenvectors, Matrix3::identity());
        assert_eq!(f.degenerate_rank, 3);
    }

    #[test]
    fn planar_points_give_positive_z_normal() {
        let cloud = PointCloud::from_xyz(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.2, 0.0],
            [-0.4, 1.0, 0.0],
            [0.5, -0.7, 0.0],
            [2.0, 1.0, 0.0],
        ])
        .unwrap();
        let f = local_frame(&cloud, &[0, 1, 2, 3, 4], EPS).unwrap();
        assert_eq!(f.eigenvalues[2], 0.0);
        assert_eq!(f.degenerate_rank, 1);
        assert_abs_diff_eq!(f.axis(2), Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn collinear_points_give_axis_aligned_frame() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]).unwrap();
        let f = local_frame(&cloud, &[0, 1, 2], EPS).unwrap();
        assert_eq!(f.degenerate_rank, 2);
        assert_abs_diff_eq!(f.axis(0), Vector3::x(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.axis(1), Vector3::y(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.axis(2), Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn frame_ignores_neighborhood_order() {
        let cloud = PointCloud::from_xyz(&[
            [0.1, 0.3, 0.0],
            [1.0, 0.2, 0.7],
            [-0.4, 1.0, 0.2],
            [0.5, -0.7, 0.9],
        ])
        .unwrap();
        let a = local_frame(&cloud, &[0, 1, 2, 3], EPS).unwrap();
        let b = local_frame(&cloud, &[3, 1, 0, 2], EPS).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn descriptor_examples() {
        let mut f = local_frame(&PointCloud::from_xyz(&[[0.0; 3]]).unwrap(), &[0], EPS).unwrap();
        let check = |f: &LocalFrame, expected: [f64; 3]| {
            let d = shape_descriptors(f);
            assert_abs_diff_eq!(d.linearity, expected[0], epsilon = 1e-15);
            assert_abs_diff_eq!(d.planarity, expected[1], epsilon = 1e-15);
            assert_abs_diff_eq!(d.sphericity, expected[2], epsilon = 1e-15);
        };
        check(&f, [0.0, 0.0, 0.0]);
        f.eigenvalues = [1.0, 0.0, 0.0];
        check(&f, [1.0, 0.0, 0.0]);
        f.eigenvalues = [1.0, 1.0, 1.0];
        check(&f, [0.0, 0.0, 1.0]);
        f.eigenvalues = [4.0, 2.0, 1.0];
        check(&f, [0.5, 0.25, 0.25]);
    }

    fn frame_with_axes(cloud: &PointCloud, nbhd: &[usize], axes: Matrix3<f64>) -> LocalFrame {
        let mut f = local_frame(cloud, nbhd, EPS).unwrap();
        f.eigenvectors = axes;
        f
    }

    #[test]
    fn axial_and_radial_neighbors() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.25], [0.0, 0.25, 0.0]]).unwrap();
        // v1 = z, v2 = y, v3 = x
        let axes = Matrix3::from_columns(&[Vector3::z(), Vector3::y(), Vector3::x()]);
        let f = frame_with_axes(&cloud, &[0, 1, 2], axes);
        let c = cylindrical_transform(&cloud, 0, &[0, 1, 2], &f, EPS).unwrap();
        let [own, axial, radial] = [c.entries[0], c.entries[1], c.entries[2]];
        assert_eq!((own.h, own.omega, own.cos_theta), (0.0, 0.0, 1.0));
        assert_eq!((axial.h, axial.omega, axial.cos_theta), (0.25, 0.0, 1.0));
        assert_eq!((radial.h, radial.omega, radial.cos_theta), (0.0, 0.25, 1.0));
        assert_eq!(axial.h_norm, 1.0);
        assert_eq!(radial.omega_norm, 1.0);
    }

    #[test]
    fn mismatched_frame_is_rejected() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let f = local_frame(&cloud, &[0, 1], EPS).unwrap();
        assert!(cylindrical_transform(&cloud, 0, &[0, 1, 2], &f, EPS).is_err());
        assert!(cylindrical_transform(&cloud, 0, &[0, 2], &f, EPS).is_err());
        cylindrical_transform(&cloud, 0, &[1, 0], &f, EPS).unwrap();
    }
}
