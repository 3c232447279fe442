//! Point clouds and the small dense row-major matrix used for feature tables.

use std::fmt;

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix. Used for per-point features, aggregation
/// weights and aggregation outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row vectors; every row must have the same width.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::Shape {
                    what: "matrix row width",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// An ordered set of 3D points with optional per-point feature vectors.
///
/// Fields are public so that malformed clouds can be represented and reported
/// by [`validate_cloud`]; [`PointCloud::new`] is the checked constructor.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub features: Option<Matrix>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, features: Option<Matrix>) -> Result<Self> {
        let cloud = Self { points, features };
        let report = validate_cloud(&cloud);
        if report.is_ok() {
            Ok(cloud)
        } else {
            Err(Error::InvalidCloud(report.to_string()))
        }
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(
            coords.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect(),
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point3<f64> {
        &self.points[i]
    }

    pub fn feature_width(&self) -> Option<usize> {
        self.features.as_ref().map(Matrix::cols)
    }

    /// Copy of the cloud restricted to `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::out_of_range("point index", format!("{bad} >= {n}")));
        }
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let features = self.features.as_ref().map(|f| {
            let rows = indices.iter().map(|&i| f.row(i).to_vec()).collect();
            Matrix::from_rows(rows).expect("rows share the source width")
        });
        Self::new(points, features)
    }

    /// Returns the same cloud with `features` attached (or replaced).
    pub fn with_features(self, features: Matrix) -> Result<Self> {
        Self::new(self.points, Some(features))
    }
}

/// Squared Euclidean distance, accumulated as `dx² + dy² + dz²` in that order.
#[inline]
pub fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Empty,
    NonFiniteCoordinate { index: usize, axis: usize },
    FeatureRowCount { expected: usize, found: usize },
    ZeroFeatureWidth,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "cloud has no points"),
            Violation::NonFiniteCoordinate { index, axis } => {
                write!(f, "point {index}: non-finite coordinate on axis {axis}")
            }
            Violation::FeatureRowCount { expected, found } => {
                write!(f, "feature matrix has {found} rows, expected {expected}")
            }
            Violation::ZeroFeatureWidth => write!(f, "feature matrix has zero width"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every cloud invariant and reports all violations; never fails.
pub fn validate_cloud(cloud: &PointCloud) -> ValidationReport {
    let mut violations = Vec::new();
    if cloud.points.is_empty() {
        violations.push(Violation::Empty);
    }
    for (index, p) in cloud.points.iter().enumerate() {
        for axis in 0..3 {
            if !p[axis].is_finite() {
                violations.push(Violation::NonFiniteCoordinate { index, axis });
            }
        }
    }
    if let Some(features) = &cloud.features {
        if features.rows() != cloud.points.len() {
            violations.push(Violation::FeatureRowCount {
                expected: cloud.points.len(),
                found: features.rows(),
            });
        }
        if features.cols() == 0 {
            violations.push(Violation::ZeroFeatureWidth);
        }
    }
    ValidationReport { violations }
}
