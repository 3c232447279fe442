//! Fixed-weight neighbor aggregation.
//!
//! Baseline: `x_i' = pool_j σ(ψ([x_j ‖ p_i − p_j]))` over `j ∈ N(i)`.
//!
//! Enhanced: `x_i' = pool_j σ(ψ′([x_j ‖ p_i − p_j ‖ h′_j, ω′_j, cosθ_j])) ‖ φ(Λ_i)`
//! over the reselected neighborhoods, where `φ` is an affine map of the
//! eigenvalues. Both maps are plain matrices supplied by the caller.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Matrix, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{CylindricalCoords, LocalFrame};
use crate::neighbors::NeighborList;
use crate::par;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

/// Permutation-invariant reducer over a neighborhood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    #[default]
    Max,
    /// Mean with the values summed in ascending order, so it is order independent.
    Mean,
}

impl Pool {
    fn reduce(self, values: &mut [f64]) -> f64 {
        match self {
            Pool::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Pool::Mean => {
                values.sort_unstable_by(f64::total_cmp);
                values.iter().sum::<f64>() / values.len() as f64
            }
        }
    }
}

impl FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Pool::Max),
            "mean" => Ok(Pool::Mean),
            other => Err(Error::InvalidConfig(format!("unknown pooling `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Enhanced,
}

/// Weights and strategies for one aggregation stage.
///
/// `weight_psi` maps a per-neighbor input row to `η′` outputs and has `η + 3`
/// rows (baseline) or `η + 6` rows (enhanced). In enhanced mode `weight_phi`
/// (3 × η_φ) maps the eigenvalues to the shape branch.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregationSpec {
    pub mode: Mode,
    pub weight_psi: Matrix,
    pub bias_psi: Option<Vec<f64>>,
    pub weight_phi: Option<Matrix>,
    pub bias_phi: Option<Vec<f64>>,
    pub activation: Activation,
    pub pool: Pool,
}

impl AggregationSpec {
    pub fn baseline(weight_psi: Matrix, bias_psi: Option<Vec<f64>>) -> Result<Self> {
        let spec = Self {
            mode: Mode::Baseline,
            weight_psi,
            bias_psi,
            weight_phi: None,
            bias_phi: None,
            activation: Activation::default(),
            pool: Pool::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn enhanced(
        weight_psi: Matrix,
        bias_psi: Option<Vec<f64>>,
        weight_phi: Matrix,
        bias_phi: Option<Vec<f64>>,
    ) -> Result<Self> {
        let spec = Self {
            mode: Mode::Enhanced,
            weight_psi,
            bias_psi,
            weight_phi: Some(weight_phi),
            bias_phi,
            activation: Activation::default(),
            pool: Pool::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Seeded uniform weights in `[-1/√fan_in, 1/√fan_in]` for a baseline spec.
    pub fn random_baseline(feature_width: usize, out_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_matrix(&mut rng, feature_width + 3, out_width);
        let bias = random_vec(&mut rng, out_width, feature_width + 3);
        Self::baseline(psi, Some(bias)).expect("shapes are consistent by construction")
    }

    /// Seeded uniform weights for an enhanced spec.
    pub fn random_enhanced(feature_width: usize, out_width: usize, phi_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_matrix(&mut rng, feature_width + 6, out_width);
        let bias = random_vec(&mut rng, out_width, feature_width + 6);
        let phi = random_matrix(&mut rng, 3, phi_width);
        let phi_bias = random_vec(&mut rng, phi_width, 3);
        Self::enhanced(psi, Some(bias), phi, Some(phi_bias)).expect("shapes are consistent by construction")
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_pool(mut self, pool: Pool) -> Self {
        self.pool = pool;
        self
    }

    /// Width `η` of the point features these weights expect.
    pub fn feature_width(&self) -> usize {
        let geometric = match self.mode {
            Mode::Baseline => 3,
            Mode::Enhanced => 6,
        };
        self.weight_psi.rows().saturating_sub(geometric)
    }

    pub fn out_width(&self) -> usize {
        self.weight_psi.cols()
    }

    pub fn phi_width(&self) -> usize {
        self.weight_phi.as_ref().map_or(0, Matrix::cols)
    }

    pub fn validate(&self) -> Result<()> {
        let geometric = match self.mode {
            Mode::Baseline => 3,
            Mode::Enhanced => 6,
        };
        if self.weight_psi.rows() <= geometric || self.weight_psi.cols() == 0 {
            return Err(Error::InvalidConfig(format!(
                "psi weights must be (η + {geometric}) × η′ with η, η′ >= 1, got {} × {}",
                self.weight_psi.rows(),
                self.weight_psi.cols()
            )));
        }
        check_bias(&self.bias_psi, self.weight_psi.cols(), "psi bias")?;
        match (self.mode, &self.weight_phi) {
            (Mode::Baseline, Some(_)) => {
                return Err(Error::InvalidConfig("baseline mode takes no phi weights".into()))
            }
            (Mode::Enhanced, None) => {
                return Err(Error::InvalidConfig("enhanced mode needs phi weights".into()))
            }
            (Mode::Enhanced, Some(phi)) => {
                if phi.rows() != 3 || phi.cols() == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "phi weights must be 3 × η_φ, got {} × {}",
                        phi.rows(),
                        phi.cols()
                    )));
                }
                check_bias(&self.bias_phi, phi.cols(), "phi bias")?;
            }
            (Mode::Baseline, None) => {}
        }
        let finite = self.weight_psi.is_finite()
            && self.weight_phi.as_ref().is_none_or(Matrix::is_finite)
            && [&self.bias_psi, &self.bias_phi]
                .iter()
                .all(|b| b.as_ref().is_none_or(|b| b.iter().all(|v| v.is_finite())));
        if !finite {
            return Err(Error::InvalidConfig("aggregation weights must be finite".into()));
        }
        Ok(())
    }
}

fn check_bias(bias: &Option<Vec<f64>>, width: usize, what: &'static str) -> Result<()> {
    match bias {
        Some(b) if b.len() != width => Err(Error::Shape {
            what,
            expected: width,
            found: b.len(),
        }),
        _ => Ok(()),
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// `out = bias + inputᵀ · weight`, accumulated over input rows in order.
fn affine(input: &[f64], weight: &Matrix, bias: Option<&[f64]>, out: &mut [f64]) {
    match bias {
        Some(b) => out.copy_from_slice(b),
        None => out.fill(0.0),
    }
    for (r, &x) in input.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(weight.row(r)) {
            *o += x * w;
        }
    }
}

fn cloud_features<'a>(cloud: &'a PointCloud, spec: &AggregationSpec) -> Result<&'a Matrix> {
    let features = cloud
        .features
        .as_ref()
        .ok_or_else(|| Error::InvalidCloud("aggregation needs per-point features".into()))?;
    if features.cols() != spec.feature_width() {
        return Err(Error::Shape {
            what: "point feature width",
            expected: spec.feature_width(),
            found: features.cols(),
        });
    }
    Ok(features)
}

fn check_neighbors(cloud: &PointCloud, neighbors: &NeighborList) -> Result<()> {
    if neighbors.len() != cloud.len() {
        return Err(Error::Shape {
            what: "neighbor list count",
            expected: cloud.len(),
            found: neighbors.len(),
        });
    }
    Ok(())
}

/// Pools `σ(ψ(input_j))` over the neighbors of one point into `out`.
fn pool_row(
    spec: &AggregationSpec,
    inputs: impl Iterator<Item = Vec<f64>>,
    count: usize,
    out: &mut [f64],
) {
    let width = spec.out_width();
    let mut activated = vec![0.0; width * count];
    let mut buf = vec![0.0; width];
    for (slot, input) in inputs.enumerate() {
        affine(&input, &spec.weight_psi, spec.bias_psi.as_deref(), &mut buf);
        for (c, v) in buf.iter().enumerate() {
            activated[c * count + slot] = spec.activation.apply(*v);
        }
    }
    for (c, o) in out.iter_mut().enumerate() {
        *o = spec.pool.reduce(&mut activated[c * count..(c + 1) * count]);
    }
}

/// Baseline aggregation; returns an `n × η′` matrix.
pub fn aggregate_baseline(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    spec: &AggregationSpec,
) -> Result<Matrix> {
    if spec.mode != Mode::Baseline {
        return Err(Error::InvalidConfig("aggregation weights are not in baseline mode".into()));
    }
    spec.validate()?;
    let features = cloud_features(cloud, spec)?;
    check_neighbors(cloud, neighbors)?;
    let width = spec.out_width();
    let rows = par::map_indices(cloud.len(), |i| {
        let p_i = cloud.point(i);
        let list = neighbors.get(i);
        let inputs = list.iter().map(|&j| {
            let rel = p_i - cloud.point(j);
            let mut input = features.row(j).to_vec();
            input.extend_from_slice(&[rel.x, rel.y, rel.z]);
            input
        });
        let mut out = vec![0.0; width];
        pool_row(spec, inputs, list.len(), &mut out);
        out
    });
    Ok(Matrix::from_vec(cloud.len(), width, rows.concat()).expect("every row has width η′"))
}

/// Enhanced aggregation; returns an `n × (η′ + η_φ)` matrix.
///
/// `frames[i]` and `cyl[i]` must come from `neighbors.get(i)`; the cylindrical
/// entries are matched to neighbors by index.
pub fn aggregate_enhanced(
    cloud: &PointCloud,
    neighbors: &NeighborList,
    frames: &[LocalFrame],
    cyl: &[CylindricalCoords],
    spec: &AggregationSpec,
) -> Result<Matrix> {
    if spec.mode != Mode::Enhanced {
        return Err(Error::InvalidConfig("aggregation weights are not in enhanced mode".into()));
    }
    spec.validate()?;
    let features = cloud_features(cloud, spec)?;
    check_neighbors(cloud, neighbors)?;
    for (what, len) in [("frame count", frames.len()), ("cylindrical count", cyl.len())] {
        if len != cloud.len() {
            return Err(Error::Shape {
                what,
                expected: cloud.len(),
                found: len,
            });
        }
    }
    let phi = spec.weight_phi.as_ref().expect("validated enhanced spec");
    let (width, phi_width) = (spec.out_width(), phi.cols());
    let rows: Vec<Result<Vec<f64>>> = par::map_indices(cloud.len(), |i| {
        let list = neighbors.get(i);
        let coords = &cyl[i];
        if coords.query != i || coords.entries.len() != list.len() || frames[i].support != list.len() {
            return Err(Error::Shape {
                what: "geometry alignment with neighborhood",
                expected: list.len(),
                found: coords.entries.len(),
            });
        }
        let mut by_index: Vec<(usize, [f64; 3])> =
            coords.entries.iter().map(|e| (e.index, e.normalized())).collect();
        by_index.sort_unstable_by_key(|e| e.0);
        let mut triples = Vec::with_capacity(list.len());
        for &j in list {
            let k = by_index
                .binary_search_by_key(&j, |e| e.0)
                .map_err(|_| Error::Invariant(format!("no cylindrical entry for neighbor {j} of {i}")))?;
            triples.push(by_index[k].1);
        }
        let p_i = cloud.point(i);
        let inputs = list.iter().zip(&triples).map(|(&j, t)| {
            let rel = p_i - cloud.point(j);
            let mut input = features.row(j).to_vec();
            input.extend_from_slice(&[rel.x, rel.y, rel.z]);
            input.extend_from_slice(t);
            input
        });
        let mut out = vec![0.0; width + phi_width];
        pool_row(spec, inputs, list.len(), &mut out[..width]);
        affine(
            &frames[i].eigenvalues,
            phi,
            spec.bias_phi.as_deref(),
            &mut out[width..],
        );
        Ok(out)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_vec(cloud.len(), width + phi_width, rows.concat()).expect("uniform rows"))
}
