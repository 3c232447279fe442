//! Deterministic synthetic clouds.
//!
//! All fixtures fit in the unit ball, so the default radius of 0.1 gives
//! neighborhoods of a few dozen points at `n = 2048`. Sampling uses ChaCha8,
//! which produces the same stream on every platform.

use std::fmt;
use std::str::FromStr;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const MIN_FIXTURE_POINTS: usize = 8;

const FUSELAGE_RADIUS: f64 = 0.1;
const FUSELAGE_HALF_LENGTH: f64 = 0.8;
const WING_HALF_CHORD: f64 = 0.15;
const WING_HALF_SPAN: f64 = 0.8;
const TAIL_X: (f64, f64) = (0.6, 0.75);
const STABILIZER_HALF_SPAN: f64 = 0.3;
const FIN_TOP: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    Plane,
    Sphere,
    Cylinder,
    TwoPlanesCross,
    AirplaneLike,
}

impl FixtureKind {
    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::Plane => "plane",
            FixtureKind::Sphere => "sphere",
            FixtureKind::Cylinder => "cylinder",
            FixtureKind::TwoPlanesCross => "two-planes-cross",
            FixtureKind::AirplaneLike => "airplane-like",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(FixtureKind::Plane),
            "sphere" => Ok(FixtureKind::Sphere),
            "cylinder" => Ok(FixtureKind::Cylinder),
            "two-planes-cross" => Ok(FixtureKind::TwoPlanesCross),
            "airplane-like" | "airplane" => Ok(FixtureKind::AirplaneLike),
            other => Err(Error::UnknownFixture(other.to_string())),
        }
    }
}

/// A sampled fixture with optional per-point annotations.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub cloud: PointCloud,
    /// Part label per point (two-planes-cross, airplane-like).
    pub labels: Option<Vec<u32>>,
    pub part_names: Vec<&'static str>,
    /// Distance to the nearest free edge of the point's surface patch
    /// (airplane-like: wing/tail tips and chords, fuselage ends).
    pub edge_distance: Option<Vec<f64>>,
    /// Distance to the line where two parts intersect (two-planes-cross).
    pub junction_distance: Option<Vec<f64>>,
}

struct Sample {
    point: Point3<f64>,
    label: u32,
    edge: f64,
    junction: f64,
}

/// Samples `n` points of the named fixture with the given seed.
pub fn make_fixture(kind: FixtureKind, n: usize, seed: u64) -> Result<Fixture> {
    if n < MIN_FIXTURE_POINTS {
        return Err(Error::InvalidConfig(format!(
            "fixtures need at least {MIN_FIXTURE_POINTS} points, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (samples, part_names): (Vec<Sample>, Vec<&'static str>) = match kind {
        FixtureKind::Plane => (plane(&mut rng, n), vec![]),
        FixtureKind::Sphere => (sphere(&mut rng, n), vec![]),
        FixtureKind::Cylinder => (cylinder(&mut rng, n), vec![]),
        FixtureKind::TwoPlanesCross => (two_planes(&mut rng, n), vec!["horizontal", "vertical"]),
        FixtureKind::AirplaneLike => (airplane(&mut rng, n), vec!["fuselage", "wing", "tail"]),
    };
    let labelled = !part_names.is_empty();
    let cloud = PointCloud::new(samples.iter().map(|s| s.point).collect(), None)?;
    Ok(Fixture {
        kind,
        cloud,
        labels: labelled.then(|| samples.iter().map(|s| s.label).collect()),
        part_names,
        edge_distance: (kind == FixtureKind::AirplaneLike)
            .then(|| samples.iter().map(|s| s.edge).collect()),
        junction_distance: (kind == FixtureKind::TwoPlanesCross)
            .then(|| samples.iter().map(|s| s.junction).collect()),
    })
}

fn unlabeled(point: Point3<f64>) -> Sample {
    Sample {
        point,
        label: 0,
        edge: f64::INFINITY,
        junction: f64::INFINITY,
    }
}

fn plane(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| unlabeled(Point3::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), 0.0)))
        .collect()
}

fn sphere(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    // Uniform on the sphere: z uniform, azimuth uniform.
    (0..n)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            unlabeled(Point3::new(rho * phi.cos(), rho * phi.sin(), z))
        })
        .collect()
}

fn cylinder(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = rng.gen_range(-0.5..0.5);
            unlabeled(Point3::new(0.4 * phi.cos(), 0.4 * phi.sin(), z))
        })
        .collect()
}

/// Planes `z = 0` (label 0) and `y = 0` (label 1) over `[-0.5, 0.5]²`,
/// crossing along the x axis.
fn two_planes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    let first = n / 2;
    (0..n)
        .map(|i| {
            let x = rng.gen_range(-0.5..0.5);
            let t: f64 = rng.gen_range(-0.5..0.5);
            let (point, label) = if i < first {
                (Point3::new(x, t, 0.0), 0)
            } else {
                (Point3::new(x, 0.0, t), 1)
            };
            Sample {
                point,
                label,
                edge: f64::INFINITY,
                junction: t.abs(),
            }
        })
        .collect()
}

/// Splits `n` across parts in proportion to `areas`; the remainder goes to the
/// largest parts first.
fn allocate(n: usize, areas: &[f64]) -> Vec<usize> {
    let total: f64 = areas.iter().sum();
    let mut counts: Vec<usize> = areas.iter().map(|a| (n as f64 * a / total).floor() as usize).collect();
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| areas[b].total_cmp(&areas[a]));
    let mut left = n - counts.iter().sum::<usize>();
    for &p in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[p] += 1;
        left -= 1;
    }
    counts
}

/// Open tube fuselage along x, a wing sheet through its middle at `z = 0`, and a
/// tail of horizontal stabilizer plus vertical fin. Labels: 0 fuselage, 1 wing, 2 tail.
fn airplane(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    let r = FUSELAGE_RADIUS;
    let tail_chord = TAIL_X.1 - TAIL_X.0;
    let areas = [
        std::f64::consts::TAU * r * 2.0 * FUSELAGE_HALF_LENGTH,
        2.0 * WING_HALF_CHORD * 2.0 * (WING_HALF_SPAN - r),
        tail_chord * 2.0 * (STABILIZER_HALF_SPAN - r),
        tail_chord * (FIN_TOP - r),
    ];
    let counts = allocate(n, &areas);
    let mut out = Vec::with_capacity(n);

    for _ in 0..counts[0] {
        let x: f64 = rng.gen_range(-FUSELAGE_HALF_LENGTH..FUSELAGE_HALF_LENGTH);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        out.push(Sample {
            point: Point3::new(x, r * phi.cos(), r * phi.sin()),
            label: 0,
            edge: FUSELAGE_HALF_LENGTH - x.abs(),
            junction: f64::INFINITY,
        });
    }
    for _ in 0..counts[1] {
        let x: f64 = rng.gen_range(-WING_HALF_CHORD..WING_HALF_CHORD);
        let span: f64 = rng.gen_range(r..WING_HALF_SPAN);
        let y = if rng.gen_bool(0.5) { span } else { -span };
        out.push(Sample {
            point: Point3::new(x, y, 0.0),
            label: 1,
            edge: (WING_HALF_CHORD - x.abs()).min(WING_HALF_SPAN - span),
            junction: span - r,
        });
    }
    for _ in 0..counts[2] {
        let x: f64 = rng.gen_range(TAIL_X.0..TAIL_X.1);
        let span: f64 = rng.gen_range(r..STABILIZER_HALF_SPAN);
        let y = if rng.gen_bool(0.5) { span } else { -span };
        out.push(Sample {
            point: Point3::new(x, y, 0.0),
            label: 2,
            edge: (x - TAIL_X.0).min(TAIL_X.1 - x).min(STABILIZER_HALF_SPAN - span),
            junction: span - r,
        });
    }
    for _ in 0..counts[3] {
        let x: f64 = rng.gen_range(TAIL_X.0..TAIL_X.1);
        let z: f64 = rng.gen_range(r..FIN_TOP);
        out.push(Sample {
            point: Point3::new(x, 0.0, z),
            label: 2,
            edge: (x - TAIL_X.0).min(TAIL_X.1 - x).min(FIN_TOP - z),
            junction: z - r,
        });
    }
    out
}
