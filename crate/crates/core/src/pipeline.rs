//! End-to-end run: construct → refine → smooth → geometry → aggregate, with
//! artifact files and a JSON manifest of their hashes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{aggregate_enhanced, AggregationSpec};
use crate::cloud::{dist2, PointCloud};
use crate::config::SmoothingConfig;
use crate::construct::{ball_query_all, degree_report, farthest_point_sample, DegreeReport, Summary};
use crate::error::{Error, Result};
use crate::fixtures::{make_fixture, FixtureKind};
use crate::geometry::{cylindrical_all, local_frames, shape_descriptors, CylindricalCoords, LocalFrame};
use crate::index::SpatialIndex;
use crate::io::{self, CloudFormat, ExportFormat, Table};
use crate::metrics::{extreme_count, extreme_thresholds, junction_band, mean_cross_label_fraction};
use crate::neighbors::NeighborList;
use crate::smooth::{
    boundary_junction_classify, reselect_neighborhoods, smooth, symmetric_normalize, symmetric_refine,
    NodeRole, SmoothedGraph,
};
use crate::sparse::{hex, SparseAdjacency};

pub const MANIFEST_FILE: &str = "manifest.json";
const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Construct,
    Refine,
    Smooth,
    Geometry,
    Aggregate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Construct,
        Stage::Refine,
        Stage::Smooth,
        Stage::Geometry,
        Stage::Aggregate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Construct => "construct",
            Stage::Refine => "refine",
            Stage::Smooth => "smooth",
            Stage::Geometry => "geometry",
            Stage::Aggregate => "aggregate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown stage `{s}`")))
    }
}

/// Parses a comma-separated stage list (or `all`). The list must be a prefix
/// of the pipeline order, since every stage consumes the previous one's output.
pub fn parse_stages(s: &str) -> Result<Vec<Stage>> {
    if s.trim() == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    let stages = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<Vec<Stage>>>()?;
    validate_stages(&stages)?;
    Ok(stages)
}

fn validate_stages(stages: &[Stage]) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::InvalidConfig("no stages selected".into()));
    }
    if stages.len() > Stage::ALL.len() || stages.iter().zip(Stage::ALL).any(|(a, b)| *a != b) {
        let names: Vec<_> = stages.iter().map(|s| s.name()).collect();
        return Err(Error::InvalidConfig(format!(
            "stages `{}` are not a prefix of construct,refine,smooth,geometry,aggregate",
            names.join(",")
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    File { path: PathBuf, format: CloudFormat },
    Fixture { kind: FixtureKind, n: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub smoothing: SmoothingConfig,
    pub stages: Vec<Stage>,
    pub out_dir: PathBuf,
    pub export_format: ExportFormat,
    /// Seeds fixture sampling and the aggregation weights.
    pub seed: u64,
    /// Farthest point sample to this many points before construction.
    pub downsample: Option<usize>,
    /// Points whose neighborhoods are dumped; all points when `None`.
    pub queries: Option<Vec<usize>>,
    pub psi_width: usize,
    pub phi_width: usize,
    /// Write wall-clock stage times into the manifest. Off by default because
    /// timings would make manifests differ from run to run.
    pub record_timings: bool,
}

impl PipelineConfig {
    pub fn new(input: InputSource, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            input,
            smoothing: SmoothingConfig::default(),
            stages: Stage::ALL.to_vec(),
            out_dir: out_dir.into(),
            export_format: ExportFormat::Csv,
            seed: 0,
            downsample: None,
            queries: None,
            psi_width: 32,
            phi_width: 16,
            record_timings: false,
        }
    }
}

/// The manifest's copy of the configuration. The output directory is left out
/// so that runs into different directories produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub smoothing: SmoothingConfig,
    pub stages: Vec<Stage>,
    pub export_format: ExportFormat,
    pub seed: u64,
    pub downsample: Option<usize>,
    pub queries: Option<Vec<usize>>,
    pub psi_width: usize,
    pub phi_width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub millis: u64,
    pub outputs: Vec<OutputRecord>,
}

/// Quality measures gathered along the way; absent when their stage did not run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub points: usize,
    pub extreme_thresholds: (usize, usize),
    pub raw_out_degree: Option<Summary>,
    pub raw_in_degree: Option<Summary>,
    pub raw_extreme_count: Option<usize>,
    pub boundary_like: Option<usize>,
    pub junction_like: Option<usize>,
    pub refined_degree: Option<Summary>,
    pub smoothed_nnz: Option<usize>,
    pub selection_in_degree: Option<Summary>,
    pub selection_extreme_count: Option<usize>,
    /// `1 − stddev(selection in-degree) / stddev(raw out-degree)`.
    pub degree_stddev_reduction: Option<f64>,
    /// `1 − stddev(selection in-degree) / stddev(raw in-degree)`: both sides count
    /// how many lists a point appears in.
    pub inclusion_stddev_reduction: Option<f64>,
    /// Raw in-degrees outside the extreme thresholds.
    pub raw_in_extreme_count: Option<usize>,
    pub junction_band_size: Option<usize>,
    pub raw_cross_label_fraction: Option<f64>,
    pub smoothed_cross_label_fraction: Option<f64>,
    /// `1 − smoothed / raw` cross-label fraction over the junction band.
    pub cross_label_reduction: Option<f64>,
    pub degenerate_frames: Option<usize>,
    /// Width of the aggregated output rows (`η′ + η_φ`).
    pub feature_width: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ConfigEcho,
    pub stages: Vec<StageRecord>,
    pub metrics: Metrics,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

struct Loaded {
    cloud: PointCloud,
    labels: Option<Vec<u32>>,
    description: String,
}

fn load_input(cfg: &PipelineConfig) -> Result<Loaded> {
    let mut loaded = match &cfg.input {
        InputSource::File { path, format } => Loaded {
            cloud: io::parse_cloud(path, *format)?,
            labels: None,
            description: format!("file:{}", path.display()),
        },
        InputSource::Fixture { kind, n } => {
            let f = make_fixture(*kind, *n, cfg.seed)?;
            Loaded {
                cloud: f.cloud,
                labels: f.labels,
                description: format!("fixture:{kind}:{n}"),
            }
        }
    };
    if let Some(m) = cfg.downsample {
        if m == 0 || m > loaded.cloud.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot downsample {} points to {m}",
                loaded.cloud.len()
            )));
        }
        let start = (cfg.seed % loaded.cloud.len() as u64) as usize;
        let picked = farthest_point_sample(&loaded.cloud, m, start)?;
        loaded.cloud = loaded.cloud.select(&picked)?;
        loaded.labels = loaded.labels.map(|l| picked.iter().map(|&i| l[i]).collect());
    }
    Ok(loaded)
}

/// Collects the files written by one stage.
struct StageWriter<'a> {
    dir: &'a Path,
    ext: &'static str,
    outputs: Vec<OutputRecord>,
}

impl StageWriter<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.outputs.push(OutputRecord {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    fn export(&mut self, stem: &str, contents: &str) -> Result<()> {
        let name = format!("{stem}.{}", self.ext);
        self.write(&name, contents)
    }
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    cloud: PointCloud,
    labels: Option<Vec<u32>>,
    queries: Vec<usize>,
    metrics: Metrics,
    raw: Option<NeighborList>,
    adjacency: Option<SparseAdjacency>,
    normalized: Option<SparseAdjacency>,
    selected: Option<NeighborList>,
    frames: Option<Vec<LocalFrame>>,
    cyl: Option<Vec<CylindricalCoords>>,
}

/// Runs the selected stages, writes their artifacts and `manifest.json` into
/// `cfg.out_dir`, and returns the manifest.
///
/// Input problems come back as errors with exit code 1; a broken invariant
/// mid-run comes back as [`Error::Invariant`] (exit code 2).
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    validate_stages(&cfg.stages)?;
    cfg.smoothing.validate()?;
    let loaded = load_input(cfg)?;
    let n = loaded.cloud.len();
    let queries = match &cfg.queries {
        Some(q) => {
            if let Some(&bad) = q.iter().find(|&&i| i >= n) {
                return Err(Error::out_of_range("query index", format!("{bad} >= {n}")));
            }
            q.clone()
        }
        None => (0..n).collect(),
    };
    fs::create_dir_all(&cfg.out_dir)?;

    let mut run = Run {
        cfg,
        cloud: loaded.cloud,
        labels: loaded.labels,
        queries,
        metrics: Metrics {
            points: n,
            extreme_thresholds: extreme_thresholds(cfg.smoothing.k),
            ..Metrics::default()
        },
        raw: None,
        adjacency: None,
        normalized: None,
        selected: None,
        frames: None,
        cyl: None,
    };

    let mut stages = Vec::new();
    for &stage in &cfg.stages {
        let mut writer = StageWriter {
            dir: &cfg.out_dir,
            ext: cfg.export_format.extension(),
            outputs: Vec::new(),
        };
        let started = Instant::now();
        match stage {
            Stage::Construct => run.construct(&mut writer)?,
            Stage::Refine => run.refine(&mut writer)?,
            Stage::Smooth => run.smooth(&mut writer)?,
            Stage::Geometry => run.geometry(&mut writer)?,
            Stage::Aggregate => run.aggregate(&mut writer)?,
        }
        let millis = started.elapsed().as_millis() as u64;
        log::info!("stage {stage}: {millis} ms, {} file(s)", writer.outputs.len());
        stages.push(StageRecord {
            name: stage.name().to_string(),
            millis: if cfg.record_timings { millis } else { 0 },
            outputs: writer.outputs,
        });
    }

    let manifest = Manifest {
        config: ConfigEcho {
            input: loaded.description,
            smoothing: cfg.smoothing.clone(),
            stages: cfg.stages.clone(),
            export_format: cfg.export_format,
            seed: cfg.seed,
            downsample: cfg.downsample,
            queries: cfg.queries.clone(),
            psi_width: cfg.psi_width,
            phi_width: cfg.phi_width,
        },
        stages,
        metrics: run.metrics,
    };
    fs::write(cfg.out_dir.join(MANIFEST_FILE), manifest.to_json()?)?;
    Ok(manifest)
}

fn relative_reduction(before: f64, after: f64) -> Option<f64> {
    (before > 0.0).then(|| 1.0 - after / before)
}

impl Run<'_> {
    fn format(&self) -> ExportFormat {
        self.cfg.export_format
    }

    fn construct(&mut self, w: &mut StageWriter) -> Result<()> {
        let cfg = &self.cfg.smoothing;
        let index = SpatialIndex::build(&self.cloud);
        let raw = ball_query_all(&index, cfg)?;
        let adjacency = raw.to_adjacency();
        let report = degree_report(&adjacency);

        let (lo, hi) = self.metrics.extreme_thresholds;
        let roles = boundary_junction_classify(&adjacency, cfg.k);
        self.metrics.raw_out_degree = Some(report.out_summary);
        self.metrics.raw_in_degree = Some(report.in_summary);
        self.metrics.raw_extreme_count = Some(extreme_count(&report.out_degree, lo, hi));
        self.metrics.raw_in_extreme_count = Some(extreme_count(&report.in_degree, lo, hi));
        self.metrics.boundary_like = Some(roles.iter().filter(|r| **r == NodeRole::BoundaryLike).count());
        self.metrics.junction_like = Some(roles.iter().filter(|r| **r == NodeRole::JunctionLike).count());

        w.write("cloud.csv", &io::render_cloud(&self.cloud, CloudFormat::Csv))?;
        w.export("adjacency_raw", &io::render_adjacency(&adjacency, self.format())?)?;
        w.export("degrees_raw", &io::render_degree_heatmap(&report, &self.cloud, self.format())?)?;
        let dump = io::neighborhood_dump(&raw, &self.cloud, &self.queries, self.labels.as_deref())?;
        w.export("neighborhoods_raw", &io::render_neighborhoods(&dump, self.format())?)?;

        self.raw = Some(raw);
        self.adjacency = Some(adjacency);
        Ok(())
    }

    fn refine(&mut self, w: &mut StageWriter) -> Result<()> {
        let adjacency = self.adjacency.as_ref().expect("construct ran");
        let refined = symmetric_refine(adjacency)?;
        let report = degree_report(&refined);
        let k = self.cfg.smoothing.k;
        for i in 0..refined.n() {
            let (d_out, d_in) = (report.out_degree[i], report.in_degree[i]);
            if d_out != d_in || d_out > k {
                return Err(Error::Invariant(format!(
                    "refined degrees must be equal and at most k={k}; point {i} has out {d_out}, in {d_in}"
                )));
            }
        }
        let normalized = symmetric_normalize(&refined)?;
        self.metrics.refined_degree = Some(report.out_summary);

        w.export("adjacency_refined", &io::render_adjacency(&refined, self.format())?)?;
        w.export("adjacency_normalized", &io::render_adjacency(&normalized, self.format())?)?;
        w.export("degrees_refined", &io::render_degree_heatmap(&report, &self.cloud, self.format())?)?;
        self.normalized = Some(normalized);
        Ok(())
    }

    fn smooth(&mut self, w: &mut StageWriter) -> Result<()> {
        let cfg = &self.cfg.smoothing;
        let normalized = self.normalized.as_ref().expect("refine ran");
        let sg = smooth(normalized, cfg)?;
        sg.check_invariants()?;
        let selected = reselect_neighborhoods(&sg, &self.cloud, cfg.top_k)?;
        if let Some(i) = (0..selected.len()).find(|&i| selected.get(i)[0] != i) {
            return Err(Error::Invariant(format!("reselected neighborhood of point {i} does not start with itself")));
        }

        let in_sel = selected.in_selection_counts();
        let report = DegreeReport::from_degrees(selected.iter().map(<[usize]>::len).collect(), in_sel);
        let (lo, hi) = self.metrics.extreme_thresholds;
        self.metrics.smoothed_nnz = Some(sg.s_matrix.nnz());
        self.metrics.selection_in_degree = Some(report.in_summary);
        self.metrics.selection_extreme_count = Some(extreme_count(&report.in_degree, lo, hi));
        if let Some(before) = self.metrics.raw_out_degree {
            self.metrics.degree_stddev_reduction = relative_reduction(before.stddev, report.in_summary.stddev);
        }
        if let Some(before) = self.metrics.raw_in_degree {
            self.metrics.inclusion_stddev_reduction = relative_reduction(before.stddev, report.in_summary.stddev);
        }
        if let Some(labels) = &self.labels {
            let band = junction_band(&self.cloud, labels, cfg.radius);
            let raw = self.raw.as_ref().expect("construct ran");
            let before = mean_cross_label_fraction(raw, labels, &band);
            let after = mean_cross_label_fraction(&selected, labels, &band);
            self.metrics.junction_band_size = Some(band.len());
            self.metrics.raw_cross_label_fraction = Some(before);
            self.metrics.smoothed_cross_label_fraction = Some(after);
            self.metrics.cross_label_reduction = relative_reduction(before, after);
        }

        w.write("smoothing.json", &smoothing_summary(&sg)?)?;
        w.export("degrees_smoothed", &io::render_degree_heatmap(&report, &self.cloud, self.format())?)?;
        let dump = io::neighborhood_dump(&selected, &self.cloud, &self.queries, self.labels.as_deref())?;
        w.export("neighborhoods_smoothed", &io::render_neighborhoods(&dump, self.format())?)?;
        self.selected = Some(selected);
        Ok(())
    }

    fn geometry(&mut self, w: &mut StageWriter) -> Result<()> {
        let eps = self.cfg.smoothing.eps;
        let selected = self.selected.as_ref().expect("smooth ran");
        let frames = local_frames(&self.cloud, selected, eps)?;
        for (i, f) in frames.iter().enumerate() {
            let err = (f.eigenvectors.transpose() * f.eigenvectors - nalgebra::Matrix3::identity()).amax();
            if err > ORTHONORMAL_TOL {
                return Err(Error::Invariant(format!("frame of point {i} is not orthonormal (error {err:e})")));
            }
        }
        let cyl = cylindrical_all(&self.cloud, selected, &frames, eps)?;
        for c in &cyl {
            let p = self.cloud.point(c.query);
            for e in &c.entries {
                let d2 = dist2(p, self.cloud.point(e.index));
                let lhs = e.h * e.h + e.omega * e.omega;
                if (lhs - d2).abs() > 1e-9 * d2.max(1.0) {
                    return Err(Error::Invariant(format!(
                        "cylindrical coordinates of neighbor {} of point {} do not preserve distance",
                        e.index, c.query
                    )));
                }
            }
        }
        self.metrics.degenerate_frames = Some(frames.iter().filter(|f| f.degenerate_rank > 0).count());

        w.export("frames", &io::render_table(&frames_table(&frames), self.format())?)?;
        w.export("cylindrical", &io::render_table(&cylindrical_table(&cyl), self.format())?)?;
        self.frames = Some(frames);
        self.cyl = Some(cyl);
        Ok(())
    }

    fn aggregate(&mut self, w: &mut StageWriter) -> Result<()> {
        let selected = self.selected.as_ref().expect("smooth ran");
        let frames = self.frames.as_ref().expect("geometry ran");
        let cyl = self.cyl.as_ref().expect("geometry ran");
        // Clouds without features aggregate their coordinates.
        let cloud = match self.cloud.features {
            Some(_) => self.cloud.clone(),
            None => {
                let coords = crate::cloud::Matrix::from_vec(
                    self.cloud.len(),
                    3,
                    self.cloud.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
                )?;
                self.cloud.clone().with_features(coords)?
            }
        };
        let width = cloud.feature_width().expect("features attached");
        let spec = AggregationSpec::random_enhanced(width, self.cfg.psi_width, self.cfg.phi_width, self.cfg.seed);
        let features = aggregate_enhanced(&cloud, selected, frames, cyl, &spec)?;
        if !features.is_finite() {
            return Err(Error::Invariant("aggregated features contain non-finite values".into()));
        }
        self.metrics.feature_width = Some(features.cols());

        let mut table = Table::new((0..features.cols()).map(|c| format!("f{c}")).collect());
        for row in features.iter_rows() {
            table.push(row.to_vec());
        }
        w.export("features", &io::render_table(&table, self.format())?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SmoothingSummary<'a> {
    order: usize,
    alpha: f64,
    nnz: usize,
    s_matrix_sha256: String,
    adjacency_sha256: &'a str,
    config_sha256: &'a str,
}

fn smoothing_summary(sg: &SmoothedGraph) -> Result<String> {
    let summary = SmoothingSummary {
        order: sg.order,
        alpha: sg.alpha,
        nnz: sg.s_matrix.nnz(),
        s_matrix_sha256: sg.s_matrix.content_hash(),
        adjacency_sha256: &sg.provenance.adjacency_sha256,
        config_sha256: &sg.provenance.config_sha256,
    };
    Ok(serde_json::to_string_pretty(&summary)? + "\n")
}

fn frames_table(frames: &[LocalFrame]) -> Table {
    let columns = [
        "index", "lambda1", "lambda2", "lambda3", "linearity", "planarity", "sphericity", "v1x", "v1y", "v1z",
        "v2x", "v2y", "v2z", "v3x", "v3y", "v3z", "cx", "cy", "cz", "degenerate_rank",
    ];
    let mut table = Table::new(columns.iter().map(|s| s.to_string()).collect());
    for (i, f) in frames.iter().enumerate() {
        let d = shape_descriptors(f);
        let mut row = vec![i as f64];
        row.extend_from_slice(&f.eigenvalues);
        row.extend([d.linearity, d.planarity, d.sphericity]);
        for a in 0..3 {
            row.extend(f.axis(a).iter());
        }
        row.extend(f.centroid.iter());
        row.push(f.degenerate_rank as f64);
        table.push(row);
    }
    table
}

fn cylindrical_table(cyl: &[CylindricalCoords]) -> Table {
    let columns = ["query", "neighbor", "h", "omega", "cos_theta", "h_norm", "omega_norm"];
    let mut table = Table::new(columns.iter().map(|s| s.to_string()).collect());
    for c in cyl {
        for e in &c.entries {
            table.push(vec![
                c.query as f64,
                e.index as f64,
                e.h,
                e.omega,
                e.cos_theta,
                e.h_norm,
                e.omega_norm,
            ]);
        }
    }
    table
}
