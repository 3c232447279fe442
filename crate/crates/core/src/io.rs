//! Cloud file formats and diagnostic exports.
//!
//! Every exporter has a parser, and floats are written in shortest round-trip
//! form, so parsing an export reproduces the exported value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::cloud::{Matrix, PointCloud};
use crate::construct::{DegreeReport, Summary};
use crate::error::{Error, Result};
use crate::metrics::cross_label_fraction;
use crate::neighbors::NeighborList;
use crate::sparse::SparseAdjacency;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    Xyz,
    Csv,
    PlyAscii,
}

impl CloudFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "xyz" | "txt" | "pts" => Ok(CloudFormat::Xyz),
            "csv" => Ok(CloudFormat::Csv),
            "ply" => Ok(CloudFormat::PlyAscii),
            _ => Err(Error::Format(format!(
                "cannot infer the cloud format of {}; pass it explicitly",
                path.display()
            ))),
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(CloudFormat::Xyz),
            "csv" => Ok(CloudFormat::Csv),
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::Format(format!("unknown cloud format `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    #[default]
    Csv,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::Format(format!("unknown export format `{other}`"))),
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("`{token}` is not a number"),
    })
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("`{token}` is not a non-negative integer"),
    })
}

fn parse_bool(token: &str, line: usize) -> Result<bool> {
    token.trim().parse::<bool>().map_err(|_| Error::Parse {
        line,
        msg: format!("`{token}` is not a boolean"),
    })
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

fn csv_cells(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

/// Reads a cloud file. Columns past the first three become features.
pub fn parse_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    if format == CloudFormat::PlyAscii {
        reject_binary_ply(&bytes)?;
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{} is not UTF-8 text", path.display())))?;
    parse_cloud_str(&text, format)
}

fn reject_binary_ply(bytes: &[u8]) -> Result<()> {
    let head = &bytes[..bytes.len().min(4096)];
    let head = String::from_utf8_lossy(head);
    for line in head.lines().take_while(|l| l.trim() != "end_header") {
        let mut parts = line.split_whitespace();
        if parts.next() == Some("format") {
            let kind = parts.next().unwrap_or("");
            if kind != "ascii" {
                return Err(Error::Format(format!(
                    "PLY format `{kind}` is not supported; only ASCII PLY can be read"
                )));
            }
        }
    }
    Ok(())
}

pub fn parse_cloud_str(text: &str, format: CloudFormat) -> Result<PointCloud> {
    match format {
        CloudFormat::Xyz | CloudFormat::Csv => parse_delimited(text, format == CloudFormat::Csv),
        CloudFormat::PlyAscii => parse_ply(text),
    }
}

fn parse_delimited(text: &str, allow_header: bool) -> Result<PointCloud> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (line, content) in data_lines(text) {
        let toks = tokens(content);
        if rows.is_empty()
            && allow_header
            && width.is_none()
            && toks.first().is_some_and(|t| t.parse::<f64>().is_err())
        {
            // Header row: remember its width and move on.
            width = Some(toks.len());
            continue;
        }
        let values = toks
            .iter()
            .map(|t| parse_f64(t, line))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() < 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected at least 3 columns, found {}", values.len()),
            });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => width = Some(values.len()),
        }
        rows.push((line, values));
    }
    build_cloud(rows)
}

fn build_cloud(rows: Vec<(usize, Vec<f64>)>) -> Result<PointCloud> {
    if rows.is_empty() {
        return Err(Error::InvalidCloud("file contains no points".into()));
    }
    let width = rows[0].1.len();
    let mut points = Vec::with_capacity(rows.len());
    let mut features = Vec::with_capacity(rows.len() * (width - 3));
    for (line, values) in &rows {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: *line,
                msg: format!("non-finite value {v}"),
            });
        }
        points.push(Point3::new(values[0], values[1], values[2]));
        features.extend_from_slice(&values[3..]);
    }
    let features = (width > 3)
        .then(|| Matrix::from_vec(rows.len(), width - 3, features))
        .transpose()?;
    PointCloud::new(points, features)
}

struct PlyElement {
    name: String,
    count: usize,
    /// Scalar property names; `None` marks a list property.
    properties: Vec<Option<String>>,
}

fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::Parse { line: 1, msg: "missing `ply` magic line".into() }),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    let mut ended = false;
    for (line, content) in lines.by_ref() {
        let parts: Vec<&str> = content.split_whitespace().collect();
        match parts.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, ..] => {
                if *kind != "ascii" {
                    return Err(Error::Format(format!(
                        "PLY format `{kind}` is not supported; only ASCII PLY can be read"
                    )));
                }
                saw_format = true;
            }
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: parse_usize(count, line)?,
                properties: Vec::new(),
            }),
            ["property", "list", ..] => match elements.last_mut() {
                Some(e) => e.properties.push(None),
                None => return Err(Error::Parse { line, msg: "property before any element".into() }),
            },
            ["property", _ty, name] => match elements.last_mut() {
                Some(e) => e.properties.push(Some(name.to_string())),
                None => return Err(Error::Parse { line, msg: "property before any element".into() }),
            },
            ["end_header"] => {
                ended = true;
                break;
            }
            _ => return Err(Error::Parse { line, msg: format!("unrecognized header line `{content}`") }),
        }
    }
    if !saw_format || !ended {
        return Err(Error::Format("PLY header is incomplete".into()));
    }

    let mut rows = Vec::new();
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut found_vertex = false;
    for element in &elements {
        let is_vertex = element.name == "vertex";
        let axis = |name: &str| {
            element
                .properties
                .iter()
                .position(|p| p.as_deref() == Some(name))
        };
        let (ix, iy, iz) = (axis("x"), axis("y"), axis("z"));
        if is_vertex {
            found_vertex = true;
            if ix.is_none() || iy.is_none() || iz.is_none() {
                return Err(Error::Format("PLY vertex element lacks x, y or z".into()));
            }
            if element.properties.iter().any(Option::is_none) {
                return Err(Error::Format("list properties on vertices are not supported".into()));
            }
        }
        for _ in 0..element.count {
            let Some((line, content)) = body.next() else {
                return Err(Error::Format(format!("PLY body ends before all `{}` records", element.name)));
            };
            if !is_vertex {
                continue;
            }
            let values = content
                .split_whitespace()
                .map(|t| parse_f64(t, line))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != element.properties.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} values, found {}", element.properties.len(), values.len()),
                });
            }
            let (x, y, z) = (ix.unwrap(), iy.unwrap(), iz.unwrap());
            let mut row = vec![values[x], values[y], values[z]];
            row.extend(
                values
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| ![x, y, z].contains(c))
                    .map(|(_, v)| *v),
            );
            rows.push((line, row));
        }
    }
    if !found_vertex {
        return Err(Error::Format("PLY file has no vertex element".into()));
    }
    build_cloud(rows)
}

/// Renders a cloud; features follow the coordinates.
pub fn render_cloud(cloud: &PointCloud, format: CloudFormat) -> String {
    let width = cloud.feature_width().unwrap_or(0);
    let mut out = String::new();
    match format {
        CloudFormat::Csv => {
            out.push_str("x,y,z");
            for f in 0..width {
                let _ = write!(out, ",f{f}");
            }
            out.push('\n');
        }
        CloudFormat::PlyAscii => {
            let _ = writeln!(out, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len());
            for name in ["x", "y", "z"] {
                let _ = writeln!(out, "property double {name}");
            }
            for f in 0..width {
                let _ = writeln!(out, "property double f{f}");
            }
            out.push_str("end_header\n");
        }
        CloudFormat::Xyz => {}
    }
    let sep = if format == CloudFormat::Csv { "," } else { " " };
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        let mut cells = vec![num(p.x), num(p.y), num(p.z)];
        if let Some(f) = &cloud.features {
            cells.extend(f.row(i).iter().map(|&v| num(v)));
        }
        out.push_str(&cells.join(sep));
        out.push('\n');
    }
    out
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    fs::write(path, render_cloud(cloud, format))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Degree heatmaps
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct HeatmapSummaries {
    out: Summary,
    #[serde(rename = "in")]
    in_: Summary,
}

#[derive(Serialize, Deserialize)]
struct HeatmapRecord {
    index: usize,
    x: f64,
    y: f64,
    z: f64,
    d_out: usize,
    d_in: usize,
}

#[derive(Serialize, Deserialize)]
struct HeatmapFile {
    summary: HeatmapSummaries,
    points: Vec<HeatmapRecord>,
}

/// A parsed degree heatmap.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub report: DegreeReport,
    pub points: Vec<Point3<f64>>,
}

fn check_aligned(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Shape { what, expected, found });
    }
    Ok(())
}

/// Per-point `(x, y, z, d_out, d_in)` records plus min/max/mean/stddev summaries.
pub fn render_degree_heatmap(report: &DegreeReport, cloud: &PointCloud, format: ExportFormat) -> Result<String> {
    check_aligned("degree report vs cloud", cloud.len(), report.len())?;
    match format {
        ExportFormat::Json => {
            let file = HeatmapFile {
                summary: HeatmapSummaries {
                    out: report.out_summary,
                    in_: report.in_summary,
                },
                points: (0..cloud.len())
                    .map(|i| {
                        let p = cloud.point(i);
                        HeatmapRecord {
                            index: i,
                            x: p.x,
                            y: p.y,
                            z: p.z,
                            d_out: report.out_degree[i],
                            d_in: report.in_degree[i],
                        }
                    })
                    .collect(),
            };
            Ok(serde_json::to_string_pretty(&file)? + "\n")
        }
        ExportFormat::Csv => {
            let mut out = String::from("# summary,degree,min,max,mean,stddev\n");
            for (name, s) in [("out", &report.out_summary), ("in", &report.in_summary)] {
                let _ = writeln!(out, "# summary,{name},{},{},{},{}", s.min, s.max, num(s.mean), num(s.stddev));
            }
            out.push_str("index,x,y,z,d_out,d_in\n");
            for i in 0..cloud.len() {
                let p = cloud.point(i);
                let _ = writeln!(
                    out,
                    "{i},{},{},{},{},{}",
                    num(p.x),
                    num(p.y),
                    num(p.z),
                    report.out_degree[i],
                    report.in_degree[i]
                );
            }
            Ok(out)
        }
    }
}

pub fn export_degree_heatmap(
    report: &DegreeReport,
    cloud: &PointCloud,
    path: &Path,
    format: ExportFormat,
) -> Result<()> {
    fs::write(path, render_degree_heatmap(report, cloud, format)?)?;
    Ok(())
}

/// Parses a heatmap export. The summary block must agree with the records.
pub fn parse_degree_heatmap(text: &str, format: ExportFormat) -> Result<Heatmap> {
    let (records, summaries) = match format {
        ExportFormat::Json => {
            let file: HeatmapFile = serde_json::from_str(text)?;
            (file.points, Some((file.summary.out, file.summary.in_)))
        }
        ExportFormat::Csv => {
            let mut out_s = None;
            let mut in_s = None;
            for (line, content) in text.lines().enumerate() {
                let Some(rest) = content.trim().strip_prefix("# summary,") else { continue };
                let cells = csv_cells(rest);
                if cells.len() != 5 || cells[0] == "degree" {
                    continue;
                }
                let s = Summary {
                    min: parse_usize(cells[1], line + 1)?,
                    max: parse_usize(cells[2], line + 1)?,
                    mean: parse_f64(cells[3], line + 1)?,
                    stddev: parse_f64(cells[4], line + 1)?,
                };
                match cells[0] {
                    "out" => out_s = Some(s),
                    "in" => in_s = Some(s),
                    other => {
                        return Err(Error::Parse { line: line + 1, msg: format!("unknown summary `{other}`") })
                    }
                }
            }
            let mut records = Vec::new();
            for (line, content) in data_lines(text) {
                if content.starts_with("index") {
                    continue;
                }
                let cells = csv_cells(content);
                if cells.len() != 6 {
                    return Err(Error::Parse { line, msg: format!("expected 6 columns, found {}", cells.len()) });
                }
                records.push(HeatmapRecord {
                    index: parse_usize(cells[0], line)?,
                    x: parse_f64(cells[1], line)?,
                    y: parse_f64(cells[2], line)?,
                    z: parse_f64(cells[3], line)?,
                    d_out: parse_usize(cells[4], line)?,
                    d_in: parse_usize(cells[5], line)?,
                });
            }
            (records, out_s.zip(in_s))
        }
    };
    for (i, r) in records.iter().enumerate() {
        if r.index != i {
            return Err(Error::Format(format!("heatmap record {i} carries index {}", r.index)));
        }
    }
    let report = DegreeReport::from_degrees(
        records.iter().map(|r| r.d_out).collect(),
        records.iter().map(|r| r.d_in).collect(),
    );
    match summaries {
        Some((o, i)) if o == report.out_summary && i == report.in_summary => {}
        Some(_) => return Err(Error::Format("heatmap summary disagrees with its records".into())),
        None => return Err(Error::Format("heatmap summary block is missing".into())),
    }
    Ok(Heatmap {
        report,
        points: records.iter().map(|r| Point3::new(r.x, r.y, r.z)).collect(),
    })
}

// ---------------------------------------------------------------------------
// Neighborhood dumps
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodRecord {
    pub index: usize,
    pub point: [f64; 3],
    pub neighbors: Vec<usize>,
    pub neighbor_points: Vec<[f64; 3]>,
    pub cross_label_fraction: Option<f64>,
}

/// Parsed neighborhood dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodDump {
    /// Number of points in the cloud the dump was taken from.
    pub n: usize,
    pub max_size: usize,
    pub records: Vec<NeighborhoodRecord>,
}

impl NeighborhoodDump {
    /// Rebuilds the neighbor list; the dump must cover every point in order.
    pub fn to_neighbor_list(&self) -> Result<NeighborList> {
        if self.records.len() != self.n || self.records.iter().enumerate().any(|(i, r)| r.index != i) {
            return Err(Error::Format(
                "neighborhood dump does not cover every point in order".into(),
            ));
        }
        NeighborList::new(
            self.records.iter().map(|r| r.neighbors.clone()).collect(),
            self.max_size,
        )
    }
}

fn xyz(p: &Point3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Collects the records for `queries`; labels add the cross-label fraction.
pub fn neighborhood_dump(
    neighbors: &NeighborList,
    cloud: &PointCloud,
    queries: &[usize],
    labels: Option<&[u32]>,
) -> Result<NeighborhoodDump> {
    check_aligned("neighbor list vs cloud", cloud.len(), neighbors.len())?;
    if let Some(l) = labels {
        check_aligned("labels vs cloud", cloud.len(), l.len())?;
    }
    let records = queries
        .iter()
        .map(|&i| {
            if i >= cloud.len() {
                return Err(Error::out_of_range("query index", format!("{i} >= {}", cloud.len())));
            }
            let list = neighbors.get(i);
            Ok(NeighborhoodRecord {
                index: i,
                point: xyz(cloud.point(i)),
                neighbors: list.to_vec(),
                neighbor_points: list.iter().map(|&j| xyz(cloud.point(j))).collect(),
                cross_label_fraction: labels.map(|l| cross_label_fraction(list, i, l)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeighborhoodDump {
        n: cloud.len(),
        max_size: neighbors.max_size(),
        records,
    })
}

pub fn render_neighborhoods(dump: &NeighborhoodDump, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => Ok(serde_json::to_string_pretty(dump)? + "\n"),
        ExportFormat::Csv => {
            let mut out = format!("# neighborhoods,n,{},max_size,{}\n", dump.n, dump.max_size);
            out.push_str("query,qx,qy,qz,rank,neighbor,nx,ny,nz,cross_label_fraction\n");
            for r in &dump.records {
                let frac = r.cross_label_fraction.map(num).unwrap_or_default();
                for (rank, (j, q)) in r.neighbors.iter().zip(&r.neighbor_points).enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{rank},{j},{},{},{},{frac}",
                        r.index,
                        num(r.point[0]),
                        num(r.point[1]),
                        num(r.point[2]),
                        num(q[0]),
                        num(q[1]),
                        num(q[2]),
                    );
                }
            }
            Ok(out)
        }
    }
}

/// Writes the neighborhoods of `queries` to `path`.
pub fn export_neighborhoods(
    neighbors: &NeighborList,
    cloud: &PointCloud,
    queries: &[usize],
    labels: Option<&[u32]>,
    path: &Path,
    format: ExportFormat,
) -> Result<()> {
    let dump = neighborhood_dump(neighbors, cloud, queries, labels)?;
    fs::write(path, render_neighborhoods(&dump, format)?)?;
    Ok(())
}

pub fn parse_neighborhoods(text: &str, format: ExportFormat) -> Result<NeighborhoodDump> {
    match format {
        ExportFormat::Json => Ok(serde_json::from_str(text)?),
        ExportFormat::Csv => {
            let mut meta = None;
            for (line, content) in text.lines().enumerate() {
                if let Some(rest) = content.trim().strip_prefix("# neighborhoods,") {
                    let cells = csv_cells(rest);
                    if cells.len() != 4 || cells[0] != "n" || cells[2] != "max_size" {
                        return Err(Error::Parse { line: line + 1, msg: "malformed neighborhood header".into() });
                    }
                    meta = Some((parse_usize(cells[1], line + 1)?, parse_usize(cells[3], line + 1)?));
                }
            }
            let (n, max_size) = meta.ok_or_else(|| Error::Format("neighborhood header is missing".into()))?;
            let mut records: Vec<NeighborhoodRecord> = Vec::new();
            for (line, content) in data_lines(text) {
                if content.starts_with("query") {
                    continue;
                }
                let c = csv_cells(content);
                if c.len() != 10 {
                    return Err(Error::Parse { line, msg: format!("expected 10 columns, found {}", c.len()) });
                }
                let query = parse_usize(c[0], line)?;
                let rank = parse_usize(c[4], line)?;
                let frac = if c[9].is_empty() { None } else { Some(parse_f64(c[9], line)?) };
                if rank == 0 {
                    records.push(NeighborhoodRecord {
                        index: query,
                        point: [parse_f64(c[1], line)?, parse_f64(c[2], line)?, parse_f64(c[3], line)?],
                        neighbors: Vec::new(),
                        neighbor_points: Vec::new(),
                        cross_label_fraction: frac,
                    });
                }
                let Some(rec) = records.last_mut().filter(|r| r.index == query && r.neighbors.len() == rank) else {
                    return Err(Error::Parse { line, msg: format!("rank {rank} of query {query} is out of sequence") });
                };
                rec.neighbors.push(parse_usize(c[5], line)?);
                rec.neighbor_points.push([parse_f64(c[6], line)?, parse_f64(c[7], line)?, parse_f64(c[8], line)?]);
            }
            Ok(NeighborhoodDump { n, max_size, records })
        }
    }
}

// ---------------------------------------------------------------------------
// Adjacency
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AdjacencyFile {
    n: usize,
    symmetric: bool,
    entries: Vec<(usize, usize, f64)>,
}

/// Sparse `(row, col, weight)` triplets in row-major order.
pub fn render_adjacency(adj: &SparseAdjacency, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => {
            let file = AdjacencyFile {
                n: adj.n(),
                symmetric: adj.is_symmetric(),
                entries: adj.triplets().collect(),
            };
            Ok(serde_json::to_string(&file)? + "\n")
        }
        ExportFormat::Csv => {
            let mut out = format!("# adjacency,n,{},symmetric,{}\nrow,col,weight\n", adj.n(), adj.is_symmetric());
            for (i, j, w) in adj.triplets() {
                let _ = writeln!(out, "{i},{j},{}", num(w));
            }
            Ok(out)
        }
    }
}

pub fn parse_adjacency(text: &str, format: ExportFormat) -> Result<SparseAdjacency> {
    let file = match format {
        ExportFormat::Json => serde_json::from_str::<AdjacencyFile>(text)?,
        ExportFormat::Csv => {
            let mut meta = None;
            for (line, content) in text.lines().enumerate() {
                if let Some(rest) = content.trim().strip_prefix("# adjacency,") {
                    let cells = csv_cells(rest);
                    if cells.len() != 4 || cells[0] != "n" || cells[2] != "symmetric" {
                        return Err(Error::Parse { line: line + 1, msg: "malformed adjacency header".into() });
                    }
                    meta = Some((parse_usize(cells[1], line + 1)?, parse_bool(cells[3], line + 1)?));
                }
            }
            let (n, symmetric) = meta.ok_or_else(|| Error::Format("adjacency header is missing".into()))?;
            let mut entries = Vec::new();
            for (line, content) in data_lines(text) {
                if content.starts_with("row") {
                    continue;
                }
                let c = csv_cells(content);
                if c.len() != 3 {
                    return Err(Error::Parse { line, msg: format!("expected 3 columns, found {}", c.len()) });
                }
                entries.push((parse_usize(c[0], line)?, parse_usize(c[1], line)?, parse_f64(c[2], line)?));
            }
            AdjacencyFile { n, symmetric, entries }
        }
    };
    let mut rows = vec![Vec::new(); file.n];
    for (i, j, w) in file.entries {
        if i >= file.n {
            return Err(Error::out_of_range("adjacency row", format!("{i} >= {}", file.n)));
        }
        rows[i].push((j, w));
    }
    SparseAdjacency::from_rows(file.n, rows, file.symmetric)
}

// ---------------------------------------------------------------------------
// Numeric tables (frames, cylindrical coordinates, features)
// ---------------------------------------------------------------------------

/// A named-column numeric table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "table row width");
        self.rows.push(row);
    }
}

pub fn render_table(table: &Table, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => Ok(serde_json::to_string(table)? + "\n"),
        ExportFormat::Csv => {
            let mut out = table.columns.join(",");
            out.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

pub fn parse_table(text: &str, format: ExportFormat) -> Result<Table> {
    match format {
        ExportFormat::Json => Ok(serde_json::from_str(text)?),
        ExportFormat::Csv => {
            let mut lines = data_lines(text);
            let (_, header) = lines.next().ok_or_else(|| Error::Format("table has no header".into()))?;
            let mut table = Table::new(csv_cells(header).into_iter().map(String::from).collect());
            for (line, content) in lines {
                let row = csv_cells(content)
                    .into_iter()
                    .map(|c| parse_f64(c, line))
                    .collect::<Result<Vec<f64>>>()?;
                if row.len() != table.columns.len() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected {} columns, found {}", table.columns.len(), row.len()),
                    });
                }
                table.rows.push(row);
            }
            Ok(table)
        }
    }
}
