//! `pcgraph`: run the neighborhood smoothing pipeline on a cloud file or a
//! synthetic fixture and write diagnostic exports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pcgraph::config::{DEFAULT_ALPHA, DEFAULT_K, DEFAULT_ORDER, DEFAULT_RADIUS};
use pcgraph::fixtures::FixtureKind;
use pcgraph::io::{CloudFormat, ExportFormat};
use pcgraph::pipeline::{parse_stages, run_pipeline, InputSource, PipelineConfig};
use pcgraph::{Error, SmoothingConfig};

#[derive(Debug, Parser)]
#[command(name = "pcgraph", version, about = "Graph smoothing and local geometry for point clouds")]
struct Args {
    /// Input cloud file (xyz, csv or ASCII ply).
    #[arg(long, conflicts_with = "fixture")]
    input: Option<PathBuf>,

    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_parser = ["xyz", "csv", "ply", "ply-ascii"])]
    format: Option<String>,

    /// Synthetic fixture instead of a file.
    #[arg(long, value_parser = ["plane", "sphere", "cylinder", "two-planes-cross", "airplane-like"])]
    fixture: Option<String>,

    /// Fixture point count.
    #[arg(long, default_value_t = 2048)]
    n: usize,

    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,

    /// Ball query neighbor cap.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,

    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    /// Smoothing order T.
    #[arg(long = "t-order", default_value_t = DEFAULT_ORDER)]
    t_order: usize,

    /// Size of the reselected neighborhoods; defaults to k.
    #[arg(long)]
    topk: Option<usize>,

    /// Comma-separated stage prefix of construct,refine,smooth,geometry,aggregate, or `all`.
    #[arg(long, default_value = "all")]
    stages: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, default_value = "pcgraph-out")]
    out: PathBuf,

    #[arg(long = "export-format", default_value = "csv", value_parser = ["csv", "json"])]
    export_format: String,

    /// Farthest point sample the input down to this many points.
    #[arg(long)]
    downsample: Option<usize>,

    /// Comma-separated point indices to dump neighborhoods for (default: all).
    #[arg(long, value_delimiter = ',')]
    queries: Option<Vec<usize>>,

    /// Worker threads (default: all cores, or RAYON_NUM_THREADS).
    #[arg(long)]
    threads: Option<usize>,

    /// Record wall-clock stage times in the manifest (makes it run-dependent).
    #[arg(long)]
    timings: bool,
}

fn config(args: &Args) -> Result<PipelineConfig, Error> {
    let input = match (&args.input, &args.fixture) {
        (Some(path), None) => {
            let format = match &args.format {
                Some(f) => f.parse()?,
                None => CloudFormat::from_path(path)?,
            };
            InputSource::File { path: path.clone(), format }
        }
        (None, Some(name)) => InputSource::Fixture {
            kind: name.parse::<FixtureKind>()?,
            n: args.n,
        },
        _ => return Err(Error::InvalidConfig("give exactly one of --input or --fixture".into())),
    };
    let smoothing = SmoothingConfig::new(args.radius, args.k)
        .with_alpha(args.alpha)
        .with_order(args.t_order)
        .with_top_k(args.topk.unwrap_or(args.k));
    let mut cfg = PipelineConfig::new(input, &args.out);
    cfg.smoothing = smoothing;
    cfg.stages = parse_stages(&args.stages)?;
    cfg.export_format = args.export_format.parse::<ExportFormat>()?;
    cfg.seed = args.seed;
    cfg.downsample = args.downsample;
    cfg.queries = args.queries.clone();
    cfg.record_timings = args.timings;
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if threads.is_some_and(|t| t != 1) {
        log::warn!("built without the `parallel` feature; --threads is ignored");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = set_threads(args.threads)
        .and_then(|()| config(&args))
        .and_then(|cfg| run_pipeline(&cfg).map(|m| (cfg, m)));
    match result {
        Ok((cfg, manifest)) => {
            let files: usize = manifest.stages.iter().map(|s| s.outputs.len()).sum();
            log::info!("wrote {files} artifact(s) and the manifest to {}", cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
