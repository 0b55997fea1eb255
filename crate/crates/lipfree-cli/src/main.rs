//! Command-line front end: gallery builders, space validation, chain norms
//! with dual certificates, pair classification, steep-pair searches,
//! extension envelopes, and full JSON reports.
//!
//! Exit codes: 0 on success, 1 on a domain error (validation, analysis, io),
//! 2 on a usage error. `LIPFREE_THREADS` caps internal parallelism.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use lipfree::gallery::DEFAULT_CIRCUMFERENCE;
use lipfree::io::round_sig;
use lipfree::{
    build, build_report, classify_all, classify_pair, f_xy, find_daugavet_pair, kr_norm,
    load_space, mcshane_extend, save_report, save_space, whitney_extend, AmbientNorm, Chain,
    Config, SpaceHandle, SpaceSpec,
};

#[derive(Parser)]
#[command(
    name = "lipfree",
    version,
    about = "Geometry of Lipschitz-free spaces over finite metric samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a space file and print a short summary.
    Validate {
        #[arg(long)]
        space: PathBuf,
    },
    /// Build a gallery space and write it to a space file.
    Gallery {
        #[command(subcommand)]
        kind: GalleryKind,
    },
    /// Chain norm: optimal flow cost, dual certificate value, and gap.
    Norm(NormArgs),
    /// Classify one pair or every pair of a space.
    Classify(ClassifyArgs),
    /// Search for a steep pair compatible with a finite subset.
    Daugavet(DaugavetArgs),
    /// Largest and smallest Lipschitz extensions of values on a subset.
    Extend(ExtendArgs),
    /// Full analysis report (diagnostics, classification, certificates).
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum GalleryKind {
    /// Evenly spaced points on the unit interval.
    #[command(name = "interval")]
    Interval {
        #[arg(long, default_value_t = 65)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evenly spaced points on a circle (geodesic distance by default).
    #[command(name = "circle")]
    Circle {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_CIRCUMFERENCE)]
        circumference: f64,
        /// Use straight-line (chordal) distances instead of arc length.
        #[arg(long)]
        chordal: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// The two intervals `[0,1]` and `[2,3]` sampled at a common mesh.
    #[command(name = "two_intervals")]
    TwoIntervals {
        #[arg(long, default_value_t = 1.0 / 64.0)]
        mesh: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Star-shaped tree sample: legs glued at a center point.
    #[command(name = "r_tree_star")]
    RTreeStar {
        #[arg(long, default_value_t = 3)]
        legs: usize,
        #[arg(long, default_value_t = 33)]
        points_per_leg: usize,
        #[arg(long, default_value_t = 1.0)]
        leg_length: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explicit coordinates, e.g. --coords "0,0;1,0;0,1".
    #[command(name = "euclidean_points")]
    EuclideanPoints {
        #[arg(long, value_parser = parse_coords)]
        coords: CoordList,
        #[arg(long, value_enum, default_value_t = NormChoice::Euclidean)]
        norm: NormChoice,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded random space: a point cloud, or a closed random matrix.
    #[command(name = "random")]
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = NormChoice::Euclidean)]
        norm: NormChoice,
        /// Draw a random symmetric matrix and close it under shortest paths.
        #[arg(long)]
        closure: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum NormChoice {
    Euclidean,
    Sup,
    Taxicab,
}

impl From<NormChoice> for AmbientNorm {
    fn from(c: NormChoice) -> Self {
        match c {
            NormChoice::Euclidean => AmbientNorm::Euclidean,
            NormChoice::Sup => AmbientNorm::Sup,
            NormChoice::Taxicab => AmbientNorm::Taxicab,
        }
    }
}

#[derive(Clone)]
struct CoordList(Vec<Vec<f64>>);

fn parse_coords(text: &str) -> Result<CoordList, String> {
    let points: Result<Vec<Vec<f64>>, String> = text
        .split(';')
        .map(|point| {
            point
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let points = points?;
    if points.is_empty() {
        return Err("no points given".into());
    }
    Ok(CoordList(points))
}

#[derive(Clone)]
struct ChainLiteral(Vec<(usize, f64)>);

fn parse_chain_literal(text: &str) -> Result<ChainLiteral, String> {
    let mut entries = Vec::new();
    for item in text.split(',') {
        let (index, weight) = item
            .split_once(':')
            .ok_or_else(|| format!("expected index:weight, got {item:?}"))?;
        let index: usize = index.trim().parse().map_err(|e| format!("{e}"))?;
        let weight: f64 = weight.trim().parse().map_err(|e| format!("{e}"))?;
        entries.push((index, weight));
    }
    if entries.is_empty() {
        return Err("empty chain".into());
    }
    Ok(ChainLiteral(entries))
}

#[derive(Clone)]
struct IndexList(Vec<usize>);

fn parse_index_list(text: &str) -> Result<IndexList, String> {
    let idx: Result<Vec<usize>, _> = text
        .split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|e| format!("{e}")))
        .collect();
    let idx = idx?;
    if idx.is_empty() {
        return Err("empty index list".into());
    }
    Ok(IndexList(idx))
}

#[derive(Clone, Copy)]
struct IndexPair(usize, usize);

fn parse_index_pair(text: &str) -> Result<IndexPair, String> {
    let IndexList(idx) = parse_index_list(text)?;
    if idx.len() != 2 {
        return Err(format!("expected two indices, got {}", idx.len()));
    }
    Ok(IndexPair(idx[0], idx[1]))
}

#[derive(Clone)]
struct FloatList(Vec<f64>);

fn parse_float_list(text: &str) -> Result<FloatList, String> {
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("{e}")))
        .collect();
    Ok(FloatList(values?))
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    space: PathBuf,
    /// Chain literal, e.g. "1:1,3:1,0:-2".
    #[arg(long, value_parser = parse_chain_literal)]
    chain: ChainLiteral,
    /// Assign any weight residual to the base point.
    #[arg(long)]
    auto_balance: bool,
    /// Also print the dual certificate values.
    #[arg(long)]
    certificate: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    space: PathBuf,
    /// Classify a single pair, e.g. --pair 3,7.
    #[arg(long, value_parser = parse_index_pair, conflicts_with = "all")]
    pair: Option<IndexPair>,
    /// Classify every unordered pair.
    #[arg(long)]
    all: bool,
    /// Write the result as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DaugavetArgs {
    #[arg(long)]
    space: PathBuf,
    /// Constraint subset, e.g. --subset 0,4,9.
    #[arg(long, value_parser = parse_index_list)]
    subset: IndexList,
    #[arg(long)]
    eps: f64,
    /// Probe pair p,q: the search probes with the norm-one two-point
    /// quotient function of this pair.
    #[arg(long, value_parser = parse_index_pair)]
    probe: IndexPair,
}

#[derive(Args)]
struct ExtendArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, value_parser = parse_index_list)]
    subset: IndexList,
    /// Values on the subset, same order, e.g. --values 0,0.5,1.
    #[arg(long, value_parser = parse_float_list)]
    values: FloatList,
    #[arg(long, default_value_t = 1.0)]
    lipschitz_constant: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    init_thread_pool();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

// die quietly when a downstream pipe closes, like other line-oriented tools
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("LIPFREE_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            if threads > 0 {
                // ignore failure if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn load(path: &Path, cfg: &Config) -> lipfree::Result<(SpaceHandle, Option<String>)> {
    let (space, name) = load_space(path, cfg)?;
    Ok((Arc::new(space), name))
}

fn fmt12(value: f64) -> String {
    if value.is_finite() {
        format!("{}", round_sig(value, 12))
    } else {
        "inf".to_string()
    }
}

fn run(command: Command) -> lipfree::Result<()> {
    let cfg = Config::default();
    match command {
        Command::Validate { space } => {
            let (m, name) = load(&space, &cfg)?;
            println!("valid space: {}", name.as_deref().unwrap_or("unnamed"));
            println!("points            {}", m.n());
            println!("base_point        {}", m.base());
            println!("diameter          {}", fmt12(m.diameter()));
            println!("min_distance      {}", fmt12(m.min_positive_distance()));
        }
        Command::Gallery { kind } => {
            let (spec, out) = gallery_spec(kind);
            let space = build(&spec, &cfg)?;
            save_space(&space, Some(&spec.name()), &out)?;
            println!("wrote {} ({} points)", out.display(), space.n());
        }
        Command::Norm(args) => {
            let (m, _) = load(&args.space, &cfg)?;
            let mut entries = args.chain.0.clone();
            if args.auto_balance {
                let residual: f64 = entries.iter().map(|e| e.1).sum();
                entries.push((m.base(), -residual));
            }
            let chain = Chain::new(Arc::clone(&m), &entries, &cfg)?;
            let result = kr_norm(&chain)?;
            println!("primal_cost  {}", fmt12(result.flow.cost));
            println!("dual_value   {}", fmt12(result.certificate.value));
            println!("gap          {}", fmt12(result.gap()));
            if args.certificate {
                let values: Vec<f64> = result
                    .certificate
                    .f
                    .values()
                    .iter()
                    .map(|&v| round_sig(v, 12))
                    .collect();
                println!(
                    "certificate  {}",
                    serde_json::to_string(&values).expect("serializes")
                );
            }
        }
        Command::Classify(args) => {
            let (m, _) = load(&args.space, &cfg)?;
            let body = if let Some(IndexPair(x, y)) = args.pair {
                let record = classify_pair(&m, x, y, &cfg)?;
                serde_json::to_string_pretty(&record).expect("serializes")
            } else {
                let result = classify_all(&m, &cfg)?;
                serde_json::to_string_pretty(&result).expect("serializes")
            };
            emit(body, args.out.as_ref())?;
        }
        Command::Daugavet(args) => {
            let (m, _) = load(&args.space, &cfg)?;
            let IndexPair(p, q) = args.probe;
            let probe = f_xy(&m, p, q)?.rebased();
            let result = find_daugavet_pair(&probe, &args.subset.0, args.eps, &cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("serializes")
            );
        }
        Command::Extend(args) => {
            let (m, _) = load(&args.space, &cfg)?;
            let upper = mcshane_extend(
                &m,
                &args.subset.0,
                &args.values.0,
                args.lipschitz_constant,
                &cfg,
            )?;
            let lower = whitney_extend(
                &m,
                &args.subset.0,
                &args.values.0,
                args.lipschitz_constant,
                &cfg,
            )?;
            let body = serde_json::json!({
                "lipschitz_constant": args.lipschitz_constant,
                "mcshane": upper.values(),
                "mcshane_norm": round_sig(upper.norm(), 12),
                "whitney": lower.values(),
                "whitney_norm": round_sig(lower.norm(), 12),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&body).expect("serializes")
            );
        }
        Command::Report(args) => {
            let (m, name) = load(&args.space, &cfg)?;
            let report = build_report(&m, name.as_deref(), &cfg, !args.no_timestamp)?;
            save_report(&report, &args.out)?;
            println!(
                "wrote {} ({} pairs classified, {} exposed)",
                args.out.display(),
                report.classification.pair_count,
                report.classification.strongly_exposed_pairs.len()
            );
        }
    }
    Ok(())
}

fn gallery_spec(kind: GalleryKind) -> (SpaceSpec, PathBuf) {
    match kind {
        GalleryKind::Interval { n, out } => (SpaceSpec::Interval { n }, out),
        GalleryKind::Circle {
            n,
            circumference,
            chordal,
            out,
        } => (
            SpaceSpec::Circle {
                n,
                circumference,
                chordal,
            },
            out,
        ),
        GalleryKind::TwoIntervals { mesh, out } => (SpaceSpec::TwoIntervals { mesh }, out),
        GalleryKind::RTreeStar {
            legs,
            points_per_leg,
            leg_length,
            out,
        } => (
            SpaceSpec::RTreeStar {
                legs,
                points_per_leg,
                leg_length,
            },
            out,
        ),
        GalleryKind::EuclideanPoints { coords, norm, out } => (
            SpaceSpec::EuclideanPoints {
                points: coords.0,
                norm: norm.into(),
            },
            out,
        ),
        GalleryKind::Random {
            n,
            seed,
            dim,
            norm,
            closure,
            out,
        } => (
            SpaceSpec::Random {
                n,
                seed,
                dim,
                norm: norm.into(),
                closure,
            },
            out,
        ),
    }
}

fn emit(body: String, out: Option<&PathBuf>) -> lipfree::Result<()> {
    match out {
        Some(path) => {
            lipfree::io::atomic_write(path, body.as_bytes())?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{body}");
            Ok(())
        }
    }
}
