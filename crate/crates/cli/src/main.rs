//! Batch command-line tool for k-anonymizing trajectory datasets.
//!
//! `ingest` converts raw GPS logs into a canonical grid-cell CSV, `anonymize`
//! clusters and aligns it into a k-anonymous release with a JSON report,
//! `verify` re-checks a release, `bench` sweeps configurations into a
//! figure-ready CSV, and `synth` generates seeded random-walk datasets.

mod config;
mod pipeline;

use std::fmt::Display;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Config;
use trajanon::align::PairwiseAligner;
use trajanon::cluster::{CandidateEvaluation, ClusteringAlgorithm};
use trajanon::metrics::{verify_k_anonymity, BENCH_CSV_HEADER};
use trajanon::model::{
    crop, discretize, ingest_geolife, ingest_tdrive, random_walk_dataset, read_anonymized_csv,
    read_canonical_csv, southwest_origin, write_anonymized_csv, write_canonical_csv, Dataset,
    DatasetMeta, GeneralizedPoint, GridSpec, LengthDistribution, PhysicalParams,
};

const DEFAULT_EPSILON_M: f64 = 10.0;
const DEFAULT_EPSILON_T_S: f64 = 3600.0;
const DEFAULT_BITS_X: u32 = 7;
const DEFAULT_BITS_Y: u32 = 7;
const DEFAULT_BITS_T: u32 = 5;
/// 1 km x 1 km box on central Beijing, where both supported GPS corpora live.
const DEFAULT_CROP: &str = "39.9042,116.4074,1000,1000";
const DEFAULT_K_LIST: &str = "2,5,10,15";
const DEFAULT_ALGOS: &str = "heuristic,kmeans,iterative-kmeans,random";
const DEFAULT_LENGTHS: &str = "geometric:0.35,1,12";

/// Process failure with its exit code: 2 usage/input/output, 3 infeasible k,
/// 4 internal invariant breach, 5 verification failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
    Invariant(String),
    Verification(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::Usage(message.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Verification(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Infeasible(m)
            | CliError::Invariant(m)
            | CliError::Verification(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "trajanon",
    version,
    about = "K-anonymize spatiotemporal trajectory datasets by clustering and sequence alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert raw GPS logs or canonical CSV into a canonical grid-cell CSV.
    Ingest(IngestArgs),
    /// Cluster and align a canonical dataset into a k-anonymous release.
    Anonymize(AnonymizeArgs),
    /// Check that an anonymized CSV satisfies k-anonymity.
    Verify(VerifyArgs),
    /// Sweep algorithm x alignment x k x seed; one CSV row per run.
    Bench(BenchArgs),
    /// Generate a synthetic random-walk dataset in canonical CSV form.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Geolife,
    Tdrive,
    Canonical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Heuristic,
    Kmeans,
    IterativeKmeans,
    Random,
}

impl AlgoArg {
    fn algorithm(self) -> ClusteringAlgorithm {
        match self {
            AlgoArg::Heuristic => ClusteringAlgorithm::Heuristic,
            AlgoArg::Kmeans => ClusteringAlgorithm::Kmeans,
            AlgoArg::IterativeKmeans => ClusteringAlgorithm::IterativeKmeans,
            AlgoArg::Random => ClusteringAlgorithm::Random,
        }
    }

    fn label(self) -> &'static str {
        match self {
            AlgoArg::Heuristic => "heuristic",
            AlgoArg::Kmeans => "kmeans",
            AlgoArg::IterativeKmeans => "iterative-kmeans",
            AlgoArg::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlignArg {
    /// Minimum-loss pairwise alignment by dynamic programming.
    Progressive,
    /// Index-by-index alignment with the longer tail suppressed.
    Static,
}

impl AlignArg {
    fn aligner(self) -> PairwiseAligner {
        match self {
            AlignArg::Progressive => PairwiseAligner::Dynamic,
            AlignArg::Static => PairwiseAligner::Static,
        }
    }

    fn label(self) -> &'static str {
        match self {
            AlignArg::Progressive => "progressive",
            AlignArg::Static => "static",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EvalArg {
    /// Score candidates against the cluster's running released sequence.
    RunningHead,
    /// Score candidates by re-aligning the whole tentative cluster (slow).
    FullRealignment,
}

impl EvalArg {
    fn evaluation(self) -> CandidateEvaluation {
        match self {
            EvalArg::RunningHead => CandidateEvaluation::RunningHead,
            EvalArg::FullRealignment => CandidateEvaluation::FullRealignment,
        }
    }
}

macro_rules! from_str_via_value_enum {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$t as ValueEnum>::from_str(s, true)
            }
        }
    )*};
}
from_str_via_value_enum!(FormatArg, AlgoArg, AlignArg, EvalArg);

/// Physical grid parameters shared by several subcommands.
#[derive(Args, Debug)]
struct PhysicalArgs {
    /// Grid cell edge length in meters.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Time bin length in seconds.
    #[arg(long)]
    epsilon_t: Option<f64>,
    /// Grid origin "lat,lon" (southwest corner of the extent).
    #[arg(long)]
    origin: Option<String>,
}

/// Hierarchy depths; the grid has 2^bits cells per axis.
#[derive(Args, Debug)]
struct BitsArgs {
    #[arg(long)]
    grid_bits_x: Option<u32>,
    #[arg(long)]
    grid_bits_y: Option<u32>,
    #[arg(long)]
    grid_bits_t: Option<u32>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Dataset root directory (geolife, tdrive) or canonical CSV file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input layout.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output canonical CSV path; stats are written to "<out>.meta.json".
    #[arg(long)]
    out: Option<PathBuf>,
    /// Crop box "lat,lon,width_m,height_m" applied to geolife/tdrive records
    /// before grid snapping; "none" disables cropping.
    #[arg(long)]
    crop: Option<String>,
    #[command(flatten)]
    physical: PhysicalArgs,
    #[command(flatten)]
    bits: BitsArgs,
    /// Flat key=value config file; CLI flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnonymizeArgs {
    /// Canonical CSV dataset.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Minimum cluster size to aim for (at least 2).
    #[arg(long)]
    k: Option<usize>,
    /// Clustering strategy.
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Pairwise alignment strategy.
    #[arg(long, value_enum)]
    align: Option<AlignArg>,
    /// Candidate scoring inside heuristic clustering.
    #[arg(long, value_enum)]
    eval: Option<EvalArg>,
    /// Seed for all randomized choices.
    #[arg(long)]
    seed: Option<u64>,
    /// Output anonymized CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON path (default: "<out>.report.json").
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    physical: PhysicalArgs,
    /// Flat key=value config file; CLI flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Anonymized CSV to check.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Required minimum group size.
    #[arg(long)]
    k: Option<usize>,
    /// Flat key=value config file; CLI flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Canonical CSV dataset.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated k values (default "2,5,10,15").
    #[arg(long)]
    k_list: Option<String>,
    /// Comma-separated seeds (default "0").
    #[arg(long)]
    seed_list: Option<String>,
    /// Comma-separated clustering strategies (default: all four).
    #[arg(long)]
    algos: Option<String>,
    /// Comma-separated alignment strategies (default "progressive").
    #[arg(long)]
    aligns: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    physical: PhysicalArgs,
    /// Flat key=value config file; CLI flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of trajectories.
    #[arg(long)]
    n: Option<usize>,
    /// Length distribution: "uniform:MIN,MAX" or "geometric:P,MIN,MAX".
    #[arg(long)]
    lengths: Option<String>,
    /// Seed for the walk generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Output canonical CSV path; stats are written to "<out>.meta.json".
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    physical: PhysicalArgs,
    #[command(flatten)]
    bits: BitsArgs,
    /// Flat key=value config file; CLI flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match try_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn try_main(cli: Cli) -> Result<(), CliError> {
    init_thread_pool()?;
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Anonymize(args) => cmd_anonymize(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

/// Cap the global worker pool when TRAJANON_THREADS is set.
fn init_thread_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("TRAJANON_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::usage(format!("TRAJANON_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure {threads} worker threads: {e}")))
}

// ---------------------------------------------------------------------------
// Flag / config resolution

/// CLI value if given, else config value, else the default.
fn pick<T: FromStr>(cli: Option<T>, cfg: &Config, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: Display,
{
    Ok(cli.or(cfg.get::<T>(key)?).unwrap_or(default))
}

/// CLI value if given, else config value, else a usage error.
fn pick_required<T: FromStr>(cli: Option<T>, cfg: &Config, key: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    cli.or(cfg.get::<T>(key)?)
        .ok_or_else(|| CliError::usage(format!("--{key} is required (flag or config)")))
}

/// Raw string from CLI or config, for values with bespoke parsers.
fn pick_str(cli: Option<String>, cfg: &Config, key: &str) -> Option<String> {
    cli.or_else(|| cfg.raw(key).map(str::to_string))
}

fn parse_origin(s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let err = || CliError::usage(format!("origin must be \"lat,lon\", got {s:?}"));
    if parts.len() != 2 {
        return Err(err());
    }
    let lat = parts[0].parse().map_err(|_| err())?;
    let lon = parts[1].parse().map_err(|_| err())?;
    Ok((lat, lon))
}

struct CropBox {
    lat: f64,
    lon: f64,
    width_m: f64,
    height_m: f64,
}

fn parse_crop(s: &str) -> Result<Option<CropBox>, CliError> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let err = || {
        CliError::usage(format!(
            "crop must be \"lat,lon,width_m,height_m\" or \"none\", got {s:?}"
        ))
    };
    if parts.len() != 4 {
        return Err(err());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| err())?;
    if !(nums[2] > 0.0 && nums[3] > 0.0) {
        return Err(err());
    }
    Ok(Some(CropBox { lat: nums[0], lon: nums[1], width_m: nums[2], height_m: nums[3] }))
}

fn parse_lengths(s: &str) -> Result<LengthDistribution, CliError> {
    let err = || {
        CliError::usage(format!(
            "lengths must be \"uniform:MIN,MAX\" or \"geometric:P,MIN,MAX\", got {s:?}"
        ))
    };
    let (kind, rest) = s.split_once(':').ok_or_else(err)?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    match (kind.trim(), parts.as_slice()) {
        ("uniform", [min, max]) => Ok(LengthDistribution::Uniform {
            min: min.parse().map_err(|_| err())?,
            max: max.parse().map_err(|_| err())?,
        }),
        ("geometric" | "geom", [p, min, max]) => Ok(LengthDistribution::Geometric {
            p: p.parse().map_err(|_| err())?,
            min: min.parse().map_err(|_| err())?,
            max: max.parse().map_err(|_| err())?,
        }),
        _ => Err(err()),
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    let items: Result<Vec<T>, CliError> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|e| CliError::usage(format!("invalid {what} entry {p:?}: {e}")))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(CliError::usage(format!("{what} list must not be empty")));
    }
    Ok(items)
}

struct ResolvedPhysical {
    epsilon_m: f64,
    epsilon_t_s: f64,
    origin: Option<(f64, f64)>,
}

fn resolve_physical(args: PhysicalArgs, cfg: &Config) -> Result<ResolvedPhysical, CliError> {
    let epsilon_m = pick(args.epsilon, cfg, "epsilon", DEFAULT_EPSILON_M)?;
    let epsilon_t_s = pick(args.epsilon_t, cfg, "epsilon-t", DEFAULT_EPSILON_T_S)?;
    let origin = match pick_str(args.origin, cfg, "origin") {
        Some(s) => Some(parse_origin(&s)?),
        None => None,
    };
    Ok(ResolvedPhysical { epsilon_m, epsilon_t_s, origin })
}

impl ResolvedPhysical {
    fn params(&self) -> PhysicalParams {
        let (origin_lat, origin_lon) = self.origin.unwrap_or((0.0, 0.0));
        PhysicalParams {
            origin_lat,
            origin_lon,
            epsilon_m: self.epsilon_m,
            epsilon_t_s: self.epsilon_t_s,
        }
    }
}

fn resolve_bits(args: BitsArgs, cfg: &Config) -> Result<(u32, u32, u32), CliError> {
    Ok((
        pick(args.grid_bits_x, cfg, "grid-bits-x", DEFAULT_BITS_X)?,
        pick(args.grid_bits_y, cfg, "grid-bits-y", DEFAULT_BITS_Y)?,
        pick(args.grid_bits_t, cfg, "grid-bits-t", DEFAULT_BITS_T)?,
    ))
}

// ---------------------------------------------------------------------------
// File plumbing

fn open_reader(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_failed(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::usage(format!("cannot write {}: {e}", path.display()))
}

fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}.{suffix}", out.display()))
}

fn read_dataset(path: &Path, physical: &PhysicalParams) -> Result<Dataset, CliError> {
    read_canonical_csv(open_reader(path)?, physical)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write_dataset(dataset: &Dataset, out: &Path, meta: &DatasetMeta) -> Result<(), CliError> {
    let mut w = create_writer(out)?;
    write_canonical_csv(dataset, &mut w)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    w.flush().map_err(write_failed(out))?;
    let meta_out = sidecar_path(out, "meta.json");
    let mut w = create_writer(&meta_out)?;
    serde_json::to_writer_pretty(&mut w, meta)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", meta_out.display())))?;
    writeln!(w).and_then(|()| w.flush()).map_err(write_failed(&meta_out))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_ingest(args: IngestArgs) -> Result<(), CliError> {
    let cfg = config::load_optional(args.config.as_deref())?;
    let input: PathBuf = pick_required(args.input, &cfg, "input")?;
    let format: FormatArg = pick_required(args.format, &cfg, "format")?;
    let out: PathBuf = pick_required(args.out, &cfg, "out")?;
    let physical = resolve_physical(args.physical, &cfg)?;

    if format == FormatArg::Canonical {
        let dataset = read_dataset(&input, &physical.params())?;
        let meta = DatasetMeta::describe(&dataset, 0, 0);
        write_dataset(&dataset, &out, &meta)?;
        println!(
            "wrote {} trajectories / {} points to {}",
            dataset.n_trajectories(),
            dataset.n_points(),
            out.display()
        );
        return Ok(());
    }

    let (bits_x, bits_y, bits_t) = resolve_bits(args.bits, &cfg)?;
    let outcome = match format {
        FormatArg::Geolife => ingest_geolife(&input),
        FormatArg::Tdrive => ingest_tdrive(&input),
        FormatArg::Canonical => unreachable!("handled above"),
    }
    .map_err(|e| CliError::usage(format!("{}: {e}", input.display())))?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }

    let crop_spec =
        pick_str(args.crop, &cfg, "crop").unwrap_or_else(|| DEFAULT_CROP.to_string());
    let parsed = outcome.records.len();
    let (records, crop_box) = match parse_crop(&crop_spec)? {
        Some(b) => (crop(outcome.records, b.lat, b.lon, b.width_m, b.height_m), Some(b)),
        None => (outcome.records, None),
    };
    let crop_dropped = parsed - records.len();

    let (origin_lat, origin_lon) = match (physical.origin, &crop_box) {
        (Some(origin), _) => origin,
        (None, Some(b)) => southwest_origin(b.lat, b.lon, b.width_m, b.height_m),
        (None, None) => {
            return Err(CliError::usage(
                "--origin is required when cropping is disabled".to_string(),
            ))
        }
    };
    let grid = GridSpec::new(
        origin_lat,
        origin_lon,
        physical.epsilon_m,
        physical.epsilon_t_s,
        bits_x,
        bits_y,
        bits_t,
    )
    .map_err(|e| CliError::usage(e.to_string()))?;

    let discretized = discretize(&records, &grid).map_err(|e| {
        CliError::usage(format!("no usable records after cropping and grid snapping: {e}"))
    })?;
    let dropped = crop_dropped + discretized.dropped_records;
    let meta = DatasetMeta::describe(&discretized.dataset, dropped, outcome.malformed_lines);
    write_dataset(&discretized.dataset, &out, &meta)?;
    println!(
        "wrote {} trajectories / {} points to {} (dropped {} records, {} malformed lines)",
        discretized.dataset.n_trajectories(),
        discretized.dataset.n_points(),
        out.display(),
        dropped,
        outcome.malformed_lines
    );
    Ok(())
}

struct ResolvedRun {
    k: usize,
    algo: AlgoArg,
    align: AlignArg,
    eval: EvalArg,
}

impl ResolvedRun {
    fn spec(&self, seed: u64) -> pipeline::RunSpec {
        pipeline::RunSpec {
            algorithm: self.algo.algorithm(),
            algorithm_label: self.algo.label(),
            aligner: self.align.aligner(),
            align_label: self.align.label(),
            evaluation: self.eval.evaluation(),
            k: self.k,
            seed,
        }
    }
}

fn check_k(k: usize) -> Result<usize, CliError> {
    if k < 2 {
        return Err(CliError::usage(format!("k must be at least 2, got {k}")));
    }
    Ok(k)
}

fn cmd_anonymize(args: AnonymizeArgs) -> Result<(), CliError> {
    let cfg = config::load_optional(args.config.as_deref())?;
    let input: PathBuf = pick_required(args.input, &cfg, "input")?;
    let out: PathBuf = pick_required(args.out, &cfg, "out")?;
    let report_path = match args.report.or(cfg.get::<PathBuf>("report")?) {
        Some(p) => p,
        None => sidecar_path(&out, "report.json"),
    };
    let run = ResolvedRun {
        k: check_k(pick_required(args.k, &cfg, "k")?)?,
        algo: pick(args.algo, &cfg, "algo", AlgoArg::IterativeKmeans)?,
        align: pick(args.align, &cfg, "align", AlignArg::Progressive)?,
        eval: pick(args.eval, &cfg, "eval", EvalArg::RunningHead)?,
    };
    let seed: u64 = pick(args.seed, &cfg, "seed", 0)?;
    let physical = resolve_physical(args.physical, &cfg)?;

    let dataset = read_dataset(&input, &physical.params())?;
    if dataset.n_trajectories() < run.k {
        return Err(CliError::Infeasible(format!(
            "dataset has {} trajectories but k = {}",
            dataset.n_trajectories(),
            run.k
        )));
    }

    let (released, report) = pipeline::run(&dataset, &run.spec(seed)).map_err(run_error)?;

    let mut w = create_writer(&out)?;
    write_anonymized_csv(released.rows(), &mut w)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    w.flush().map_err(write_failed(&out))?;

    let mut w = create_writer(&report_path)?;
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", report_path.display())))?;
    writeln!(w).and_then(|()| w.flush()).map_err(write_failed(&report_path))?;

    println!(
        "k={} algorithm={} align={} clusters={} total_loss_bits={} -> {}",
        report.k,
        report.algorithm,
        report.align,
        report.n_clusters,
        report.total_loss_bits,
        out.display()
    );
    Ok(())
}

fn run_error(e: pipeline::RunError) -> CliError {
    match e {
        pipeline::RunError::Infeasible(m) => CliError::Infeasible(m),
        pipeline::RunError::Invariant(m) => CliError::Invariant(m),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = config::load_optional(args.config.as_deref())?;
    let input: PathBuf = pick_required(args.input, &cfg, "input")?;
    let k: usize = pick_required(args.k, &cfg, "k")?;
    if k == 0 {
        return Err(CliError::usage("k must be at least 1".to_string()));
    }
    let released = read_anonymized_csv(open_reader(&input)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", input.display())))?;
    let sequences: Vec<&[GeneralizedPoint]> =
        released.iter().map(|r| r.points.as_slice()).collect();
    let result = verify_k_anonymity(sequences.iter().copied(), k);
    if result.holds {
        println!(
            "k-anonymity holds for k = {k}: {} members in {} equality groups",
            released.len(),
            result.n_groups
        );
        Ok(())
    } else {
        println!(
            "k-anonymity FAILS for k = {k}: group sizes below k: {}",
            result
                .offending_group_sizes
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        );
        Err(CliError::Verification(format!(
            "release is not {k}-anonymous ({} undersized groups)",
            result.offending_group_sizes.len()
        )))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = config::load_optional(args.config.as_deref())?;
    let input: PathBuf = pick_required(args.input, &cfg, "input")?;
    let out: PathBuf = pick_required(args.out, &cfg, "out")?;
    let k_list: Vec<usize> = parse_list(
        &pick_str(args.k_list, &cfg, "k-list").unwrap_or_else(|| DEFAULT_K_LIST.to_string()),
        "k",
    )?;
    for &k in &k_list {
        check_k(k)?;
    }
    let seeds: Vec<u64> = parse_list(
        &pick_str(args.seed_list, &cfg, "seed-list").unwrap_or_else(|| "0".to_string()),
        "seed",
    )?;
    let algos: Vec<AlgoArg> = parse_list(
        &pick_str(args.algos, &cfg, "algos").unwrap_or_else(|| DEFAULT_ALGOS.to_string()),
        "algorithm",
    )?;
    let aligns: Vec<AlignArg> = parse_list(
        &pick_str(args.aligns, &cfg, "aligns").unwrap_or_else(|| "progressive".to_string()),
        "alignment",
    )?;
    let eval: EvalArg = pick(None, &cfg, "eval", EvalArg::RunningHead)?;
    let physical = resolve_physical(args.physical, &cfg)?;

    let dataset = read_dataset(&input, &physical.params())?;
    let mut rows = Vec::new();
    for &algo in &algos {
        for &align in &aligns {
            for &k in &k_list {
                for &seed in &seeds {
                    let run = ResolvedRun { k, algo, align, eval };
                    match pipeline::run(&dataset, &run.spec(seed)) {
                        Ok((_, report)) => rows.push(report.csv_row("ok")),
                        Err(e) => {
                            eprintln!(
                                "warning: {} align={} k={} seed={} failed: {}",
                                algo.label(),
                                align.label(),
                                k,
                                seed,
                                e.message()
                            );
                            rows.push(format!(
                                "{},{},{},{},{}{}",
                                algo.label(),
                                align.label(),
                                k,
                                seed,
                                e.status_tag(),
                                ",".repeat(15)
                            ));
                        }
                    }
                }
            }
        }
    }

    let mut w = create_writer(&out)?;
    writeln!(w, "{BENCH_CSV_HEADER}").map_err(write_failed(&out))?;
    for row in &rows {
        writeln!(w, "{row}").map_err(write_failed(&out))?;
    }
    w.flush().map_err(write_failed(&out))?;
    println!("wrote {} runs to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let cfg = config::load_optional(args.config.as_deref())?;
    let out: PathBuf = pick_required(args.out, &cfg, "out")?;
    let n: usize = pick(args.n, &cfg, "n", 500)?;
    let seed: u64 = pick(args.seed, &cfg, "seed", 0)?;
    let lengths = parse_lengths(
        &pick_str(args.lengths, &cfg, "lengths").unwrap_or_else(|| DEFAULT_LENGTHS.to_string()),
    )?;
    let physical = resolve_physical(args.physical, &cfg)?;
    let (bits_x, bits_y, bits_t) = resolve_bits(args.bits, &cfg)?;
    let (origin_lat, origin_lon) = physical.origin.unwrap_or((0.0, 0.0));
    let grid = GridSpec::new(
        origin_lat,
        origin_lon,
        physical.epsilon_m,
        physical.epsilon_t_s,
        bits_x,
        bits_y,
        bits_t,
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    let dataset = random_walk_dataset(&grid, n, &lengths, seed)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let meta = DatasetMeta::describe(&dataset, 0, 0);
    write_dataset(&dataset, &out, &meta)?;
    println!(
        "wrote {} synthetic trajectories / {} points to {}",
        dataset.n_trajectories(),
        dataset.n_points(),
        out.display()
    );
    Ok(())
}
