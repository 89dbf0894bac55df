//! `coselect` command line.
//!
//! Exit status: 0 on success, 2 for invalid parameters or a malformed
//! log/matrix (with the offending line), 3 when co-selection counts exceed
//! co-occurrence counts, 1 for anything else.

use std::fs::{self, File};
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coselect_core::community::{CommunityMode, PathMode, QualityMode};
use coselect_core::matrices::{accumulate, normalize, CoMatrix, MatrixError};
use coselect_core::metrics::MetricsConfig;
use coselect_core::pipeline::{
    analyze_counts, analyze_events, AnalysisOptions, PipelineError, Thresholds,
};
use coselect_core::simulator::{
    planted_catalog, simulate_population, NoiseModel, PopulationSpec, SimulationManifest,
};
use coselect_core::survey::{
    read_log, to_jsonl, LogError, LogRecord, SelectionEvent, SessionConfig,
};
use coselect_core::sweep::{grid_from_range, SweepOptions};

use crate::analysis::write_files;
use crate::server::{router, AppState, ServerConfig};

#[derive(Debug, Parser)]
#[command(
    name = "coselect",
    version,
    about = "Co-selection survey service and network analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the survey HTTP service.
    Serve(ServeArgs),
    /// Analyze a log (or count matrices) at one threshold.
    Analyze(AnalyzeArgs),
    /// Analyze a log (or count matrices) over a threshold grid.
    Sweep(SweepArgs),
    /// Generate a synthetic log over planted typologies.
    Simulate(SimulateArgs),
    /// Write the co-occurrence, co-selection and similarity matrices.
    ExportMatrices(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "COSELECT_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "COSELECT_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Enables admin endpoints from non-loopback peers with `Authorization: Bearer <token>`.
    #[arg(long, env = "COSELECT_ADMIN_TOKEN", hide_env_values = true)]
    pub admin_token: Option<String>,
    /// Service seed for panel draws; drawn at random and logged when absent.
    #[arg(long, env = "COSELECT_SEED")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 72)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 12)]
    pub panel_size: usize,
    #[arg(long, default_value_t = 10)]
    pub iterations: u32,
    #[arg(long)]
    pub exposure_balanced: bool,
    /// Directory of static web assets served at `/`.
    #[arg(long, env = "COSELECT_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// JSONL event log.
    #[arg(long, required_unless_present = "cooccurrence", conflicts_with_all = ["cooccurrence", "coselection"])]
    pub log: Option<PathBuf>,
    /// Co-occurrence count matrix CSV (use with --coselection).
    #[arg(long, requires = "coselection")]
    pub cooccurrence: Option<PathBuf>,
    /// Co-selection count matrix CSV (use with --cooccurrence).
    #[arg(long, requires = "cooccurrence")]
    pub coselection: Option<PathBuf>,
    /// Pool size (number of design ids).
    #[arg(long, default_value_t = 72)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub min_support: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Betweenness {
    Unweighted,
    WeightedInverse,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Quality {
    Weighted,
    Unweighted,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum, default_value = "unweighted")]
    pub betweenness: Betweenness,
    #[arg(long, value_enum, default_value = "weighted")]
    pub modularity: Quality,
    #[arg(long, default_value_t = 3)]
    pub clique_min_size: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub clique_limit: usize,
    /// Random graphs per small-world baseline.
    #[arg(long, default_value_t = 20)]
    pub n_random: usize,
    #[arg(long, default_value_t = 0)]
    pub metrics_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub powerlaw_x_min: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.15)]
    pub tau: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 0.6)]
    pub to: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Pool size.
    #[arg(long, default_value_t = 72)]
    pub n: usize,
    /// Number of planted typologies.
    #[arg(long, default_value_t = 6)]
    pub g: usize,
    /// Panel size.
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    /// Iterations per respondent.
    #[arg(long, default_value_t = 10)]
    pub t: u32,
    #[arg(long, default_value_t = 300)]
    pub respondents: usize,
    /// Miss rate.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// False-inclusion rate.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed for the planted labels; defaults to --seed.
    #[arg(long)]
    pub catalog_seed: Option<u64>,
    /// Draw each respondent's rates from [0, 2·rate].
    #[arg(long)]
    pub heterogeneous: bool,
    #[arg(long)]
    pub exposure_balanced: bool,
    #[arg(long, default_value = "sim")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value_t = 72)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub min_support: u32,
    #[arg(long, default_value = "matrices")]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Inconsistent(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Schema { .. } => 2,
            CliError::Inconsistent(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Matrix(m @ MatrixError::InconsistentCounts { .. }) => {
                CliError::Inconsistent(m.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Other(format!("{}: {e}", path.display()))
}

/// Selection events of a log; questionnaire lines are skipped.
pub fn load_events(path: &Path, pool_size: usize) -> Result<Vec<SelectionEvent>, CliError> {
    let file = File::open(path).map_err(io_error(path))?;
    let records = read_log(BufReader::new(file), Some(pool_size)).map_err(|e| match e {
        LogError::Schema { line, message } => CliError::Schema {
            path: path.to_path_buf(),
            line,
            message,
        },
        LogError::Io(e) => io_error(path)(e),
    })?;
    Ok(records
        .iter()
        .filter_map(LogRecord::as_selection)
        .cloned()
        .collect())
}

fn load_matrix(path: &Path, n: usize) -> Result<CoMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let m = CoMatrix::from_csv(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    if m.dim() != n {
        return Err(CliError::Invalid(format!(
            "{}: {}x{} matrix but --n is {n}",
            path.display(),
            m.dim(),
            m.dim()
        )));
    }
    Ok(m)
}

fn options(input: &InputArgs, graph: &GraphArgs, thresholds: Thresholds) -> AnalysisOptions {
    AnalysisOptions {
        pool_size: input.n,
        min_support: input.min_support,
        thresholds,
        graph: SweepOptions {
            community_mode: CommunityMode {
                betweenness: match graph.betweenness {
                    Betweenness::Unweighted => PathMode::Unweighted,
                    Betweenness::WeightedInverse => PathMode::WeightedInverse,
                },
                modularity: match graph.modularity {
                    Quality::Weighted => QualityMode::Weighted,
                    Quality::Unweighted => QualityMode::Unweighted,
                },
            },
            clique_min_size: graph.clique_min_size,
            clique_limit: graph.clique_limit,
        },
        metrics: MetricsConfig {
            n_random: graph.n_random,
            seed: graph.metrics_seed,
            powerlaw_x_min: graph.powerlaw_x_min,
        },
    }
}

fn run_pipeline(input: &InputArgs, options: &AnalysisOptions, out: &Path) -> Result<(), CliError> {
    let analysis = match (&input.log, &input.cooccurrence, &input.coselection) {
        (Some(log), _, _) => analyze_events(&load_events(log, input.n)?, options)?,
        (None, Some(c), Some(s)) => analyze_counts(
            load_matrix(c, input.n)?,
            load_matrix(s, input.n)?,
            0,
            options,
        )?,
        _ => {
            return Err(CliError::Invalid(
                "give --log or both --cooccurrence and --coselection".into(),
            ))
        }
    };
    report_written(write_files(out, &analysis.files()).map_err(io_error(out))?);
    Ok(())
}

fn report_written(paths: Vec<PathBuf>) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.tau) {
        return Err(CliError::Invalid(format!(
            "--tau {} outside [0, 1]",
            args.tau
        )));
    }
    let options = options(&args.input, &args.graph, Thresholds::Single(args.tau));
    run_pipeline(&args.input, &options, &args.out)
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let grid = grid_from_range(args.from, args.to, args.step)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let options = options(&args.input, &args.graph, Thresholds::Grid(grid));
    run_pipeline(&args.input, &options, &args.out)
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let invalid = |e: &dyn std::fmt::Display| CliError::Invalid(e.to_string());
    let catalog_seed = args.catalog_seed.unwrap_or(args.seed);
    let catalog = planted_catalog(args.n, args.g, catalog_seed).map_err(|e| invalid(&e))?;
    let population = PopulationSpec {
        config: SessionConfig {
            pool_size: args.n,
            panel_size: args.k,
            iterations: args.t,
            rng_seed: args.seed,
            exposure_balanced: args.exposure_balanced,
        },
        noise: NoiseModel {
            miss_rate: args.beta,
            false_rate: args.eps,
        },
        respondents: args.respondents,
        seed: args.seed,
        heterogeneous: args.heterogeneous,
    };
    let events = simulate_population(&catalog, &population).map_err(|e| invalid(&e))?;
    let manifest = SimulationManifest {
        typologies: args.g,
        catalog_seed,
        population,
        labels: catalog.labels,
    };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_json.push(b'\n');
    let files = [
        ("events.jsonl", to_jsonl(&events)),
        ("manifest.json", manifest_json),
    ]
    .into_iter()
    .collect();
    report_written(write_files(&args.out, &files).map_err(io_error(&args.out))?);
    Ok(())
}

fn export(args: &ExportArgs) -> Result<(), CliError> {
    let events = load_events(&args.log, args.n)?;
    let (c, s) = accumulate(&events, args.n).map_err(PipelineError::from)?;
    let w = normalize(&c, &s, args.min_support).map_err(PipelineError::from)?;
    let files = [
        ("cooccurrence.csv", c.to_csv().into_bytes()),
        ("coselection.csv", s.to_csv().into_bytes()),
        ("similarity.csv", w.to_csv().into_bytes()),
    ]
    .into_iter()
    .collect();
    report_written(write_files(&args.out, &files).map_err(io_error(&args.out))?);
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let seed = args.seed.unwrap_or_else(|| {
        let seed = rand::random();
        tracing::info!(seed, "no --seed given; drew a service seed");
        seed
    });
    let config = ServerConfig {
        data_dir: args.data_dir.clone(),
        session_defaults: SessionConfig {
            pool_size: args.pool_size,
            panel_size: args.panel_size,
            iterations: args.iterations,
            rng_seed: seed,
            exposure_balanced: args.exposure_balanced,
        },
        admin_token: args.admin_token.clone(),
        static_dir: args.static_dir.clone(),
    };
    config
        .session_defaults
        .validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let state = AppState::open(&config).map_err(|e| CliError::Other(e.to_string()))?;
    let app = router(state, config.static_dir.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .map_err(|e| CliError::Other(format!("bind {}: {e}", args.bind)))?;
        tracing::info!(addr = %args.bind, data_dir = %config.data_dir.display(), "listening");
        axum::serve(
            listener,
            app.into_make_service_with_connect_info::<SocketAddr>(),
        )
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Other(e.to_string()))
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Serve(a) => serve(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Simulate(a) => simulate(a),
        Command::ExportMatrices(a) => export(a),
    }
}

/// Runs the parsed command and maps the outcome to an exit status.
pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
