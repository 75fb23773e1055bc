//! Command-line front end: analytic reports, raw simulations and the
//! verification suites, written as CSV or JSON.
//!
//! Exit codes: 0 on success, 1 when a required check fails (or on I/O
//! errors), 2 on usage or validation errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dyncover::analytic::{self, AnalyticError};
use dyncover::stats::{self, StatsError};
use dyncover::{parse_insertion, run_walk, run_walk_traced, ConfigError, Insertion, ModelConfig};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "dyncover", version, about = "Random walk cover statistics on a growing complete graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads; defaults to the available parallelism
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every closed form for one configuration
    Analytic {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Simulate runs and emit one summary row per run
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Also dump the event log of run 0 as CSV
        #[arg(long)]
        event_log: Option<PathBuf>,
    },
    /// Compare closed forms with Monte Carlo estimates
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Trace the mean of N_T / T over a grid of horizons
    Lln {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Increasing horizons, comma separated
        #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
        horizons: Vec<u32>,
    },
    /// KS distance of standardized N_T to the standard normal
    Clt {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Empirical deviation tails against the bounded-difference bound
    Azuma {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Deviations to test, comma separated
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
        t_grid: Vec<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON config file; flags given on the command line override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k0: Option<u32>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// `deterministic` or `poisson:<beta>`
    #[arg(long)]
    pub insertion: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 10_000)]
    pub runs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Analytic(AnalyticError),
    #[error("{0}")]
    Stats(StatsError),
}

impl From<AnalyticError> for CliError {
    fn from(err: AnalyticError) -> Self {
        match err {
            AnalyticError::Config(c) => CliError::Config(c),
            other => CliError::Analytic(other),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(err: StatsError) -> Self {
        match err {
            StatsError::Analytic(a) => a.into(),
            other => CliError::Stats(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}

fn io_error(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl ModelArgs {
    /// Merges the config file with flags and validates the result.
    pub fn resolve(&self, need_horizon: bool) -> Result<ModelConfig, CliError> {
        let file: Option<ModelConfig> = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                Some(
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                )
            }
            None => None,
        };
        let missing = |name: &str| CliError::Usage(format!("missing required value --{name}"));
        let k0 = self.k0.or(file.map(|c| c.k0)).ok_or_else(|| missing("k0"))?;
        let lambda = self.lambda.or(file.map(|c| c.lambda)).ok_or_else(|| missing("lambda"))?;
        let horizon = match self.horizon.or(file.map(|c| c.horizon)) {
            Some(h) => h,
            None if need_horizon => return Err(missing("horizon")),
            None => 1,
        };
        let insertion = match &self.insertion {
            Some(text) => parse_insertion(text)?,
            None => file.map_or(Insertion::Deterministic, |c| c.insertion),
        };
        let seed = self.seed.or(file.map(|c| c.seed)).unwrap_or(0);
        Ok(ModelConfig::new(k0, lambda, horizon)
            .with_insertion(insertion)
            .with_seed(seed)
            .validate()?)
    }
}

/// Parses a full argument vector, program name first.
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

struct Sink {
    out: Box<dyn Write>,
    path: Option<PathBuf>,
}

impl Sink {
    fn open(args: &OutputArgs) -> Result<Sink, CliError> {
        let out: Box<dyn Write> = match &args.out {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink {
            out,
            path: args.out.clone(),
        })
    }

    fn fail(&self, source: io::Error) -> CliError {
        io_error(self.path.as_deref().unwrap_or(Path::new("<stdout>")), source)
    }

    fn json<T: Serialize + ?Sized>(mut self, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| self.fail(e.into()))?;
        writeln!(self.out, "{text}").map_err(|e| self.fail(e))?;
        self.out.flush().map_err(|e| self.fail(e))
    }

    fn csv<R: Serialize>(mut self, rows: &[R]) -> Result<(), CliError> {
        let result = (|| {
            let mut writer = csv::Writer::from_writer(&mut self.out);
            for row in rows {
                writer.serialize(row).map_err(io::Error::from)?;
            }
            writer.flush()
        })();
        result.map_err(|e| self.fail(e))?;
        self.out.flush().map_err(|e| self.fail(e))
    }

    fn emit<R: Serialize, J: Serialize + ?Sized>(self, format: Format, rows: &[R], json: &J) -> Result<(), CliError> {
        match format {
            Format::Csv => self.csv(rows),
            Format::Json => self.json(json),
        }
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    quantity: &'a str,
    value: f64,
    reference: &'a str,
}

#[derive(Serialize)]
struct RunRow {
    run: u64,
    covered: u32,
    visits_to_start: u32,
    at_start_at_t: bool,
    no_second_visit: bool,
    final_vertex_count: u32,
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    quantity: &'a str,
    analytic: f64,
    mc_mean: f64,
    stderr: f64,
    z: f64,
    pass: &'a str,
}

fn worker_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

fn progress(what: &str, runs: u64, config: &ModelConfig) {
    eprintln!(
        "dyncover: {what}: {runs} runs, k0={} lambda={} T={} insertion={} seed={}",
        config.k0, config.lambda, config.horizon, config.insertion, config.seed
    );
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let pool = worker_pool(cli.threads)?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Analytic { model, output } => {
            let config = model.resolve(true)?;
            let report = analytic::full_report(&config)?;
            let rows: Vec<ReportRow> = report
                .values
                .iter()
                .map(|(k, &v)| ReportRow {
                    quantity: k,
                    value: v,
                    reference: &report.refs[k],
                })
                .collect();
            for flag in &report.flags {
                eprintln!("dyncover: note: {flag}");
            }
            Sink::open(&output)?.emit(output.format, &rows, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            model,
            run,
            output,
            event_log,
        } => {
            let config = model.resolve(true)?;
            progress("simulate", run.runs, &config);
            let rows: Vec<RunRow> = (0..run.runs)
                    .into_par_iter()
                    .map(|index| {
                        let s = run_walk(&config, index);
                        RunRow {
                            run: index,
                            covered: s.covered,
                            visits_to_start: s.visits_to_start,
                            at_start_at_t: s.at_start_at_t,
                            no_second_visit: s.no_second_visit,
                            final_vertex_count: s.final_vertex_count,
                        }
                    })
                    .collect();
            if let Some(path) = event_log {
                let (_, log) = run_walk_traced(&config, 0);
                let file = File::create(&path).map_err(|e| io_error(&path, e))?;
                let mut writer = BufWriter::new(file);
                log.write_csv(&mut writer)
                    .and_then(|_| writer.flush())
                    .map_err(|e| io_error(&path, e))?;
            }
            Sink::open(&output)?.emit(output.format, &rows, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { model, run, output } => {
            let config = model.resolve(true)?;
            progress("verify", run.runs, &config);
            let verdicts = stats::verify(&config, run.runs)?;
            let rows: Vec<VerdictRow> = verdicts
                .iter()
                .map(|v| VerdictRow {
                    quantity: &v.quantity,
                    analytic: v.analytic,
                    mc_mean: v.estimate.mean,
                    stderr: v.estimate.stderr,
                    z: v.z_score,
                    pass: v.outcome.as_str(),
                })
                .collect();
            Sink::open(&output)?.emit(output.format, &rows, &verdicts)?;
            Ok(exit_for(verdicts.iter().all(|v| v.passed())))
        }
        Command::Lln {
            model,
            run,
            output,
            horizons,
        } => {
            let config = model.resolve(false)?;
            eprintln!(
                "dyncover: lln: {} runs per horizon, k0={} lambda={} horizons={:?} seed={}",
                run.runs, config.k0, config.lambda, horizons, config.seed
            );
            let trace = stats::lln_trace(config.k0, config.lambda, &horizons, run.runs, config.seed)?;
            Sink::open(&output)?.emit(output.format, &trace, &trace)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Clt { model, run, output } => {
            let config = model.resolve(true)?;
            progress("clt", run.runs, &config);
            let report = stats::clt_check(&config, run.runs)?;
            Sink::open(&output)?.emit(output.format, &[report], &report)?;
            Ok(exit_for(report.pass))
        }
        Command::Azuma {
            model,
            run,
            output,
            t_grid,
        } => {
            let config = model.resolve(true)?;
            if t_grid.iter().any(|t| t.is_nan() || *t < 0.0) {
                return Err(CliError::Usage("--t-grid values must be non-negative".into()));
            }
            progress("azuma", run.runs, &config);
            let points = stats::azuma_check(&config, run.runs, &t_grid)?;
            Sink::open(&output)?.emit(output.format, &points, &points)?;
            Ok(exit_for(points.iter().all(|p| p.pass)))
        }
    }
}

fn exit_for(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Full entry point: parse, execute, map errors onto exit codes.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("dyncover: error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
