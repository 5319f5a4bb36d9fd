mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsad_core::eval::Metric;

use config::{BackendKind, Config, Threshold};
use error::{CliError, EXIT_CODES};

#[derive(Parser)]
#[command(name = "tsad", version, about = "Evidence-grounded univariate time-series anomaly detection", after_help = EXIT_CODES)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads for series-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write records (JSON lines).
    Detect(DetectArgs),
    /// Build a synthetic reference database from training data.
    BuildIcl(BuildIclArgs),
    /// Generate the typed synthetic benchmark.
    GenSynth(GenSynthArgs),
    /// Score records against labels.
    Eval(EvalArgs),
    /// Write diagnosis reports from existing records.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Dataset file or directory.
    dataset: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    token_budget: Option<usize>,
    #[arg(long)]
    merge_gap: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Canned answers for the mock backend.
    #[arg(long)]
    mock_dir: Option<PathBuf>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Reference database directory; enables retrieval.
    #[arg(long)]
    icl: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Supervisor confirmation threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Send the supervisor prompt to the completion backend.
    #[arg(long)]
    llm_supervisor: bool,
    /// Also write Markdown and JSON reports per series.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct BuildIclArgs {
    /// Training dataset file or directory.
    train: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    segment_length: Option<usize>,
    /// Use only this leading fraction of each series.
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    per_type: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Records file written by `detect`.
    #[arg(long)]
    records: PathBuf,
    /// Labeled dataset or benchmark directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated: point, pa, affiliation, delayed.
    #[arg(long, value_delimiter = ',', default_value = "point,pa,affiliation,delayed")]
    metrics: Vec<String>,
    /// A number in [0, 1] or best-f1.
    #[arg(long, value_parser = Threshold::parse)]
    threshold: Option<Threshold>,
    /// Delayed-F1 tolerance in steps.
    #[arg(long)]
    delay: Option<usize>,
    /// Analyzer evidence file; defaults to evidence.jsonl beside the records.
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory; prints Markdown when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    config: ConfigArg,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::InvalidConfig("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::InvalidConfig(e.to_string()))?;
    }
    match cli.command {
        Command::Detect(a) => {
            let mut cfg = Config::load(a.config.config.as_deref())?;
            set(&mut cfg.window, a.window);
            set(&mut cfg.stride, a.stride);
            set(&mut cfg.token_budget, a.token_budget);
            set(&mut cfg.merge_gap, a.merge_gap);
            set(&mut cfg.backend, a.backend);
            set(&mut cfg.max_in_flight, a.max_in_flight);
            set(&mut cfg.top_k, a.top_k);
            set(&mut cfg.threshold, a.tau.map(Threshold::Fixed));
            if a.mock_dir.is_some() {
                cfg.mock_dir = a.mock_dir;
            }
            if a.icl.is_some() {
                cfg.icl_dir = a.icl;
            }
            cfg.llm_supervisor |= a.llm_supervisor;
            commands::detect(&cfg, &a.dataset, &a.out, a.report)
        }
        Command::BuildIcl(a) => {
            let mut cfg = Config::load(a.config.config.as_deref())?;
            cfg.seed = a.seed;
            set(&mut cfg.segment_length, a.segment_length);
            if a.train_fraction.is_some() {
                cfg.train_fraction = a.train_fraction;
            }
            commands::build_icl(&cfg, &a.train, &a.out)
        }
        Command::GenSynth(a) => commands::gen_synth(&a.out, a.per_type, a.seed),
        Command::Eval(a) => {
            let mut cfg = Config::load(a.config.config.as_deref())?;
            set(&mut cfg.threshold, a.threshold);
            set(&mut cfg.delay, a.delay);
            let metrics = a
                .metrics
                .iter()
                .map(|m| match Metric::parse(m.trim()) {
                    Some(Metric::Delayed(_)) if m.trim() == "delayed" || m.trim() == "del" => Ok(Metric::Delayed(cfg.delay)),
                    Some(m) => Ok(m),
                    None => Err(CliError::InvalidConfig(format!("unknown metric `{m}`"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            commands::eval(&cfg, &a.records, &a.dataset, &metrics, a.evidence.as_deref(), a.out.as_deref())
        }
        Command::Report(a) => {
            let mut cfg = Config::load(a.config.config.as_deref())?;
            set(&mut cfg.threshold, a.tau.map(Threshold::Fixed));
            commands::report(&cfg, &a.records, &a.dataset, a.out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
