use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dcfootprint::pipeline::{self, Job, Overrides, PipelineError, StageSummary};
use dcfootprint::synth::{self, SynthSpec};
use dcfootprint_service::{AppState, ServeError, ServiceConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Data-center electricity load and emissions attribution.
#[derive(Debug, Parser)]
#[command(name = "dcfootprint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Fraction of the year at nameplate capacity.
    #[arg(long)]
    uptime: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, deduplicate and geo-assign the inputs.
    Ingest(RunArgs),
    /// Fill missing capacities with the boosted-tree model.
    Impute(RunArgs),
    /// Attribute each facility's load to the plants of its balancing authority.
    Attribute(RunArgs),
    /// Write roll-up tables and the summary.
    Report(RunArgs),
    /// All four stages in order.
    Run(RunArgs),
    /// Serve the artifacts of a run over HTTP.
    Serve {
        /// Service configuration (TOML).
        #[arg(long)]
        service_config: Option<PathBuf>,
        /// Run configuration whose output directory holds the artifacts.
        #[arg(long, short, conflicts_with = "artifacts")]
        config: Option<PathBuf>,
        /// Artifact directory.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write a synthetic corpus and a config that runs it.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        facilities: Option<usize>,
        #[arg(long)]
        plants: Option<usize>,
        #[arg(long)]
        bas: Option<usize>,
    },
}

/// Exit status for a failed command: 2 when the run could not start or
/// finish for reasons outside the data, 1 when the data failed validation.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return if e.is_fatal() { 2 } else { 1 };
        }
        if cause.downcast_ref::<ServeError>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<dcfootprint_service::ConfigError>().is_some() {
            return 2;
        }
    }
    2
}

fn job(args: &RunArgs) -> Result<Job, PipelineError> {
    let overrides = Overrides { uptime: args.uptime, seed: args.seed, out_dir: args.out.clone() };
    Job::from_file(&args.config, overrides)
}

fn print_summary(s: &StageSummary) {
    for w in &s.warnings {
        log::warn!("{}: {w}", s.stage);
    }
    println!("{}: wrote {}", s.stage, s.artifacts.join(", "));
}

fn stage(args: &RunArgs, f: fn(&Job) -> Result<StageSummary, PipelineError>) -> anyhow::Result<()> {
    let job = job(args)?;
    print_summary(&f(&job)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(args) => stage(&args, pipeline::ingest),
        Command::Impute(args) => stage(&args, pipeline::impute),
        Command::Attribute(args) => stage(&args, pipeline::attribute),
        Command::Report(args) => stage(&args, pipeline::report),
        Command::Run(args) => {
            let job = job(&args)?;
            for s in pipeline::run_all(&job)? {
                print_summary(&s);
            }
            println!("artifacts in {}", job.out_dir.display());
            Ok(())
        }
        Command::Serve { service_config, config, artifacts, port } => {
            let mut cfg = ServiceConfig::load(service_config.as_deref())?;
            if let Some(path) = config {
                cfg.artifacts = Job::from_file(&path, Overrides::default())?.out_dir;
            }
            if let Some(dir) = artifacts {
                cfg.artifacts = dir;
            }
            if let Some(p) = port {
                cfg.port = p;
            }
            let rt = tokio::runtime::Runtime::new().context("starting async runtime")?;
            let state = AppState::new(cfg);
            rt.block_on(dcfootprint_service::serve(state))?;
            Ok(())
        }
        Command::Synth { out, seed, facilities, plants, bas } => {
            let mut spec = SynthSpec::default();
            spec.seed = seed.unwrap_or(spec.seed);
            spec.n_facilities = facilities.unwrap_or(spec.n_facilities);
            spec.n_plants = plants.unwrap_or(spec.n_plants);
            spec.n_bas = bas.unwrap_or(spec.n_bas);
            if spec.n_bas == 0 || spec.n_plants < spec.n_bas {
                anyhow::bail!("need at least one plant per balancing authority");
            }
            let corpus = synth::generate(&spec);
            let config = synth::write_corpus(&corpus, &spec, &out)
                .with_context(|| format!("writing corpus to {}", out.display()))?;
            println!("{}", config.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
