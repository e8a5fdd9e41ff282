use std::path::PathBuf;
use std::process::ExitCode;

use alscast_core::learning::LearningMethod;
use alscast_core::model::{SubscaleId, Technique};
use alscast_core::pipeline::{self, Filters, RunConfig};
use alscast_core::{par, Error};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alscast", version, about = "Daily functional-rating models from in-home sensor data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or ingest) the cohort CSVs.
    Synth(StageArgs),
    /// Build daily feature frames.
    Preprocess(StageArgs),
    /// Write pseudo-label series.
    Interpolate(StageArgs),
    /// Fit the learning grid.
    Train(StageArgs),
    /// Score fitted runs and write the summary tables.
    Evaluate(StageArgs),
    /// Render Taylor diagrams from metrics.csv.
    Taylor(StageArgs),
    /// Every stage in order.
    RunAll(StageArgs),
    /// Show configuration.
    Config {
        /// Print the default configuration as TOML.
        #[arg(long)]
        print_defaults: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    participant: Vec<String>,
    #[arg(long)]
    subscale: Vec<SubscaleId>,
    #[arg(long)]
    technique: Vec<Technique>,
    #[arg(long)]
    method: Vec<LearningMethod>,
}

impl StageArgs {
    fn resolve(&self) -> Result<(RunConfig, Filters), Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        cfg.validate()?;
        let filters = Filters {
            participants: self.participant.clone(),
            subscales: self.subscale.clone(),
            techniques: self.technique.clone(),
            methods: self.method.clone(),
        };
        Ok((cfg, filters))
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (stage, args) = match cli.command {
        Command::Config { print_defaults, config } => {
            let cfg = match config {
                Some(path) if !print_defaults => RunConfig::load(&path)?,
                _ => RunConfig::default(),
            };
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Synth(a) => ("synth", a),
        Command::Preprocess(a) => ("preprocess", a),
        Command::Interpolate(a) => ("interpolate", a),
        Command::Train(a) => ("train", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Taylor(a) => ("taylor", a),
        Command::RunAll(a) => ("run-all", a),
    };
    let (cfg, filters) = args.resolve()?;
    log::info!("{stage}: output in {}", cfg.out_dir.display());
    par::with_jobs(args.jobs, || match stage {
        "synth" => pipeline::stage_synth(&cfg),
        "preprocess" => pipeline::stage_preprocess(&cfg),
        "interpolate" => pipeline::stage_interpolate(&cfg, &filters),
        "train" => pipeline::stage_train(&cfg, &filters),
        "evaluate" => pipeline::stage_evaluate(&cfg).map(|_| ()),
        "taylor" => pipeline::stage_taylor(&cfg).map(|_| ()),
        _ => pipeline::run_all(&cfg, &filters),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
