mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifest::RunManifest;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const USAGE: u8 = 2;
    pub const INPUT: u8 = 3;
    pub const SERVICE: u8 = 4;

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: Self::INPUT,
            message: message.into(),
        }
    }

    pub fn service(message: impl Into<String>) -> Self {
        CliError {
            code: Self::SERVICE,
            message: message.into(),
        }
    }
}

impl From<idxtune::Error> for CliError {
    fn from(e: idxtune::Error) -> Self {
        let code = match e {
            idxtune::Error::Service(_) => Self::SERVICE,
            idxtune::Error::InvalidParameter(_) => Self::USAGE,
            _ => Self::INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(name = "idxtune", version, about = "Index tuning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rule-based covering-index recommendations per plan.
    Recommend(RunArgs),
    /// Two-phase greedy selection of at most k indexes from candidate pools.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// Candidate pool files (JSON index lists); defaults to the rule-based pool of the plans.
        #[arg(long, value_delimiter = ',')]
        pool: Vec<PathBuf>,
    },
    /// Render advisor prompts.
    Prompt {
        #[command(flatten)]
        run: RunArgs,
        /// One prompt per query (default).
        #[arg(long, conflicts_with = "multi")]
        single: bool,
        /// One prompt for the whole workload under the k constraint.
        #[arg(long)]
        multi: bool,
    },
    /// Ask the advisor service (or stub fixtures) for recommendations.
    Advise {
        #[command(flatten)]
        run: RunArgs,
        /// Prompt per query instead of one workload prompt.
        #[arg(long)]
        single: bool,
    },
    /// Materialize and time configurations in order with an adaptive cap.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        /// Configuration files, evaluated in the given order.
        #[arg(long, value_delimiter = ',', required = true)]
        configs: Vec<PathBuf>,
        /// Initial per-query timeout in seconds.
        #[arg(long, default_value_t = 300.0)]
        cap_secs: f64,
    },
    /// Time breakdown of a run directory's event log.
    Report {
        #[command(flatten)]
        run: RunArgs,
        /// Event log to summarize; defaults to events.jsonl in the run directory.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Generate a seeded synthetic catalog, plans and cost spec.
    Synth {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 6)]
        tables: usize,
        #[arg(long, default_value_t = 5)]
        queries: usize,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML run manifest; flags override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Plan file (repeatable).
    #[arg(long)]
    plan: Vec<PathBuf>,
    #[arg(long)]
    plans_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// What-if oracle backend.
    #[arg(long)]
    oracle: Option<String>,
    /// Synthetic workload spec (cost and time channels).
    #[arg(long)]
    sim: Option<PathBuf>,
    /// Advisor invocations.
    #[arg(long)]
    n: Option<usize>,
    /// Directory of canned advisor responses.
    #[arg(long)]
    stub: Option<PathBuf>,
    /// Run directory for outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let alpha: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&alpha) {
        Ok(alpha)
    } else {
        Err(format!("alpha must be in [0, 1), got {alpha}"))
    }
}

impl RunArgs {
    fn resolve(self) -> Result<RunManifest, CliError> {
        let base = match &self.manifest {
            Some(path) => RunManifest::load(path)?,
            None => RunManifest::default(),
        };
        let flags = RunManifest {
            catalog: self.catalog,
            plans: self.plan,
            plans_dir: self.plans_dir,
            sim: self.sim,
            oracle: self.oracle,
            alpha: self.alpha,
            k: self.k,
            n: self.n,
            stub: self.stub,
            out: self.out,
            seed: self.seed,
        };
        let manifest = base.overlay(flags);
        manifest.check()?;
        Ok(manifest)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Recommend(run) => commands::recommend(&run.resolve()?),
        Command::Tune { run, pool } => commands::tune(&run.resolve()?, &pool),
        Command::Prompt { run, multi, .. } => commands::prompt(&run.resolve()?, multi),
        Command::Advise { run, single } => commands::advise(&run.resolve()?, single),
        Command::Validate {
            run,
            configs,
            cap_secs,
        } => {
            if !(cap_secs.is_finite() && cap_secs > 0.0) {
                return Err(CliError::usage("--cap-secs must be positive"));
            }
            commands::validate(&run.resolve()?, &configs, cap_secs)
        }
        Command::Report { run, events } => commands::report(&run.resolve()?, events.as_deref()),
        Command::Synth {
            run,
            tables,
            queries,
        } => commands::synth(&run.resolve()?, tables, queries),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
