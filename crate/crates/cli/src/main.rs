#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use plastlab::Execution;
use plastlab_cli::config::{Exponent, SetKind};
use plastlab_cli::describe::describe;
use plastlab_cli::holder::check_set;
use plastlab_cli::{run_scenario, write_error, write_outcome, CliError, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "plastlab", version, about = "Time-discrete elastoplasticity experiments")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file.
    Run { config: PathBuf },
    /// Describe a builtin model or an experiment.
    Describe { name: String },
    /// Hölder check of the play operator on random input pairs.
    HolderCheck {
        /// interval, ball or cylinder.
        #[arg(long, default_value = "interval")]
        set: String,
        /// Lebesgue exponent, a number >= 1 or `inf`.
        #[arg(long, default_value = "2")]
        p: String,
        #[arg(long, default_value_t = 500)]
        pairs: usize,
        #[arg(long, default_value_t = 40)]
        max_steps: usize,
    },
}

fn report(err: &CliError, out: Option<&PathBuf>) -> ExitCode {
    eprintln!("{}", err.to_json());
    if let Some(dir) = out {
        write_error(dir, err);
    }
    ExitCode::from(err.code as u8)
}

fn run(cli: &Cli, path: &Path) -> Result<(), (CliError, Option<PathBuf>)> {
    let mut cfg = ScenarioConfig::load(path).map_err(|e| (e, cli.out.clone()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    info!("running {} on {}", cfg.experiment.name(), cfg.model.name);
    let outcome = run_scenario(&cfg).map_err(|e| (e, Some(out.clone())))?;
    write_outcome(&out, &outcome).map_err(|e| (e, None))?;
    let failed = outcome.failed_checks();
    if !failed.is_empty() {
        return Err((CliError::check(format!("failed checks: {}", failed.join(", "))), Some(out)));
    }
    println!(
        "{}: all {} checks passed, outputs in {}",
        cfg.experiment.name(),
        outcome.summary.checks.len(),
        out.display()
    );
    Ok(())
}

fn holder(cli: &Cli, set: &str, p: &str, pairs: usize, max_steps: usize) -> Result<(), CliError> {
    let kind = SetKind::parse(set).ok_or_else(|| CliError::config(format!("unknown set `{set}`")))?;
    let p = Exponent::parse(p)?;
    if pairs == 0 || max_steps < 2 {
        return Err(CliError::config("need at least one pair and two steps"));
    }
    let summary = check_set(kind, &[p], pairs, max_steps, cli.seed.unwrap_or(0), Execution::default())?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::io(e.to_string()))? + "\n";
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(e.to_string()))?;
        std::fs::write(dir.join("holder.json"), &text).map_err(|e| CliError::io(e.to_string()))?;
    }
    print!("{text}");
    if summary.holder.iter().all(|h| h.passed) {
        Ok(())
    } else {
        Err(CliError::check("Hoelder estimate violated"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return report(&CliError::config("--jobs must be at least 1"), None);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return report(&CliError::io(e.to_string()), None);
        }
    }
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Describe { name } => describe(name).map(|t| print!("{t}")).map_err(|e| (e, None)),
        Command::HolderCheck { set, p, pairs, max_steps } => {
            holder(&cli, set, p, *pairs, *max_steps).map_err(|e| (e, cli.out.clone()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, out)) => report(&e, out.as_ref()),
    }
}
