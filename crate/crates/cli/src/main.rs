//! `gaia`: command-line front end for the transfer-learning toolkit.
//!
//! Exit status is 0 on success, 1 when a domain operation fails (the
//! error's type name is printed) and 2 on usage errors.

mod cmd;
mod ctx;
mod errors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctx::Ctx;

#[derive(Parser)]
#[command(name = "gaia", version, about = "Label unification, search-space tools, FLOPs, TSAS/TSDS and toy supernet mechanics")]
struct Cli {
    /// Master seed; every stochastic step derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for every file a subcommand writes.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Key/value config file (flags override it, it overrides defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Evaluation cache file; relative paths live under --out. GAIA_CACHE
    /// is used when the flag is absent.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unified label spaces and head-surgery plans.
    #[command(subcommand)]
    Labels(cmd::labels::LabelsCmd),
    /// Search-space counting, enumeration, sampling and schedules.
    #[command(subcommand)]
    Space(cmd::space::SpaceCmd),
    /// FLOPs, FLOPs bands and latency fits.
    #[command(subcommand)]
    Cost(cmd::cost::CostCmd),
    /// Two-step architecture search and ranking studies.
    #[command(subcommand)]
    Search(cmd::search::SearchCmd),
    /// Task-specific data selection.
    #[command(subcommand)]
    Data(cmd::data::DataCmd),
    /// Toy weight-sharing supernet.
    #[command(subcommand)]
    Supernet(cmd::supernet::SupernetCmd),
    /// Render a CSV table as an SVG scatter or line chart.
    Report(cmd::report::ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx::new(cli.seed, cli.out, cli.config.as_deref(), cli.cache)?;
    match cli.command {
        Command::Labels(c) => cmd::labels::run(&ctx, c),
        Command::Space(c) => cmd::space::run(&ctx, c),
        Command::Cost(c) => cmd::cost::run(&ctx, c),
        Command::Search(c) => cmd::search::run(&ctx, c),
        Command::Data(c) => cmd::data::run(&ctx, c),
        Command::Supernet(c) => cmd::supernet::run(&ctx, c),
        Command::Report(a) => cmd::report::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
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
            if let Some(u) = e.downcast_ref::<errors::UsageError>() {
                eprintln!("usage error: {u}");
                return ExitCode::from(2);
            }
            let name = errors::typed_name(&e);
            let msg = format!("{e:#}");
            let msg = msg.strip_prefix(&format!("{name}: ")).unwrap_or(&msg);
            eprintln!("error[{name}]: {msg}");
            ExitCode::from(1)
        }
    }
}
