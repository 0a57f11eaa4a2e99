//! Command-line front end: design recommendation, estimation planning,
//! simulation, dilution monitoring and table regeneration.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod tables;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::commands::{
    cmd_design, cmd_dilution, cmd_estimate, cmd_simulate, DesignArgs, DilutionCmdArgs,
    EstimateArgs, OutputArgs, SimulateArgs,
};
use crate::config::{with_config, CONFIG_ENV};
use crate::error::{CliError, CliResult};
use crate::output::{render_report, render_table, write_output, Format};
use crate::tables::{generate, TableId};

#[derive(Debug, Parser)]
#[command(name = "grouptest", version, about = "Pooled testing designs for classification and prevalence estimation")]
pub struct Cli {
    /// Flat key = value file of default flags.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recommend a classification design for a prevalence.
    Design(DesignArgs),
    /// Estimate prevalence from pooled results, or plan an estimation study.
    Estimate(EstimateArgs),
    /// Run a design on simulated populations.
    Simulate(SimulateArgs),
    /// Regenerate a reference table.
    Tables(TablesArgs),
    /// Dilution false-negative rates and the largest safe pool size.
    Dilution(DilutionCmdArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct TablesArgs {
    /// Table to regenerate.
    #[arg(value_enum)]
    pub id: TableId,
    #[command(flatten)]
    pub out: OutputArgs,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Design(_) => "design",
            Command::Estimate(_) => "estimate",
            Command::Simulate(_) => "simulate",
            Command::Tables(_) => "tables",
            Command::Dilution(_) => "dilution",
        }
    }
}

fn emit<T: serde::Serialize>(report: &T, out: &OutputArgs, default: Format) -> CliResult<()> {
    write_output(&render_report(report, out.format.unwrap_or(default))?, out.output.as_deref())
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Executes a parsed invocation.
pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Design(a) => {
            let r = cmd_design(a)?;
            warn(&r.warnings);
            emit(&r, &a.out, Format::Json)
        }
        Command::Estimate(a) => {
            let r = cmd_estimate(a)?;
            match &r {
                commands::EstimateOutput::Plan(p) => warn(&p.warnings),
                commands::EstimateOutput::Analysis { warnings, .. } => warn(warnings),
            }
            emit(&r, &a.out, Format::Json)
        }
        Command::Simulate(a) => emit(&cmd_simulate(a)?, &a.out, Format::Json),
        Command::Tables(a) => {
            let table = generate(a.id)?;
            write_output(&render_table(&table, a.out.format.unwrap_or(Format::Csv))?, a.out.output.as_deref())
        }
        Command::Dilution(a) => {
            let r = cmd_dilution(a)?;
            if let Some(advice) = &r.advice {
                eprintln!("advice: {advice}");
            }
            emit(&r, &a.out, Format::Json)
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Config(CliError),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        ParseFailure::Clap(e)
    }
}

fn parse(args: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let first = Cli::try_parse_from(args.clone())?;
    let cmd = Cli::command();
    let merged = with_config(&cmd, args.clone(), first.config.as_ref(), first.command.name())
        .map_err(ParseFailure::Config)?;
    if merged == args {
        return Ok(first);
    }
    let matches = cmd.args_override_self(true).try_get_matches_from(merged)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

/// Runs the program on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(ParseFailure::Config(e)) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    }
}
