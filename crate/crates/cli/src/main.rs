use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diffstudy_runner::{config, CliError, Format, RunConfig, EXIT_ERROR, EXIT_FINDINGS_FAILED, EXIT_OK};
use diffstudy_core::relays::ElementId;

/// Fault study of a collector cable protected by 87L, 87Q and 87G elements.
#[derive(Debug, Parser)]
#[command(name = "diffstudy", version)]
struct Cli {
    /// Study configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Restrict the matrix to `loc,type[,R][,control]`, e.g. `F3,AG,R2,C1`.
    #[arg(long, global = true)]
    only: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Print the full default configuration and exit.
    #[arg(long)]
    dump_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the matrix and write the results table and plane files.
    Run,
    /// Run the matrix and check the expected protection behaviour.
    Verify,
    /// Write the differential-plane data of one element.
    Plane {
        #[arg(long)]
        element: ElementId,
    },
}

fn report(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if cli.dump_defaults {
        print!("{}", config::dump_defaults());
        return Ok(EXIT_OK);
    }
    let rc = RunConfig {
        config: cli.config,
        only: cli.only,
        format: cli.format,
        out: cli.out,
        jobs: cli.jobs,
    };
    match cli.command {
        None => Err(CliError::Config("no command given; see --help".into())),
        Some(Command::Run) => {
            let outcome = diffstudy_runner::cmd_run(&rc)?;
            report(&outcome.warnings);
            for f in outcome.files {
                println!("{}", f.display());
            }
            Ok(EXIT_OK)
        }
        Some(Command::Plane { element }) => {
            let outcome = diffstudy_runner::cmd_plane(&rc, element)?;
            report(&outcome.warnings);
            for f in outcome.files {
                println!("{}", f.display());
            }
            Ok(EXIT_OK)
        }
        Some(Command::Verify) => {
            let (findings, warnings) = diffstudy_runner::cmd_verify(&rc)?;
            report(&warnings);
            match rc.format {
                Format::Csv => print!("{findings}"),
                Format::Json => println!("{}", serde_json::to_string_pretty(&findings)?),
            }
            Ok(if findings.all_pass() { EXIT_OK } else { EXIT_FINDINGS_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
