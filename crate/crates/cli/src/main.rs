use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subrig::builtin;
use subrig_cli::{run, CliError, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "subrig", version, about = "Sub-Riemannian geometry engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file without running it.
    Validate { file: PathBuf },
    /// Run every task of a scenario and write the result bundle.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run independent tasks concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        #[arg(long = "rank-tol")]
        rank_tol: Option<f64>,
    },
    /// List the built-in structures.
    Examples,
    /// Print a built-in structure as a scenario file.
    ExportBuiltin { name: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Validate { file } => {
            let scenario = Scenario::load(&file)?;
            scenario.validate()?;
            println!("{}: valid ({} tasks)", file.display(), scenario.tasks.len());
            Ok(0)
        }
        Command::Run { file, out, parallel, rtol, atol, rank_tol } => {
            let scenario = Scenario::load(&file)?;
            let bundle = run(&scenario, &out, parallel, Overrides { rtol, atol, rank_tol })?;
            for t in &bundle.tasks {
                let verdict = t.verdict.map(|v| format!(" ({v})")).unwrap_or_default();
                let error = t.error.as_ref().map(|e| format!(": {e}")).unwrap_or_default();
                println!("{} [{}] {:?}{verdict}{error}", t.name, t.kind, t.status);
            }
            Ok(bundle.exit_code() as u8)
        }
        Command::Examples => {
            for name in builtin::names() {
                println!("{name}\t{}", builtin::by_name(name)?.description);
            }
            Ok(0)
        }
        Command::ExportBuiltin { name } => {
            print!("{}", Scenario::from_builtin(&name)?.to_json());
            Ok(0)
        }
    }
}
