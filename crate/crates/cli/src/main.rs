//! `tomoprop`: compute, evolve, invert and compare tomograms from the shell.
//!
//! Exit status: 0 success, 1 I/O failure, 2 invalid configuration or
//! arguments, 3 `compare` above tolerance, 4 numerical-domain error. Errors
//! are reported as one line of JSON on stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use tomoprop_core::Error;

use config::Options;

#[derive(Parser)]
#[command(
    name = "tomoprop",
    version,
    about = "Tomographic propagation of one-dimensional quantum states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tomogram of a preset state.
    Tomogram(Options),
    /// Tomogram evolved by the pullback, green or pde route.
    Evolve(Options),
    /// Green-function samples G(x, y, t).
    Green(Options),
    /// Fourier-space tomographic kernel over a (k, mu, nu, mu', nu') lattice.
    Kernel(Options),
    /// Density matrix from a tomogram file.
    Reconstruct(Options),
    /// Discrepancy between two tomogram or grid files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also write the JSON report here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: String,
    message: String,
    context: Value,
    status: u8,
}

impl Failure {
    fn from_error(e: &Error, command: &str) -> Self {
        let mut context = match e {
            Error::Caustic { t, sin_abs, threshold } => json!({ "t": t, "sin_abs": sin_abs, "threshold": threshold }),
            Error::SingularTime(t) => json!({ "t": t }),
            Error::InvalidFrame { mu, nu } => json!({ "mu": mu, "nu": nu }),
            _ => json!({}),
        };
        context["command"] = json!(command);
        let status = if e.is_numerical_domain() {
            4
        } else if matches!(e, Error::Io(_)) {
            1
        } else {
            2
        };
        Self {
            code: e.code().into(),
            message: e.to_string(),
            context,
            status,
        }
    }

    fn report(&self) -> ExitCode {
        let line = json!({ "code": self.code, "message": self.message, "context": self.context });
        eprintln!("{line}");
        ExitCode::from(self.status)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let (name, result) = match cli.command {
        Command::Compare { a, b, tol, output } => {
            let pass =
                commands::compare(&a, &b, tol, output.as_deref()).map_err(|e| Failure::from_error(&e, "compare"))?;
            return Ok(ExitCode::from(if pass { 0 } else { 3 }));
        }
        Command::Tomogram(o) => ("tomogram", o.merged().and_then(|o| commands::tomogram(&o))),
        Command::Evolve(o) => ("evolve", o.merged().and_then(|o| commands::evolve(&o))),
        Command::Green(o) => ("green", o.merged().and_then(|o| commands::green(&o))),
        Command::Kernel(o) => ("kernel", o.merged().and_then(|o| commands::kernel(&o))),
        Command::Reconstruct(o) => ("reconstruct", o.merged().and_then(|o| commands::reconstruct(&o))),
    };
    result.map_err(|e| Failure::from_error(&e, name))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.render().to_string();
            let message = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return Failure {
                code: "invalid_arguments".into(),
                message: message.into(),
                context: json!({ "kind": e.kind().to_string() }),
                status: 2,
            }
            .report();
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => f.report(),
    }
}
