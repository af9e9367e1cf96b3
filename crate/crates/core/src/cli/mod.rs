//! Command-line front end: spec files, check suites, reports.

pub mod specfile;
pub mod suite;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use specfile::{load_spec, parse_spec, LoadError};
pub use suite::{check_closed, classify, verify_connection, verify_paper, Options, SuiteError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "liftcheck", version, about = "Numerical checks for lifts of vector fields to the tangent bundle with the metric II+III")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the adapted-frame connection, metric blocks and lifts against the induced-coordinate oracle.
    VerifyConnection {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Classify the lifts of vector fields: parallel and Killing checks with theorem audits.
    Classify {
        spec: PathBuf,
        /// Vector field to classify; all fields when omitted.
        #[arg(long)]
        field: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Check whether the complete lift of a vector field is closed.
    CheckClosed {
        spec: PathBuf,
        #[arg(long)]
        field: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run every check over each `.spec` file of a catalog directory.
    VerifyPaper {
        catalog: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Number of seeded sample points.
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance replacing every per-check default.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the machine-readable report to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> Options {
        Options { points: self.points, seed: self.seed, tol: self.tol }
    }
}

struct Outcome {
    table: String,
    json: String,
    success: bool,
}

fn execute(command: &Command) -> Result<(Outcome, Option<&Path>), SuiteError> {
    let (outcome, common) = match command {
        Command::VerifyConnection { spec, common } => {
            let r = verify_connection(&load_spec(spec)?, &common.options())?;
            (Outcome { table: r.to_table(), json: r.to_json(), success: r.success() }, common)
        }
        Command::Classify { spec, field, common } => {
            let r = classify(&load_spec(spec)?, field.as_deref(), &common.options())?;
            (Outcome { table: r.to_table(), json: r.to_json(), success: r.success() }, common)
        }
        Command::CheckClosed { spec, field, common } => {
            let r = check_closed(&load_spec(spec)?, field.as_deref(), &common.options())?;
            (Outcome { table: r.to_table(), json: r.to_json(), success: r.success() }, common)
        }
        Command::VerifyPaper { catalog, common } => {
            let r = verify_paper(catalog, &common.options())?;
            (Outcome { table: r.to_table(), json: r.to_json(), success: r.success() }, common)
        }
    };
    Ok((outcome, common.json.as_deref()))
}

/// Runs one command line; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((Outcome { table, json, success }, json_path)) => {
            let _ = write!(out, "{table}");
            if let Some(path) = json_path {
                if let Err(e) = std::fs::write(path, json + "\n") {
                    let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                    return EXIT_INPUT;
                }
            }
            if success {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}
