//! `mtto`: runs verification and solver workflows from JSON problem files and
//! writes JSON reports.
//!
//! Exit codes: 0 when the task ran (check outcomes are in the report), 2 for
//! input errors, 3 for internal numerical failures.

mod problem;
mod report;
mod tasks;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mtto_core::wiener_hopf::Convention;

use problem::{Config, Overrides, ProblemFile, Task, SCHEMA_VERSION};
use report::{to_json, CliError, ErrorBody, ErrorReport, Report, Timings, TOOL};

#[derive(Parser)]
#[command(
    name = "mtto",
    version,
    about = "Matrix truncated Toeplitz operator workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in a problem file.
    Run {
        file: PathBuf,
    },
    MttoKernel {
        file: PathBuf,
    },
    NearInvariance {
        file: PathBuf,
    },
    EaeVerify {
        file: PathBuf,
    },
    LpDiagnose {
        file: PathBuf,
    },
    WhSolve {
        file: PathBuf,
    },
    MimoSim {
        file: PathBuf,
    },
    /// Reproduce the worked examples; runs all of them without a file.
    PaperExamples {
        file: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Flags {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replace every upper pass bar with this value.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Grid size (panels) for wh-solve and mimo-sim.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true, default_value_t = 2)]
    json_indent: usize,
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,
    /// Write grid data to this CSV file instead of the report.
    #[arg(long, global = true)]
    csv: Option<String>,
    /// Include wall-clock timings (makes reports non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ConventionArg {
    Causal,
    PaperLiteral,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Causal => Convention::Causal,
            ConventionArg::PaperLiteral => Convention::PaperLiteral,
        }
    }
}

fn read_problem(path: &PathBuf) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;
    ProblemFile::parse(&text)
}

fn load(command: &Command) -> Result<ProblemFile, CliError> {
    let (expected, file) = match command {
        Command::Run { file } => return read_problem(file),
        Command::MttoKernel { file } => (Task::MttoKernel, file),
        Command::NearInvariance { file } => (Task::NearInvariance, file),
        Command::EaeVerify { file } => (Task::EaeVerify, file),
        Command::LpDiagnose { file } => (Task::LpDiagnose, file),
        Command::WhSolve { file } => (Task::WhSolve, file),
        Command::MimoSim { file } => (Task::MimoSim, file),
        Command::PaperExamples { file: Some(file) } => (Task::PaperExamples, file),
        Command::PaperExamples { file: None } => {
            return Ok(ProblemFile {
                schema_version: SCHEMA_VERSION.into(),
                task: Task::PaperExamples,
                payload: tasks::all_examples(),
                seed: None,
                tolerances: None,
            })
        }
    };
    let problem = read_problem(file)?;
    if problem.task != expected {
        return Err(CliError::Input(format!(
            "subcommand {} conflicts with task {} in the problem file",
            expected.name(),
            problem.task.name()
        )));
    }
    Ok(problem)
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let started = Instant::now();
    let problem = load(&cli.command)?;
    let overrides = Overrides {
        seed: cli.flags.seed,
        tol: cli.flags.tol,
        grid: cli.flags.grid,
        convention: cli.flags.convention.map(Into::into),
        csv: cli.flags.csv.clone(),
    };
    let config = Config::resolve(
        problem.task,
        &problem,
        &overrides,
        tasks::bars(problem.task),
    )?;
    let (checks, result) = tasks::run(&config, &problem.payload)?;
    let report = Report {
        tool: TOOL,
        schema_version: SCHEMA_VERSION,
        config: &config,
        pass: checks.iter().all(|c| c.pass),
        checks,
        result,
        timings: cli.flags.timings.then(|| Timings {
            total_seconds: started.elapsed().as_secs_f64(),
        }),
    };
    Ok(to_json(&report, cli.flags.json_indent))
}

fn main() {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(text) => match &cli.flags.out {
            Some(path) => match std::fs::write(path, text + "\n") {
                Ok(()) => 0,
                Err(e) => fail(
                    &cli,
                    CliError::Input(format!("writing {}: {e}", path.display())),
                ),
            },
            None => {
                // A closed pipe is the reader's choice, not an error.
                let _ = writeln!(std::io::stdout(), "{text}");
                0
            }
        },
        Err(e) => fail(&cli, e),
    };
    std::process::exit(code);
}

/// Prints a machine-readable error object to standard output.
fn fail(cli: &Cli, e: CliError) -> i32 {
    let body = ErrorReport {
        tool: TOOL,
        error: ErrorBody {
            kind: e.kind(),
            message: e.to_string(),
        },
    };
    let _ = writeln!(
        std::io::stdout(),
        "{}",
        to_json(&body, cli.flags.json_indent)
    );
    e.exit_code()
}
