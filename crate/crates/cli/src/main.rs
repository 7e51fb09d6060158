//! `esfem`: state solves, optimal control solves, convergence studies and
//! mesh summaries from the command line. The summary table goes to stdout,
//! progress and errors to stderr.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// A required setting is absent; reported with the usage line.
    Missing(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Missing(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<esfem::Error> for CliError {
    fn from(e: esfem::Error) -> Self {
        let mut inner = &e;
        while let esfem::Error::AtLevel { source, .. } = inner {
            inner = source;
        }
        match inner {
            esfem::Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "esfem", version, about = "Heat equation and optimal control on evolving triangulated spheres")]
struct Cli {
    /// Plain-text settings, one `key = value` per line; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward scheme for the heat equation on the (moving) sphere.
    StateSolve(Flags),
    /// Optimal control solve: `pd` distributed tracking, `pt` terminal tracking.
    Solve {
        problem: Problem,
        #[command(flatten)]
        flags: Flags,
    },
    /// Error and EOC table of one of the two experiments over a level range.
    Convergence(Flags),
    /// Size, mesh width and structural checks of a refinement level.
    MeshInfo(Flags),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Problem {
    Pd,
    Pt,
}

/// All settings as text; which ones a command accepts is checked later.
#[derive(Debug, Args)]
struct Flags {
    /// Refinement level of the cube mesh.
    #[arg(long)]
    level: Option<String>,
    /// Number of time slabs (default ceil(20 T / H²)).
    #[arg(long = "N")]
    slabs: Option<String>,
    /// Final time.
    #[arg(long = "T", allow_hyphen_values = true)]
    horizon: Option<String>,
    /// Control cost α > 0.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Lower control bound.
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<String>,
    /// Upper control bound.
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<String>,
    /// Stopping tolerance of the optimizer.
    #[arg(long)]
    tol: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Experiment: 1 (smooth, constrained) or 2 (terminal, singular data).
    #[arg(long)]
    example: Option<String>,
    /// Inclusive level range `A..B`.
    #[arg(long)]
    levels: Option<String>,
    /// Level offset in the EOC formula.
    #[arg(long)]
    q: Option<String>,
    /// `moving` or `static`.
    #[arg(long)]
    flow: Option<String>,
    /// Exponent e of the flow z ↦ z / ρ(t)^e.
    #[arg(long = "flow-exponent", allow_hyphen_values = true)]
    flow_exponent: Option<String>,
    /// Initial value: `zero`, `harmonic-z` or `file`.
    #[arg(long)]
    init: Option<String>,
    /// Vertex values for `--init file`, whitespace separated.
    #[arg(long = "init-file")]
    init_file: Option<String>,
    /// Right-hand side: `zero`, `one` or a constant.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
    /// `newton` or `fixed-point`.
    #[arg(long)]
    method: Option<String>,
    /// Damping of the fixed-point iteration.
    #[arg(long)]
    theta: Option<String>,
    /// Iteration limit of the optimizer.
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    /// Snapshot time for `mesh-info`.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
}

impl Flags {
    fn into_map(self) -> BTreeMap<String, String> {
        let pairs = [
            ("level", self.level),
            ("N", self.slabs),
            ("T", self.horizon),
            ("alpha", self.alpha),
            ("lo", self.lo),
            ("hi", self.hi),
            ("tol", self.tol),
            ("out", self.out),
            ("example", self.example),
            ("levels", self.levels),
            ("q", self.q),
            ("flow", self.flow),
            ("flow-exponent", self.flow_exponent),
            ("init", self.init),
            ("init-file", self.init_file),
            ("f", self.f),
            ("method", self.method),
            ("theta", self.theta),
            ("max-iter", self.max_iter),
            ("t", self.t),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::StateSolve(flags) => commands::state_solve(file, flags.into_map()),
        Command::Solve { problem, flags } => match problem {
            Problem::Pd => commands::solve_distributed(file, flags.into_map()),
            Problem::Pt => commands::solve_terminal(file, flags.into_map()),
        },
        Command::Convergence(flags) => commands::convergence(file, flags.into_map()),
        Command::MeshInfo(flags) => commands::mesh_info(file, flags.into_map()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Missing(m) => {
                    eprintln!("error: {m}");
                    eprintln!("{}", Cli::command().render_usage());
                }
                CliError::Numerical(m) => eprintln!("numerical failure: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
