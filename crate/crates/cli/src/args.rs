use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use csgraph::{LinearSolveConfig, SchemeConfig, Vortex};

#[derive(Debug, Parser)]
#[command(name = "csgraph", version, about = "Chern-Simons type vortex equation on finite weighted graphs")]
pub struct Cli {
    /// Seed for every random choice (random graphs).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Record wall-clock times in manifests and sweep rows. Off by default so
    /// that outputs are byte-reproducible.
    #[arg(long, global = true)]
    pub record_timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a graph, or validate and normalise an existing graph file.
    Graph(GraphArgs),
    /// Solve at one coupling.
    Solve(SolveArgs),
    /// Re-check the solutions stored in a solution file.
    Verify(VerifyArgs),
    /// Bracket the critical coupling by bisection.
    Critical(CriticalArgs),
    /// Solve over a list of couplings and write CSV.
    Sweep(SweepArgs),
    /// Find a minimizer and a mountain-pass solution.
    Mountain(MountainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Torus,
    Complete,
    Cycle,
    Path,
    Random,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, conflicts_with = "from", required_unless_present = "from")]
    pub kind: Option<Kind>,
    /// Torus rows.
    #[arg(long)]
    pub m: Option<usize>,
    /// Torus columns.
    #[arg(long)]
    pub k: Option<usize>,
    /// Vertex count for complete, cycle, path and random graphs.
    #[arg(long)]
    pub n: Option<usize>,
    /// Extra-edge probability for random graphs.
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    /// Uniform edge weight (default 1).
    #[arg(long)]
    pub weight: Option<f64>,
    /// Uniform vertex measure (default 1).
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Graph file and vortex data shared by the solver commands.
#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Vortex as `p` or `p:n` (vertex p, multiplicity n). Repeatable.
    #[arg(long = "vortex", required = true, value_parser = parse_vortex)]
    pub vortices: Vec<Vortex>,
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    /// Shift constant of the monotone scheme (default: λ).
    #[arg(long = "K")]
    pub shift: Option<f64>,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = -1e3, allow_hyphen_values = true)]
    pub divergence_floor: f64,
    #[arg(long, default_value_t = 50)]
    pub stall_window: usize,
}

impl SchemeArgs {
    pub fn config(&self) -> SchemeConfig {
        SchemeConfig {
            shift: self.shift,
            residual_tol: self.tol,
            max_iter: self.max_iter,
            divergence_floor: self.divergence_floor,
            stall_window: self.stall_window,
            linear: LinearSolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Iterate,
    Minimize,
    Both,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("coupling").required(true).args(["lambda", "bound_multiple"])))]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// λ as a multiple of the necessary bound (6⁶/5⁵)·4πN/Vol.
    #[arg(long, allow_hyphen_values = true)]
    pub bound_multiple: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Iterate)]
    pub mode: Mode,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub rel_width: f64,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("couplings").required(true).args(["lambdas", "bound_multiples"])))]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambdas: Vec<f64>,
    /// Comma-separated multiples of the necessary bound.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bound_multiples: Vec<f64>,
    #[arg(long, env = "CSV_SOLVER_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Also run the mountain pass on converged rows.
    #[arg(long)]
    pub mountain: bool,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// CSV path; a `<out>.manifest.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("coupling").required(true).args(["lambda", "bound_multiple", "critical_multiple"])))]
pub struct MountainArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub bound_multiple: Option<f64>,
    /// λ as a multiple of the upper end of a freshly computed critical bracket.
    #[arg(long, allow_hyphen_values = true)]
    pub critical_multiple: Option<f64>,
    /// Bracket width used with --critical-multiple.
    #[arg(long, default_value_t = 1e-3)]
    pub rel_width: f64,
    #[arg(long, default_value_t = 51)]
    pub path_points: usize,
    #[arg(long, default_value_t = 50_000)]
    pub max_deform: usize,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_vortex(s: &str) -> Result<Vortex, String> {
    let (p, n) = match s.split_once(':') {
        Some((p, n)) => (p, n.parse::<u32>().map_err(|e| format!("bad multiplicity in {s:?}: {e}"))?),
        None => (s, 1),
    };
    let vertex = p.parse::<usize>().map_err(|e| format!("bad vertex in {s:?}: {e}"))?;
    if n == 0 {
        return Err(format!("multiplicity must be positive in {s:?}"));
    }
    Ok(Vortex {
        vertex,
        multiplicity: n,
    })
}
