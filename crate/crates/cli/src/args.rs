//! Command-line arguments. Every argument struct serializes into the
//! resolved configuration embedded in reports.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "quenched", version, about = "Quenched limit theorems for Markov chains: exact engines, Monte Carlo and reports")]
pub struct Cli {
    /// Directory receiving the JSON report and CSV/SVG data files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// File name of the JSON report inside the output directory.
    #[arg(long, global = true, visible_alias = "out", default_value = "report.json")]
    pub report: String,
    /// Master seed; drawn at random and recorded when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Forward orbit of the intermittent map with a Birkhoff sum.
    MapOrbit(MapOrbitArgs),
    /// Ulam discretization of the transfer operator.
    Ulam(UlamArgs),
    /// Dependence coefficients alpha_Y(k) and their decay exponent.
    Alpha(AlphaArgs),
    /// Projective conditions and the limiting variance.
    Conditions(ConditionsArgs),
    /// Quenched CLT from a fixed start by Monte Carlo.
    Quenched(QuenchedArgs),
    /// Finite-dimensional laws and tightness of the Donsker process.
    Fidis(FidisArgs),
    /// Block conditions C1-C4.
    Blocks(BlocksArgs),
    /// The counterexample: exact series or a realized system.
    Counterexample(CounterexampleArgs),
    /// Integrability condition for a tail function.
    Tailcheck(TailcheckArgs),
    /// Brute-force checks of the maximal and truncation inequalities.
    Inequalities(InequalitiesArgs),
}

/// The intermittent map and its grid.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    /// Map parameter in (0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of Ulam cells.
    #[arg(long, default_value_t = 8192)]
    pub cells: usize,
    /// Grid grading g: edges (i/N)^g.
    #[arg(long, default_value_t = 2.0)]
    pub grading: f64,
}

/// Either a finite chain file or the intermittent map.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SourceArgs {
    /// Finite chain JSON: {"kernel": [[..]], "f": [..], "labels": [..]}.
    #[arg(long, conflicts_with = "gamma")]
    pub chain: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    /// Observable for the map: indicator:T or power-log:A,D.
    #[arg(long, default_value = "indicator:0.5")]
    pub observable: String,
}

/// Starting point: a state of the chain or a point of [0, 1] for the map.
#[derive(Debug, Clone, Args, Serialize)]
pub struct StartArgs {
    #[arg(long, default_value_t = 0)]
    pub state: usize,
    #[arg(long, default_value_t = 0.3)]
    pub x0: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapOrbitArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    pub x0: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Observable summed along the orbit: indicator:T or power-log:A,D.
    #[arg(long, default_value = "indicator:0.5")]
    pub observable: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UlamArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AlphaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 64)]
    pub kmax: usize,
    /// Fit window for the log-log slope, as LO,HI.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [4, 32])]
    pub window: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConditionsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 200)]
    pub kmax: usize,
    /// Replicas for the Monte Carlo part of the Gordin statistics.
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuenchedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 10000)]
    pub replicas: usize,
    /// Reference variance; computed from the model when absent.
    /// Gate on this KS threshold instead of the null band 1.36/sqrt(R).
    #[arg(long)]
    pub ks_tolerance: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Also scan Var(S_n)/n over n = 2^10, 2^11, ..., n.
    #[arg(long)]
    pub scan: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FidisArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 10000)]
    pub replicas: usize,
    /// Gate on this KS threshold instead of the null band 1.36/sqrt(R).
    #[arg(long)]
    pub ks_tolerance: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
    pub times: Vec<f64>,
    /// Weights of the increments W(t_l) - W(t_(l-1)) in the tested combination.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [1.0, -1.0, 2.0, 0.5])]
    pub weights: Vec<f64>,
    /// Values of m for the modulus of continuity at 1/m.
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16, 32, 64])]
    pub moduli: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BlocksArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
    /// Variance used in C2 for the map; computed when absent.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterexampleMode {
    Series,
    Realize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 8)]
    pub kmax: u32,
    #[arg(long, value_enum, default_value_t = CounterexampleMode::Series)]
    pub mode: CounterexampleMode,
    /// Replicas for the conditional norms of a realized system.
    #[arg(long, default_value_t = 200)]
    pub replicas: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TailcheckArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Power tail min(1, c x^-q (ln x)^-b) from x0 on.
    #[arg(long, conflicts_with = "points")]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long = "tail-x0", default_value_t = 0.0)]
    pub x0: f64,
    /// Step tail as x:H pairs, e.g. 0:1,2:0.5,4:0.
    #[arg(long, value_delimiter = ',')]
    pub points: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InequalitiesArgs {
    /// Random chains for the maximal inequality.
    #[arg(long, default_value_t = 100)]
    pub chains: usize,
    #[arg(long, default_value_t = 3)]
    pub states: usize,
    /// Path length.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5])]
    pub lambdas: Vec<f64>,
    /// Random finite spaces for the truncation inequalities.
    #[arg(long, default_value_t = 1000)]
    pub spaces: usize,
    /// Largest number of atoms per space.
    #[arg(long, default_value_t = 8)]
    pub atoms: usize,
}
