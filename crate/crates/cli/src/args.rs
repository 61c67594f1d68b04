use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Counting statistics of photons transported through N collective emitters.
///
/// Defaults: N = 1, nS = 1, nD = 0, gammaS = gammaD = 1, omega = 1.
/// Temperatures (--TS/--TD) replace the matching occupation. Giving --nB
/// switches to a single bath with rate --gammaB (default 1).
#[derive(Debug, Parser)]
#[command(name = "dicke-fcs", version)]
pub struct Cli {
    /// File of `key=value` lines (keys as the long flags without dashes);
    /// flags on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary photon current and degree of collectivity.
    Current(PointArgs),
    /// Current cumulants C1..C4 (and offsets S_k for the resolvent route).
    Cumulants(CumulantArgs),
    /// Parameter sweep written as CSV.
    Sweep(SweepArgs),
    /// Count-resolved transients.
    Transient(TransientArgs),
    /// Single-bath equilibrium statistics and thermal conductance.
    Equilibrium(EquilibriumArgs),
    /// Check the fluctuation symmetry and the long-time fluctuation theorem.
    VerifyFt(VerifyFtArgs),
    /// Compare against the full product-space master equation (N <= 3).
    Oracle(PointArgs),
    /// Run the built-in cross-checks.
    Selftest,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SystemArgs {
    /// Number of emitters (a comma-separated list for `sweep`).
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Source occupation.
    #[arg(long = "nS", allow_negative_numbers = true)]
    pub n_s: Option<f64>,
    /// Drain occupation.
    #[arg(long = "nD", allow_negative_numbers = true)]
    pub n_d: Option<f64>,
    /// Source coupling rate.
    #[arg(long = "gammaS", allow_negative_numbers = true)]
    pub gamma_s: Option<f64>,
    /// Drain coupling rate.
    #[arg(long = "gammaD", allow_negative_numbers = true)]
    pub gamma_d: Option<f64>,
    /// Source temperature (units of the transition frequency scale).
    #[arg(long = "TS", allow_negative_numbers = true)]
    pub t_s: Option<f64>,
    /// Drain temperature.
    #[arg(long = "TD", allow_negative_numbers = true)]
    pub t_d: Option<f64>,
    /// Transition frequency.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Single-bath occupation.
    #[arg(long = "nB", allow_negative_numbers = true)]
    pub n_b: Option<f64>,
    /// Single-bath coupling rate.
    #[arg(long = "gammaB", allow_negative_numbers = true)]
    pub gamma_b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Counted {
    Drain,
    Source,
    Single,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Counted reservoir (default: drain, or the single bath).
    #[arg(long, value_enum)]
    pub counted: Option<Counted>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Eig,
    Res,
    Both,
}

#[derive(Debug, Args)]
pub struct CumulantArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Eigenvalue derivatives, resolvent expansion, or both with a comparison.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Highest cumulant order (1..=4).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    #[value(name = "nS")]
    NS,
    #[value(name = "nD")]
    ND,
    #[value(name = "N")]
    N,
    #[value(name = "gammaS")]
    GammaS,
    #[value(name = "gammaD")]
    GammaD,
    #[value(name = "TS")]
    TS,
    #[value(name = "TD")]
    TD,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Swept variable.
    #[arg(long, value_enum)]
    pub var: SweepVar,
    /// Logarithmic grid between two positive endpoints.
    #[arg(long, num_args = 2, value_names = ["FROM", "TO"], conflicts_with = "lin", allow_negative_numbers = true)]
    pub log: Option<Vec<f64>>,
    /// Linear grid between two endpoints.
    #[arg(long, num_args = 2, value_names = ["FROM", "TO"], allow_negative_numbers = true)]
    pub lin: Option<Vec<f64>>,
    /// Number of grid points (>= 2).
    #[arg(long)]
    pub points: usize,
    /// Cumulant orders to compute, e.g. `1,2,3,4`; `none` for none.
    #[arg(long, default_value = "1,2,3,4")]
    pub orders: String,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Output CSV path (stdout if omitted).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Initial {
    /// All emitters excited.
    Excited,
    /// All emitters in the ground state.
    Ground,
    /// Stationary state.
    Stationary,
}

#[derive(Debug, Args)]
pub struct TransientArgs {
    #[command(subcommand)]
    pub mode: TransientMode,
}

#[derive(Debug, Subcommand)]
pub enum TransientMode {
    /// Count distribution P_n(t).
    Pn {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "excited")]
        initial: Initial,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Emission rate d<n>/dt after starting fully excited.
    Flash {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long = "t-max")]
        t_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Counts within a detector window [t, t + resolution], by chi quadrature
    /// and by count-resolved propagation.
    Window {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        resolution: f64,
        #[arg(long, value_enum, default_value = "excited")]
        initial: Initial,
    },
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Bath temperature.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long = "gammaS", allow_negative_numbers = true)]
    pub gamma_s: Option<f64>,
    #[arg(long = "gammaD", allow_negative_numbers = true)]
    pub gamma_d: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyFtArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Propagation time for the count distribution.
    #[arg(long, default_value_t = 50.0)]
    pub t: f64,
    /// Largest |n| compared.
    #[arg(long, default_value_t = 5)]
    pub nmax: i64,
    /// Largest accepted deviation of ln(P_n/P_-n) from the prediction.
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
}
