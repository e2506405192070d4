use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "drci",
    version,
    about = "Density-ratio test of conditional independence X ⊥ Y | Z",
    after_help = "Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.\n\
                  The test decision is reported in the output, never in the exit code.\n\
                  DRCI_THREADS caps the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test X ⊥ Y | Z on CSV data.
    Test(TestArgs),
    /// Bootstrap basis selection on CSV data, with the per-candidate rates.
    Tune(TestArgs),
    /// Monte Carlo rejection rates on the simulation designs.
    Simulate(SimulateArgs),
    /// Lag-1 Granger tests in both directions on two positive series.
    Granger(GrangerArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding X.
    #[arg(long, requires_all = ["y", "z"], conflicts_with_all = ["series_a", "series_b"])]
    pub x: Option<String>,
    /// Column holding Y.
    #[arg(long, requires_all = ["x", "z"])]
    pub y: Option<String>,
    /// Column holding Z.
    #[arg(long, requires_all = ["x", "y"])]
    pub z: Option<String>,
    /// Time-series mode: the candidate cause. Tests a_{t-lag} ⊥ b_t | b_{t-lag}.
    #[arg(long, requires = "series_b")]
    pub series_a: Option<String>,
    /// Time-series mode: the series being predicted.
    #[arg(long, requires = "series_a")]
    pub series_b: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub lag: usize,
}

#[derive(Debug, Args)]
pub struct StatArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// "auto" for bootstrap selection, or a nested order "p1,p2,p3".
    #[arg(long, default_value = "auto")]
    pub basis: String,
    /// Largest nested orders searched by "auto".
    #[arg(long, default_value = "4,2,2")]
    pub max_orders: String,
    #[arg(long, default_value_t = 100)]
    pub bootstrap_reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Work on the raw values instead of marginal ranks.
    #[arg(long)]
    pub no_rank_transform: bool,
    #[arg(long, value_enum, default_value_t = Influence::FourTerm)]
    pub influence: Influence,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub stat: StatArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated design names, e.g. dgp1s,dgp2p.
    #[arg(long, required = true, value_delimiter = ',')]
    pub dgp: Vec<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Comma-separated tests: dr, lin.
    #[arg(long, value_delimiter = ',', default_value = "dr")]
    pub tests: Vec<String>,
    #[command(flatten)]
    pub stat: StatArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GrangerArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// First series, e.g. volume.
    #[arg(long)]
    pub series_a: String,
    /// Second series, e.g. price.
    #[arg(long)]
    pub series_b: String,
    #[arg(long, default_value_t = 1)]
    pub lag: usize,
    #[command(flatten)]
    pub stat: StatArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Influence {
    FourTerm,
    Full,
}
