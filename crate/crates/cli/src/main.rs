//! `randmeas`: acquire randomized-measurement datasets and run estimators on them.
//!
//! Every command prints one `rmres/1` JSON record per result line on stdout
//! and a short summary on stderr.

mod commands;
mod config;
mod error;
mod record;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use randmeas::{EnsembleKind, PauliString};
use serde::Serialize;

use crate::config::Overrides;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "randmeas",
    version,
    about = "Randomized-measurement acquisition and estimation"
)]
struct Cli {
    /// Worker threads for acquisition and estimation; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a randomized-measurement experiment and write the dataset.
    Measure(MeasureArgs),
    /// Run an estimator on a dataset.
    Estimate(EstimateArgs),
    /// Exact value of a quantity for the configured state or Hamiltonian.
    Oracle(OracleArgs),
    /// Cross-platform fidelity F_max of two datasets with shared settings.
    Compare(CompareArgs),
    /// Direct fidelity estimation against a pure target state.
    Dfe(DfeArgs),
    /// Simulate and estimate an infinite-temperature OTOC over a time sweep.
    Otoc(OtocArgs),
    /// Recover Hamiltonian couplings from a steady-state dataset.
    Hamlearn(HamlearnArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct ConfigOverrides {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<EnsembleKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Shot-stream tag for a second platform replaying the same settings.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    device: Option<u64>,
    #[arg(long = "out")]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
}

impl From<&ConfigOverrides> for Overrides {
    fn from(o: &ConfigOverrides) -> Self {
        Overrides {
            ensemble: o.ensemble,
            m: o.m,
            k: o.k,
            seed: o.seed,
            device: o.device,
            output: o.output.clone(),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct MeasureArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    overrides: ConfigOverrides,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Estimator {
    Pauli,
    Observable,
    PurityShadow,
    PurityHamming,
    Renyi2,
    PtMoments,
    P3Test,
    Reflection,
    TopoEntropy,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PurityRoute {
    Shadow,
    Hamming,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EstimateArgs {
    dataset: PathBuf,
    #[arg(value_enum)]
    estimator: Estimator,
    /// Restrict the dataset to these qubits first; other qubit lists index the restricted register.
    #[arg(long, value_delimiter = ',')]
    subsys: Option<Vec<usize>>,
    #[arg(long)]
    pauli: Option<PauliString>,
    /// JSON file `{"qubits": [..], "re": [[..]], "im": [[..]]}` holding a Hermitian operator.
    #[arg(long)]
    op: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<usize>>,
    /// Moment order for pt-moments.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Significance in standard errors for p3-test.
    #[arg(long, default_value_t = 3.0)]
    z: f64,
    /// Median of means over this many batches instead of the plain mean (pauli only).
    #[arg(long)]
    mom_batches: Option<usize>,
    /// Purity estimator behind renyi2.
    #[arg(long, value_enum, default_value = "shadow")]
    purity: PurityRoute,
    /// Evaluate on every prefix subsystem {0..l}, l = 1..N.
    #[arg(long)]
    sweep: bool,
    /// Write the sweep as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Quantity {
    Expectation,
    Purity,
    Renyi2,
    PtMoment,
    Reflection,
    Otoc,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(value_enum)]
    quantity: Quantity,
    #[arg(long, value_delimiter = ',')]
    subsys: Option<Vec<usize>>,
    #[arg(long)]
    pauli: Option<PauliString>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<usize>>,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<usize>>,
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, value_delimiter = ',')]
    subsys: Option<Vec<usize>>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DfeArgs {
    dataset: PathBuf,
    /// JSON state-preparation spec, or a run config whose state is used.
    #[arg(long)]
    target: PathBuf,
    /// Number of importance-sampled Pauli strings.
    #[arg(long)]
    samples: usize,
    /// Seed for the Pauli sampling.
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OtocArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    overrides: ConfigOverrides,
    /// Add the exact value to every point.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct HamlearnArgs {
    dataset: PathBuf,
    /// JSON ansatz basis file.
    #[arg(long, conflicts_with = "ansatz")]
    basis: Option<PathBuf>,
    /// Built-in ansatz: `ising` or `chain:K:R` (weight ≤ K within windows of R+1 sites).
    #[arg(long)]
    ansatz: Option<String>,
    /// Extra chain constraint operators `K:R`.
    #[arg(long)]
    probes: Option<String>,
    #[arg(long, default_value_t = randmeas::hamlearn::DEFAULT_GAP_THRESHOLD)]
    threshold: f64,
    /// Hamiltonian (named model or explicit terms) to score the recovery against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            return fail(&CliError::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            return fail(&CliError::Config(format!("thread pool: {e}")));
        }
    }
    let out = match &cli.command {
        Command::Measure(a) => commands::measure(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Compare(a) => commands::compare(a),
        Command::Dfe(a) => commands::dfe(a),
        Command::Otoc(a) => commands::otoc(a),
        Command::Hamlearn(a) => commands::hamlearn(a),
    };
    match out {
        Ok(records) => {
            let mut stdout = std::io::stdout().lock();
            for r in records {
                if writeln!(stdout, "{}", r.to_line()).is_err() {
                    return ExitCode::from(4);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("randmeas: {e}");
    ExitCode::from(e.exit_code())
}
