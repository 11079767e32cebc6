use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use boxlat::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "boxlat", version, about = "Probabilistic box lattice embeddings")]
pub struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write it to a checkpoint file.
    Train(TrainArgs),
    /// Conditional probability of one or more conjunctions.
    Query(QueryArgs),
    /// Score labeled pairs against a model.
    Eval(EvalArgs),
    /// Turn a score matrix into a directed graph.
    Asymmetrize(AsymArgs),
    /// Transitive closure of an edge list.
    Closure(ClosureArgs),
    /// Node marginals of a hierarchy.
    Marginals(MarginalsArgs),
    /// Pairwise conditional probabilities from leaf co-occurrence.
    Cpd(CpdArgs),
    /// Keep strongly asymmetric conditionals.
    PruneCpd(PruneArgs),
    /// Corrupted negative edges.
    Negatives(NegativesArgs),
    /// Write the toy dataset as marginal and conditional files.
    Toy(ToyArgs),
    /// Render a 2-D model as SVG.
    Plot(PlotArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureArg {
    Uniform,
    Exponential,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TOML file with training settings. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Unary targets: `concept<TAB>prob`.
    #[arg(long)]
    pub marginals: Option<PathBuf>,
    /// Conditional targets: `t1<TAB>t2<TAB>P(t1|t2)`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Positive edges: `child<TAB>parent`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Negative edges: `child<TAB>parent`.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// Train on the built-in toy dataset.
    #[arg(long)]
    pub toy: bool,
    /// Train on a toy dataset read from a leaf file.
    #[arg(long, conflicts_with = "toy")]
    pub toy_spec: Option<PathBuf>,
    /// Labeled pairs scored after every epoch.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub poe: bool,
    /// With --poe, double the dimension.
    #[arg(long)]
    pub double_dim: bool,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    pub model: PathBuf,
    /// Conjunction to score; `!name` negates. Repeat for several lines of output.
    #[arg(long, required = true)]
    pub target: Vec<String>,
    /// Evidence conjunction; empty means none.
    #[arg(long, default_value = "")]
    pub given: String,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub model: PathBuf,
    /// `descendant<TAB>ancestor<TAB>label` where label is 0/1 or a probability.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Pairs used to pick the decision threshold.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Fixed decision threshold.
    #[arg(long, conflicts_with = "dev")]
    pub threshold: Option<f64>,
    /// Also write the metrics here.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Write per-bin statistics here.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KlArg {
    Forward,
    Reverse,
}

#[derive(Args, Debug)]
pub struct AsymArgs {
    /// Square score matrix TSV.
    #[arg(long, required_unless_present = "kl_example", conflicts_with = "kl_example")]
    pub scores: Option<PathBuf>,
    /// Use the built-in five-Gaussian KL matrix.
    #[arg(long, value_enum)]
    pub kl_example: Option<KlArg>,
    /// Treat entries closer than this as ties.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fail with a witness if the result has a cycle.
    #[arg(long)]
    pub check_acyclic: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClosureArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MarginalsArgs {
    #[arg(long)]
    pub edges: PathBuf,
    /// Count only strict descendants.
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct CpdSource {
    /// Hierarchy edges `child<TAB>parent`; leaves are the nodes without children.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// The built-in toy dataset.
    #[arg(long)]
    pub toy: bool,
    /// A toy leaf file.
    #[arg(long)]
    pub toy_spec: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpdFormat {
    Matrix,
    Pairs,
}

#[derive(Args, Debug)]
pub struct CpdArgs {
    #[command(flatten)]
    pub source: CpdSource,
    #[arg(long, value_enum, default_value_t = CpdFormat::Matrix)]
    pub format: CpdFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Conditionals `t1<TAB>t2<TAB>P(t1|t2)`.
    #[arg(long, conflicts_with_all = ["edges", "toy", "toy_spec"])]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub toy: bool,
    #[arg(long)]
    pub toy_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.4)]
    pub lo: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NegativesArgs {
    /// Positive edges `child<TAB>parent`.
    #[arg(long)]
    pub edges: PathBuf,
    /// Negatives per positive.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    /// Leaf file; defaults to the built-in one.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub marginals: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(Error::Diverged { .. } | Error::NonFiniteGradient { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Writes to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => Ok(boxlat::io::write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(t) = cli.threads {
        // every stage runs on the calling thread, which already honours any cap
        log::debug!("worker cap {t}");
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).code(), 1);
        assert_eq!(CliError::Core(Error::UnknownConcept("x".into())).code(), 2);
        assert_eq!(CliError::Core(Error::Diverged { epoch: 1, batch: 0 }).code(), 3);
        assert_eq!(CliError::Core(Error::NonFiniteGradient { concepts: vec![] }).code(), 3);
    }
}
