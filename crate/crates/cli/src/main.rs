mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbal::harness::Task;
use dbal::pldm::LossKind;
use dbal::strategies::StrategyKind;
use dbal::Metric;

/// Query selection for batch active learning under domain shift.
#[derive(Debug, Parser)]
#[command(name = "dbal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select K target points to label.
    Query(QueryArgs),
    /// Score a selection with a k-NN model trained on source + queried targets.
    Eval(EvalArgs),
    /// Sort a matrix by one feature and cut it into domains.
    Split(SplitArgs),
    /// Evaluate closed-form bound terms.
    Bound(BoundArgs),
    /// Run a strategy x budget x seed comparison grid.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long, value_parser = parse_strategy)]
    strategy: StrategyKind,
    /// Labeled source matrix (CSV or .dbin).
    #[arg(long)]
    source: PathBuf,
    /// Unlabeled target matrix.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value = "l2", value_parser = parse_metric)]
    metric: Metric,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Column holding labels in both matrices; it is removed from the features.
    #[arg(long)]
    label_col: Option<usize>,
    /// Source labels as a single-column file (alternative to --label-col).
    #[arg(long, conflicts_with = "label_col")]
    source_labels: Option<PathBuf>,
    /// Target pseudo-labels for pldm (default: k-NN on the source).
    #[arg(long)]
    pseudo_labels: Option<PathBuf>,
    /// Per-target weights for wkmeans.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Output file: one selected index per line.
    #[arg(long)]
    indices: PathBuf,
    /// Output file: JSON report.
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
    /// Write `null` for wall_ms so reports are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args, Clone)]
struct Knobs {
    /// Trees in the nearest-source forest (kmedoids-large).
    #[arg(long, default_value_t = 50)]
    trees: usize,
    /// Greedy initialization sample size (kmedoids-large).
    #[arg(long, default_value_t = 5000)]
    init_batch: usize,
    /// Branch-and-bound batch size, or `auto` for ceil(sqrt(cluster size)).
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    bb_batch: BatchSize,
    /// Update sweeps (kmedoids-large).
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Swap sweeps (kmedoids-pam).
    #[arg(long, default_value_t = 30)]
    pam_sweeps: usize,
    /// Neighbors of the pldm pseudo-labeler.
    #[arg(long, default_value_t = 5)]
    knn: usize,
    /// Pair budget of the Lipschitz estimate (pldm).
    #[arg(long, default_value_t = 2_000_000)]
    pair_budget: usize,
    /// Envelope Lipschitz constant (pldm; default: estimated).
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long, default_value = "l1", value_parser = parse_loss)]
    loss: LossKind,
    /// Mini-batch size (kmeans, wkmeans).
    #[arg(long)]
    minibatch: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Labeled source matrix.
    #[arg(long)]
    source: PathBuf,
    /// Labeled target matrix.
    #[arg(long)]
    target: PathBuf,
    /// Selected target indices, one per line.
    #[arg(long)]
    indices: PathBuf,
    /// Label column (default: last).
    #[arg(long)]
    label_col: Option<usize>,
    #[arg(long, default_value_t = 1)]
    knn: usize,
    #[arg(long, default_value = "l2", value_parser = parse_metric)]
    metric: Metric,
    #[arg(long, default_value = "mae", value_parser = parse_task)]
    task: Task,
    /// Also score the queried targets.
    #[arg(long)]
    include_queried: bool,
    /// Standard-scale features with source + queried statistics.
    #[arg(long)]
    standardize: bool,
    /// Also write the JSON result here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Zero-based column to sort by; it is removed from the parts.
    #[arg(long)]
    feature: usize,
    #[arg(long)]
    parts: usize,
    /// Directory for `<stem>_part<i>.csv` (default: next to the input).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[command(subcommand)]
    kind: BoundKind,
}

#[derive(Debug, Subcommand)]
enum BoundKind {
    /// Rejection probabilities of branch-and-bound on a uniform-cube cluster.
    Bb {
        /// Cluster size.
        #[arg(long)]
        nc: usize,
        /// Dimension.
        #[arg(long)]
        p: usize,
        /// Batch size.
        #[arg(long)]
        batch: usize,
        #[arg(long)]
        eps: f64,
    },
    /// Confidence term M sqrt(ln(1/delta) / 2n).
    Conf {
        #[arg(long = "M")]
        m: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_strategy)]
    strategies: Vec<StrategyKind>,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Labeled source matrix (omit to generate a synthetic task).
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    /// Labeled target matrix.
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// Label column (default: last).
    #[arg(long)]
    label_col: Option<usize>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value = "l2", value_parser = parse_metric)]
    metric: Metric,
    /// Neighbors of the k-NN evaluator.
    #[arg(long, default_value_t = 1)]
    eval_knn: usize,
    #[arg(long, default_value = "mae", value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    include_queried: bool,
    #[arg(long)]
    standardize: bool,
    /// JSON report path.
    #[arg(long)]
    report: PathBuf,
    /// Optional flat CSV with one row per cell.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    /// Synthetic generator: gaussian or feature-split.
    #[arg(long, default_value = "gaussian")]
    shift_mode: String,
    #[arg(long, default_value_t = 2000)]
    n_source: usize,
    #[arg(long, default_value_t = 2000)]
    n_target: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Mean shift of the target (gaussian) or feature coupling (feature-split).
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    #[arg(long, default_value_t = 1.0)]
    label_lipschitz: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|_| "expected one of l1, l2, linf".to_string())
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|_| "expected mae or accuracy".to_string())
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|_| "expected l1 or l2".to_string())
}

/// A batch size, `None` meaning automatic.
#[derive(Debug, Clone, Copy)]
struct BatchSize(Option<usize>);

fn parse_auto(s: &str) -> Result<BatchSize, String> {
    if s == "auto" {
        return Ok(BatchSize(None));
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err("expected `auto` or a positive integer".to_string()),
        Ok(b) => Ok(BatchSize(Some(b))),
    }
}

fn configure_threads() -> Result<(), commands::CliError> {
    let Ok(raw) = std::env::var("DBAL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| commands::CliError::Usage(format!("DBAL_THREADS must be a count, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| commands::CliError::Data(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Query(a) => commands::query(a),
        Command::Eval(a) => commands::eval(a),
        Command::Split(a) => commands::split(a),
        Command::Bound(a) => commands::bound(a),
        Command::Experiment(a) => commands::experiment(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dbal: {e}");
            ExitCode::from(e.code())
        }
    }
}
