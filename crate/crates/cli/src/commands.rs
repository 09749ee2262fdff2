use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dbal::harness::{self, EvalConfig, ExperimentConfig, ShiftMode, ShiftSpec};
use dbal::io::{self, MatrixFormat};
use dbal::medoids::{BbParams, LargeParams};
use dbal::pldm::{Loss, LossKind};
use dbal::strategies::{self, QueryInputs, StrategyConfig, StrategyKind};
use dbal::theory::{self, BbScenario};
use dbal::{LabeledPool, PointSet, Selection};
use serde::Serialize;

use crate::output::{significant, Staged};
use crate::{BoundArgs, BoundKind, EvalArgs, ExperimentArgs, Knobs, QueryArgs, SplitArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flag combination; exit status 2.
    Usage(String),
    /// Unreadable input, invalid data or a failed computation; exit status 1.
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<dbal::Error> for CliError {
    fn from(e: dbal::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("cannot write {}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, CliError>;

fn load(path: &Path) -> CliResult<PointSet> {
    Ok(io::load_matrix(path, MatrixFormat::from_path(path))?)
}

fn load_vector(path: &Path) -> CliResult<Vec<f64>> {
    Ok(io::load_vector(path, MatrixFormat::from_path(path))?)
}

/// Splits the label column off; `None` picks the last column.
fn split_labels(m: PointSet, label_col: Option<usize>, path: &Path) -> CliResult<LabeledPool> {
    let col = label_col.unwrap_or(m.dim() - 1);
    if col >= m.dim() {
        return Err(CliError::Data(format!(
            "{}: label column {col} out of range for {} columns",
            path.display(),
            m.dim()
        )));
    }
    if m.dim() < 2 {
        return Err(CliError::Data(format!(
            "{}: a labeled matrix needs at least one feature column besides the labels",
            path.display()
        )));
    }
    let labels = m.column(col);
    Ok(LabeledPool::new(m.drop_column(col)?, labels)?)
}

fn strategy_config(knobs: &Knobs, metric: dbal::Metric, budget: usize, seed: u64) -> StrategyConfig {
    StrategyConfig {
        large: LargeParams {
            init_batch: knobs.init_batch,
            trees: knobs.trees,
            bb: BbParams {
                batch_size: knobs.bb_batch.0,
                ..BbParams::default()
            },
            max_iters: knobs.max_iters,
            ..LargeParams::default()
        },
        pam_sweeps: knobs.pam_sweeps,
        knn: knobs.knn,
        pair_budget: knobs.pair_budget,
        lipschitz: knobs.lipschitz,
        loss: match knobs.loss {
            LossKind::L1 => Loss::l1(),
            LossKind::L2 => Loss::l2(),
        },
        minibatch: knobs.minibatch,
        ..StrategyConfig::new(metric, budget, seed)
    }
}

#[derive(Serialize)]
struct QueryReport<'a> {
    strategy: &'a str,
    metric: &'a str,
    budget: usize,
    seed: u64,
    indices: &'a [usize],
    criterion_trace: &'a [f64],
    mean_min_dist: f64,
    max_min_dist: f64,
    envelope_gap_mean: Option<f64>,
    wall_ms: Option<f64>,
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn query(a: QueryArgs) -> CliResult {
    if a.strategy == StrategyKind::Pldm && a.label_col.is_none() && a.source_labels.is_none() {
        return Err(CliError::Usage(
            "pldm needs source labels: pass --label-col or --source-labels".into(),
        ));
    }
    if a.strategy == StrategyKind::WeightedKMeans && a.weights.is_none() {
        return Err(CliError::Usage("wkmeans needs --weights".into()));
    }
    let source_raw = load(&a.source)?;
    let target_raw = load(&a.target)?;
    let (source, source_labels, targets) = match a.label_col {
        Some(col) => {
            let s = split_labels(source_raw, Some(col), &a.source)?;
            let t = split_labels(target_raw, Some(col), &a.target)?;
            (s.points, Some(s.labels), t.points)
        }
        None => {
            let labels = a.source_labels.as_deref().map(load_vector).transpose()?;
            (source_raw, labels, target_raw)
        }
    };
    if let Some(l) = &source_labels {
        LabeledPool::new(source.clone(), l.clone())?;
    }
    let pseudo = a.pseudo_labels.as_deref().map(load_vector).transpose()?;
    let weights = a.weights.as_deref().map(load_vector).transpose()?;
    let inputs = QueryInputs {
        source: &source,
        source_labels: source_labels.as_deref(),
        targets: &targets,
        target_pseudo: pseudo.as_deref(),
        weights: weights.as_deref(),
    };
    let cfg = strategy_config(&a.knobs, a.metric, a.budget, a.seed);
    let start = Instant::now();
    let out = strategies::select(a.strategy, &inputs, &cfg)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let env = out.envelopes.as_ref().map(|(e, l)| (e, l));
    let crit = strategies::criterion_report(&source, &targets, &out.selection, a.metric, env)?;
    let report = QueryReport {
        strategy: a.strategy.as_str(),
        metric: a.metric.as_str(),
        budget: a.budget,
        seed: a.seed,
        indices: &out.selection.indices,
        criterion_trace: &out.selection.criterion_trace,
        mean_min_dist: crit.mean_min_dist,
        max_min_dist: crit.max_min_dist,
        envelope_gap_mean: crit.envelope_gap_mean,
        wall_ms: (!a.no_timing).then_some(wall_ms),
    };
    let indices: String = out.selection.indices.iter().map(|i| format!("{i}\n")).collect();
    let json = to_json(&report)?;
    let mut staged = Staged::default();
    staged.add(&a.indices, indices.as_bytes()).map_err(io_error(&a.indices))?;
    staged.add(&a.report, json.as_bytes()).map_err(io_error(&a.report))?;
    staged.commit().map_err(io_error(&a.report))
}

/// Reads one zero-based index per line; blank lines are ignored.
fn read_indices(path: &Path) -> CliResult<Selection> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut indices = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let i = line.parse::<usize>().map_err(|_| {
            CliError::Data(format!(
                "{}: line {}: `{line}` is not a zero-based index",
                path.display(),
                no + 1
            ))
        })?;
        indices.push(i);
    }
    Ok(Selection::new(indices, Vec::new()))
}

pub fn eval(a: EvalArgs) -> CliResult {
    let source = split_labels(load(&a.source)?, a.label_col, &a.source)?;
    let target = split_labels(load(&a.target)?, a.label_col, &a.target)?;
    let selection = read_indices(&a.indices)?;
    let cfg = EvalConfig {
        include_queried: a.include_queried,
        standardize: a.standardize,
        ..EvalConfig::new(a.knn, a.metric, a.task)
    };
    let result = harness::evaluate(&source, &target, &selection, &cfg)?;
    let json = to_json(&result)?;
    if let Some(out) = &a.out {
        let mut staged = Staged::default();
        staged.add(out, json.as_bytes()).map_err(io_error(out))?;
        staged.commit().map_err(io_error(out))?;
    }
    print!("{json}");
    Ok(())
}

pub fn split(a: SplitArgs) -> CliResult {
    let data = load(&a.input)?;
    let dummy = vec![0.0; data.len()];
    let parts = dbal::split::feature_sort_split(&data, &dummy, a.feature, a.parts)?;
    let dir = match &a.out_dir {
        Some(d) => d.clone(),
        None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let stem = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "split".into());
    let mut staged = Staged::default();
    let mut lines = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let path: PathBuf = dir.join(format!("{stem}_part{i}.csv"));
        staged
            .add(&path, io::to_csv(&part.pool.points).as_bytes())
            .map_err(io_error(&path))?;
        lines.push(format!("{}\t{}", path.display(), part.pool.len()));
    }
    staged.commit().map_err(|e| CliError::Data(format!("cannot write parts: {e}")))?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

pub fn bound(a: BoundArgs) -> CliResult {
    match a.kind {
        BoundKind::Bb { nc, p, batch, eps } => {
            let r = theory::bb_rejection_bound(&BbScenario {
                cluster_size: nc,
                dim: p,
                batch,
                eps,
            })
            .map_err(|e| CliError::Usage(e.to_string()))?;
            println!("delta {}", significant(r.delta, 6));
            println!("gamma {}", significant(r.gamma, 6));
            println!("reject_prob {}", significant(r.reject_prob, 6));
            println!("clipped {}", r.clipped);
        }
        BoundKind::Conf { m, delta, n } => {
            let c = theory::confidence_term(m, delta, n).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("conf {}", significant(c, 6));
        }
    }
    Ok(())
}

pub fn experiment(a: ExperimentArgs) -> CliResult {
    let (source, target) = match (&a.source, &a.target) {
        (Some(s), Some(t)) => (
            split_labels(load(s)?, a.label_col, s)?,
            split_labels(load(t)?, a.label_col, t)?,
        ),
        _ => {
            let mode = match a.synthetic.shift_mode.as_str() {
                "gaussian" => ShiftMode::GaussianShift,
                "feature-split" => ShiftMode::FeatureSplit,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown shift mode `{other}`; expected gaussian or feature-split"
                    )))
                }
            };
            harness::make_shift_dataset(&ShiftSpec {
                mode,
                n_source: a.synthetic.n_source,
                n_target: a.synthetic.n_target,
                p: a.synthetic.dim,
                shift: vec![a.synthetic.shift],
                label_lipschitz: a.synthetic.label_lipschitz,
                noise_sd: a.synthetic.noise_sd,
                metric: a.metric,
                seed: a.synthetic.data_seed,
            })?
        }
    };
    let cfg = ExperimentConfig {
        strategies: a.strategies.clone(),
        budgets: a.budgets.clone(),
        seeds: a.seeds.clone(),
        strategy: strategy_config(&a.knobs, a.metric, 0, 0),
        eval: EvalConfig {
            include_queried: a.include_queried,
            standardize: a.standardize,
            ..EvalConfig::new(a.eval_knn, a.metric, a.task)
        },
        weights: None,
        timing: !a.no_timing,
    };
    let report = harness::run_experiment(&source, &target, &cfg)?;
    let mut staged = Staged::default();
    staged.add(&a.report, to_json(&report)?.as_bytes()).map_err(io_error(&a.report))?;
    if let Some(csv) = &a.csv {
        staged.add(csv, report.to_csv().as_bytes()).map_err(io_error(csv))?;
    }
    staged.commit().map_err(io_error(&a.report))?;
    for row in &report.summary {
        println!(
            "{}\tK={}\tscore {} ± {}\tmean_min_dist {} ± {}",
            row.strategy,
            row.budget,
            significant(row.score.mean, 6),
            significant(row.score.sd, 6),
            significant(row.mean_min_dist.mean, 6),
            significant(row.mean_min_dist.sd, 6),
        );
    }
    Ok(())
}
