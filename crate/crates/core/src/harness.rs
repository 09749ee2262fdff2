//! Synthetic domain-shift tasks, k-NN evaluation and strategy comparison grids.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::pldm::nearest_k;
use crate::points::{LabeledPool, Metric, PointSet, Selection};
use crate::rng;
use crate::split;
use crate::strategies::{self, CriterionReport, QueryInputs, StrategyConfig, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// Source ~ N(0, I); target ~ N(shift, I).
    GaussianShift,
    /// One hidden feature is drawn alongside the others, the pool is sorted
    /// on it and cut into source (low end) and target (high end), and the
    /// hidden feature is dropped. `shift[0]` couples every kept feature to
    /// the hidden one, which is what makes the two ends differ.
    FeatureSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub mode: ShiftMode,
    pub n_source: usize,
    pub n_target: usize,
    pub p: usize,
    /// Length 1 (applied to every dimension) or length `p`.
    pub shift: Vec<f64>,
    pub label_lipschitz: f64,
    pub noise_sd: f64,
    /// Geometry under which the noiseless labels are `label_lipschitz`-Lipschitz.
    pub metric: Metric,
    pub seed: u64,
}

impl ShiftSpec {
    pub fn gaussian(n_source: usize, n_target: usize, p: usize, shift: f64, seed: u64) -> Self {
        ShiftSpec {
            mode: ShiftMode::GaussianShift,
            n_source,
            n_target,
            p,
            shift: vec![shift],
            label_lipschitz: 1.0,
            noise_sd: 0.0,
            metric: Metric::L2,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if self.n_source == 0 || self.n_target == 0 {
            return Err(Error::invalid("both pools need at least one point"));
        }
        if self.shift.len() != 1 && self.shift.len() != self.p {
            return Err(Error::invalid(format!(
                "shift has {} entries; expected 1 or {}",
                self.shift.len(),
                self.p
            )));
        }
        if self.shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("shift must be finite"));
        }
        if !(self.label_lipschitz >= 0.0) || !self.label_lipschitz.is_finite() {
            return Err(Error::invalid("label Lipschitz constant must be finite and non-negative"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::invalid("noise sd must be finite and non-negative"));
        }
        Ok(())
    }

    fn shift_at(&self, j: usize) -> f64 {
        if self.shift.len() == 1 {
            self.shift[0]
        } else {
            self.shift[j]
        }
    }
}

fn normal_matrix(rows: usize, p: usize, rng: &mut rng::StreamRng) -> Vec<f64> {
    (0..rows * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Labels `k_f sin(w.x) / ||w||_*` plus Gaussian noise, with `w` a seeded
/// unit direction.
fn label(points: &PointSet, spec: &ShiftSpec, w: &[f64], noise: &mut rng::StreamRng) -> Vec<f64> {
    let scale = spec.label_lipschitz / spec.metric.dual_norm(w);
    points
        .rows()
        .map(|x| {
            let dot: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let e = if spec.noise_sd > 0.0 {
                spec.noise_sd * noise.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            scale * dot.sin() + e
        })
        .collect()
}

/// Draws a labeled `(source, target)` pair according to `spec`.
pub fn make_shift_dataset(spec: &ShiftSpec) -> Result<(LabeledPool, LabeledPool)> {
    spec.validate()?;
    let p = spec.p;
    let mut dir_rng = rng::stream(spec.seed, "shift-direction");
    let mut w = normal_matrix(1, p, &mut dir_rng);
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        w[0] = 1.0;
    } else {
        w.iter_mut().for_each(|v| *v /= norm);
    }
    let mut noise = rng::stream(spec.seed, "shift-noise");
    let (source, target) = match spec.mode {
        ShiftMode::GaussianShift => {
            let src = normal_matrix(spec.n_source, p, &mut rng::stream(spec.seed, "shift-source"));
            let mut tgt = normal_matrix(spec.n_target, p, &mut rng::stream(spec.seed, "shift-target"));
            for row in tgt.chunks_mut(p) {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += spec.shift_at(j);
                }
            }
            (PointSet::new(src, p)?, PointSet::new(tgt, p)?)
        }
        ShiftMode::FeatureSplit => {
            let n = spec.n_source + spec.n_target;
            let mut raw = normal_matrix(n, p + 1, &mut rng::stream(spec.seed, "shift-pool"));
            let c = spec.shift[0];
            for row in raw.chunks_mut(p + 1) {
                let h = row[0];
                row[1..].iter_mut().for_each(|v| *v += c * h);
            }
            let all = PointSet::new(raw, p + 1)?;
            let parts = split::split_by_sizes(&all, &vec![0.0; n], 0, &[spec.n_source, spec.n_target])?;
            let mut it = parts.into_iter();
            let s = it.next().expect("two parts").pool.points;
            let t = it.next().expect("two parts").pool.points;
            (s, t)
        }
    };
    let ys = label(&source, spec, &w, &mut noise);
    let yt = label(&target, spec, &w, &mut noise);
    Ok((LabeledPool::new(source, ys)?, LabeledPool::new(target, yt)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Mae,
    Accuracy,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Mae => "mae",
            Task::Accuracy => "accuracy",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mae" => Ok(Task::Mae),
            "accuracy" => Ok(Task::Accuracy),
            _ => Err(Error::invalid(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k_neighbors: usize,
    pub metric: Metric,
    pub task: Task,
    /// Score queried targets too (they are in the training pool).
    pub include_queried: bool,
    /// Standard-scale features with statistics of `source ∪ queried`.
    pub standardize: bool,
}

impl EvalConfig {
    pub fn new(k_neighbors: usize, metric: Metric, task: Task) -> Self {
        EvalConfig {
            k_neighbors,
            metric,
            task,
            include_queried: false,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task: Task,
    /// MAE in label units, or accuracy in `[0, 1]`.
    pub score: f64,
    pub n_eval: usize,
    pub budget: usize,
}

/// Column means and standard deviations (zero spread maps to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl StandardScaler {
    pub fn fit(points: &PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet("scaler fit on no rows"));
        }
        let n = points.len() as f64;
        let p = points.dim();
        let mut mean = vec![0.0; p];
        for r in points.rows() {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for r in points.rows() {
            for j in 0..p {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(StandardScaler { mean, scale })
    }

    pub fn transform(&self, points: &PointSet) -> Result<PointSet> {
        points.check_dim(self.mean.len())?;
        let p = points.dim();
        let data = points
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % p]) / self.scale[i % p])
            .collect();
        PointSet::new(data, p)
    }
}

/// Majority class among neighbors; ties go to the class whose closest
/// member is nearest, then to the smaller class.
fn vote(neighbors: &[(f64, usize)], labels: &[f64]) -> f64 {
    // (class, votes, closest distance)
    let mut tally: Vec<(f64, usize, f64)> = Vec::new();
    for &(d, i) in neighbors {
        let c = labels[i].round();
        match tally.iter_mut().find(|t| t.0 == c) {
            Some(t) => {
                t.1 += 1;
                t.2 = t.2.min(d);
            }
            None => tally.push((c, 1, d)),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.total_cmp(&b.0)))
        .map(|t| t.0)
        .unwrap_or(f64::NAN)
}

/// Trains k-NN on `source ∪ queried targets` (with their true labels) and
/// scores it on the targets left out of the selection.
pub fn evaluate(
    source: &LabeledPool,
    target: &LabeledPool,
    selection: &Selection,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    selection.validate(target.len())?;
    if !source.is_empty() {
        source.points.check_dim(target.points.dim())?;
    }
    let mut train = source.concat(&target.subset(&selection.indices))?;
    let mask = selection.mask(target.len());
    let eval_idx: Vec<usize> = (0..target.len())
        .filter(|&i| cfg.include_queried || !mask[i])
        .collect();
    if eval_idx.is_empty() {
        return Err(Error::EmptySet("no target points left to evaluate on"));
    }
    if train.is_empty() {
        return Err(Error::EmptySet("no labeled points to train on"));
    }
    if cfg.k_neighbors == 0 || cfg.k_neighbors > train.len() {
        return Err(Error::invalid(format!(
            "k-NN needs 1 <= k <= {}, got {}",
            train.len(),
            cfg.k_neighbors
        )));
    }
    let mut queries = target.points.select_rows(&eval_idx);
    if cfg.standardize {
        let scaler = StandardScaler::fit(&train.points)?;
        train.points = scaler.transform(&train.points)?;
        queries = scaler.transform(&queries)?;
    }
    let k = cfg.k_neighbors;
    let per_point = par::map_range(eval_idx.len(), |q| {
        let nn = nearest_k(&train.points, queries.row(q), k, cfg.metric);
        let truth = target.labels[eval_idx[q]];
        match cfg.task {
            Task::Mae => {
                let pred = nn.iter().map(|&(_, i)| train.labels[i]).sum::<f64>() / k as f64;
                (pred - truth).abs()
            }
            Task::Accuracy => f64::from(u8::from(vote(&nn, &train.labels) == truth.round())),
        }
    });
    Ok(EvalResult {
        task: cfg.task,
        score: per_point.iter().sum::<f64>() / per_point.len() as f64,
        n_eval: eval_idx.len(),
        budget: selection.len(),
    })
}

/// Per-target spread (variance) of the k nearest source labels, a cheap
/// uncertainty weight for weighted K-means.
pub fn knn_uncertainty(train: &LabeledPool, targets: &PointSet, k_neighbors: usize, metric: Metric) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::EmptySet("uncertainty over an empty training pool"));
    }
    let k = k_neighbors.clamp(1, train.len());
    train.points.check_dim(targets.dim())?;
    Ok(par::map_range(targets.len(), |i| {
        let nn = nearest_k(&train.points, targets.row(i), k, metric);
        let m = nn.iter().map(|&(_, j)| train.labels[j]).sum::<f64>() / k as f64;
        nn.iter().map(|&(_, j)| (train.labels[j] - m).powi(2)).sum::<f64>() / k as f64
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategies: Vec<StrategyKind>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Template for strategy knobs; budget and seed are set per cell.
    pub strategy: StrategyConfig,
    pub eval: EvalConfig,
    /// Weights for `wkmeans`; derived with [`knn_uncertainty`] when absent.
    pub weights: Option<Vec<f64>>,
    /// Measure wall time per cell. Off gives reproducible reports.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub criterion_trace: Vec<f64>,
    pub criterion: CriterionReport,
    pub eval: EvalResult,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub runs: usize,
    pub score: MeanSd,
    pub mean_min_dist: MeanSd,
    pub max_min_dist: MeanSd,
    pub envelope_gap_mean: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub metric: Metric,
    pub records: Vec<CellRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    /// Flat CSV with one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,K,seed,score,mean_min_dist,max_min_dist,envelope_gap,wall_ms\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.strategy,
                r.budget,
                r.seed,
                r.eval.score,
                r.criterion.mean_min_dist,
                r.criterion.max_min_dist,
                opt(r.criterion.envelope_gap_mean),
                opt(r.wall_ms),
            );
        }
        out
    }
}

/// Runs every (strategy, budget, seed) cell in that order.
pub fn run_experiment(source: &LabeledPool, target: &LabeledPool, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.strategies.is_empty() || cfg.budgets.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::invalid("experiment grid is empty"));
    }
    let metric = cfg.strategy.metric;
    let weights = if cfg.strategies.contains(&StrategyKind::WeightedKMeans) {
        match &cfg.weights {
            Some(w) => Some(w.clone()),
            None => Some(knn_uncertainty(source, &target.points, cfg.strategy.knn, metric)?),
        }
    } else {
        None
    };
    let inputs = QueryInputs {
        source: &source.points,
        source_labels: Some(&source.labels),
        targets: &target.points,
        target_pseudo: None,
        weights: weights.as_deref(),
    };
    let mut records = Vec::new();
    for &kind in &cfg.strategies {
        for &budget in &cfg.budgets {
            for &seed in &cfg.seeds {
                let sc = StrategyConfig {
                    budget,
                    seed,
                    ..cfg.strategy.clone()
                };
                let start = Instant::now();
                let out = strategies::select(kind, &inputs, &sc)?;
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                let env = out.envelopes.as_ref().map(|(e, l)| (e, l));
                let criterion = strategies::criterion_report(&source.points, &target.points, &out.selection, metric, env)?;
                let eval = evaluate(source, target, &out.selection, &cfg.eval)?;
                log::info!("{kind} K={budget} seed={seed}: score {}", eval.score);
                records.push(CellRecord {
                    strategy: kind,
                    budget,
                    seed,
                    indices: out.selection.indices,
                    criterion_trace: out.selection.criterion_trace,
                    criterion,
                    eval,
                    wall_ms: cfg.timing.then_some(elapsed),
                });
            }
        }
    }
    let summary = records
        .chunks(cfg.seeds.len())
        .map(|cell| {
            let col = |f: &dyn Fn(&CellRecord) -> f64| MeanSd::of(&cell.iter().map(f).collect::<Vec<_>>());
            let gaps: Option<Vec<f64>> = cell.iter().map(|r| r.criterion.envelope_gap_mean).collect();
            SummaryRow {
                strategy: cell[0].strategy,
                budget: cell[0].budget,
                runs: cell.len(),
                score: col(&|r| r.eval.score),
                mean_min_dist: col(&|r| r.criterion.mean_min_dist),
                max_min_dist: col(&|r| r.criterion.max_min_dist),
                envelope_gap_mean: gaps.map(|g| MeanSd::of(&g)),
            }
        })
        .collect();
    Ok(ExperimentReport {
        task: cfg.eval.task,
        metric,
        records,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(xs: &[f64], ys: &[f64]) -> LabeledPool {
        LabeledPool::new(PointSet::from_scalars(xs).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn zero_shift_means_agree() {
        let n = 4000;
        let (s, t) = make_shift_dataset(&ShiftSpec::gaussian(n, n, 3, 0.0, 8)).unwrap();
        for j in 0..3 {
            let ms = s.points.column(j).iter().sum::<f64>() / n as f64;
            let mt = t.points.column(j).iter().sum::<f64>() / n as f64;
            assert!((ms - mt).abs() < 3.0 / (n as f64).sqrt(), "dim {j}: {ms} vs {mt}");
        }
    }

    #[test]
    fn shift_moves_the_target() {
        let mut spec = ShiftSpec::gaussian(500, 500, 2, 0.0, 1);
        spec.shift = vec![3.0, -2.0];
        let (_, t) = make_shift_dataset(&spec).unwrap();
        let m0 = t.points.column(0).iter().sum::<f64>() / 500.0;
        let m1 = t.points.column(1).iter().sum::<f64>() / 500.0;
        assert!((m0 - 3.0).abs() < 0.3 && (m1 + 2.0).abs() < 0.3);
    }

    #[test]
    fn noiseless_labels_respect_lipschitz() {
        for metric in [Metric::L1, Metric::L2, Metric::Linf] {
            for mode in [ShiftMode::GaussianShift, ShiftMode::FeatureSplit] {
                let spec = ShiftSpec {
                    mode,
                    label_lipschitz: 2.5,
                    metric,
                    shift: vec![0.7],
                    ..ShiftSpec::gaussian(150, 150, 4, 1.0, 5)
                };
                let (s, t) = make_shift_dataset(&spec).unwrap();
                let all = s.concat(&t).unwrap();
                let k = crate::pldm::estimate_lipschitz(&all.points, &all.labels, metric, usize::MAX, 0).unwrap();
                assert!(k <= 2.5 + 1e-9, "{metric} {mode:?}: {k}");
            }
        }
    }

    #[test]
    fn datasets_are_deterministic() {
        let spec = ShiftSpec {
            noise_sd: 0.3,
            ..ShiftSpec::gaussian(40, 30, 3, 1.0, 12)
        };
        assert_eq!(make_shift_dataset(&spec).unwrap(), make_shift_dataset(&spec).unwrap());
        let fs = ShiftSpec {
            mode: ShiftMode::FeatureSplit,
            ..spec.clone()
        };
        let (s, t) = make_shift_dataset(&fs).unwrap();
        assert_eq!((s.len(), t.len(), s.points.dim()), (40, 30, 3));
        assert!(make_shift_dataset(&ShiftSpec { shift: vec![1.0, 2.0], ..spec }).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let src = pool(&[0.0, 10.0], &[0.0, 10.0]);
        let tgt = pool(&[1.0, 9.0], &[1.0, 9.0]);
        let cfg = EvalConfig::new(1, Metric::L1, Task::Mae);
        let r = evaluate(&src, &tgt, &Selection::default(), &cfg).unwrap();
        assert_eq!((r.score, r.n_eval), (1.0, 2));
        let r = evaluate(&src, &tgt, &Selection::new(vec![0], vec![]), &cfg).unwrap();
        assert_eq!((r.score, r.n_eval), (1.0, 1));
        let all = Selection::new(vec![0, 1], vec![]);
        assert!(evaluate(&src, &tgt, &all, &cfg).is_err());
        let inc = EvalConfig {
            include_queried: true,
            ..cfg
        };
        assert_eq!(evaluate(&src, &tgt, &all, &inc).unwrap().score, 0.0);
    }

    #[test]
    fn queried_representatives_fix_their_clusters() {
        let src = pool(&[100.0], &[0.0]);
        let tgt = pool(&[0.0, 0.1, -0.1, 5.0, 5.1, 4.9], &[1.0, 1.0, 1.0, 7.0, 7.0, 7.0]);
        let cfg = EvalConfig::new(1, Metric::L2, Task::Mae);
        let r = evaluate(&src, &tgt, &Selection::new(vec![0, 3], vec![]), &cfg).unwrap();
        assert_eq!((r.score, r.n_eval), (0.0, 4));
    }

    #[test]
    fn accuracy_and_votes() {
        let src = pool(&[0.0, 1.0, 10.0, 11.0], &[0.0, 0.0, 1.0, 1.0]);
        let tgt = pool(&[0.5, 10.5, 2.0], &[0.0, 1.0, 0.2]);
        let cfg = EvalConfig::new(3, Metric::L1, Task::Accuracy);
        assert_eq!(evaluate(&src, &tgt, &Selection::default(), &cfg).unwrap().score, 1.0);
        // two classes with one vote each: the closer neighbor wins
        assert_eq!(vote(&[(1.0, 0), (2.0, 1)], &[3.0, 4.0]), 3.0);
        assert_eq!(vote(&[(1.0, 0), (1.0, 1)], &[4.0, 3.0]), 3.0);
        assert_eq!(vote(&[(0.5, 0), (1.0, 1), (2.0, 2)], &[1.0, 2.0, 2.0]), 2.0);
    }

    #[test]
    fn scaling_uses_train_statistics() {
        let pts = PointSet::from_rows(&[[0.0, 5.0], [2.0, 5.0]]).unwrap();
        let s = StandardScaler::fit(&pts).unwrap();
        assert_eq!(s.mean, vec![1.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let t = s.transform(&PointSet::from_rows(&[[3.0, 6.0]]).unwrap()).unwrap();
        assert_eq!(t.as_slice(), &[2.0, 1.0]);
    }

    fn small_task() -> (LabeledPool, LabeledPool) {
        make_shift_dataset(&ShiftSpec {
            noise_sd: 0.05,
            ..ShiftSpec::gaussian(60, 80, 2, 1.5, 3)
        })
        .unwrap()
    }

    fn config(strategies: Vec<StrategyKind>, budgets: Vec<usize>, seeds: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            strategies,
            budgets,
            seeds,
            strategy: StrategyConfig::new(Metric::L2, 0, 0),
            eval: EvalConfig::new(1, Metric::L2, Task::Mae),
            weights: None,
            timing: false,
        }
    }

    #[test]
    fn single_cell_grid() {
        let (s, t) = small_task();
        let r = run_experiment(&s, &t, &config(vec![StrategyKind::Random], vec![5], vec![1])).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.summary.len(), 1);
        assert_eq!(r.summary[0].score.sd, 0.0);
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn deterministic_strategy_has_zero_spread() {
        let (s, t) = small_task();
        let r = run_experiment(&s, &t, &config(vec![StrategyKind::KCenter], vec![4], vec![1, 2])).unwrap();
        assert_eq!(r.records[0].indices, r.records[1].indices);
        assert_eq!(r.summary[0].mean_min_dist.sd, 0.0);
    }

    #[test]
    fn every_strategy_runs_in_the_grid() {
        let (s, t) = small_task();
        let cfg = config(StrategyKind::ALL.to_vec(), vec![3, 6], vec![7]);
        let r = run_experiment(&s, &t, &cfg).unwrap();
        assert_eq!(r.records.len(), 18);
        assert_eq!(r, run_experiment(&s, &t, &cfg).unwrap());
        for rec in &r.records {
            assert_eq!(rec.indices.len(), rec.budget);
            assert_eq!(rec.eval.n_eval, 80 - rec.budget);
            assert_eq!(rec.criterion.envelope_gap_mean.is_some(), rec.strategy == StrategyKind::Pldm);
        }
    }

    #[test]
    fn kmedoids_budget_is_monotone() {
        let (s, t) = small_task();
        let r = run_experiment(&s, &t, &config(vec![StrategyKind::KMedoidsGreedy], (0..8).collect(), vec![0])).unwrap();
        for w in r.records.windows(2) {
            assert!(w[1].criterion.mean_min_dist <= w[0].criterion.mean_min_dist);
        }
    }
}
