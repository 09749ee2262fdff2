//! Baseline query strategies, the uniform dispatch over every strategy, and
//! the criterion evaluators.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medoids::{self, BbParams, LargeParams};
use crate::par::{self, argmax_tied};
use crate::pldm::{self, Envelopes, Loss};
use crate::points::{exact_nn_distances, nearest_row, LabeledPool, Metric, PointSet, Selection};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "kmedoids-greedy")]
    KMedoidsGreedy,
    #[serde(rename = "kmedoids-pam")]
    KMedoidsPam,
    #[serde(rename = "kmedoids-large")]
    KMedoidsLarge,
    #[serde(rename = "pldm")]
    Pldm,
    #[serde(rename = "kcenter")]
    KCenter,
    #[serde(rename = "diversity")]
    Diversity,
    #[serde(rename = "kmeans")]
    KMeans,
    #[serde(rename = "wkmeans")]
    WeightedKMeans,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::Random,
        StrategyKind::KMedoidsGreedy,
        StrategyKind::KMedoidsPam,
        StrategyKind::KMedoidsLarge,
        StrategyKind::Pldm,
        StrategyKind::KCenter,
        StrategyKind::Diversity,
        StrategyKind::KMeans,
        StrategyKind::WeightedKMeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::KMedoidsGreedy => "kmedoids-greedy",
            StrategyKind::KMedoidsPam => "kmedoids-pam",
            StrategyKind::KMedoidsLarge => "kmedoids-large",
            StrategyKind::Pldm => "pldm",
            StrategyKind::KCenter => "kcenter",
            StrategyKind::Diversity => "diversity",
            StrategyKind::KMeans => "kmeans",
            StrategyKind::WeightedKMeans => "wkmeans",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`")))
    }
}

fn check_budget(k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::invalid(format!("budget {k} exceeds {n} targets")));
    }
    Ok(())
}

/// `k` distinct uniform indices out of `n`; the trace is empty.
pub fn random_select(n: usize, k: usize, seed: u64) -> Result<Selection> {
    check_budget(k, n)?;
    let mut rng = rng::stream(seed, "random-select");
    let indices = rand::seq::index::sample(&mut rng, n, k).into_vec();
    Ok(Selection::new(indices, Vec::new()))
}

/// Farthest-first traversal: repeatedly query the target farthest from
/// `source ∪ selected`. The trace holds the max-min distance after each query.
pub fn kcenter_greedy(source: &PointSet, targets: &PointSet, k: usize, metric: Metric) -> Result<Selection> {
    if source.is_empty() {
        return Err(Error::EmptySet("k-center needs a source pool"));
    }
    check_budget(k, targets.len())?;
    let mut d = exact_nn_distances(source, targets, metric)?;
    let mut chosen = vec![false; targets.len()];
    let mut sel = Selection::default();
    for _ in 0..k {
        let (best, _) = argmax_tied(d.iter().copied().enumerate().filter(|&(i, _)| !chosen[i]))
            .expect("budget <= n");
        chosen[best] = true;
        let br = targets.row(best);
        for (x, dx) in d.iter_mut().enumerate() {
            *dx = dx.min(metric.distance(targets.row(x), br));
        }
        sel.indices.push(best);
        sel.criterion_trace.push(d.iter().copied().fold(0.0, f64::max));
    }
    Ok(sel)
}

/// Repeatedly query the target with the largest mean distance to
/// `source ∪ selected`. The trace holds that mean for each picked point.
pub fn diversity_greedy(source: &PointSet, targets: &PointSet, k: usize, metric: Metric) -> Result<Selection> {
    if source.is_empty() {
        return Err(Error::EmptySet("diversity needs a source pool"));
    }
    source.check_dim(targets.dim())?;
    check_budget(k, targets.len())?;
    let mut sums = par::map_range(targets.len(), |x| {
        let xr = targets.row(x);
        source.rows().map(|r| metric.distance(xr, r)).sum::<f64>()
    });
    let mut count = source.len() as f64;
    let mut chosen = vec![false; targets.len()];
    let mut sel = Selection::default();
    for _ in 0..k {
        let (best, mean) = argmax_tied(
            sums.iter()
                .enumerate()
                .filter(|&(i, _)| !chosen[i])
                .map(|(i, s)| (i, s / count)),
        )
        .expect("budget <= n");
        chosen[best] = true;
        let br = targets.row(best);
        for (x, s) in sums.iter_mut().enumerate() {
            *s += metric.distance(targets.row(x), br);
        }
        count += 1.0;
        sel.indices.push(best);
        sel.criterion_trace.push(mean);
    }
    Ok(sel)
}

pub const KMEANS_MAX_ITERS: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;

/// K-means query selection (always Euclidean).
///
/// Weighted k-means++ seeding, then Lloyd iterations until no center moves by
/// more than `1e-6` relative to the largest center norm, or 300 iterations.
/// With `minibatch` smaller than the pool, each iteration instead updates
/// centers from a seeded batch with per-center learning rates. Each center
/// then queries its nearest unused target.
pub fn kmeans_select(
    targets: &PointSet,
    k: usize,
    seed: u64,
    weights: Option<&[f64]>,
    minibatch: Option<usize>,
) -> Result<Selection> {
    let n = targets.len();
    check_budget(k, n)?;
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::invalid(format!("{} weights for {n} targets", w.len())));
            }
            if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid("weights must be finite and non-negative"));
            }
            if w.iter().all(|&v| v == 0.0) {
                return Err(Error::invalid("weights are all zero"));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    if k == 0 {
        return Ok(Selection::default());
    }
    let mut centers = kmeanspp_seed(targets, &w, k, seed);
    match minibatch {
        Some(b) if b == 0 => return Err(Error::invalid("mini-batch size must be at least 1")),
        Some(b) if b < n => minibatch_iterations(targets, &w, &mut centers, b, seed),
        _ => lloyd_iterations(targets, &w, &mut centers),
    }
    Ok(Selection::new(nearest_unused(targets, &centers), Vec::new()))
}

fn sq_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeanspp_seed(targets: &PointSet, w: &[f64], k: usize, seed: u64) -> PointSet {
    let n = targets.len();
    let mut rng = rng::stream(seed, "kmeans-seeding");
    let pick = |rng: &mut rng::StreamRng, mass: &[f64]| -> usize {
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            // every weighted point already coincides with a center
            return mass.iter().position(|_| true).unwrap_or(0);
        }
        let mut r = rng.gen::<f64>() * total;
        for (i, &m) in mass.iter().enumerate() {
            if m > 0.0 {
                if r < m {
                    return i;
                }
                r -= m;
            }
        }
        mass.iter().rposition(|&m| m > 0.0).unwrap_or(n - 1)
    };
    let first = pick(&mut rng, w);
    let mut centers = targets.row(first).to_vec();
    let mut d2: Vec<f64> = targets.rows().map(|r| sq_l2(r, targets.row(first))).collect();
    for _ in 1..k {
        let mass: Vec<f64> = d2.iter().zip(w).map(|(d, w)| d * w).collect();
        let next = pick(&mut rng, &mass);
        let nr = targets.row(next).to_vec();
        for (x, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_l2(targets.row(x), &nr));
        }
        centers.extend_from_slice(&nr);
    }
    PointSet::new(centers, targets.dim()).expect("centers are finite")
}

fn assign_l2(targets: &PointSet, centers: &PointSet) -> Vec<usize> {
    par::map_range(targets.len(), |x| nearest_row(targets.row(x), centers, Metric::L2).1)
}

fn lloyd_iterations(targets: &PointSet, w: &[f64], centers: &mut PointSet) {
    let p = targets.dim();
    let k = centers.len();
    for _ in 0..KMEANS_MAX_ITERS {
        let labels = assign_l2(targets, centers);
        let mut sums = vec![0.0; k * p];
        let mut mass = vec![0.0; k];
        for (x, &c) in labels.iter().enumerate() {
            mass[c] += w[x];
            for (s, v) in sums[c * p..(c + 1) * p].iter_mut().zip(targets.row(x)) {
                *s += w[x] * v;
            }
        }
        let mut next = centers.as_slice().to_vec();
        for c in 0..k {
            if mass[c] > 0.0 {
                for j in 0..p {
                    next[c * p + j] = sums[c * p + j] / mass[c];
                }
            }
        }
        let next = PointSet::new(next, p).expect("means are finite");
        let done = converged(centers, &next);
        *centers = next;
        if done {
            break;
        }
    }
}

fn converged(old: &PointSet, new: &PointSet) -> bool {
    let scale = old.rows().map(|r| sq_l2(r, &vec![0.0; r.len()]).sqrt()).fold(1.0, f64::max);
    old.rows()
        .zip(new.rows())
        .all(|(a, b)| sq_l2(a, b).sqrt() <= KMEANS_TOL * scale)
}

fn minibatch_iterations(targets: &PointSet, w: &[f64], centers: &mut PointSet, batch: usize, seed: u64) {
    let n = targets.len();
    let p = targets.dim();
    let k = centers.len();
    let mut rng = rng::stream(seed, "kmeans-minibatch");
    let mut counts = vec![0.0; k];
    let mut c = centers.as_slice().to_vec();
    for _ in 0..KMEANS_MAX_ITERS {
        let idx = rand::seq::index::sample(&mut rng, n, batch).into_vec();
        let cs = PointSet::new(c.clone(), p).expect("finite");
        let old = cs.clone();
        let labels: Vec<usize> = idx
            .iter()
            .map(|&x| nearest_row(targets.row(x), &cs, Metric::L2).1)
            .collect();
        for (&x, &j) in idx.iter().zip(&labels) {
            if w[x] == 0.0 {
                continue;
            }
            counts[j] += w[x];
            let eta = w[x] / counts[j];
            for (cv, v) in c[j * p..(j + 1) * p].iter_mut().zip(targets.row(x)) {
                *cv += eta * (v - *cv);
            }
        }
        let next = PointSet::new(c.clone(), p).expect("finite");
        if converged(&old, &next) {
            break;
        }
    }
    *centers = PointSet::new(c, p).expect("finite");
}

/// Nearest target of each center; a center whose nearest target is taken
/// falls back to its next-nearest unused target.
fn nearest_unused(targets: &PointSet, centers: &PointSet) -> Vec<usize> {
    let mut used = vec![false; targets.len()];
    let mut out = Vec::with_capacity(centers.len());
    for c in centers.rows() {
        let mut order: Vec<(f64, usize)> = targets
            .rows()
            .enumerate()
            .map(|(i, r)| (sq_l2(r, c), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let pick = order
            .into_iter()
            .find(|&(_, i)| !used[i])
            .map(|(_, i)| i)
            .expect("budget <= n");
        used[pick] = true;
        out.push(pick);
    }
    out
}

/// Distance-based quantities for a selection, measured exactly against
/// `source ∪ selected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    /// `(1/n) sum_x d(x, L_K)`.
    pub mean_min_dist: f64,
    /// `max_x d(x, L_K)`.
    pub max_min_dist: f64,
    /// `(1/n) sum_x loss(upper(x), lower(x))` when envelopes were supplied.
    pub envelope_gap_mean: Option<f64>,
}

pub fn criterion_report(
    source: &PointSet,
    targets: &PointSet,
    selection: &Selection,
    metric: Metric,
    envelopes: Option<(&Envelopes, &Loss)>,
) -> Result<CriterionReport> {
    if !source.is_empty() {
        source.check_dim(targets.dim())?;
    }
    let d0 = exact_nn_distances(source, targets, metric)?;
    criterion_report_from_source(&d0, targets, selection, metric, envelopes)
}

/// [`criterion_report`] given the exact nearest-source distance of every
/// target (`+inf` without a source), so several selections can share one scan.
pub fn criterion_report_from_source(
    source_dist: &[f64],
    targets: &PointSet,
    selection: &Selection,
    metric: Metric,
    envelopes: Option<(&Envelopes, &Loss)>,
) -> Result<CriterionReport> {
    selection.validate(targets.len())?;
    if targets.is_empty() {
        return Err(Error::EmptySet("criterion over no targets"));
    }
    if source_dist.len() != targets.len() {
        return Err(Error::invalid("one source distance per target is required"));
    }
    let picked = targets.select_rows(&selection.indices);
    let d: Vec<f64> = par::map_range(targets.len(), |x| {
        if picked.is_empty() {
            source_dist[x]
        } else {
            source_dist[x].min(nearest_row(targets.row(x), &picked, metric).0)
        }
    });
    if d.iter().any(|v| v.is_infinite()) {
        return Err(Error::EmptySet("criterion with neither source points nor queries"));
    }
    let mean_min_dist = d.iter().sum::<f64>() / d.len() as f64;
    let max_min_dist = d.iter().copied().fold(0.0, f64::max);
    let envelope_gap_mean = match envelopes {
        Some((env, loss)) => {
            if env.upper.len() != targets.len() {
                return Err(Error::invalid("envelopes do not match the target pool"));
            }
            Some(env.mean_loss(loss))
        }
        None => None,
    };
    Ok(CriterionReport {
        mean_min_dist,
        max_min_dist,
        envelope_gap_mean,
    })
}

/// Knobs shared by every strategy behind [`select`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub metric: Metric,
    pub budget: usize,
    pub seed: u64,
    pub large: LargeParams,
    pub pam_sweeps: usize,
    pub knn: usize,
    pub pair_budget: usize,
    pub lipschitz: Option<f64>,
    pub loss: Loss,
    pub minibatch: Option<usize>,
}

impl StrategyConfig {
    pub fn new(metric: Metric, budget: usize, seed: u64) -> Self {
        StrategyConfig {
            metric,
            budget,
            seed,
            large: LargeParams::default(),
            pam_sweeps: 30,
            knn: pldm::DEFAULT_KNN,
            pair_budget: pldm::DEFAULT_PAIR_BUDGET,
            lipschitz: None,
            loss: Loss::l1(),
            minibatch: None,
        }
    }

    pub fn with_bb_batch(mut self, batch: Option<usize>) -> Self {
        self.large.bb = BbParams {
            batch_size: batch,
            ..self.large.bb
        };
        self
    }
}

/// Everything a strategy may read.
#[derive(Debug, Clone, Copy)]
pub struct QueryInputs<'a> {
    pub source: &'a PointSet,
    /// Source labels; PLDM fits its k-NN pseudo-labeler on them.
    pub source_labels: Option<&'a [f64]>,
    pub targets: &'a PointSet,
    /// Target pseudo-labels; when absent PLDM predicts them with k-NN.
    pub target_pseudo: Option<&'a [f64]>,
    /// Per-target weights for weighted K-means (e.g. model uncertainty).
    pub weights: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub selection: Selection,
    /// Final envelopes and loss, for PLDM.
    pub envelopes: Option<(Envelopes, Loss)>,
}

/// Runs one strategy on the inputs.
pub fn select(kind: StrategyKind, inputs: &QueryInputs<'_>, cfg: &StrategyConfig) -> Result<QueryOutcome> {
    let QueryInputs {
        source, targets, ..
    } = *inputs;
    if !source.is_empty() {
        source.check_dim(targets.dim())?;
    }
    let metric = cfg.metric;
    let k = cfg.budget;
    let plain = |selection| QueryOutcome {
        selection,
        envelopes: None,
    };
    match kind {
        StrategyKind::Random => random_select(targets.len(), k, cfg.seed).map(plain),
        StrategyKind::KMedoidsGreedy | StrategyKind::KMedoidsPam => {
            let d0 = exact_nn_distances(source, targets, metric)?;
            let greedy = medoids::greedy_kmedoids(targets, &d0, k, metric)?;
            if kind == StrategyKind::KMedoidsGreedy {
                return Ok(plain(greedy));
            }
            medoids::pam_refine(targets, &d0, &greedy, metric, cfg.pam_sweeps).map(plain)
        }
        StrategyKind::KMedoidsLarge => {
            medoids::large_kmedoids(source, targets, k, &cfg.large, metric, cfg.seed)
                .map(|o| plain(o.selection))
        }
        StrategyKind::Pldm => {
            let labels = inputs
                .source_labels
                .ok_or_else(|| Error::invalid("pldm needs source labels"))?;
            let train = LabeledPool::new(source.clone(), labels.to_vec())?;
            let knn = cfg.knn.min(train.len()).max(1);
            let source_pseudo = pldm::knn_predict_all(&train, source, knn, metric)?;
            let target_pseudo = match inputs.target_pseudo {
                Some(p) => p.to_vec(),
                None => pldm::knn_predict_all(&train, targets, knn, metric)?,
            };
            let pseudo_pool = LabeledPool::new(source.clone(), source_pseudo)?;
            let out = pldm::pldm_select(
                &pseudo_pool,
                targets,
                &target_pseudo,
                k,
                &cfg.loss,
                cfg.lipschitz,
                metric,
                cfg.pair_budget,
                cfg.seed,
            )?;
            Ok(QueryOutcome {
                selection: out.selection,
                envelopes: Some((out.envelopes, cfg.loss)),
            })
        }
        StrategyKind::KCenter => kcenter_greedy(source, targets, k, metric).map(plain),
        StrategyKind::Diversity => diversity_greedy(source, targets, k, metric).map(plain),
        StrategyKind::KMeans => kmeans_select(targets, k, cfg.seed, None, cfg.minibatch).map(plain),
        StrategyKind::WeightedKMeans => {
            let w = inputs
                .weights
                .ok_or_else(|| Error::invalid("wkmeans needs a weight vector"))?;
            kmeans_select(targets, k, cfg.seed, Some(w), cfg.minibatch).map(plain)
        }
    }
}
