//! Source-anchored K-medoids query selection.
//!
//! The labeled source points act as fixed, free medoids: a target's cost is
//! its distance to the closest of the source pool and the chosen medoids, so
//! the total cost is `sum_x d(x, L ∪ S)`. Three solvers are provided:
//!
//! * [`greedy_kmedoids`]: exact greedy on the full target-target distances,
//! * [`pam_refine`]: best-improvement swap search started from any selection,
//! * [`large_kmedoids`]: forest nearest-source distances, greedy on a sample,
//!   then alternating assignment and per-cluster [`bb_medoid`] updates.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::forest::{self, KdtForest};
use crate::par::{self, argmin_tied, tie_tolerance};
use crate::points::{exact_nn_distances, Metric, PointSet, Selection};
use crate::rng;

/// Largest target count whose full distance matrix is kept in memory.
const MATRIX_LIMIT: usize = 8192;

/// Row access to target-target distances, cached as a full matrix when it fits.
pub(crate) struct DistanceRows<'a> {
    points: &'a PointSet,
    metric: Metric,
    matrix: Option<Vec<f64>>,
}

impl<'a> DistanceRows<'a> {
    pub(crate) fn new(points: &'a PointSet, metric: Metric, limit: usize) -> Self {
        let n = points.len();
        let matrix = (n <= limit).then(|| {
            par::map_range(n, |i| {
                let a = points.row(i);
                points.rows().map(|b| metric.distance(a, b)).collect::<Vec<f64>>()
            })
            .concat()
        });
        DistanceRows {
            points,
            metric,
            matrix,
        }
    }

    pub(crate) fn with_row<R>(&self, i: usize, f: impl FnOnce(&[f64]) -> R) -> R {
        let n = self.points.len();
        match &self.matrix {
            Some(m) => f(&m[i * n..(i + 1) * n]),
            None => {
                let a = self.points.row(i);
                let row: Vec<f64> = self.points.rows().map(|b| self.metric.distance(a, b)).collect();
                f(&row)
            }
        }
    }
}

fn check_d0(targets: &PointSet, d0: &[f64]) -> Result<()> {
    if d0.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} source distances for {} targets",
            d0.len(),
            targets.len()
        )));
    }
    if d0.iter().any(|&v| v.is_nan() || v < 0.0) {
        return Err(Error::invalid("source distances must be >= 0 (use +inf for no source)"));
    }
    Ok(())
}

/// Total cost `sum_x min(d0[x], min_j d(x, medoid_j))`.
pub fn kmedoids_cost(targets: &PointSet, d0: &[f64], medoids: &[usize], metric: Metric) -> f64 {
    (0..targets.len())
        .map(|x| {
            medoids
                .iter()
                .map(|&m| metric.distance(targets.row(x), targets.row(m)))
                .fold(d0[x], f64::min)
        })
        .sum()
}

/// Costs after each prefix of `medoids`: entry `i` uses the first `i + 1` medoids.
pub fn prefix_costs(targets: &PointSet, d0: &[f64], medoids: &[usize], metric: Metric) -> Vec<f64> {
    let mut cur = d0.to_vec();
    medoids
        .iter()
        .map(|&m| {
            let mr = targets.row(m);
            for (x, c) in cur.iter_mut().enumerate() {
                *c = c.min(metric.distance(targets.row(x), mr));
            }
            cur.iter().sum()
        })
        .collect()
}

/// Greedy K-medoids: each step adds the target that most lowers the total cost.
///
/// `d0[x]` is the distance from target `x` to the source pool (`+inf` when
/// there is none). Ties go to the smallest index. `criterion_trace[i]` is the
/// total cost after `i + 1` medoids.
pub fn greedy_kmedoids(targets: &PointSet, d0: &[f64], k: usize, metric: Metric) -> Result<Selection> {
    if targets.is_empty() {
        return Err(Error::EmptySet("greedy K-medoids over no targets"));
    }
    check_d0(targets, d0)?;
    let n = targets.len();
    if k > n {
        return Err(Error::invalid(format!("budget {k} exceeds {n} targets")));
    }
    if k == 0 {
        return Ok(Selection::default());
    }
    let rows = DistanceRows::new(targets, metric, MATRIX_LIMIT);
    let mut cur = d0.to_vec();
    let mut chosen = vec![false; n];
    let mut sel = Selection::default();
    for _ in 0..k {
        let costs = par::map_range(n, |c| {
            if chosen[c] {
                return f64::INFINITY;
            }
            rows.with_row(c, |r| r.iter().zip(&cur).map(|(&d, &u)| d.min(u)).sum::<f64>())
        });
        let (best, cost) = argmin_tied(costs.iter().copied().enumerate().filter(|&(c, _)| !chosen[c]))
            .expect("k <= n leaves a candidate");
        chosen[best] = true;
        rows.with_row(best, |r| {
            for (u, &d) in cur.iter_mut().zip(r) {
                *u = u.min(d);
            }
        });
        sel.indices.push(best);
        sel.criterion_trace.push(cost);
    }
    Ok(sel)
}

/// PAM refinement: per sweep, apply the single medoid/non-medoid swap that
/// lowers the total cost the most; stop when no swap helps or after
/// `max_sweeps` sweeps. The returned trace holds the prefix costs of the
/// final medoid order, so its last entry is the final cost.
pub fn pam_refine(
    targets: &PointSet,
    d0: &[f64],
    selection: &Selection,
    metric: Metric,
    max_sweeps: usize,
) -> Result<Selection> {
    check_d0(targets, d0)?;
    selection.validate(targets.len())?;
    let mut medoids = selection.indices.clone();
    if !medoids.is_empty() {
        let rows = DistanceRows::new(targets, metric, MATRIX_LIMIT);
        let mut cost = kmedoids_cost(targets, d0, &medoids, metric);
        for _ in 0..max_sweeps {
            let Some((slot, cand, new_cost)) = best_swap(targets, d0, &medoids, &rows, metric, cost)
            else {
                break;
            };
            log::trace!("pam swap slot {slot} -> {cand}: {cost} -> {new_cost}");
            medoids[slot] = cand;
            cost = kmedoids_cost(targets, d0, &medoids, metric);
        }
    }
    let trace = prefix_costs(targets, d0, &medoids, metric);
    Ok(Selection::new(medoids, trace))
}

const SOURCE: usize = usize::MAX;

/// Best strictly improving swap as `(slot, candidate, new_cost)`.
fn best_swap(
    targets: &PointSet,
    d0: &[f64],
    medoids: &[usize],
    rows: &DistanceRows<'_>,
    metric: Metric,
    cost: f64,
) -> Option<(usize, usize, f64)> {
    let n = targets.len();
    let k = medoids.len();
    // nearest and second-nearest over {source} ∪ medoids
    let mut near = d0.to_vec();
    let mut near_slot = vec![SOURCE; n];
    let mut second = vec![f64::INFINITY; n];
    for x in 0..n {
        for (j, &m) in medoids.iter().enumerate() {
            let d = metric.distance(targets.row(x), targets.row(m));
            if d < near[x] {
                second[x] = near[x];
                near[x] = d;
                near_slot[x] = j;
            } else if d < second[x] {
                second[x] = d;
            }
        }
    }
    let is_medoid = {
        let mut m = vec![false; n];
        for &i in medoids {
            m[i] = true;
        }
        m
    };
    // for each candidate: delta of swapping it in for every slot
    let deltas = par::map_range(n, |c| {
        if is_medoid[c] {
            return Vec::new();
        }
        rows.with_row(c, |dc| {
            let mut common = 0.0;
            let mut per_slot = vec![0.0; k];
            for x in 0..n {
                let with_c = dc[x].min(near[x]);
                common += with_c - near[x];
                let j = near_slot[x];
                if j != SOURCE {
                    per_slot[j] += dc[x].min(second[x]) - with_c;
                }
            }
            per_slot.iter().map(|s| common + s).collect()
        })
    });
    let tol = tie_tolerance(cost).max(1e-12);
    let mut best: Option<(usize, usize, f64)> = None;
    for (c, per_slot) in deltas.iter().enumerate() {
        for (j, &delta) in per_slot.iter().enumerate() {
            if delta < -tol && best.map_or(true, |(_, _, b)| delta < b - tie_tolerance(b)) {
                best = Some((j, c, delta));
            }
        }
    }
    best.map(|(j, c, delta)| (j, c, cost + delta))
}

/// Tuning for [`bb_medoid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BbParams {
    /// Points per batch; `None` picks `ceil(sqrt(n_c))` for each cluster.
    pub batch_size: Option<usize>,
    /// Upper limit on batch rounds; `0` processes the whole cluster.
    pub max_passes: usize,
    /// Multiplier `w` of the confidence width `w * sigma / sqrt(count)`.
    pub width_factor: f64,
}

impl Default for BbParams {
    fn default() -> Self {
        BbParams {
            batch_size: None,
            max_passes: 0,
            width_factor: 2.0,
        }
    }
}

impl BbParams {
    pub fn with_batch(batch: usize) -> Self {
        BbParams {
            batch_size: Some(batch),
            ..Self::default()
        }
    }

    fn batch_for(&self, n_c: usize) -> Result<usize> {
        match self.batch_size {
            Some(0) => Err(Error::invalid("B&B batch size must be at least 1")),
            Some(b) => Ok(b),
            None => Ok(((n_c as f64).sqrt().ceil() as usize).max(1)),
        }
    }
}

/// Running mean and population variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    #[inline]
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn half_width(&self, w: f64) -> f64 {
        let n = self.count as f64;
        w * (self.m2 / n).max(0.0).sqrt() / n.sqrt()
    }
}

/// Branch-and-bound medoid of `cluster`: `(row index, mean distance)`.
///
/// Rows are shuffled once and consumed in batches. After every batch each
/// surviving candidate's running mean and deviation are updated, the
/// threshold drops to the best candidate's upper confidence bound, and
/// candidates whose lower bound reaches the threshold are discarded. The
/// running best is never discarded. `prev_criterion` seeds the threshold
/// (`+inf` for a cold start).
pub fn bb_medoid(
    cluster: &PointSet,
    prev_criterion: f64,
    params: &BbParams,
    metric: Metric,
    seed: u64,
) -> Result<(usize, f64)> {
    if cluster.is_empty() {
        return Err(Error::EmptySet("B&B medoid of an empty cluster"));
    }
    let members: Vec<usize> = (0..cluster.len()).collect();
    let mut rng = rng::stream(seed, "bb-medoid");
    bb_medoid_members(cluster, &members, prev_criterion, params, metric, &mut rng)
}

/// [`bb_medoid`] over a subset of `points`; returns a position in `members`.
fn bb_medoid_members(
    points: &PointSet,
    members: &[usize],
    prev_criterion: f64,
    params: &BbParams,
    metric: Metric,
    rng: &mut rng::StreamRng,
) -> Result<(usize, f64)> {
    let n_c = members.len();
    let batch = params.batch_for(n_c)?;
    let mut order: Vec<usize> = (0..n_c).collect();
    order.shuffle(rng);

    let mut rounds = n_c.div_ceil(batch);
    if params.max_passes > 0 {
        rounds = rounds.min(params.max_passes);
    }
    let w = params.width_factor;
    let mut threshold = if prev_criterion.is_nan() {
        f64::INFINITY
    } else {
        prev_criterion
    };
    // (position, stats), kept in ascending position order
    let mut alive: Vec<(usize, Running)> = (0..n_c).map(|c| (c, Running::default())).collect();

    for round in 0..rounds {
        let chunk = &order[round * batch..((round + 1) * batch).min(n_c)];
        alive = par::map_slice(&alive, |&(c, mut stats)| {
            let xc = points.row(members[c]);
            for &b in chunk {
                stats.push(metric.distance(xc, points.row(members[b])));
            }
            (c, stats)
        });
        let (best_pos, _) = argmin_tied(alive.iter().enumerate().map(|(k, (_, s))| (k, s.mean)))
            .expect("survivor set is never empty");
        let best = alive[best_pos];
        threshold = threshold.min(best.1.mean + best.1.half_width(w));
        alive = alive
            .into_iter()
            .filter(|&(c, s)| c == best.0 || s.mean - s.half_width(w) < threshold)
            .collect();
    }
    let (k, mean) = argmin_tied(alive.iter().enumerate().map(|(k, (_, s))| (k, s.mean)))
        .expect("survivor set is never empty");
    Ok((alive[k].0, mean))
}

/// Exact medoid by full scan: `(row index, mean distance)`, smallest index on ties.
pub fn exact_medoid(cluster: &PointSet, metric: Metric) -> Result<(usize, f64)> {
    if cluster.is_empty() {
        return Err(Error::EmptySet("medoid of an empty cluster"));
    }
    let n = cluster.len() as f64;
    let means = par::map_range(cluster.len(), |c| {
        let xc = cluster.row(c);
        cluster.rows().map(|r| metric.distance(xc, r)).sum::<f64>() / n
    });
    Ok(argmin_tied(means.into_iter().enumerate()).expect("non-empty"))
}

/// Assignment of targets to the source pool (label 0) or to medoid `j` (label `j + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub medoid_indices: Vec<usize>,
    /// `0` = closest to a source point, `j + 1` = closest to medoid `j`.
    pub assignment: Vec<usize>,
    pub d0: Vec<f64>,
    /// Mean distance from each medoid to its cluster (0 for an empty cluster).
    pub per_cluster_criterion: Vec<f64>,
}

impl ClusterState {
    /// Assigns every target to its closest of {source, medoids}; ties go to
    /// the lower label, so the source wins over any medoid.
    pub fn assign(targets: &PointSet, d0: &[f64], medoids: &[usize], metric: Metric) -> Result<Self> {
        check_d0(targets, d0)?;
        Selection::new(medoids.to_vec(), Vec::new()).validate(targets.len())?;
        let dist = medoid_columns(targets, medoids, metric);
        Ok(Self::from_columns(d0, medoids, &dist))
    }

    fn from_columns(d0: &[f64], medoids: &[usize], dist: &[f64]) -> Self {
        let k = medoids.len();
        let mut assignment = vec![0; d0.len()];
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (x, a) in assignment.iter_mut().enumerate() {
            let row = &dist[x * k..(x + 1) * k];
            let mut best = d0[x];
            for (j, &d) in row.iter().enumerate() {
                if d < best {
                    best = d;
                    *a = j + 1;
                }
            }
            if *a > 0 {
                sums[*a - 1] += best;
                counts[*a - 1] += 1;
            }
        }
        let per_cluster_criterion = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect();
        ClusterState {
            medoid_indices: medoids.to_vec(),
            assignment,
            d0: d0.to_vec(),
            per_cluster_criterion,
        }
    }

    /// Total cost of this assignment.
    pub fn cost(&self, targets: &PointSet, metric: Metric) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(x, &a)| match a {
                0 => self.d0[x],
                j => metric.distance(targets.row(x), targets.row(self.medoid_indices[j - 1])),
            })
            .sum()
    }
}

/// Row-major `n x K` matrix of target-to-medoid distances.
fn medoid_columns(targets: &PointSet, medoids: &[usize], metric: Metric) -> Vec<f64> {
    par::map_range(targets.len(), |x| {
        let xr = targets.row(x);
        medoids
            .iter()
            .map(|&m| metric.distance(xr, targets.row(m)))
            .collect::<Vec<f64>>()
    })
    .concat()
}

/// Settings for [`large_kmedoids`].
#[derive(Debug, Clone, PartialEq)]
pub struct LargeParams {
    /// Size of the random target sample the greedy initialization runs on.
    pub init_batch: usize,
    /// Trees in the nearest-source forest.
    pub trees: usize,
    /// Forest leaf capacity; `None` uses `ceil(log2 m)`.
    pub leaf_cap: Option<usize>,
    /// Source pools up to this size are scanned exactly instead of through the forest.
    pub exact_nn_limit: usize,
    pub bb: BbParams,
    pub max_iters: usize,
}

impl Default for LargeParams {
    fn default() -> Self {
        LargeParams {
            init_batch: 5000,
            trees: forest::DEFAULT_TREES,
            leaf_cap: None,
            exact_nn_limit: 4096,
            bb: BbParams::default(),
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeOutcome {
    /// Final medoids; the trace holds prefix costs of the final medoid order.
    pub selection: Selection,
    /// Total cost after initialization and after every update sweep.
    pub iteration_costs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub state: ClusterState,
}

/// Nearest-source distance for every target: exact for small source pools,
/// forest-approximated otherwise, `+inf` with no source.
pub fn source_distances(
    source: &PointSet,
    targets: &PointSet,
    params: &LargeParams,
    metric: Metric,
    seed: u64,
) -> Result<Vec<f64>> {
    if source.is_empty() {
        return Ok(vec![f64::INFINITY; targets.len()]);
    }
    source.check_dim(targets.dim())?;
    if source.len() <= params.exact_nn_limit {
        return exact_nn_distances(source, targets, metric);
    }
    let leaf_cap = params
        .leaf_cap
        .unwrap_or_else(|| forest::default_leaf_cap(source.len()));
    let forest = KdtForest::build(source, params.trees, leaf_cap, seed)?;
    forest.all_nn_distances(targets, metric)
}

/// K-medoids for large pools.
///
/// 1. nearest-source distances (forest or exact scan),
/// 2. greedy K-medoids on a seeded sample of `init_batch` targets,
/// 3. assignment of every target to {source, medoids},
/// 4. per-cluster B&B medoid update, repeated with re-assignment until no
///    medoid moves or `max_iters` sweeps ran.
///
/// A B&B proposal replaces a medoid only when its exact mean distance to the
/// cluster is strictly lower, so the total cost never increases. An empty
/// cluster keeps its medoid.
pub fn large_kmedoids(
    source: &PointSet,
    targets: &PointSet,
    k: usize,
    params: &LargeParams,
    metric: Metric,
    seed: u64,
) -> Result<LargeOutcome> {
    let n = targets.len();
    if k > n {
        return Err(Error::invalid(format!("budget {k} exceeds {n} targets")));
    }
    let init_batch = params.init_batch.min(n);
    if init_batch < k {
        return Err(Error::invalid(format!(
            "initial batch {} is smaller than the budget {k}",
            params.init_batch
        )));
    }
    let d0 = source_distances(source, targets, params, metric, seed)?;
    if k == 0 {
        let state = ClusterState::from_columns(&d0, &[], &[]);
        let cost = d0.iter().sum();
        return Ok(LargeOutcome {
            selection: Selection::default(),
            iteration_costs: vec![cost],
            iterations: 0,
            converged: true,
            state,
        });
    }

    // 2. greedy on a sorted sample, so ties still favor small target indices
    let sample: Vec<usize> = if init_batch == n {
        (0..n).collect()
    } else {
        let mut rng = rng::stream(seed, "kmedoids-init");
        let mut s = rand::seq::index::sample(&mut rng, n, init_batch).into_vec();
        s.sort_unstable();
        s
    };
    let sub = targets.select_rows(&sample);
    let sub_d0: Vec<f64> = sample.iter().map(|&i| d0[i]).collect();
    let init = greedy_kmedoids(&sub, &sub_d0, k, metric)?;
    let mut medoids: Vec<usize> = init.indices.iter().map(|&i| sample[i]).collect();

    // 3. assignment
    let mut dist = medoid_columns(targets, &medoids, metric);
    let mut state = ClusterState::from_columns(&d0, &medoids, &dist);
    let mut iteration_costs = vec![assigned_cost(&state, &dist, k)];
    let mut iterations = 0;
    let mut converged = false;

    // 4. update / re-assign
    while iterations < params.max_iters {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (x, &a) in state.assignment.iter().enumerate() {
            if a > 0 {
                members[a - 1].push(x);
            }
        }
        let slots: Vec<usize> = (0..k).collect();
        let proposals = par::map_slice(&slots, |&j| -> Result<Option<usize>> {
            let cluster = &members[j];
            if cluster.is_empty() {
                return Ok(None);
            }
            let prev = cluster.iter().map(|&x| dist[x * k + j]).sum::<f64>() / cluster.len() as f64;
            let mut rng = rng::substream(seed, "kmedoids-bb", (iterations * k + j) as u64);
            let (pos, _) = bb_medoid_members(targets, cluster, prev, &params.bb, metric, &mut rng)?;
            let cand = cluster[pos];
            if cand == medoids[j] {
                return Ok(None);
            }
            let cr = targets.row(cand);
            let exact = cluster
                .iter()
                .map(|&x| metric.distance(targets.row(x), cr))
                .sum::<f64>()
                / cluster.len() as f64;
            Ok((exact < prev - tie_tolerance(prev)).then_some(cand))
        });
        let mut changed = Vec::new();
        for (j, p) in proposals.into_iter().enumerate() {
            if let Some(cand) = p? {
                if !medoids.contains(&cand) {
                    medoids[j] = cand;
                    changed.push(j);
                }
            }
        }
        if changed.is_empty() {
            converged = true;
            break;
        }
        iterations += 1;
        let updates = par::map_range(n, |x| {
            let xr = targets.row(x);
            changed
                .iter()
                .map(|&j| metric.distance(xr, targets.row(medoids[j])))
                .collect::<Vec<f64>>()
        });
        for (x, vals) in updates.into_iter().enumerate() {
            for (&j, v) in changed.iter().zip(vals) {
                dist[x * k + j] = v;
            }
        }
        state = ClusterState::from_columns(&d0, &medoids, &dist);
        iteration_costs.push(assigned_cost(&state, &dist, k));
        log::debug!(
            "large k-medoids sweep {iterations}: {} medoids moved, cost {}",
            changed.len(),
            iteration_costs.last().copied().unwrap_or_default()
        );
    }

    // prefix costs of the final medoid order
    let mut cur = d0.clone();
    let trace = (0..k)
        .map(|j| {
            for (x, c) in cur.iter_mut().enumerate() {
                *c = c.min(dist[x * k + j]);
            }
            cur.iter().sum()
        })
        .collect();
    Ok(LargeOutcome {
        selection: Selection::new(medoids, trace),
        iteration_costs,
        iterations,
        converged,
        state,
    })
}

fn assigned_cost(state: &ClusterState, dist: &[f64], k: usize) -> f64 {
    state
        .assignment
        .iter()
        .enumerate()
        .map(|(x, &a)| if a == 0 { state.d0[x] } else { dist[x * k + a - 1] })
        .sum()
}
