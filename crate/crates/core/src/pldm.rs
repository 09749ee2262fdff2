//! Pseudo-label discrepancy minimization.
//!
//! With a Lipschitz constant `k` and (pseudo-)labels `f` on a labeled set `L`,
//! every `k`-Lipschitz function consistent with `f` lies between
//!
//! ```text
//! upper(x) = min_{x' in L} f(x') + k d(x, x')
//! lower(x) = max_{x' in L} f(x') - k d(x, x')
//! ```
//!
//! The selection greedily queries the target that most shrinks the mean loss
//! between the two envelopes over the target pool.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medoids::DistanceRows;
use crate::par::{self, argmin_tied};
use crate::points::{LabeledPool, Metric, PointSet, Selection};
use crate::rng;

pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;
pub const DEFAULT_KNN: usize = 5;
/// Target pools above this size still run exactly but log a warning.
pub const SOFT_TARGET_CAP: usize = 20_000;
const PLDM_MATRIX_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    L2,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
        })
    }
}

/// Loss on labels. `mu` (Lipschitz constant) and `nu` (separation) only feed
/// the bound calculators; evaluation depends on `kind` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub kind: LossKind,
    pub mu: f64,
    pub nu: f64,
}

impl Loss {
    pub fn l1() -> Self {
        Loss {
            kind: LossKind::L1,
            mu: 1.0,
            nu: 1.0,
        }
    }

    pub fn l2() -> Self {
        Loss {
            kind: LossKind::L2,
            mu: 1.0,
            nu: 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, y: f64, y2: f64) -> f64 {
        loss_eval(y, y2, self.kind)
    }
}

#[inline]
pub fn loss_eval(y: f64, y2: f64, kind: LossKind) -> f64 {
    let d = y - y2;
    match kind {
        LossKind::L1 => d.abs(),
        LossKind::L2 => d * d,
    }
}

/// Per-target envelope values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub k: f64,
}

impl Envelopes {
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l)
    }

    /// Mean of `loss(upper, lower)` over the targets.
    pub fn mean_loss(&self, loss: &Loss) -> f64 {
        if self.upper.is_empty() {
            return 0.0;
        }
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(&u, &l)| loss.eval(u, l))
            .sum::<f64>()
            / self.upper.len() as f64
    }
}

/// Mean label of the `k_neighbors` nearest training rows (ties: smaller
/// distance, then smaller index).
pub fn knn_predict(train: &LabeledPool, x: &[f64], k_neighbors: usize, metric: Metric) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptySet("k-NN over an empty training pool"));
    }
    if k_neighbors == 0 || k_neighbors > train.len() {
        return Err(Error::invalid(format!(
            "k-NN needs 1 <= k <= {}, got {k_neighbors}",
            train.len()
        )));
    }
    train.points.check_dim(x.len())?;
    let nn = nearest_k(&train.points, x, k_neighbors, metric);
    Ok(nn.iter().map(|&(_, i)| train.labels[i]).sum::<f64>() / k_neighbors as f64)
}

/// The `k` nearest rows as `(distance, index)` sorted by distance then index.
pub(crate) fn nearest_k(points: &PointSet, x: &[f64], k: usize, metric: Metric) -> Vec<(f64, usize)> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, r) in points.rows().enumerate() {
        let d = metric.distance(x, r);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    best
}

/// k-NN predictions for every row of `queries`.
pub fn knn_predict_all(
    train: &LabeledPool,
    queries: &PointSet,
    k_neighbors: usize,
    metric: Metric,
) -> Result<Vec<f64>> {
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    knn_predict(train, queries.row(0), k_neighbors, metric)?;
    Ok(par::map_range(queries.len(), |i| {
        let nn = nearest_k(&train.points, queries.row(i), k_neighbors, metric);
        nn.iter().map(|&(_, j)| train.labels[j]).sum::<f64>() / k_neighbors as f64
    }))
}

/// Largest slope `|f(x) - f(x')| / d(x, x')` over all pairs, or over
/// `pair_budget` seeded random pairs when there are more pairs than that.
/// Coincident points with equal values are skipped.
pub fn estimate_lipschitz(
    points: &PointSet,
    values: &[f64],
    metric: Metric,
    pair_budget: usize,
    seed: u64,
) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("Lipschitz estimate needs at least 2 points"));
    }
    if values.len() != n {
        return Err(Error::invalid(format!("{} values for {n} points", values.len())));
    }
    let slope = |i: usize, j: usize| -> Result<f64> {
        let d = metric.distance(points.row(i), points.row(j));
        let dv = (values[i] - values[j]).abs();
        if d == 0.0 {
            if dv == 0.0 {
                return Ok(0.0);
            }
            return Err(Error::InconsistentDuplicates {
                first: i.min(j),
                second: i.max(j),
            });
        }
        Ok(dv / d)
    };
    let total_pairs = (n as u128) * (n as u128 - 1) / 2;
    if total_pairs <= pair_budget as u128 {
        let per_row = par::map_range(n, |i| -> Result<f64> {
            let mut m: f64 = 0.0;
            for j in i + 1..n {
                m = m.max(slope(i, j)?);
            }
            Ok(m)
        });
        per_row.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
    } else {
        let mut rng = rng::stream(seed, "lipschitz-pairs");
        let mut m: f64 = 0.0;
        for _ in 0..pair_budget {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            m = m.max(slope(i, j)?);
        }
        Ok(m)
    }
}

/// Upper and lower Lipschitz envelopes of `labeled` evaluated at every target.
pub fn compute_envelopes(
    targets: &PointSet,
    labeled: &LabeledPool,
    k: f64,
    metric: Metric,
) -> Result<Envelopes> {
    if labeled.is_empty() {
        return Err(Error::EmptySet("envelopes of an empty labeled pool"));
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("Lipschitz constant must be finite and >= 0, got {k}")));
    }
    labeled.points.check_dim(targets.dim())?;
    let pairs = par::map_range(targets.len(), |i| {
        let x = targets.row(i);
        let mut up = f64::INFINITY;
        let mut lo = f64::NEG_INFINITY;
        for (r, &y) in labeled.points.rows().zip(&labeled.labels) {
            let kd = k * metric.distance(x, r);
            up = up.min(y + kd);
            lo = lo.max(y - kd);
        }
        (up, lo)
    });
    let (upper, lower) = pairs.into_iter().unzip();
    Ok(Envelopes { upper, lower, k })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PldmOutcome {
    /// Trace entry `i` is the mean envelope loss after query `i`.
    pub selection: Selection,
    /// Envelopes against the source pool plus all queries.
    pub envelopes: Envelopes,
    pub k: f64,
    /// Empirical Lipschitz constant of the pseudo-labels.
    pub k_empirical: f64,
    /// `k` was supplied below the empirical constant; envelopes may cross.
    pub k_below_empirical: bool,
}

/// Greedy pseudo-label discrepancy minimization.
///
/// `source` carries pseudo-labels of the source points; `target_pseudo` the
/// pseudo-labels of the targets. When `k` is `None` the empirical Lipschitz
/// constant of all pseudo-labels is used. At each step the candidate `x'`
/// minimizing `sum_x delta(x, x')` is queried, where `delta` is the smallest
/// loss among the four pairings of the current envelope values at `x` with
/// the single-point envelopes `f(x') ± k d(x, x')`.
#[allow(clippy::too_many_arguments)]
pub fn pldm_select(
    source: &LabeledPool,
    targets: &PointSet,
    target_pseudo: &[f64],
    budget: usize,
    loss: &Loss,
    k: Option<f64>,
    metric: Metric,
    pair_budget: usize,
    seed: u64,
) -> Result<PldmOutcome> {
    let n = targets.len();
    if source.is_empty() {
        return Err(Error::EmptySet("PLDM needs a labeled source pool"));
    }
    if target_pseudo.len() != n {
        return Err(Error::invalid(format!(
            "{} pseudo-labels for {n} targets",
            target_pseudo.len()
        )));
    }
    if budget > n {
        return Err(Error::invalid(format!("budget {budget} exceeds {n} targets")));
    }
    if n > SOFT_TARGET_CAP {
        log::warn!("PLDM over {n} targets costs O(n^2) per query");
    }
    let all = source.points.concat(targets)?;
    let mut all_values = source.labels.clone();
    all_values.extend_from_slice(target_pseudo);
    let k_empirical = estimate_lipschitz(&all, &all_values, metric, pair_budget, seed)?;
    let k = match k {
        Some(k) => k,
        None => k_empirical,
    };
    let k_below_empirical = k < k_empirical;
    if k_below_empirical {
        log::warn!("Lipschitz constant {k} is below the empirical {k_empirical}; envelopes may cross");
    }

    let mut env = compute_envelopes(targets, source, k, metric)?;
    let rows = DistanceRows::new(targets, metric, PLDM_MATRIX_LIMIT);
    let mut chosen = vec![false; n];
    let mut sel = Selection::default();
    for _ in 0..budget {
        let scores = par::map_range(n, |c| {
            if chosen[c] {
                return f64::INFINITY;
            }
            let fc = target_pseudo[c];
            rows.with_row(c, |dc| {
                let mut s = 0.0;
                for x in 0..n {
                    let (u, l) = (env.upper[x], env.lower[x]);
                    let kd = k * dc[x];
                    let (u2, l2) = (fc + kd, fc - kd);
                    s += loss
                        .eval(u, l)
                        .min(loss.eval(u, l2))
                        .min(loss.eval(u2, l))
                        .min(loss.eval(u2, l2));
                }
                s
            })
        });
        let (best, _) = argmin_tied(scores.into_iter().enumerate().filter(|&(c, _)| !chosen[c]))
            .expect("budget <= n leaves a candidate");
        chosen[best] = true;
        let fb = target_pseudo[best];
        rows.with_row(best, |db| {
            for x in 0..n {
                let kd = k * db[x];
                env.upper[x] = env.upper[x].min(fb + kd);
                env.lower[x] = env.lower[x].max(fb - kd);
            }
        });
        sel.indices.push(best);
        sel.criterion_trace.push(env.mean_loss(loss));
    }
    Ok(PldmOutcome {
        selection: sel,
        envelopes: env,
        k,
        k_empirical,
        k_below_empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(xs: &[f64], ys: &[f64]) -> LabeledPool {
        LabeledPool::new(PointSet::from_scalars(xs).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_eval(3.0, 1.0, LossKind::L1), 2.0);
        assert_eq!(loss_eval(3.0, 1.0, LossKind::L2), 4.0);
        assert_eq!(loss_eval(-2.5, -2.5, LossKind::L1), 0.0);
        assert_eq!(loss_eval(-2.5, -2.5, LossKind::L2), 0.0);
        assert_eq!(loss_eval(1.0, 3.0, LossKind::L2), loss_eval(3.0, 1.0, LossKind::L2));
    }

    #[test]
    fn knn_examples() {
        let t = pool(&[0.0, 10.0], &[0.0, 1.0]);
        assert_eq!(knn_predict(&t, &[2.0], 1, Metric::L1).unwrap(), 0.0);
        assert_eq!(knn_predict(&t, &[2.0], 2, Metric::L1).unwrap(), 0.5);
        assert_eq!(knn_predict(&t, &[10.0], 1, Metric::L1).unwrap(), 1.0);
        // equidistant: smaller index wins
        assert_eq!(knn_predict(&t, &[5.0], 1, Metric::L1).unwrap(), 0.0);
        assert!(knn_predict(&t, &[5.0], 3, Metric::L1).is_err());
        let empty = LabeledPool::new(PointSet::empty(1).unwrap(), vec![]).unwrap();
        assert!(knn_predict(&empty, &[5.0], 1, Metric::L1).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let p = PointSet::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(estimate_lipschitz(&p, &[0.0, 2.0, 3.0], Metric::L1, 100, 0).unwrap(), 2.0);
        assert_eq!(estimate_lipschitz(&p, &[4.0, 4.0, 4.0], Metric::L1, 100, 0).unwrap(), 0.0);
        let dup = PointSet::from_scalars(&[0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            estimate_lipschitz(&dup, &[0.0, 1.0, 2.0], Metric::L1, 100, 0),
            Err(Error::InconsistentDuplicates { first: 0, second: 2 })
        ));
        // equal duplicates are fine
        assert_eq!(estimate_lipschitz(&dup, &[0.0, 1.0, 0.0], Metric::L1, 100, 0).unwrap(), 1.0);
    }

    #[test]
    fn lipschitz_sampled_is_lower_bound() {
        let mut r = rng::stream(1, "lip-test");
        let pts = PointSet::new((0..200).map(|_| r.gen::<f64>()).collect(), 2).unwrap();
        let vals: Vec<f64> = (0..100).map(|_| r.gen::<f64>()).collect();
        let exact = estimate_lipschitz(&pts, &vals, Metric::L2, usize::MAX, 0).unwrap();
        let sampled = estimate_lipschitz(&pts, &vals, Metric::L2, 500, 3).unwrap();
        assert!(sampled <= exact && sampled > 0.0);
        let again = estimate_lipschitz(&pts, &vals, Metric::L2, 500, 3).unwrap();
        assert_eq!(sampled, again);
    }

    #[test]
    fn lipschitz_is_permutation_invariant() {
        let mut r = rng::stream(2, "lip-test");
        let xs: Vec<f64> = (0..30).map(|_| r.gen::<f64>() * 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin()).collect();
        let a = estimate_lipschitz(&PointSet::from_scalars(&xs).unwrap(), &ys, Metric::L1, usize::MAX, 0).unwrap();
        let xr: Vec<f64> = xs.iter().rev().copied().collect();
        let yr: Vec<f64> = ys.iter().rev().copied().collect();
        let b = estimate_lipschitz(&PointSet::from_scalars(&xr).unwrap(), &yr, Metric::L1, usize::MAX, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn envelope_examples() {
        let l = pool(&[0.0, 4.0], &[0.0, 2.0]);
        let t = PointSet::from_scalars(&[1.0, 0.0]).unwrap();
        let e = compute_envelopes(&t, &l, 1.0, Metric::L1).unwrap();
        assert_eq!(e.upper, vec![1.0, 0.0]);
        assert_eq!(e.lower, vec![-1.0, 0.0]);
        assert_eq!(e.gaps().next().unwrap(), 2.0);

        let e0 = compute_envelopes(&t, &l, 0.0, Metric::L1).unwrap();
        assert_eq!((e0.upper[0], e0.lower[0]), (0.0, 2.0));
        let single = pool(&[0.0], &[3.0]);
        let e1 = compute_envelopes(&t, &single, 0.0, Metric::L1).unwrap();
        assert_eq!(e1.gaps().collect::<Vec<_>>(), vec![0.0, 0.0]);

        let empty = LabeledPool::new(PointSet::empty(1).unwrap(), vec![]).unwrap();
        assert!(compute_envelopes(&t, &empty, 1.0, Metric::L1).is_err());
        assert!(compute_envelopes(&t, &l, -1.0, Metric::L1).is_err());
    }

    #[test]
    fn pldm_two_targets() {
        let src = pool(&[0.0], &[0.0]);
        let t = PointSet::from_scalars(&[1.0, 2.0]).unwrap();
        let out = pldm_select(&src, &t, &[1.0, 2.0], 1, &Loss::l1(), Some(1.0), Metric::L1, 100, 0).unwrap();
        assert_eq!(out.selection.indices, vec![1]);
        assert_eq!(out.selection.criterion_trace, vec![0.0]);
        assert!(!out.k_below_empirical);

        let none = pldm_select(&src, &t, &[1.0, 2.0], 0, &Loss::l1(), Some(1.0), Metric::L1, 100, 0).unwrap();
        assert!(none.selection.is_empty());
    }

    #[test]
    fn pldm_flags_small_k() {
        let src = pool(&[0.0], &[0.0]);
        let t = PointSet::from_scalars(&[1.0, 2.0]).unwrap();
        let out = pldm_select(&src, &t, &[3.0, 2.0], 1, &Loss::l1(), Some(1.0), Metric::L1, 100, 0).unwrap();
        assert!(out.k_below_empirical);
        assert_eq!(out.k_empirical, 3.0);
        let auto = pldm_select(&src, &t, &[3.0, 2.0], 1, &Loss::l1(), None, Metric::L1, 100, 0).unwrap();
        assert_eq!(auto.k, 3.0);
    }
}
