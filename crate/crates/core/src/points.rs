//! Point sets, metrics and the exact distance primitives every strategy shares.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance on the feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    L2,
    Linf,
}

impl Metric {
    /// Distance between two rows of equal length. Length is only checked in
    /// debug builds; use [`pairwise_distance`] at API boundaries.
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::L1 => lane_sum(a, b, f64::INFINITY, |d| d.abs()).unwrap_or(f64::INFINITY),
            Metric::L2 => lane_sum(a, b, f64::INFINITY, |d| d * d)
                .unwrap_or(f64::INFINITY)
                .sqrt(),
            Metric::Linf => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }

    /// `distance(a, b)`, or `+inf` once the scan proves it exceeds `bound`.
    /// Distances equal to `bound` are always returned exactly.
    #[inline]
    pub(crate) fn distance_below(self, a: &[f64], b: &[f64], bound: f64) -> f64 {
        // padded so that rounding can never drop a row at or below the bound
        const PAD: f64 = 1.0 + 1e-12;
        match self {
            Metric::L1 => lane_sum(a, b, bound * PAD, |d| d.abs()).unwrap_or(f64::INFINITY),
            Metric::L2 => lane_sum(a, b, bound * bound * PAD, |d| d * d).map_or(f64::INFINITY, f64::sqrt),
            Metric::Linf => self.distance(a, b),
        }
    }

    /// Norm dual to this metric's norm, so that `|w.x - w.y| <= dual_norm(w) * d(x, y)`.
    pub fn dual_norm(self, w: &[f64]) -> f64 {
        match self {
            Metric::L1 => w.iter().fold(0.0, |m, v| m.max(v.abs())),
            Metric::L2 => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Metric::Linf => w.iter().map(|v| v.abs()).sum(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Linf => "linf",
        }
    }
}

/// Sum of `term(a_i - b_i)` over four interleaved accumulators, so the loop
/// vectorizes. Terms must be non-negative; `None` once the running total
/// exceeds `stop`. Completed sums do not depend on `stop`.
#[inline(always)]
fn lane_sum(a: &[f64], b: &[f64], stop: f64, term: impl Fn(f64) -> f64) -> Option<f64> {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    let mut blocks = 0usize;
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += term(x[l] - y[l]);
        }
        blocks += 1;
        if blocks % 4 == 0 {
            let partial = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            if partial > stop {
                return None;
            }
        }
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        total += term(x - y);
    }
    Some(total)
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            "linf" => Ok(Metric::Linf),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// Dense row-major matrix of finite points, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl PointSet {
    /// Builds a point set from row-major `data` with `p` columns.
    pub fn new(data: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if data.len() % p != 0 {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of width {p}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / p,
                col: pos % p,
            });
        }
        let n = data.len() / p;
        Ok(PointSet { data, n, p })
    }

    pub fn empty(p: usize) -> Result<Self> {
        Self::new(Vec::new(), p)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("cannot infer dimension from zero rows"));
        };
        let p = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(data, p)
    }

    /// One-dimensional point set, handy for tests and demos.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New point set holding the listed rows, in the listed order.
    pub fn select_rows(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PointSet {
            data,
            n: indices.len(),
            p: self.p,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        self.check_dim(other.p)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(PointSet {
            data,
            n: self.n + other.n,
            p: self.p,
        })
    }

    /// Copy without column `col`.
    pub fn drop_column(&self, col: usize) -> Result<PointSet> {
        if col >= self.p {
            return Err(Error::invalid(format!(
                "column {col} out of range for dimension {}",
                self.p
            )));
        }
        if self.p == 1 {
            return Err(Error::invalid("cannot drop the only column"));
        }
        let mut data = Vec::with_capacity(self.n * (self.p - 1));
        for r in self.rows() {
            data.extend_from_slice(&r[..col]);
            data.extend_from_slice(&r[col + 1..]);
        }
        Ok(PointSet {
            data,
            n: self.n,
            p: self.p - 1,
        })
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub(crate) fn check_dim(&self, p: usize) -> Result<()> {
        if p != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: p,
            });
        }
        Ok(())
    }
}

/// Points with one real label each (true labels or pseudo-labels).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    pub points: PointSet,
    pub labels: Vec<f64>,
}

impl LabeledPool {
    pub fn new(points: PointSet, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        if let Some(row) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col: 0 });
        }
        Ok(LabeledPool { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledPool {
        LabeledPool {
            points: self.points.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(&self, other: &LabeledPool) -> Result<LabeledPool> {
        let points = self.points.concat(&other.points)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(LabeledPool { points, labels })
    }
}

/// Ordered target indices chosen by a strategy.
///
/// `criterion_trace[i]` is the strategy's own criterion after the `i+1`-th
/// query; strategies without a per-step criterion leave the trace empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub criterion_trace: Vec<f64>,
}

impl Selection {
    pub fn new(indices: Vec<usize>, criterion_trace: Vec<f64>) -> Self {
        Selection {
            indices,
            criterion_trace,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks distinctness, range and trace length against a target set of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in &self.indices {
            if i >= n {
                return Err(Error::invalid(format!(
                    "selected index {i} out of range for {n} targets"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("index {i} selected twice")));
            }
        }
        if !self.criterion_trace.is_empty() && self.criterion_trace.len() != self.indices.len() {
            return Err(Error::invalid(format!(
                "criterion trace has {} entries for {} queries",
                self.criterion_trace.len(),
                self.indices.len()
            )));
        }
        Ok(())
    }

    /// Membership mask over `n` targets.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }
}

/// Checked distance between two points.
pub fn pairwise_distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("points must have at least one coordinate"));
    }
    Ok(metric.distance(a, b))
}

/// Distance from `x` to the closest row of `set`, with the smallest row index
/// among the minimizers.
pub fn dist_to_set(x: &[f64], set: &PointSet, metric: Metric) -> Result<(f64, usize)> {
    if set.is_empty() {
        return Err(Error::EmptySet("distance to an empty point set"));
    }
    set.check_dim(x.len())?;
    Ok(nearest_row(x, set, metric))
}

/// Unchecked core of [`dist_to_set`]; `set` must be non-empty.
#[inline]
pub(crate) fn nearest_row(x: &[f64], set: &PointSet, metric: Metric) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, r) in set.rows().enumerate() {
        let d = metric.distance_below(x, r, best.0);
        if d < best.0 {
            best = (d, i);
        }
    }
    best
}

/// Distance from every row of `queries` to its nearest row of `set`
/// (`+inf` when `set` is empty).
pub fn exact_nn_distances(set: &PointSet, queries: &PointSet, metric: Metric) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Ok(vec![f64::INFINITY; queries.len()]);
    }
    set.check_dim(queries.dim())?;
    Ok(crate::par::map_range(queries.len(), |i| {
        nearest_row(queries.row(i), set, metric).0
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(pairwise_distance(&[1.0, 2.0], &[4.0, 6.0], Metric::L1).unwrap(), 7.0);
        assert_eq!(pairwise_distance(&[0.0, 0.0], &[0.0, 0.0], Metric::L2).unwrap(), 0.0);
        assert_eq!(pairwise_distance(&[1.0, 2.0], &[4.0, 6.0], Metric::Linf).unwrap(), 4.0);
        assert_eq!(pairwise_distance(&[1.0, 2.0], &[4.0, 6.0], Metric::L2).unwrap(), 5.0);
    }

    #[test]
    fn distance_dimension_mismatch() {
        assert!(matches!(
            pairwise_distance(&[1.0], &[1.0, 2.0], Metric::L1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dist_to_set_examples() {
        let s = PointSet::from_scalars(&[1.0, 3.0]).unwrap();
        assert_eq!(dist_to_set(&[0.0], &s, Metric::L1).unwrap(), (1.0, 0));
        let s = PointSet::from_scalars(&[5.0, 2.0, 7.0, 7.0]).unwrap();
        assert_eq!(dist_to_set(&[7.0], &s, Metric::L2).unwrap(), (0.0, 2));
        // equidistant rows resolve to the smaller index
        assert_eq!(dist_to_set(&[3.5], &s, Metric::L1).unwrap(), (1.5, 0));
        let e = PointSet::empty(1).unwrap();
        assert!(matches!(dist_to_set(&[0.0], &e, Metric::L1), Err(Error::EmptySet(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let err = PointSet::new(vec![1.0, f64::NAN, 2.0, 3.0], 2).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        assert!(PointSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(PointSet::new(vec![], 0).is_err());
    }

    #[test]
    fn selection_validation() {
        assert!(Selection::new(vec![0, 2], vec![1.0, 0.5]).validate(3).is_ok());
        assert!(Selection::new(vec![0, 0], vec![]).validate(3).is_err());
        assert!(Selection::new(vec![3], vec![]).validate(3).is_err());
        assert!(Selection::new(vec![1], vec![1.0, 2.0]).validate(3).is_err());
    }

    #[test]
    fn drop_column_and_concat() {
        let a = PointSet::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = a.drop_column(1).unwrap();
        assert_eq!(b.as_slice(), &[1.0, 3.0, 4.0, 6.0]);
        let c = b.concat(&b).unwrap();
        assert_eq!(c.len(), 4);
        assert!(a.concat(&b).is_err());
    }

    fn triple(p: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        let v = || prop::collection::vec(-100.0f64..100.0, p);
        (v(), v(), v())
    }

    proptest! {
        #[test]
        fn metric_axioms((a, b, c) in (1usize..6).prop_flat_map(triple)) {
            for m in [Metric::L1, Metric::L2, Metric::Linf] {
                let ab = m.distance(&a, &b);
                let ba = m.distance(&b, &a);
                let ac = m.distance(&a, &c);
                let bc = m.distance(&b, &c);
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab, ba);
                prop_assert!(ac <= ab + bc + 1e-9 * (1.0 + ab + bc));
                prop_assert_eq!(m.distance(&a, &a), 0.0);
            }
        }

        #[test]
        fn dist_to_set_matches_loop(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 5), 1..20),
            x in prop::collection::vec(-10.0f64..10.0, 5),
        ) {
            let set = PointSet::from_rows(&rows).unwrap();
            for m in [Metric::L1, Metric::L2, Metric::Linf] {
                let (d, i) = dist_to_set(&x, &set, m).unwrap();
                let mut best = (f64::INFINITY, usize::MAX);
                for (j, r) in rows.iter().enumerate() {
                    let dj = pairwise_distance(&x, r, m).unwrap();
                    if dj < best.0 { best = (dj, j); }
                }
                prop_assert_eq!((d, i), best);
            }
        }

        #[test]
        fn early_exit_is_exact_up_to_the_bound(
            a in prop::collection::vec(-3.0f64..3.0, 37),
            b in prop::collection::vec(-3.0f64..3.0, 37),
            frac in 0.0f64..1.5,
        ) {
            for m in [Metric::L1, Metric::L2, Metric::Linf] {
                let d = m.distance(&a, &b);
                prop_assert_eq!(m.distance_below(&a, &b, d), d);
                let bound = d * frac;
                let e = m.distance_below(&a, &b, bound);
                prop_assert!(e == d || (e == f64::INFINITY && d > bound));
                let naive: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                if m == Metric::L2 {
                    prop_assert!((naive - d).abs() <= 1e-12 * naive.max(1.0));
                }
            }
        }
    }
}
