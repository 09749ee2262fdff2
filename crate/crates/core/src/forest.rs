//! Randomized KD-tree forest for approximate nearest-source distances.
//!
//! Each tree splits a node at the median of a feature drawn uniformly at
//! random until leaves hold at most `leaf_cap` points. A query descends every
//! tree to a single leaf, scans it exhaustively, and keeps the best candidate
//! over all trees. There is no backtracking, so the answer is an upper bound
//! on the exact nearest distance; more trees tighten it.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::points::{Metric, PointSet};
use crate::rng::{self, StreamRng};

pub const DEFAULT_TREES: usize = 50;

/// `max(1, ceil(log2 m))`.
pub fn default_leaf_cap(m: usize) -> usize {
    if m <= 2 {
        1
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    /// Range into [`KdTree::items`].
    Leaf { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    nodes: Vec<Node>,
    items: Vec<usize>,
}

impl KdTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Point indices held by every leaf, in node order.
    pub fn leaves(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { start, end } => Some(&self.items[start..end]),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(t: &KdTree, id: usize) -> usize {
            match t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    fn leaf_for(&self, x: &[f64]) -> &[usize] {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => id = if x[feature] < value { left } else { right },
                Node::Leaf { start, end } => return &self.items[start..end],
            }
        }
    }

    fn build(points: &PointSet, leaf_cap: usize, rng: &mut StreamRng) -> KdTree {
        let mut tree = KdTree {
            nodes: Vec::new(),
            items: (0..points.len()).collect(),
        };
        let mut scratch = Vec::new();
        tree.build_node(points, 0, points.len(), leaf_cap.max(1), rng, &mut scratch);
        tree
    }

    fn build_node(
        &mut self,
        points: &PointSet,
        start: usize,
        end: usize,
        leaf_cap: usize,
        rng: &mut StreamRng,
        scratch: &mut Vec<f64>,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= leaf_cap {
            return id;
        }
        let Some((feature, value)) = self.choose_split(points, start, end, rng, scratch) else {
            return id;
        };
        // stable partition: values below the median go left
        let (mut lo, mut hi): (Vec<usize>, Vec<usize>) = self.items[start..end]
            .iter()
            .partition(|&&i| points.row(i)[feature] < value);
        let mid = start + lo.len();
        lo.append(&mut hi);
        self.items[start..end].copy_from_slice(&lo);

        let left = self.build_node(points, start, mid, leaf_cap, rng, scratch);
        let right = self.build_node(points, mid, end, leaf_cap, rng, scratch);
        self.nodes[id] = Node::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }

    /// A random feature whose median split leaves both sides non-empty.
    /// Falls back to the other features, in random order, when the first
    /// draw is degenerate; `None` means no feature can split the node.
    fn choose_split(
        &self,
        points: &PointSet,
        start: usize,
        end: usize,
        rng: &mut StreamRng,
        scratch: &mut Vec<f64>,
    ) -> Option<(usize, f64)> {
        let p = points.dim();
        let first = rng.gen_range(0..p);
        let try_feature = |f: usize, scratch: &mut Vec<f64>| {
            scratch.clear();
            scratch.extend(self.items[start..end].iter().map(|&i| points.row(i)[f]));
            let k = scratch.len() / 2;
            let (below, median, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
            let median = *median;
            // `below` holds values <= median; the split is degenerate only if none is strictly smaller
            below.iter().any(|&v| v < median).then_some(median)
        };
        if let Some(v) = try_feature(first, scratch) {
            return Some((first, v));
        }
        if p == 1 {
            return None;
        }
        let mut rest: Vec<usize> = (0..p).filter(|&f| f != first).collect();
        rest.shuffle(rng);
        rest.into_iter()
            .find_map(|f| try_feature(f, scratch).map(|v| (f, v)))
    }
}

/// `T` randomized median-split trees over one point set.
#[derive(Debug, Clone, PartialEq)]
pub struct KdtForest {
    trees: Vec<KdTree>,
    points: PointSet,
    leaf_cap: usize,
    seed: u64,
}

impl KdtForest {
    pub fn build(points: &PointSet, trees: usize, leaf_cap: usize, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet("forest over an empty point set"));
        }
        if trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        let leaf_cap = leaf_cap.max(1);
        let built = par::map_range(trees, |t| {
            let mut rng = rng::substream(seed, "kdt-forest", t as u64);
            KdTree::build(points, leaf_cap, &mut rng)
        });
        Ok(KdtForest {
            trees: built,
            points: points.clone(),
            leaf_cap,
            seed,
        })
    }

    pub fn trees(&self) -> &[KdTree] {
        &self.trees
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn leaf_cap(&self) -> usize {
        self.leaf_cap
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Approximate nearest indexed point: `(distance, index)`.
    pub fn nearest(&self, x: &[f64], metric: Metric) -> Result<(f64, usize)> {
        self.points.check_dim(x.len())?;
        Ok(self.nearest_unchecked(x, metric))
    }

    fn nearest_unchecked(&self, x: &[f64], metric: Metric) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for tree in &self.trees {
            for &i in tree.leaf_for(x) {
                if i == best.1 {
                    continue;
                }
                let d = metric.distance_below(x, self.points.row(i), best.0);
                if d < best.0 || (d == best.0 && i < best.1) {
                    best = (d, i);
                }
            }
        }
        best
    }

    /// Approximate nearest neighbor of every query row, in row order.
    pub fn all_nn(&self, queries: &PointSet, metric: Metric) -> Result<Vec<(f64, usize)>> {
        self.points.check_dim(queries.dim())?;
        Ok(par::map_range(queries.len(), |i| {
            self.nearest_unchecked(queries.row(i), metric)
        }))
    }

    pub fn all_nn_distances(&self, queries: &PointSet, metric: Metric) -> Result<Vec<f64>> {
        Ok(self.all_nn(queries, metric)?.into_iter().map(|(d, _)| d).collect())
    }
}

pub fn build_forest(points: &PointSet, trees: usize, leaf_cap: usize, seed: u64) -> Result<KdtForest> {
    KdtForest::build(points, trees, leaf_cap, seed)
}

pub fn forest_nn(forest: &KdtForest, x: &[f64], metric: Metric) -> Result<(f64, usize)> {
    forest.nearest(x, metric)
}

pub fn all_nn_distances(forest: &KdtForest, queries: &PointSet, metric: Metric) -> Result<Vec<f64>> {
    forest.all_nn_distances(queries, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::{dist_to_set, exact_nn_distances};
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform(n: usize, p: usize, seed: u64) -> PointSet {
        let mut r = rng::stream(seed, "forest-test");
        PointSet::new((0..n * p).map(|_| r.gen::<f64>()).collect(), p).unwrap()
    }

    fn check_partition(tree: &KdTree, n: usize) {
        let mut all: Vec<usize> = tree.leaves().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn leaf_cap_defaults() {
        assert_eq!(default_leaf_cap(1), 1);
        assert_eq!(default_leaf_cap(2), 1);
        assert_eq!(default_leaf_cap(3), 2);
        assert_eq!(default_leaf_cap(8), 3);
        assert_eq!(default_leaf_cap(9), 4);
        assert_eq!(default_leaf_cap(10_000), 14);
    }

    #[test]
    fn single_point() {
        let pts = PointSet::from_rows(&[[1.0, 2.0]]).unwrap();
        let f = build_forest(&pts, 3, 1, 0).unwrap();
        for t in f.trees() {
            assert_eq!(t.nodes(), &[Node::Leaf { start: 0, end: 1 }]);
        }
        assert_eq!(forest_nn(&f, &[5.0, 5.0], Metric::L2).unwrap().1, 0);
    }

    #[test]
    fn eight_points_on_a_line() {
        let pts = PointSet::from_scalars(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let f = build_forest(&pts, 1, 2, 11).unwrap();
        let tree = &f.trees()[0];
        match tree.root() {
            Node::Split { feature, value, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*value, 5.0);
            }
            n => panic!("root should split, got {n:?}"),
        }
        assert!(tree.depth() <= 3);
        let leaves: Vec<Vec<usize>> = tree.leaves().map(|l| l.to_vec()).collect();
        assert_eq!(leaves, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        check_partition(tree, 8);
    }

    #[test]
    fn duplicates_become_one_leaf() {
        let pts = PointSet::from_rows(&vec![[3.0, -1.0]; 40]).unwrap();
        let f = build_forest(&pts, 4, 2, 5).unwrap();
        for t in f.trees() {
            assert_eq!(t.nodes().len(), 1);
            check_partition(t, 40);
        }
    }

    #[test]
    fn duplicate_heavy_feature_falls_back_to_another() {
        // feature 0 is constant, feature 1 separates
        let rows: Vec<[f64; 2]> = (0..16).map(|i| [0.0, i as f64]).collect();
        let pts = PointSet::from_rows(&rows).unwrap();
        let f = build_forest(&pts, 8, 2, 1).unwrap();
        for t in f.trees() {
            check_partition(t, 16);
            assert!(t.leaves().all(|l| l.len() <= 2));
        }
    }

    #[test]
    fn indexed_points_answer_themselves() {
        let pts = uniform(300, 4, 9);
        let f = build_forest(&pts, 5, default_leaf_cap(300), 2).unwrap();
        let d = f.all_nn_distances(&pts, Metric::L1).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        for i in [0, 17, 299] {
            assert_eq!(f.nearest(pts.row(i), Metric::L2).unwrap(), (0.0, i));
        }
    }

    #[test]
    fn big_leaf_is_exact() {
        let pts = uniform(200, 3, 1);
        let q = uniform(50, 3, 2);
        let f = build_forest(&pts, 1, 200, 0).unwrap();
        for m in [Metric::L1, Metric::L2, Metric::Linf] {
            for x in q.rows() {
                assert_eq!(f.nearest(x, m).unwrap(), dist_to_set(x, &pts, m).unwrap());
            }
        }
    }

    #[test]
    fn single_source_distances_are_exact() {
        let src = PointSet::from_rows(&[[0.5, 0.5]]).unwrap();
        let q = uniform(40, 2, 4);
        let f = build_forest(&src, 3, 1, 0).unwrap();
        assert_eq!(
            f.all_nn_distances(&q, Metric::L2).unwrap(),
            exact_nn_distances(&src, &q, Metric::L2).unwrap()
        );
    }

    #[test]
    fn batch_equals_loop_and_is_deterministic() {
        let pts = uniform(500, 5, 3);
        let q = uniform(100, 5, 4);
        let a = build_forest(&pts, 6, 4, 77).unwrap();
        let b = build_forest(&pts, 6, 4, 77).unwrap();
        assert_eq!(a, b);
        let batch = a.all_nn(&q, Metric::L2).unwrap();
        for (i, x) in q.rows().enumerate() {
            assert_eq!(batch[i], forest_nn(&a, x, Metric::L2).unwrap());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let pts = uniform(10, 2, 0);
        let f = build_forest(&pts, 1, 2, 0).unwrap();
        assert!(f.nearest(&[0.0], Metric::L2).is_err());
        assert!(build_forest(&PointSet::empty(2).unwrap(), 1, 1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn upper_bound_and_self_consistency(seed in 0u64..1000, n in 1usize..120, p in 1usize..5, cap in 1usize..6) {
            let pts = uniform(n, p, seed);
            let q = uniform(20, p, seed + 1);
            let f = build_forest(&pts, 3, cap, seed).unwrap();
            for t in f.trees() {
                check_partition(t, n);
                prop_assert!(t.leaves().all(|l| l.len() <= cap));
            }
            for x in q.rows() {
                let (d, i) = f.nearest(x, Metric::L2).unwrap();
                let exact = dist_to_set(x, &pts, Metric::L2).unwrap().0;
                prop_assert!(d >= exact);
                prop_assert_eq!(d, Metric::L2.distance(x, pts.row(i)));
            }
        }
    }
}
