//! Cross-module properties of the selection pipeline.

use dbal::harness::{make_shift_dataset, ShiftSpec};
use dbal::io::{load_matrix, write_matrix, MatrixFormat};
use dbal::medoids::{greedy_kmedoids, large_kmedoids, LargeParams};
use dbal::points::exact_nn_distances;
use dbal::strategies::{criterion_report, select, QueryInputs, StrategyConfig, StrategyKind};
use dbal::{dist_to_set, LabeledPool, Metric, PointSet};

fn dataset(seed: u64) -> (LabeledPool, LabeledPool) {
    make_shift_dataset(&ShiftSpec::gaussian(120, 150, 3, 1.0, seed)).unwrap()
}

fn inputs<'a>(source: &'a LabeledPool, target: &'a LabeledPool, weights: &'a [f64]) -> QueryInputs<'a> {
    QueryInputs {
        source: &source.points,
        source_labels: Some(&source.labels),
        targets: &target.points,
        target_pseudo: None,
        weights: Some(weights),
    }
}

#[test]
fn every_strategy_returns_distinct_valid_indices_deterministically() {
    let (source, target) = dataset(3);
    let weights: Vec<f64> = (0..target.len()).map(|i| 1.0 + (i % 7) as f64).collect();
    for kind in StrategyKind::ALL {
        for metric in [Metric::L1, Metric::L2, Metric::Linf] {
            let cfg = StrategyConfig::new(metric, 9, 21);
            let a = select(kind, &inputs(&source, &target, &weights), &cfg).unwrap();
            let b = select(kind, &inputs(&source, &target, &weights), &cfg).unwrap();
            assert_eq!(a, b, "{kind} {metric:?}");
            let mut idx = a.selection.indices.clone();
            assert_eq!(idx.len(), 9);
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 9, "{kind} returned duplicates");
            assert!(idx.iter().all(|&i| i < target.len()));
            assert_eq!(a.envelopes.is_some(), kind == StrategyKind::Pldm);
        }
    }
}

#[test]
fn criterion_report_matches_pointwise_distances() {
    let (source, target) = dataset(5);
    let cfg = StrategyConfig::new(Metric::L2, 12, 0);
    let out = select(StrategyKind::KCenter, &inputs(&source, &target, &[]), &cfg).unwrap();
    let report = criterion_report(&source.points, &target.points, &out.selection, Metric::L2, None).unwrap();
    let labeled = source.points.concat(&target.points.select_rows(&out.selection.indices)).unwrap();
    let d: Vec<f64> = target
        .points
        .rows()
        .map(|x| dist_to_set(x, &labeled, Metric::L2).unwrap().0)
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let max = d.iter().copied().fold(0.0, f64::max);
    assert!((report.mean_min_dist - mean).abs() <= 1e-12 * mean);
    assert_eq!(report.max_min_dist, max);
    // K-center's last trace value is exactly that covering radius
    assert_eq!(*out.selection.criterion_trace.last().unwrap(), max);
    assert!(report.envelope_gap_mean.is_none());
}

#[test]
fn greedy_budget_prefixes_are_monotone() {
    let (source, target) = dataset(8);
    let d0 = exact_nn_distances(&source.points, &target.points, Metric::L1).unwrap();
    let full = greedy_kmedoids(&target.points, &d0, 15, Metric::L1).unwrap();
    let mut previous = f64::INFINITY;
    for k in 0..=15 {
        let sel = greedy_kmedoids(&target.points, &d0, k, Metric::L1).unwrap();
        assert_eq!(sel.indices, full.indices[..k]);
        let r = criterion_report(&source.points, &target.points, &sel, Metric::L1, None).unwrap();
        assert!(r.mean_min_dist <= previous);
        previous = r.mean_min_dist;
    }
}

#[test]
fn large_kmedoids_never_worse_than_its_initialization() {
    for seed in 0..5 {
        let (source, target) = make_shift_dataset(&ShiftSpec::gaussian(300, 800, 4, 0.5, seed)).unwrap();
        let params = LargeParams {
            init_batch: 200,
            ..LargeParams::default()
        };
        let out = large_kmedoids(&source.points, &target.points, 10, &params, Metric::L2, seed).unwrap();
        assert!(out.iteration_costs.windows(2).all(|w| w[1] <= w[0]));
        let trace = &out.selection.criterion_trace;
        assert_eq!(trace.len(), 10);
        // the trace ends at the total cost of the final medoids
        let r = criterion_report(&source.points, &target.points, &out.selection, Metric::L2, None).unwrap();
        let total = r.mean_min_dist * target.len() as f64;
        assert!((trace[9] - total).abs() <= 1e-9 * total);
    }
}

#[test]
fn selections_survive_a_file_round_trip() {
    let (source, target) = dataset(13);
    let dir = tempfile::tempdir().unwrap();
    let mut loaded = Vec::new();
    for (name, format) in [("t.csv", MatrixFormat::Csv), ("t.dbin", MatrixFormat::Dbin)] {
        let path = dir.path().join(name);
        write_matrix(&path, &target.points, format).unwrap();
        let back: PointSet = load_matrix(&path, format).unwrap();
        assert_eq!(back, target.points);
        loaded.push(back);
    }
    let cfg = StrategyConfig::new(Metric::L2, 6, 4);
    let original = select(StrategyKind::KMedoidsPam, &inputs(&source, &target, &[]), &cfg).unwrap();
    for back in &loaded {
        let q = QueryInputs {
            targets: back,
            ..inputs(&source, &target, &[])
        };
        assert_eq!(select(StrategyKind::KMedoidsPam, &q, &cfg).unwrap(), original);
    }
}
