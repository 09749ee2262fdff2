//! Browser demo: pick queries on a 2-D shifted scene, draw 1-D Lipschitz
//! envelopes, and evaluate the branch-and-bound rejection bound.
//!
//! `Scene::build`, `Scene::pick` and `envelopes_impl` hold the logic and are
//! tested natively; the `#[wasm_bindgen]` items only convert arguments and errors.

use dbal::harness::{make_shift_dataset, ShiftSpec};
use dbal::pldm::compute_envelopes;
use dbal::strategies::{criterion_report, select, QueryInputs, StrategyConfig, StrategyKind};
use dbal::theory::{bb_rejection_bound, BbScenario};
use dbal::{LabeledPool, Metric, PointSet};
use wasm_bindgen::prelude::*;

/// Source and target clouds of the 2-D scene.
#[wasm_bindgen]
pub struct Scene {
    source: LabeledPool,
    target: LabeledPool,
}

/// Indices picked by one strategy and the resulting coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Picked {
    pub indices: Vec<u32>,
    pub mean_min_dist: f64,
    pub max_min_dist: f64,
}

impl Scene {
    pub fn build(n_source: usize, n_target: usize, shift: f64, seed: u64) -> dbal::Result<Scene> {
        let spec = ShiftSpec {
            noise_sd: 0.05,
            ..ShiftSpec::gaussian(n_source, n_target, 2, shift, seed)
        };
        let (source, target) = make_shift_dataset(&spec)?;
        Ok(Scene { source, target })
    }

    pub fn pick(&self, strategy: &str, budget: usize, seed: u64) -> dbal::Result<Picked> {
        let kind: StrategyKind = strategy.parse()?;
        // uncertainty stand-in for wkmeans: distance from the source mean
        let centre = mean_row(&self.source.points);
        let weights: Vec<f64> = self
            .target
            .points
            .rows()
            .map(|x| Metric::L2.distance(x, &centre))
            .collect();
        let inputs = QueryInputs {
            source: &self.source.points,
            source_labels: Some(&self.source.labels),
            targets: &self.target.points,
            target_pseudo: None,
            weights: Some(&weights),
        };
        let cfg = StrategyConfig::new(Metric::L2, budget, seed);
        let out = select(kind, &inputs, &cfg)?;
        let report = criterion_report(&self.source.points, &self.target.points, &out.selection, Metric::L2, None)?;
        Ok(Picked {
            indices: out.selection.indices.iter().map(|&i| i as u32).collect(),
            mean_min_dist: report.mean_min_dist,
            max_min_dist: report.max_min_dist,
        })
    }
}

fn mean_row(ps: &PointSet) -> Vec<f64> {
    let mut m = vec![0.0; ps.dim()];
    for r in ps.rows() {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= ps.len().max(1) as f64);
    m
}

fn js_err(e: dbal::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(n_source: usize, n_target: usize, shift: f64, seed: u32) -> Result<Scene, JsValue> {
        Scene::build(n_source, n_target, shift, seed.into()).map_err(js_err)
    }

    /// Source coordinates, interleaved x0 y0 x1 y1 ...
    pub fn source_xy(&self) -> Vec<f64> {
        self.source.points.as_slice().to_vec()
    }

    pub fn target_xy(&self) -> Vec<f64> {
        self.target.points.as_slice().to_vec()
    }

    /// `[mean_min_dist, max_min_dist, i0, i1, ...]` for the chosen strategy.
    pub fn select(&self, strategy: &str, budget: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
        let p = self.pick(strategy, budget, seed.into()).map_err(js_err)?;
        let mut out = vec![p.mean_min_dist, p.max_min_dist];
        out.extend(p.indices.iter().map(|&i| f64::from(i)));
        Ok(out)
    }
}

/// Upper and lower envelopes of 1-D samples on `steps` grid points over `[lo, hi]`.
pub fn envelopes_impl(xs: &[f64], ys: &[f64], k: f64, lo: f64, hi: f64, steps: usize) -> dbal::Result<(Vec<f64>, Vec<f64>)> {
    let pool = LabeledPool::new(PointSet::from_scalars(xs)?, ys.to_vec())?;
    let step = if steps > 1 { (hi - lo) / (steps - 1) as f64 } else { 0.0 };
    let grid: Vec<f64> = (0..steps).map(|i| lo + step * i as f64).collect();
    let env = compute_envelopes(&PointSet::from_scalars(&grid)?, &pool, k, Metric::L1)?;
    Ok((env.upper, env.lower))
}

/// Envelope curves: the first `steps` values are the upper curve, the rest the lower.
#[wasm_bindgen]
pub fn envelopes(xs: &[f64], ys: &[f64], k: f64, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    let (mut upper, lower) = envelopes_impl(xs, ys, k, lo, hi, steps).map_err(js_err)?;
    upper.extend(lower);
    Ok(upper)
}

/// `[delta, gamma, reject_prob, clipped]` of the uniform-cube scenario.
#[wasm_bindgen]
pub fn bb_bound(cluster_size: usize, dim: usize, batch: usize, eps: f64) -> Result<Vec<f64>, JsValue> {
    let r = bb_rejection_bound(&BbScenario {
        cluster_size,
        dim,
        batch,
        eps,
    })
    .map_err(js_err)?;
    Ok(vec![r.delta, r.gamma, r.reject_prob, if r.clipped { 1.0 } else { 0.0 }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmedoids_covers_the_scene_better_than_random() {
        let scene = Scene::build(150, 200, 1.5, 4).unwrap();
        let km = scene.pick("kmedoids-greedy", 10, 1).unwrap();
        let rnd = scene.pick("random", 10, 1).unwrap();
        assert_eq!(km.indices.len(), 10);
        assert!(km.mean_min_dist < rnd.mean_min_dist);
        assert!(scene.pick("nope", 3, 0).is_err());
        for name in ["pldm", "wkmeans", "kcenter"] {
            assert_eq!(scene.pick(name, 5, 2).unwrap().indices.len(), 5);
        }
    }

    #[test]
    fn envelopes_touch_the_samples() {
        let (u, l) = envelopes_impl(&[0.0, 2.0], &[1.0, 0.0], 1.0, 0.0, 2.0, 5).unwrap();
        assert_eq!(u, vec![1.0, 1.5, 1.0, 0.5, 0.0]);
        assert_eq!(l, vec![1.0, 0.5, 0.0, -0.5, 0.0]);
    }

    #[test]
    fn scene_arrays_are_interleaved_pairs() {
        let scene = Scene::build(10, 12, 0.0, 0).unwrap();
        assert_eq!(scene.source_xy().len(), 20);
        assert_eq!(scene.target_xy().len(), 24);
    }
}
