//! Large K-medoids on a 100k x 100k, 64-dimensional shifted Gaussian task.
//!
//! `cargo run --release -p dbal-core --example scale [n] [max_iters]`

use std::time::Instant;

use dbal::harness::{make_shift_dataset, ShiftSpec};
use dbal::medoids::{large_kmedoids, LargeParams};
use dbal::points::exact_nn_distances;
use dbal::strategies::{criterion_report_from_source, random_select};
use dbal::Metric;

fn main() -> dbal::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(100_000, |a| a.parse().expect("n"));
    let max_iters: usize = args.next().map_or(100, |a| a.parse().expect("max_iters"));
    let t = Instant::now();
    let (src, tgt) = make_shift_dataset(&ShiftSpec::gaussian(n, n, 64, 0.5, 1))?;
    println!("data: {:.1}s", t.elapsed().as_secs_f64());
    let params = LargeParams {
        max_iters,
        ..LargeParams::default()
    };
    let t = Instant::now();
    let out = large_kmedoids(&src.points, &tgt.points, 100, &params, Metric::L2, 7)?;
    println!(
        "kmedoids-large: {:.1}s, {} sweeps, converged {}, costs {:?}",
        t.elapsed().as_secs_f64(),
        out.iterations,
        out.converged,
        out.iteration_costs
    );
    let t = Instant::now();
    let d0 = exact_nn_distances(&src.points, &tgt.points, Metric::L2)?;
    println!("exact source distances: {:.1}s", t.elapsed().as_secs_f64());
    let km = criterion_report_from_source(&d0, &tgt.points, &out.selection, Metric::L2, None)?;
    let rnd = random_select(n, 100, 7)?;
    let rr = criterion_report_from_source(&d0, &tgt.points, &rnd, Metric::L2, None)?;
    println!("mean_min_dist kmedoids {} random {}", km.mean_min_dist, rr.mean_min_dist);
    Ok(())
}
