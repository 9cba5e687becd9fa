//! Minimum-snap spline through a handful of waypoints for one flat output,
//! with continuity and cost diagnostics.

use quadplan::spline::{optimize_spline, BoundaryState, SplineConfig};

fn main() {
    let values = [0.0, 1.0, 0.5, 2.0, 2.5];
    let times = [1.0, 0.8, 1.2, 0.7];
    let config = SplineConfig::minimum_snap();
    let b = config.boundary_order();
    let start = BoundaryState::rest(values[0], b);
    let end = BoundaryState::rest(values[4], b);
    let sol = optimize_spline(&values, &times, &start, &end, &config).expect("solvable");
    let traj = &sol.trajectory;
    println!(
        "cost = {:.6}, KKT residual = {:.2e}",
        sol.cost, sol.kkt_residual
    );

    for (j, &t) in traj
        .knots()
        .iter()
        .enumerate()
        .skip(1)
        .take(values.len() - 2)
    {
        let jump = (0..=config.continuity)
            .map(|k| {
                let left = traj.evaluate_segment(j - 1, t - traj.knots()[j - 1], k);
                let right = traj.evaluate_segment(j, 0.0, k);
                (left - right).abs()
            })
            .fold(0.0, f64::max);
        println!(
            "knot {j} at t = {t:.2}: value {:.9}, max derivative jump {jump:.1e}",
            traj.evaluate(t, 0).unwrap()
        );
    }
    let n = 10;
    for i in 0..=n {
        let t = traj.end_time() * i as f64 / n as f64;
        println!(
            "t = {t:4.2}  p = {:7.4}  v = {:7.4}  a = {:7.4}",
            traj.evaluate(t, 0).unwrap(),
            traj.evaluate(t, 1).unwrap(),
            traj.evaluate(t, 2).unwrap()
        );
    }
}
