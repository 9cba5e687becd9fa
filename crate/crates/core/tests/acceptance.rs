//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs single-threaded so the timing checks are not
//! disturbed by other tests.

mod common;

use std::fs;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3};
use quadplan::flatness::{flat_map, forward_dynamics, FlatSample, QuadInput, QuadModel, QuadState};
use quadplan::geometry::{gjk_distance, ConvexHullShape};
use quadplan::los::los_prune;
use quadplan::perception::{
    benchmark_detectors, cluster_points, detect_obstacles_8corner, render_depth_scan, BenchConfig,
    CameraPose, Cluster,
};
use quadplan::rrt_star::{build_tree, RrtParams};
use quadplan::sim::{benchmark_frames, run_scenario, EventTag, SimOutput};
use quadplan::spline::{
    optimize_flat, optimize_spline, BoundaryState, FlatBoundary, FlatTrajectory, SplineConfig,
};
use quadplan::yaw::FlatPath;
use quadplan::{Cuboid, FlightSpace, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "spline interpolation, continuity, KKT and Hermite",
            spline_correctness,
        ),
        (
            "spline optimality under null-space perturbation",
            spline_optimality,
        ),
        ("GJK distance against box oracles", gjk_oracle),
        ("RRT* + LOS paths", rrt_los),
        ("flatness round trip and hover", flatness_round_trip),
        ("8-corner detection branches and determinism", eight_corner),
        ("detector benchmark", detector_benchmark),
        ("end-to-end replanning mission", fig4_mission),
        ("indoor mission with a late obstacle", fig7_mission),
        ("byte-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            clock.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_knots(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, Vec<f64>) {
    let values = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
    let times = (0..m - 1).map(|_| rng.random_range(0.5..2.0)).collect();
    (values, times)
}

fn spline_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = SplineConfig::minimum_snap();
    let b = cfg.boundary_order();
    let (mut interp, mut cont, mut bound, mut kkt) = (0f64, 0f64, 0f64, 0f64);
    let (mut worst_ms, mut total_ms) = (0f64, 0f64);
    for _ in 0..200 {
        let m = rng.random_range(2..=10);
        let (values, times) = random_knots(&mut rng, m);
        let start = BoundaryState::rest(values[0], b);
        let end = BoundaryState::rest(values[m - 1], b);
        let clock = Instant::now();
        let sol = optimize_spline(&values, &times, &start, &end, &cfg).expect("solve");
        let ms = clock.elapsed().as_secs_f64() * 1e3;
        worst_ms = worst_ms.max(ms);
        total_ms += ms;
        kkt = kkt.max(sol.kkt_residual);
        let c = |j: usize| sol.trajectory.coefficients(j);
        for j in 0..m - 1 {
            interp = interp
                .max((poly_eval(c(j), 0.0, 0) - values[j]).abs())
                .max((poly_eval(c(j), times[j], 0) - values[j + 1]).abs());
        }
        for j in 1..m - 1 {
            for k in 0..=cfg.continuity {
                cont = cont
                    .max((poly_eval(c(j - 1), times[j - 1], k) - poly_eval(c(j), 0.0, k)).abs());
            }
        }
        for k in 1..=b {
            bound = bound
                .max(poly_eval(c(0), 0.0, k).abs())
                .max(poly_eval(c(m - 2), times[m - 2], k).abs());
        }
    }

    // single segment: the 8 boundary conditions fix the polynomial
    let hermite_cfg = SplineConfig::single_weight(7, 4, 3);
    let mut hermite = 0f64;
    for _ in 0..50 {
        let t: f64 = rng.random_range(0.5..2.0);
        let s: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let e: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sol = optimize_spline(
            &[s[0], e[0]],
            &[t],
            &BoundaryState::new(s.clone()).unwrap(),
            &BoundaryState::new(e.clone()).unwrap(),
            &hermite_cfg,
        )
        .expect("hermite solve");
        let mut a = DMatrix::zeros(8, 8);
        let mut rhs = DVector::zeros(8);
        for k in 0..4 {
            a[(k, k)] = deriv_factor(k, k);
            rhs[k] = s[k];
            for i in k..8 {
                a[(4 + k, i)] = deriv_factor(i, k) * t.powi((i - k) as i32);
            }
            rhs[4 + k] = e[k];
        }
        let oracle = a.lu().solve(&rhs).expect("hermite system");
        for (x, y) in sol.trajectory.coefficients(0).iter().zip(oracle.iter()) {
            hermite = hermite.max((x - y).abs());
        }
    }

    let pass = interp <= 1e-6
        && cont <= 1e-6
        && bound <= 1e-6
        && kkt <= 1e-8
        && worst_ms < 10.0
        && hermite <= 1e-8;
    outcome(
        pass,
        format!(
            "200 solves: interp {interp:.1e}, continuity {cont:.1e}, boundary {bound:.1e}, \
             KKT {kkt:.1e}, solve mean {:.3} ms / max {worst_ms:.3} ms; Hermite coeff err {hermite:.1e}",
            total_ms / 200.0
        ),
    )
}

/// Constraint rows of the rest-to-rest problem in local-time coefficients.
fn constraint_system(
    values: &[f64],
    times: &[f64],
    b: usize,
    nc: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let segs = times.len();
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let at = |seg: usize, tau: f64, k: usize, sign: f64| -> Vec<(usize, f64)> {
        (k..8)
            .map(|i| {
                (
                    seg * 8 + i,
                    sign * deriv_factor(i, k) * tau.powi((i - k) as i32),
                )
            })
            .collect()
    };
    for k in 0..=b {
        let v = if k == 0 { values[0] } else { 0.0 };
        rows.push((at(0, 0.0, k, 1.0), v));
        let v = if k == 0 { values[segs] } else { 0.0 };
        rows.push((at(segs - 1, times[segs - 1], k, 1.0), v));
    }
    for j in 1..segs {
        rows.push((at(j - 1, times[j - 1], 0, 1.0), values[j]));
        rows.push((at(j, 0.0, 0, 1.0), values[j]));
        for k in 1..=nc {
            let mut r = at(j - 1, times[j - 1], k, 1.0);
            r.extend(at(j, 0.0, k, -1.0));
            rows.push((r, 0.0));
        }
    }
    let mut a = DMatrix::zeros(rows.len(), segs * 8);
    let mut rhs = DVector::zeros(rows.len());
    for (r, (entries, v)) in rows.iter().enumerate() {
        for &(c, x) in entries {
            a[(r, c)] += x;
        }
        rhs[r] = *v;
    }
    (a, rhs)
}

fn snap_cost(c: &DVector<f64>, times: &[f64]) -> f64 {
    times
        .iter()
        .enumerate()
        .map(|(j, &t)| squared_derivative_integral(&c.as_slice()[j * 8..j * 8 + 8], t, 4))
        .sum()
}

fn spline_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cfg = SplineConfig::minimum_snap();
    let b = cfg.boundary_order();
    let (mut margin, mut worst_feas, mut worst_cost_gap) = (f64::INFINITY, 0f64, 0f64);
    let mut bad_null = 0;
    let mut violations = 0;
    for _ in 0..50 {
        let m = rng.random_range(3..=6);
        let (values, times) = random_knots(&mut rng, m);
        let sol = optimize_spline(
            &values,
            &times,
            &BoundaryState::rest(values[0], b),
            &BoundaryState::rest(values[m - 1], b),
            &cfg,
        )
        .expect("solve");
        let c = DVector::from_iterator(
            (m - 1) * 8,
            (0..m - 1).flat_map(|j| sol.trajectory.coefficients(j).to_vec()),
        );
        let (a, rhs) = constraint_system(&values, &times, b, cfg.continuity);
        worst_feas = worst_feas.max((&a * &c - &rhs).amax());

        // null space from the SVD of A padded to a square matrix
        let n = a.ncols();
        let mut square = DMatrix::zeros(n, n);
        square.rows_mut(0, a.nrows()).copy_from(&a);
        let svd = square.svd(false, true);
        let vt = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let null: Vec<DVector<f64>> = (0..n)
            .filter(|&i| svd.singular_values[i] < 1e-10 * smax)
            .map(|i| vt.row(i).transpose())
            .collect();
        if null.len() != n - a.nrows() || null.iter().any(|v| (&a * v).amax() > 1e-8 * smax) {
            bad_null += 1;
            continue;
        }

        let j0 = snap_cost(&c, &times);
        worst_cost_gap = worst_cost_gap.max((j0 - sol.cost).abs() / j0.max(1.0));
        for _ in 0..1000 {
            let z: Vec<f64> = null.iter().map(|_| rng.sample(StandardNormal)).collect();
            let mut d = DVector::zeros(n);
            for (v, zi) in null.iter().zip(&z) {
                d += v * *zi;
            }
            let scale = c.norm() * 10f64.powf(rng.random_range(-6.0..0.0)) / d.norm();
            let j = snap_cost(&(&c + d * scale), &times);
            let rel = (j - j0) / j0;
            margin = margin.min(rel);
            if rel < -1e-12 {
                violations += 1;
            }
        }
    }
    let pass = violations == 0 && bad_null == 0 && worst_feas <= 1e-8 && worst_cost_gap <= 1e-9;
    outcome(
        pass,
        format!(
            "50 x 1000 perturbations: {violations} lower-cost, min relative increase {margin:.2e}; \
             constraint residual {worst_feas:.1e}, reported vs quadrature cost {worst_cost_gap:.1e}"
        ),
    )
}

fn random_box(rng: &mut ChaCha8Rng) -> Cuboid {
    let lo = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
    let size = Vec3::from_fn(|_, _| rng.random_range(0.01..3.0));
    Cuboid::new(lo, lo + size).unwrap()
}

fn gjk_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut pb, mut bb) = (0f64, 0f64);
    for i in 0..5000 {
        let b = random_box(&mut rng);
        let p = if i % 10 == 0 {
            // on a face
            let mut q = b.clamp(&Vec3::from_fn(|_, _| rng.random_range(-8.0..8.0)));
            q.x = b.max().x;
            q
        } else {
            Vec3::from_fn(|_, _| rng.random_range(-8.0..8.0))
        };
        let d = gjk_distance(&ConvexHullShape::from(&b), &ConvexHullShape::point(p));
        pb = pb.max((d - point_box_distance(&p, &b)).abs());
    }
    for i in 0..5000 {
        let a = random_box(&mut rng);
        let b = if i % 10 == 0 {
            // touching along x
            let lo = Vec3::new(
                a.max().x,
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            Cuboid::new(lo, lo + Vec3::from_fn(|_, _| rng.random_range(0.01..3.0))).unwrap()
        } else {
            random_box(&mut rng)
        };
        let d = gjk_distance(&ConvexHullShape::from(&a), &ConvexHullShape::from(&b));
        bb = bb.max((d - box_box_distance(&a, &b)).abs());
    }
    outcome(
        pb <= 1e-9 && bb <= 1e-9,
        format!("10^4 queries: point/box max err {pb:.1e}, box/box max err {bb:.1e}"),
    )
}

fn rrt_los() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let open = FlightSpace::new(Cuboid::new(Vec3::zeros(), Vec3::new(10.0, 10.0, 3.0)).unwrap());
    let mut straight = 0;
    for seed in 0..100 {
        let s = Vec3::new(
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..3.0),
        );
        let t = Vec3::new(
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..3.0),
        );
        let params = RrtParams {
            seed,
            ..RrtParams::default()
        };
        let (_, path) = build_tree(&s, &t, &open, &[], &params).expect("empty-space plan");
        if los_prune(&path, &[]) == vec![s, t] {
            straight += 1;
        }
    }

    let b = |lo: [f64; 3], hi: [f64; 3]| Cuboid::new(Vec3::from(lo), Vec3::from(hi)).unwrap();
    let room = FlightSpace::new(b([0.0; 3], [6.0, 4.0, 2.0]));
    let scenes = [
        (
            vec![
                b([2.8, 0.0, 0.0], [3.2, 2.5, 2.0]),
                b([2.8, 3.3, 0.0], [3.2, 4.0, 2.0]),
            ],
            Vec3::new(0.5, 1.0, 1.0),
            Vec3::new(5.5, 1.0, 1.0),
        ),
        (
            vec![
                b([1.8, 0.0, 0.0], [2.2, 3.0, 2.0]),
                b([1.8, 3.8, 0.0], [2.2, 4.0, 2.0]),
                b([3.8, 0.0, 0.0], [4.2, 0.2, 2.0]),
                b([3.8, 1.0, 0.0], [4.2, 4.0, 2.0]),
            ],
            Vec3::new(0.5, 0.5, 1.0),
            Vec3::new(5.5, 3.5, 1.0),
        ),
    ];
    let (mut runs, mut good) = (0, 0);
    let mut lengths = (usize::MAX, 0);
    for (walls, s, t) in &scenes {
        for seed in 0..50 {
            runs += 1;
            let params = RrtParams {
                seed,
                ..RrtParams::default()
            };
            let Ok((_, raw)) = build_tree(s, t, &room, walls, &params) else {
                continue;
            };
            let pruned = los_prune(&raw, walls);
            lengths = (lengths.0.min(pruned.len()), lengths.1.max(pruned.len()));
            let edges_ok = |p: &[Vec3]| p.windows(2).all(|w| segment_clear(&w[0], &w[1], walls));
            let irreducible = (1..pruned.len() - 1)
                .all(|i| !segment_clear(&pruned[i - 1], &pruned[i + 1], walls));
            if edges_ok(&raw)
                && edges_ok(&pruned)
                && irreducible
                && pruned.first() == Some(s)
                && pruned.last() == Some(t)
                && is_subsequence(&pruned, &raw)
            {
                good += 1;
            }
        }
    }
    outcome(
        straight == 100 && good == runs,
        format!(
            "empty space {straight}/100 collapse to [start, target]; walled {good}/{runs} \
             collision-free and irreducible ({}-{} waypoints)",
            lengths.0, lengths.1
        ),
    )
}

#[derive(Clone, Copy)]
struct RigidState {
    r: Vec3,
    v: Vec3,
    rot: Matrix3<f64>,
    w: Vec3,
}

fn rk4_step(x: &RigidState, inputs: [QuadInput; 3], h: f64, model: &QuadModel) -> RigidState {
    let f = |s: &RigidState, u: &QuadInput| {
        let q = QuadState {
            position: s.r,
            velocity: s.v,
            rotation: s.rot,
            angular_velocity: s.w,
        };
        forward_dynamics(&q, u, model)
    };
    let add = |s: &RigidState, d: &quadplan::flatness::StateDerivative, k: f64| RigidState {
        r: s.r + d.velocity * k,
        v: s.v + d.acceleration * k,
        rot: s.rot + d.rotation_rate * k,
        w: s.w + d.angular_acceleration * k,
    };
    let k1 = f(x, &inputs[0]);
    let k2 = f(&add(x, &k1, h / 2.0), &inputs[1]);
    let k3 = f(&add(x, &k2, h / 2.0), &inputs[1]);
    let k4 = f(&add(x, &k3, h), &inputs[2]);
    RigidState {
        r: x.r + (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity) * (h / 6.0),
        v: x.v
            + (k1.acceleration + 2.0 * k2.acceleration + 2.0 * k3.acceleration + k4.acceleration)
                * (h / 6.0),
        rot: x.rot
            + (k1.rotation_rate
                + 2.0 * k2.rotation_rate
                + 2.0 * k3.rotation_rate
                + k4.rotation_rate)
                * (h / 6.0),
        w: x.w
            + (k1.angular_acceleration
                + 2.0 * k2.angular_acceleration
                + 2.0 * k3.angular_acceleration
                + k4.angular_acceleration)
                * (h / 6.0),
    }
}

fn random_flat_trajectory(rng: &mut ChaCha8Rng) -> FlatTrajectory {
    let m = rng.random_range(4..=6);
    let positions: Vec<Vec3> = (0..m)
        .map(|_| {
            Vec3::new(
                rng.random_range(0.0..4.0),
                rng.random_range(0.0..4.0),
                rng.random_range(1.0..3.0),
            )
        })
        .collect();
    let mut yaws = vec![rng.random_range(-3.0..3.0)];
    for _ in 1..m {
        let prev = *yaws.last().unwrap();
        yaws.push(prev + rng.random_range(-1.0..1.0));
    }
    let times: Vec<f64> = (1..m)
        .map(|_| (rng.random_range(1.8..2.6f64) * 1000.0).round() / 1000.0)
        .collect();
    let pos_cfg = SplineConfig::minimum_snap();
    let yaw_cfg = SplineConfig::minimum_yaw_acceleration();
    let start = FlatBoundary::rest(
        positions[0],
        yaws[0],
        pos_cfg.boundary_order(),
        yaw_cfg.boundary_order(),
    );
    let path = FlatPath::new(positions, yaws, times).unwrap();
    optimize_flat(&path, 0.0, &start, &pos_cfg, &yaw_cfg)
        .unwrap()
        .0
}

fn flatness_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let model = QuadModel::default();
    let h = 1e-3;
    let steps = 5000;
    let mut worst = 0f64;
    for _ in 0..20 {
        let traj = random_flat_trajectory(&mut rng);
        let input_at = |t: f64| flat_map(&traj.sample(t).unwrap(), &model).unwrap().input;
        let init = flat_map(&traj.sample(0.0).unwrap(), &model).unwrap().state;
        let mut x = RigidState {
            r: init.position,
            v: init.velocity,
            rot: init.rotation,
            w: init.angular_velocity,
        };
        for k in 0..steps {
            let t = k as f64 * h;
            x = rk4_step(
                &x,
                [input_at(t), input_at(t + h / 2.0), input_at(t + h)],
                h,
                &model,
            );
            let reference = traj.position((k + 1) as f64 * h).unwrap();
            worst = worst.max((x.r - reference).norm());
        }
    }

    let mut hover_thrust_exact = true;
    let mut hover_moment = 0f64;
    for yaw in [0.0, 1.0, -2.5, 3.1] {
        let out = flat_map(&FlatSample::rest(Vec3::new(1.0, 2.0, 1.5), yaw), &model).unwrap();
        hover_thrust_exact &= out.input.thrust == model.mass * model.gravity;
        hover_moment = hover_moment.max(out.input.moment.norm());
    }
    outcome(
        worst <= 1e-3 && hover_thrust_exact && hover_moment <= 1e-12,
        format!(
            "20 trajectories, RK4 at 1 kHz over 5 s: max position error {worst:.2e} m; \
             hover thrust exact: {hover_thrust_exact}, |moment| {hover_moment:.1e}"
        ),
    )
}

fn sorted(mut v: Vec<Cuboid>) -> Vec<[f64; 6]> {
    let mut k: Vec<[f64; 6]> = v
        .drain(..)
        .map(|b| {
            [
                b.min().x,
                b.min().y,
                b.min().z,
                b.max().x,
                b.max().y,
                b.max().z,
            ]
        })
        .collect();
    k.sort_by(|a, b| a.partial_cmp(b).unwrap());
    k
}

fn eight_corner() -> Outcome {
    let b = |lo: [f64; 3], hi: [f64; 3]| Cuboid::new(Vec3::from(lo), Vec3::from(hi)).unwrap();
    let cluster = |c: Cuboid| Cluster {
        points: c.corners().to_vec(),
    };
    let delta = 0.3;
    let known = b([0.0; 3], [1.0; 3]);
    let cases: [(&str, Vec<Cuboid>, Cuboid, Vec<Cuboid>); 5] = [
        (
            "empty world",
            vec![],
            b([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]),
            vec![b([2.0, 0.0, 0.0], [3.0, 1.0, 1.0])],
        ),
        (
            "far",
            vec![known],
            b([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]),
            vec![known, b([2.0, 0.0, 0.0], [3.0, 1.0, 1.0])],
        ),
        (
            "overlap",
            vec![known],
            b([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]),
            vec![b([0.0; 3], [1.5, 1.0, 1.0])],
        ),
        (
            "near, corner beyond",
            vec![known],
            b([1.1, 0.0, 0.0], [2.0, 1.0, 1.0]),
            vec![b([0.0; 3], [2.0, 1.0, 1.0])],
        ),
        (
            "near, all corners within",
            vec![known],
            b([1.1, 0.2, 0.2], [1.2, 0.4, 0.4]),
            vec![known],
        ),
    ];
    let mut wrong = Vec::new();
    for (name, k, c, expect) in &cases {
        let det = detect_obstacles_8corner(k, &[cluster(*c)], delta);
        if sorted(det.all()) != sorted(expect.clone()) {
            wrong.push(*name);
        }
    }

    let s = load_scenario("fig4_sim.toml");
    let truth = s.obstacles_at(0.0).unwrap();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut known: Vec<Cuboid> = Vec::new();
        let mut out = Vec::new();
        for x in [0.5, 1.0, 1.5] {
            let pose = CameraPose {
                position: Vec3::new(x, 3.0, 1.2),
                yaw: 0.0,
            };
            let cloud = render_depth_scan(&pose, &truth, &s.camera_model(), &mut rng);
            let clusters =
                cluster_points(&cloud, s.detection.cluster_radius_m, s.detection.min_pts);
            let det = detect_obstacles_8corner(&known, &clusters, s.detection.delta_m);
            known = det.all();
            out.push(det);
        }
        out
    };
    let (a, bb) = (run(), run());
    let same = a == bb;
    outcome(
        wrong.is_empty() && same,
        format!(
            "{}/{} branch cases; repeated scan/cluster/detect identical: {same} ({} obstacles)",
            cases.len() - wrong.len(),
            cases.len(),
            a.last().map(|d| d.all().len()).unwrap_or(0)
        ),
    )
}

fn bench_config(s: &quadplan::scenario::Scenario, trials: usize, jitter: bool) -> BenchConfig {
    BenchConfig {
        delta: s.detection.delta_m,
        k: s.detection.knn_k,
        cluster_radius: s.detection.cluster_radius_m,
        min_pts: s.detection.min_pts,
        trials,
        jitter_sigma: if jitter {
            BenchConfig::default().jitter_sigma
        } else {
            0.0
        },
    }
}

fn detector_benchmark() -> Outcome {
    let s = load_scenario("fig4_sim.toml");
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let frames = benchmark_frames(&s, 81, false, &mut rng).unwrap();
    let report = benchmark_detectors(&frames, &bench_config(&s, 20, true), &mut rng).unwrap();
    let (c8, knn) = (
        report.row("8corner").unwrap(),
        report.row("pointcloud_knn").unwrap(),
    );
    let ordered = c8.mean_ms < knn.mean_ms && c8.std_ms < knn.std_ms;

    let clean = benchmark_frames(&s, 81, true, &mut rng).unwrap();
    let quiet = benchmark_detectors(&clean, &bench_config(&s, 1, false), &mut rng).unwrap();
    let (q8, qk) = (
        quiet.row("8corner").unwrap(),
        quiet.row("pointcloud_knn").unwrap(),
    );
    let agree = q8.obstacles == qk.obstacles;
    outcome(
        ordered && agree,
        format!(
            "81 frames x 20 trials: 8-corner {:.4} +/- {:.4} ms, k-NN {:.2} +/- {:.2} ms; \
             noise-free counts {} vs {}",
            c8.mean_ms, c8.std_ms, knn.mean_ms, knn.std_ms, q8.obstacles, qk.obstacles
        ),
    )
}

fn inflated_violations(s: &quadplan::scenario::Scenario, out: &SimOutput) -> usize {
    let m = s.planner.margin_m;
    let boxes: Vec<(Cuboid, f64)> = s
        .obstacles
        .iter()
        .map(|o| {
            let lo = Vec3::from(o.min_m) - Vec3::repeat(m);
            let hi = Vec3::from(o.max_m) + Vec3::repeat(m);
            (Cuboid::new(lo, hi).unwrap(), o.appear_s)
        })
        .collect();
    out.trace
        .iter()
        .filter(|r| {
            boxes
                .iter()
                .any(|(b, a)| *a <= r.t && inside(&r.sample.position[0], b))
        })
        .count()
}

fn points(v: &serde_json::Value) -> Vec<Vec3> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let c: Vec<f64> = p
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect();
            Vec3::new(c[0], c[1], c[2])
        })
        .collect()
}

/// Max jump of derivatives `0..=kmax` of each output at every replan.
fn replan_jumps(out: &SimOutput, kmax: [usize; 4]) -> f64 {
    let mut worst = 0f64;
    for w in out.trajectories.windows(2) {
        let t = w[1].start_time();
        for (o, (a, b)) in w[0].outputs().iter().zip(w[1].outputs()).enumerate() {
            for k in 0..=kmax[o] {
                worst = worst.max((a.evaluate(t, k).unwrap() - b.evaluate(t, k).unwrap()).abs());
            }
        }
    }
    worst
}

/// Replan events whose untouched waypoints do not survive verbatim.
fn preservation_failures(out: &SimOutput) -> usize {
    out.events
        .iter()
        .filter(|e| e.kind == EventTag::Replan)
        .filter(|e| {
            let old = points(&e.payload["old_waypoints"]);
            let new = points(&e.payload["waypoints"]);
            let blocked = e.payload["blocked_edges"].as_array().unwrap();
            let (a, b) = (
                blocked[0].as_u64().unwrap() as usize,
                blocked[1].as_u64().unwrap() as usize,
            );
            let mut kept = old[..=a].to_vec();
            kept.extend_from_slice(&old[b + 1..]);
            !is_subsequence(&kept, &new)
        })
        .count()
}

fn fig4_mission() -> Outcome {
    let s = load_scenario("fig4_sim.toml");
    let appear = s.obstacles.iter().map(|o| o.appear_s).fold(0.0, f64::max);
    let clock = Instant::now();
    let out = match run_scenario(&s) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("mission failed: {e}")),
    };
    let secs = clock.elapsed().as_secs_f64();
    let last = out.trace.last().unwrap();
    let final_err = (last.sample.position[0] - s.target_position()).norm();
    let violations = inflated_violations(&s, &out);
    let jump2 = replan_jumps(&out, [2; 4]);
    let jump_full = replan_jumps(&out, [4, 4, 4, 2]);
    let kept = preservation_failures(&out);
    let late_replan = out
        .events
        .iter()
        .any(|e| e.kind == EventTag::Replan && e.t >= appear);
    let pass = appear > 0.0
        && last.t >= 10.0
        && late_replan
        && final_err <= 1e-6
        && violations == 0
        && jump2 <= 1e-6
        && kept == 0
        && secs < 30.0;
    outcome(
        pass,
        format!(
            "{:.2} s mission, {} replans (obstacle appears at {appear} s), final error {final_err:.1e} m, \
             {violations} samples in inflated obstacles, replan jump {jump2:.1e} (up to snap {jump_full:.1e}), \
             {kept} replans altering kept waypoints, wall time {secs:.2} s",
            last.t, out.summary.replans
        ),
    )
}

fn fig7_mission() -> Outcome {
    let s = load_scenario("fig7_room.toml");
    let ext = Vec3::from(s.space.max_m) - Vec3::from(s.space.min_m);
    let room = ext == Vec3::new(3.5, 2.5, 2.0);
    let ground = s
        .obstacles
        .iter()
        .any(|o| o.appear_s == 0.0 && o.min_m[2] == 0.0);
    let appear = s.obstacles.iter().map(|o| o.appear_s).fold(0.0, f64::max);
    let out = match run_scenario(&s) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("mission failed: {e}")),
    };
    let replan_after_detection = out.events.windows(2).any(|w| {
        w[0].kind == EventTag::Detection
            && w[1].kind == EventTag::Replan
            && w[0].t == w[1].t
            && w[1].t >= appear
    });
    let peak = out.summary.post_replan_max_yaw_rate_rad_s;
    let violations = inflated_violations(&s, &out);
    outcome(
        room && ground && appear > 0.0 && replan_after_detection && peak.is_some_and(f64::is_finite),
        format!(
            "3.5 x 2.5 x 2 m room: {room}, late obstacle at {appear} s, replan after detection: \
             {replan_after_detection}, post-replan peak yaw rate {:.3} rad/s, {} replans, {violations} inflated violations",
            peak.unwrap_or(f64::NAN),
            out.summary.replans
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut detail = Vec::new();
    for name in ["fig4_sim.toml", "fig7_room.toml"] {
        let mut traces = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{name}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_quadplan"))
                .arg("simulate")
                .arg("--scenario")
                .arg(scenario_path(name))
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            if !status.success() {
                return outcome(false, format!("simulate {name} exited with {status}"));
            }
            traces.push((
                fs::read(out.join("trace.csv")).unwrap(),
                fs::read(out.join("events.jsonl")).unwrap(),
            ));
        }
        if traces[0] == traces[1] {
            identical += 1;
        }
        detail.push(format!("{name} {} bytes", traces[0].0.len()));
    }
    outcome(
        identical == 2,
        format!(
            "{identical}/2 scenarios rerun byte-identical ({})",
            detail.join(", ")
        ),
    )
}
