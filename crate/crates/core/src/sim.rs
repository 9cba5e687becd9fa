//! Deterministic mission simulation: offline plan from an initial scan,
//! then a fixed-step loop with periodic sensing, 8-corner detection and
//! replanning. Tracking is ideal, so the vehicle state is read directly
//! from the current trajectory.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{Matrix3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::flatness::{
    flat_to_state_input, rotor_forces, FlatSample, FlatnessError, QuadInput, QuadState,
};
use crate::geometry::{Cuboid, Vec3};
use crate::perception::{
    cluster_points, detect_obstacles_8corner, render_depth_scan, CameraPose, PointCloud,
};
use crate::replan::{PlanContext, PlanError};
pub use crate::scenario::Scenario;
use crate::scenario::ScenarioError;
use crate::spline::{FlatTrajectory, SplineError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("planning failed at t = {time} s: {source}")]
    Planning {
        time: f64,
        #[source]
        source: PlanError,
    },
    #[error("flatness map failed at t = {time} s: {source}")]
    Flatness {
        time: f64,
        #[source]
        source: FlatnessError,
    },
    #[error("trajectory evaluation failed at t = {time} s: {source}")]
    Trajectory {
        time: f64,
        #[source]
        source: SplineError,
    },
}

impl SimError {
    /// Time of failure, if the mission had started.
    pub fn time(&self) -> Option<f64> {
        match self {
            SimError::Scenario(_) => None,
            SimError::Planning { time, .. }
            | SimError::Flatness { time, .. }
            | SimError::Trajectory { time, .. } => Some(*time),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventTag {
    None,
    Scan,
    Detection,
    Replan,
}

impl EventTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventTag::None => "none",
            EventTag::Scan => "scan",
            EventTag::Detection => "detection",
            EventTag::Replan => "replan",
        }
    }
}

/// One row of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub sample: FlatSample,
    pub state: QuadState,
    pub input: QuadInput,
    pub rotors: Vector4<f64>,
    pub event: EventTag,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    #[serde(rename = "type")]
    pub kind: EventTag,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub mission_duration_s: f64,
    pub scans: usize,
    pub detections: usize,
    pub replans: usize,
    pub records: usize,
    /// Smallest distance to a present ground-truth obstacle; `None`
    /// without obstacles.
    pub min_clearance_m: Option<f64>,
    /// Records inside an inflated ground-truth obstacle.
    pub inflated_violations: usize,
    /// Deepest such intrusion into an inflated box (0 without violations).
    pub max_penetration_m: f64,
    pub final_position_m: [f64; 3],
    pub final_error_m: f64,
    pub offline_waypoints_raw: usize,
    pub offline_waypoints: usize,
    pub max_yaw_rate_rad_s: f64,
    /// Peak |yaw rate| after the first replan; `None` without replans.
    pub post_replan_max_yaw_rate_rad_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: Vec<TraceRecord>,
    pub events: Vec<Event>,
    pub summary: Summary,
    /// Final planner state.
    pub context: PlanContext,
    /// The offline trajectory followed by one trajectory per replan, each
    /// active from its start time.
    pub trajectories: Vec<FlatTrajectory>,
    /// Wall-clock duration of each replan (ms). Not part of the trace.
    pub replan_wall_ms: Vec<f64>,
}

fn v3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Scans from `pose`, clusters, and runs 8-corner detection against
/// `known`. Returns the detection result and the raw cloud size.
fn sense(
    scenario: &Scenario,
    pose: &CameraPose,
    truth: &[Cuboid],
    known: &[Cuboid],
    rng: &mut ChaCha8Rng,
) -> (Vec<Cuboid>, Vec<Cuboid>, usize) {
    let cloud: PointCloud = render_depth_scan(pose, truth, &scenario.camera_model(), rng);
    let clusters = cluster_points(
        &cloud,
        scenario.detection.cluster_radius_m,
        scenario.detection.min_pts,
    );
    let det = detect_obstacles_8corner(known, &clusters, scenario.detection.delta_m);
    // only boxes that change the world model count as new
    let fresh: Vec<Cuboid> = det
        .new
        .iter()
        .filter(|n| !known.iter().any(|k| k.contains_box(n)))
        .copied()
        .collect();
    (fresh, det.all(), cloud.len())
}

fn record(
    ctx: &PlanContext,
    scenario: &Scenario,
    t: f64,
    event: EventTag,
) -> Result<TraceRecord, SimError> {
    let sample = ctx
        .trajectory()
        .sample(t)
        .map_err(|source| SimError::Trajectory { time: t, source })?;
    let model = scenario.quad_model();
    let (state, input) = flat_to_state_input(&sample, &model)
        .map_err(|source| SimError::Flatness { time: t, source })?;
    Ok(TraceRecord {
        t,
        sample,
        state,
        input,
        rotors: rotor_forces(&input, &model),
        event,
    })
}

/// Runs the mission described by `scenario`.
pub fn run_scenario(scenario: &Scenario) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let space = scenario.flight_space()?;
    let timed = scenario.timed_obstacles()?;
    let truth_at = |t: f64| -> Vec<Cuboid> {
        timed
            .iter()
            .filter(|(_, a)| *a <= t)
            .map(|(c, _)| *c)
            .collect()
    };
    let margin = scenario.planner.margin_m;
    let mut scan_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    scan_rng.set_stream(1);
    let mut plan_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    plan_rng.set_stream(2);

    let mut events = Vec::new();
    let start_pose = CameraPose {
        position: scenario.start_position(),
        yaw: scenario.start.yaw_rad,
    };
    let (_, known, points) = sense(scenario, &start_pose, &truth_at(0.0), &[], &mut scan_rng);
    events.push(Event {
        t: 0.0,
        kind: EventTag::Scan,
        payload: json!({ "points": points }),
    });
    if !known.is_empty() {
        events.push(Event {
            t: 0.0,
            kind: EventTag::Detection,
            payload: json!({ "new": known.iter().map(|b| [v3(&b.min()), v3(&b.max())]).collect::<Vec<_>>() }),
        });
    }
    let mut ctx = PlanContext::plan_offline(
        space,
        scenario.start_position(),
        scenario.start.yaw_rad,
        scenario.target_position(),
        scenario.target.yaw_rad,
        &known,
        scenario.plan_config(),
    )
    .map_err(|source| SimError::Planning { time: 0.0, source })?;
    events.push(Event {
        t: 0.0,
        kind: EventTag::None,
        payload: json!({
            "plan": "offline",
            "raw_waypoints": ctx.raw_path().len(),
            "waypoints": ctx.path().positions().iter().map(v3).collect::<Vec<_>>(),
        }),
    });
    let mut trajectories = vec![ctx.trajectory().clone()];
    let offline_raw = ctx.raw_path().len();
    let offline_pruned = ctx.path().len();

    let dt = scenario.timing.sim_step_s;
    let period = scenario.timing.sensing_period_s;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut replan_wall_ms = Vec::new();
    let mut next_scan = period;
    let mut step: u64 = 0;
    let mut first_replan: Option<f64> = None;
    trace.push(record(&ctx, scenario, 0.0, EventTag::Scan)?);
    loop {
        step += 1;
        let mut t = step as f64 * dt;
        let end = ctx.trajectory().end_time();
        let last = t >= end - 1e-9;
        if last {
            t = end;
        }
        let mut tag = EventTag::None;
        if !last && t + 1e-12 >= next_scan {
            next_scan += period;
            tag = EventTag::Scan;
            let pose = CameraPose {
                position: ctx
                    .trajectory()
                    .position(t)
                    .map_err(|source| SimError::Trajectory { time: t, source })?,
                yaw: ctx
                    .trajectory()
                    .yaw
                    .evaluate(t, 0)
                    .map_err(|source| SimError::Trajectory { time: t, source })?,
            };
            let (fresh, _, points) = sense(
                scenario,
                &pose,
                &truth_at(t),
                ctx.obstacles(),
                &mut scan_rng,
            );
            events.push(Event {
                t,
                kind: EventTag::Scan,
                payload: json!({ "points": points }),
            });
            if !fresh.is_empty() {
                tag = EventTag::Detection;
                events.push(Event {
                    t,
                    kind: EventTag::Detection,
                    payload: json!({ "new": fresh.iter().map(|b| [v3(&b.min()), v3(&b.max())]).collect::<Vec<_>>() }),
                });
                let wall = Instant::now();
                let report = ctx
                    .replan(t, &fresh, &mut plan_rng)
                    .map_err(|source| SimError::Planning { time: t, source })?;
                if report.changed {
                    replan_wall_ms.push(wall.elapsed().as_secs_f64() * 1e3);
                    tag = EventTag::Replan;
                    first_replan.get_or_insert(t);
                    trajectories.push(ctx.trajectory().clone());
                    events.push(Event {
                        t,
                        kind: EventTag::Replan,
                        payload: json!({
                            "blocked_edges": report.blocked,
                            "fallback": report.fallback,
                            "refinements": report.refinements,
                            "retries": report.retries,
                            "old_waypoints": report.old_waypoints.iter().map(v3).collect::<Vec<_>>(),
                            "waypoints": ctx.path().positions().iter().map(v3).collect::<Vec<_>>(),
                            "end_time_s": ctx.trajectory().end_time(),
                        }),
                    });
                }
            }
        }
        trace.push(record(&ctx, scenario, t, tag)?);
        if last {
            break;
        }
    }

    let final_pos = trace.last().unwrap().sample.position[0];
    let mut min_clearance: Option<f64> = None;
    let mut violations = 0;
    let mut penetration: f64 = 0.0;
    for r in &trace {
        let p = r.sample.position[0];
        for o in truth_at(r.t) {
            let d = o.distance_to_point(&p);
            min_clearance = Some(min_clearance.map_or(d, |m: f64| m.min(d)));
            if let Ok(inflated) = o.inflate(margin) {
                if inflated.contains(&p) {
                    violations += 1;
                    let depth = (p - inflated.min()).inf(&(inflated.max() - p)).min();
                    penetration = penetration.max(depth);
                }
            }
        }
    }
    let yaw_rate = |from: f64| {
        trace
            .iter()
            .filter(|r| r.t >= from)
            .map(|r| r.sample.yaw[1].abs())
            .fold(0.0, f64::max)
    };
    let summary = Summary {
        name: scenario.name.clone(),
        seed: scenario.seed,
        mission_duration_s: trace.last().unwrap().t,
        scans: events.iter().filter(|e| e.kind == EventTag::Scan).count(),
        detections: events
            .iter()
            .filter(|e| e.kind == EventTag::Detection)
            .count(),
        replans: events.iter().filter(|e| e.kind == EventTag::Replan).count(),
        records: trace.len(),
        min_clearance_m: min_clearance,
        inflated_violations: violations,
        max_penetration_m: penetration,
        final_position_m: v3(&final_pos),
        final_error_m: (final_pos - scenario.target_position()).norm(),
        offline_waypoints_raw: offline_raw,
        offline_waypoints: offline_pruned,
        max_yaw_rate_rad_s: yaw_rate(0.0),
        post_replan_max_yaw_rate_rad_s: first_replan.map(yaw_rate),
    };
    Ok(SimOutput {
        trace,
        events,
        summary,
        context: ctx,
        trajectories,
        replan_wall_ms,
    })
}

/// Renders `frames` depth scans along the straight line from start to
/// target, camera facing the target, against every scenario obstacle.
/// With `noise_free` the sensor noise is disabled.
pub fn benchmark_frames<R: rand::Rng + ?Sized>(
    scenario: &Scenario,
    frames: usize,
    noise_free: bool,
    rng: &mut R,
) -> Result<Vec<PointCloud>, SimError> {
    scenario.validate()?;
    let obstacles: Vec<Cuboid> = scenario
        .timed_obstacles()?
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    let mut camera = scenario.camera_model();
    if noise_free {
        camera.noise_sigma = 0.0;
    }
    let (a, b) = (scenario.start_position(), scenario.target_position());
    let d = b - a;
    let yaw = d.y.atan2(d.x);
    Ok((0..frames)
        .map(|i| {
            let s = if frames > 1 {
                i as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            // stop short of the target so the scene stays in view
            let pose = CameraPose {
                position: a + d * (0.5 * s),
                yaw,
            };
            render_depth_scan(&pose, &obstacles, &camera, rng)
        })
        .collect())
}

/// Trace column names, in order.
pub fn trace_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for k in 0..5 {
        for axis in ["x", "y", "z"] {
            h.push(format!("{axis}_d{k}"));
        }
        h.push(format!("yaw_d{k}"));
    }
    for i in 0..3 {
        for j in 0..3 {
            h.push(format!("r{i}{j}"));
        }
    }
    h.extend(
        [
            "wx", "wy", "wz", "u1", "u2x", "u2y", "u2z", "f1", "f2", "f3", "f4", "event",
        ]
        .map(String::from),
    );
    h
}

/// Comma-separated trace with one header row; floats in shortest
/// round-trip form.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut s = trace_header().join(",");
    s.push('\n');
    for r in trace {
        let _ = write!(s, "{}", r.t);
        for k in 0..5 {
            let p = r.sample.position[k];
            let _ = write!(s, ",{},{},{},{}", p.x, p.y, p.z, r.sample.yaw[k]);
        }
        let m: &Matrix3<f64> = &r.state.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let _ = write!(s, ",{}", m[(i, j)]);
            }
        }
        let w = r.state.angular_velocity;
        let u = r.input.moment;
        let _ = write!(
            s,
            ",{},{},{},{},{},{},{}",
            w.x, w.y, w.z, r.input.thrust, u.x, u.y, u.z
        );
        let _ = write!(
            s,
            ",{},{},{},{}",
            r.rotors[0], r.rotors[1], r.rotors[2], r.rotors[3]
        );
        let _ = writeln!(s, ",{}", r.event.as_str());
    }
    s
}

/// One JSON object per line: `{"t", "type", "payload"}`.
pub fn events_jsonl(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
        .collect()
}
