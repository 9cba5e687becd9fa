//! Offline planning pipeline (RRT*, LOS, yaw, QP) and online repair of the
//! trajectory when new obstacles block it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{
    inflate_all, segment_collision_free, Cuboid, FlightSpace, GeometryError, Vec3,
};
use crate::los::los_prune;
use crate::rrt_star::{
    build_tree_with_rng, connect_start, grow, insert, RrtError, RrtParams, Steer, Tree,
};
use crate::spline::{
    optimize_flat, segment_times, FlatBoundary, FlatTrajectory, SplineConfig, SplineError,
};
use crate::yaw::{yaw_waypoints, FlatPath, PathError};

/// Knots closer than this to the replan instant count as already passed.
const KNOT_EPS: f64 = 1e-9;

/// Travel time (s) over which a replanned path keeps at least the current
/// speed.
const PACE_HORIZON: f64 = 1.0;
const MAX_PACE: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planning input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Rrt(#[from] RrtError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("current position {0:?} lies inside an inflated obstacle")]
    CurrentPositionBlocked(Vec3),
    #[error("target lies inside an inflated obstacle")]
    TargetBlocked,
    #[error("trajectory still collides at t = {time} s after {refinements} refinements")]
    Infeasible { time: f64, refinements: usize },
}

impl PlanError {
    /// True for errors caused by bad input rather than a failed search.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PlanError::InvalidInput(_)
                | PlanError::Geometry(_)
                | PlanError::Rrt(RrtError::InvalidInput(_) | RrtError::InvalidParams(_))
                | PlanError::Spline(SplineError::InvalidConfig(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub rrt: RrtParams,
    /// Node budget of the local repair search.
    pub local_nodes: usize,
    pub position: SplineConfig,
    pub yaw: SplineConfig,
    /// Obstacle inflation margin (m).
    pub margin: f64,
    /// Sampling step of the trajectory collision check (s).
    pub check_dt: f64,
    /// Maximum number of segment subdivisions when the polynomial leaves
    /// the collision-free corridor.
    pub max_refinements: usize,
    /// Extra clearances (m) for repeating the path search when subdivision
    /// does not converge, tried in order. The trajectory is still checked
    /// against the plain margin.
    pub retry_clearance: Vec<f64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            rrt: RrtParams::default(),
            local_nodes: 400,
            position: SplineConfig::minimum_snap(),
            yaw: SplineConfig::minimum_yaw_acceleration(),
            margin: 0.3,
            check_dt: 0.01,
            max_refinements: 8,
            retry_clearance: vec![0.05, 0.1, 0.2],
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        self.rrt.validate()?;
        self.position.validate()?;
        self.yaw.validate()?;
        if !(self.margin >= 0.0) {
            return Err(GeometryError::NegativeMargin(self.margin).into());
        }
        if !(self.check_dt > 0.0) {
            return Err(PlanError::InvalidInput(format!(
                "check_dt must be positive, got {}",
                self.check_dt
            )));
        }
        if self
            .retry_clearance
            .iter()
            .any(|c| !(*c > 0.0 && c.is_finite()))
        {
            return Err(PlanError::InvalidInput(
                "retry clearances must be positive".into(),
            ));
        }
        if self.local_nodes < 2 {
            return Err(PlanError::InvalidInput(
                "local_nodes must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Earliest sample time in `[from, end]` (step `dt`, end included) at which
/// the position lies inside one of `obstacles`; `None` when feasible.
pub fn trajectory_feasible(
    traj: &FlatTrajectory,
    obstacles: &[Cuboid],
    dt: f64,
    from: f64,
) -> Option<f64> {
    assert!(dt > 0.0, "dt must be positive");
    if obstacles.is_empty() {
        return None;
    }
    let end = traj.end_time();
    let from = from.max(traj.start_time());
    let steps = ((end - from) / dt).floor() as usize;
    (0..=steps)
        .map(|k| from + k as f64 * dt)
        .chain(std::iter::once(end))
        .find(|&t| {
            let p = traj.position(t).expect("sample inside span");
            obstacles.iter().any(|o| o.contains(&p))
        })
}

/// Inserts the midpoints of the first two segments when the path has at
/// least two segments; yaws keep their endpoints and are recomputed from
/// the headings, segment times are recomputed.
pub fn bisect_first_segments(
    path: &FlatPath,
    config: &SplineConfig,
) -> Result<FlatPath, PathError> {
    if path.len() < 3 {
        return Ok(path.clone());
    }
    let p = path.positions();
    let mut positions = vec![p[0], 0.5 * (p[0] + p[1]), p[1], 0.5 * (p[1] + p[2])];
    positions.extend_from_slice(&p[2..]);
    let yaws = path.yaws();
    FlatPath::from_positions(positions, yaws[0], *yaws.last().unwrap(), config)
}

/// Planner state carried from the offline step into the online loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanContext {
    space: FlightSpace,
    config: PlanConfig,
    obstacles: Vec<Cuboid>,
    inflated: Vec<Cuboid>,
    tree: Tree,
    raw_path: Vec<Vec3>,
    path: FlatPath,
    trajectory: FlatTrajectory,
    target: Vec3,
    target_yaw: f64,
}

/// What a replan call did.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplanReport {
    /// False when the new obstacles did not touch the remaining plan.
    pub changed: bool,
    /// Edge range `[first, last]` of the remaining path that was replaced.
    pub blocked: Option<(usize, usize)>,
    /// True when the local repair failed and a full search was run.
    pub fallback: bool,
    pub refinements: usize,
    /// Path searches repeated with extra clearance.
    pub retries: usize,
    /// Remaining waypoints before the repair (first is the current position).
    pub old_waypoints: Vec<Vec3>,
}

impl PlanContext {
    /// Offline block: inflate, RRT*, LOS, yaw, QP from rest to rest.
    /// `obstacles` are raw (not inflated).
    pub fn plan_offline(
        space: FlightSpace,
        start: Vec3,
        start_yaw: f64,
        target: Vec3,
        target_yaw: f64,
        obstacles: &[Cuboid],
        config: PlanConfig,
    ) -> Result<Self, PlanError> {
        config.validate()?;
        let inflated = inflate_all(obstacles, config.margin)?;
        let start_state = FlatBoundary::rest(
            start,
            start_yaw,
            config.position.boundary_order(),
            config.yaw.boundary_order(),
        );
        let mut attempt = 0;
        let (tree, raw_path, path, trajectory) = loop {
            let search = clearance_set(obstacles, &config, attempt, &[start, target])?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.rrt.seed);
            let (tree, raw_path) =
                build_tree_with_rng(&start, &target, &space, &search, &config.rrt, &mut rng)?;
            let pruned = los_prune(&raw_path, &search);
            let path = FlatPath::from_positions(pruned, start_yaw, target_yaw, &config.position)?;
            match solve_feasible(path, 0.0, &Vec3::zeros(), &start_state, &inflated, &config) {
                Ok((path, trajectory, _)) => break (tree, raw_path, path, trajectory),
                Err(PlanError::Infeasible { .. }) if attempt < config.retry_clearance.len() => {
                    attempt += 1
                }
                Err(e) => return Err(e),
            }
        };
        Ok(Self {
            space,
            config,
            obstacles: obstacles.to_vec(),
            inflated,
            tree,
            raw_path,
            path,
            trajectory,
            target,
            target_yaw,
        })
    }

    pub fn space(&self) -> &FlightSpace {
        &self.space
    }

    pub fn config(&self) -> &PlanConfig {
        &self.config
    }

    /// Known raw obstacles.
    pub fn obstacles(&self) -> &[Cuboid] {
        &self.obstacles
    }

    pub fn inflated_obstacles(&self) -> &[Cuboid] {
        &self.inflated
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// RRT* path of the offline plan before pruning.
    pub fn raw_path(&self) -> &[Vec3] {
        &self.raw_path
    }

    pub fn path(&self) -> &FlatPath {
        &self.path
    }

    pub fn trajectory(&self) -> &FlatTrajectory {
        &self.trajectory
    }

    pub fn target(&self) -> Vec3 {
        self.target
    }

    /// Final yaw waypoint of the current path.
    pub fn final_yaw(&self) -> f64 {
        *self.path.yaws().last().unwrap()
    }

    /// Remaining waypoints at time `t`: the current position followed by
    /// every waypoint whose knot lies after `t`.
    pub fn remaining_waypoints(&self, t: f64) -> Result<(Vec<Vec3>, usize), PlanError> {
        let knots = self.trajectory.knots();
        let first = knots
            .partition_point(|&k| k <= t + KNOT_EPS)
            .min(knots.len() - 1);
        let mut out = vec![self.trajectory.position(t)?];
        out.extend_from_slice(&self.path.positions()[first..]);
        Ok((out, first))
    }

    /// Adds `new_obstacles` to the known set (dropping known boxes that a
    /// new box contains) and repairs the remaining plan from
    /// `current_time` if they block it.
    pub fn replan<R: Rng + ?Sized>(
        &mut self,
        current_time: f64,
        new_obstacles: &[Cuboid],
        rng: &mut R,
    ) -> Result<ReplanReport, PlanError> {
        if !(current_time >= self.trajectory.start_time()
            && current_time <= self.trajectory.end_time())
        {
            return Err(PlanError::InvalidInput(format!(
                "replan time {current_time} outside trajectory span"
            )));
        }
        let new_inflated = inflate_all(new_obstacles, self.config.margin)?;
        self.obstacles
            .retain(|o| !new_obstacles.iter().any(|n| n.contains_box(o)));
        self.obstacles.extend_from_slice(new_obstacles);
        self.inflated = inflate_all(&self.obstacles, self.config.margin)?;
        if let Some(pruned) = self.tree.pruned(&new_inflated) {
            self.tree = pruned;
        }

        let (mut remaining, mut first_knot) = self.remaining_waypoints(current_time)?;
        let velocity = self.trajectory.sample(current_time)?.position[1];
        // a waypoint reached within the minimum segment time counts as passed
        let reach = velocity.norm() * self.config.position.min_segment_time;
        while remaining.len() > 2
            && (remaining[1] - remaining[0]).norm() < reach
            && segment_collision_free(&remaining[0], &remaining[2], &self.inflated)
        {
            remaining.remove(1);
            first_knot += 1;
        }
        let mut report = ReplanReport {
            changed: false,
            blocked: None,
            fallback: false,
            refinements: 0,
            retries: 0,
            old_waypoints: remaining.clone(),
        };
        let now = remaining[0];
        if self.inflated.iter().any(|o| o.contains(&now)) {
            return Err(PlanError::CurrentPositionBlocked(now));
        }
        if self.inflated.iter().any(|o| o.contains(&self.target)) {
            return Err(PlanError::TargetBlocked);
        }

        let mut bad: Vec<usize> = remaining
            .windows(2)
            .enumerate()
            .filter(|(_, w)| !segment_collision_free(&w[0], &w[1], &self.inflated))
            .map(|(e, _)| e)
            .collect();
        if let Some(tc) = trajectory_feasible(
            &self.trajectory,
            &self.inflated,
            self.config.check_dt,
            current_time,
        ) {
            let seg = self.trajectory.x.segment_index(tc)?;
            bad.push(
                (seg + 1)
                    .saturating_sub(first_knot)
                    .min(remaining.len() - 2),
            );
        }
        let (Some(&a), Some(&b)) = (bad.iter().min(), bad.iter().max()) else {
            return Ok(report);
        };
        report.changed = true;
        report.blocked = Some((a, b));

        let yaw_now = self.trajectory.yaw.evaluate(current_time, 0)?;
        // join the old trajectory up to the continuity order
        let start = self.trajectory.boundary(
            current_time,
            self.config
                .position
                .continuity
                .max(self.config.position.boundary_order()),
            self.config
                .yaw
                .continuity
                .max(self.config.yaw.boundary_order()),
        )?;
        let mut attempt = 0;
        let (path, trajectory, refinements) = loop {
            // retries repair everything from the current position on
            let (a, b) = if attempt == 0 {
                (a, b)
            } else {
                (0, remaining.len() - 2)
            };
            report.blocked = Some((a, b));
            let anchors = [now, remaining[a], remaining[b + 1], self.target];
            let search = clearance_set(&self.obstacles, &self.config, attempt, &anchors)?;
            let positions = match self.local_repair(&remaining[a..=b + 1], &search, rng) {
                Some(detour) => {
                    let detour = los_prune(&detour, &search);
                    let mut p = remaining[..a].to_vec();
                    p.extend_from_slice(&detour);
                    p.extend_from_slice(&remaining[b + 2..]);
                    p
                }
                None => {
                    report.fallback = true;
                    let (tree, raw) = build_tree_with_rng(
                        &now,
                        &self.target,
                        &self.space,
                        &search,
                        &self.config.rrt,
                        rng,
                    )?;
                    self.tree = tree;
                    los_prune(&raw, &search)
                }
            };
            let yaws = yaw_waypoints(&positions, yaw_now, self.target_yaw)?;
            let times = segment_times(&positions, &yaws, &self.config.position)?;
            let path = FlatPath::new(positions, yaws, times)?;
            let path = split_single_segment(
                bisect_first_segments(&path, &self.config.position)?,
                &self.config.position,
            )?;
            let path = retime(path, &self.config.position, &velocity)?;
            match solve_feasible(
                path,
                current_time,
                &velocity,
                &start,
                &self.inflated,
                &self.config,
            ) {
                Ok(solved) => break solved,
                Err(PlanError::Infeasible { .. })
                    if attempt < self.config.retry_clearance.len() =>
                {
                    attempt += 1
                }
                Err(e) => return Err(e),
            }
        };
        report.retries = attempt;
        report.refinements = refinements;
        self.path = path;
        self.trajectory = trajectory;
        Ok(report)
    }

    /// RRT* rooted at the last waypoint of `stretch`, seeded with surviving
    /// tree nodes near the stretch and sampled in its neighborhood, then
    /// connected to the first waypoint. Returns `[before, ..., after]`.
    fn local_repair<R: Rng + ?Sized>(
        &self,
        stretch: &[Vec3],
        obstacles: &[Cuboid],
        rng: &mut R,
    ) -> Option<Vec<Vec3>> {
        let rho = self.config.rrt.rho;
        let before = stretch[0];
        let after = *stretch.last().unwrap();
        let mut tree = Tree::new(after);
        let near_stretch = |p: &Vec3| {
            stretch
                .windows(2)
                .any(|w| point_segment_distance(p, &w[0], &w[1]) <= 2.0 * rho)
        };
        for p in self.tree.nodes() {
            if near_stretch(p) && !obstacles.iter().any(|o| o.contains(p)) {
                insert(&mut tree, p, obstacles, Steer::Exact, rho);
            }
        }
        let bbox = Cuboid::bounding(stretch)?;
        let lo = bbox
            .min()
            .add_scalar(-2.0 * rho)
            .sup(&self.space.bounds.min());
        let hi = bbox
            .max()
            .add_scalar(2.0 * rho)
            .inf(&self.space.bounds.max());
        let region = Cuboid::new(lo, hi).ok()?;
        let params = RrtParams {
            max_nodes: self.config.local_nodes.max(tree.len()),
            ..self.config.rrt
        };
        grow(&mut tree, &region, obstacles, &params, rng);
        connect_start(&mut tree, &before, obstacles, rho)
    }
}

/// A one-segment path cannot honour a full start state and a rest end
/// state at once; split it at the midpoint.
fn split_single_segment(path: FlatPath, config: &SplineConfig) -> Result<FlatPath, PathError> {
    if path.len() != 2 {
        return Ok(path);
    }
    let p = path.positions();
    let yaws = path.yaws();
    FlatPath::from_positions(
        vec![p[0], 0.5 * (p[0] + p[1]), p[1]],
        yaws[0],
        yaws[1],
        config,
    )
}

/// Obstacles inflated by the margin plus the extra clearance of retry
/// `attempt` (none for attempt 0). Boxes whose enlarged form would swallow
/// an anchor point keep the plain margin.
fn clearance_set(
    obstacles: &[Cuboid],
    config: &PlanConfig,
    attempt: usize,
    anchors: &[Vec3],
) -> Result<Vec<Cuboid>, PlanError> {
    let extra = if attempt == 0 {
        0.0
    } else {
        config.retry_clearance[attempt - 1]
    };
    obstacles
        .iter()
        .map(|o| {
            let big = o.inflate(config.margin + extra)?;
            if anchors.iter().any(|p| big.contains(p)) {
                Ok(o.inflate(config.margin)?)
            } else {
                Ok(big)
            }
        })
        .collect()
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * s)).norm()
}

/// Segment times for a path entered with `velocity`. Segments starting
/// within `PACE_HORIZON` seconds of travel keep the velocity component along
/// them, capped at `MAX_PACE * avg_speed`, so the new trajectory neither
/// brakes nor surges right after a replan.
fn paced_times(
    positions: &[Vec3],
    yaws: &[f64],
    config: &SplineConfig,
    velocity: &Vec3,
) -> Result<Vec<f64>, SplineError> {
    let mut times = segment_times(positions, yaws, config)?;
    let horizon = velocity.norm() * PACE_HORIZON;
    let mut travelled = 0.0;
    for (j, w) in positions.windows(2).enumerate() {
        if travelled >= horizon {
            break;
        }
        let d = w[1] - w[0];
        let len = d.norm();
        travelled += len;
        if len == 0.0 {
            continue;
        }
        let pace = (velocity.dot(&d) / len).min(MAX_PACE * config.avg_speed);
        if pace > config.avg_speed {
            times[j] = (len / pace)
                .max((yaws[j + 1] - yaws[j]).abs() / config.avg_yaw_rate)
                .max(config.min_segment_time);
        }
    }
    Ok(times)
}

fn retime(path: FlatPath, config: &SplineConfig, velocity: &Vec3) -> Result<FlatPath, PlanError> {
    let times = paced_times(path.positions(), path.yaws(), config, velocity)?;
    Ok(FlatPath::new(
        path.positions().to_vec(),
        path.yaws().to_vec(),
        times,
    )?)
}

/// Solves the QP for `path` and, while the polynomial hits an obstacle,
/// inserts the midpoint of the offending segment and solves again.
fn solve_feasible(
    mut path: FlatPath,
    t0: f64,
    velocity: &Vec3,
    start: &FlatBoundary,
    inflated: &[Cuboid],
    config: &PlanConfig,
) -> Result<(FlatPath, FlatTrajectory, usize), PlanError> {
    let mut refinements = 0;
    loop {
        let (traj, _) = optimize_flat(&path, t0, start, &config.position, &config.yaw)?;
        let Some(tc) = trajectory_feasible(&traj, inflated, config.check_dt, t0) else {
            return Ok((path, traj, refinements));
        };
        if refinements >= config.max_refinements {
            return Err(PlanError::Infeasible {
                time: tc,
                refinements,
            });
        }
        let seg = traj.x.segment_index(tc)?;
        let mut positions = path.positions().to_vec();
        positions.insert(seg + 1, 0.5 * (positions[seg] + positions[seg + 1]));
        let yaws = path.yaws();
        let new_yaws = yaw_waypoints(&positions, yaws[0], *yaws.last().unwrap())?;
        let times = paced_times(&positions, &new_yaws, &config.position, velocity)?;
        path = FlatPath::new(positions, new_yaws, times)?;
        refinements += 1;
    }
}
