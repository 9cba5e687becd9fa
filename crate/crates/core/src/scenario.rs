//! Scenario description and its TOML file format. Field names carry their
//! units (`_m`, `_s`, `_rad`, `_kg`).

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flatness::QuadModel;
use crate::geometry::{Cuboid, FlightSpace, Vec3};
use crate::perception::CameraModel;
use crate::replan::PlanConfig;
use crate::rrt_star::RrtParams;
use crate::spline::SplineConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position_m: [f64; 3],
    pub yaw_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min_m: [f64; 3],
    pub max_m: [f64; 3],
}

impl BoxSpec {
    pub fn cuboid(&self) -> Result<Cuboid, ScenarioError> {
        Cuboid::new(Vec3::from(self.min_m), Vec3::from(self.max_m))
            .map_err(|e| ScenarioError::Validation(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub min_m: [f64; 3],
    pub max_m: [f64; 3],
    /// Time the obstacle appears; 0 means present from the start.
    #[serde(default)]
    pub appear_s: f64,
}

impl ObstacleSpec {
    pub fn cuboid(&self) -> Result<Cuboid, ScenarioError> {
        BoxSpec {
            min_m: self.min_m,
            max_m: self.max_m,
        }
        .cuboid()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSpec {
    pub h_fov_rad: f64,
    pub v_fov_rad: f64,
    pub max_range_m: f64,
    pub rays_h: usize,
    pub rays_v: usize,
    pub noise_sigma_m: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        let c = CameraModel::default();
        Self {
            h_fov_rad: c.h_fov,
            v_fov_rad: c.v_fov,
            max_range_m: c.max_range,
            rays_h: c.rays_h,
            rays_v: c.rays_v,
            noise_sigma_m: c.noise_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSpec {
    pub max_nodes: usize,
    pub epsilon_m: f64,
    pub rho_m: f64,
    pub max_samples: usize,
    pub local_nodes: usize,
    pub margin_m: f64,
    pub check_dt_s: f64,
    pub max_refinements: usize,
    pub retry_clearance_m: Vec<f64>,
}

impl Default for PlannerSpec {
    fn default() -> Self {
        let p = PlanConfig::default();
        Self {
            max_nodes: p.rrt.max_nodes,
            epsilon_m: p.rrt.epsilon,
            rho_m: p.rrt.rho,
            max_samples: p.rrt.max_samples,
            local_nodes: p.local_nodes,
            margin_m: p.margin,
            check_dt_s: p.check_dt,
            max_refinements: p.max_refinements,
            retry_clearance_m: p.retry_clearance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineSpec {
    pub order: usize,
    pub weights: Vec<f64>,
    pub continuity: usize,
    pub avg_speed_m_s: f64,
    pub avg_yaw_rate_rad_s: f64,
    pub min_segment_time_s: f64,
}

impl From<&SplineConfig> for SplineSpec {
    fn from(c: &SplineConfig) -> Self {
        Self {
            order: c.order,
            weights: c.weights.clone(),
            continuity: c.continuity,
            avg_speed_m_s: c.avg_speed,
            avg_yaw_rate_rad_s: c.avg_yaw_rate,
            min_segment_time_s: c.min_segment_time,
        }
    }
}

impl From<&SplineSpec> for SplineConfig {
    fn from(s: &SplineSpec) -> Self {
        Self {
            order: s.order,
            weights: s.weights.clone(),
            continuity: s.continuity,
            avg_speed: s.avg_speed_m_s,
            avg_yaw_rate: s.avg_yaw_rate_rad_s,
            min_segment_time: s.min_segment_time_s,
        }
    }
}

fn default_position_spline() -> SplineSpec {
    (&SplineConfig::minimum_snap()).into()
}

fn default_yaw_spline() -> SplineSpec {
    (&SplineConfig::minimum_yaw_acceleration()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSpec {
    pub delta_m: f64,
    pub cluster_radius_m: f64,
    pub min_pts: usize,
    pub knn_k: usize,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self {
            delta_m: 0.3,
            cluster_radius_m: 0.15,
            min_pts: 10,
            knn_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub mass_kg: f64,
    /// Row-major inertia matrix (kg m^2).
    pub inertia_kg_m2: [[f64; 3]; 3],
    pub arm_length_m: f64,
    pub gravity_m_s2: f64,
    pub moment_coefficient_m: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let m = QuadModel::default();
        Self {
            mass_kg: m.mass,
            inertia_kg_m2: std::array::from_fn(|i| std::array::from_fn(|j| m.inertia[(i, j)])),
            arm_length_m: m.arm_length,
            gravity_m_s2: m.gravity,
            moment_coefficient_m: m.moment_coefficient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSpec {
    pub sensing_period_s: f64,
    pub sim_step_s: f64,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self {
            sensing_period_s: 0.167,
            sim_step_s: 0.01,
        }
    }
}

/// Everything needed to plan and simulate one mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub space: BoxSpec,
    pub start: Pose,
    pub target: Pose,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default = "default_position_spline")]
    pub position_spline: SplineSpec,
    #[serde(default = "default_yaw_spline")]
    pub yaw_spline: SplineSpec,
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub timing: TimingSpec,
}

impl Scenario {
    /// Minimal scenario in an empty space with default settings.
    pub fn empty(
        space: Cuboid,
        start: Vec3,
        start_yaw: f64,
        target: Vec3,
        target_yaw: f64,
    ) -> Self {
        Self {
            name: String::new(),
            seed: 0,
            space: BoxSpec {
                min_m: space.min().into(),
                max_m: space.max().into(),
            },
            start: Pose {
                position_m: start.into(),
                yaw_rad: start_yaw,
            },
            target: Pose {
                position_m: target.into(),
                yaw_rad: target_yaw,
            },
            obstacles: Vec::new(),
            camera: CameraSpec::default(),
            planner: PlannerSpec::default(),
            position_spline: default_position_spline(),
            yaw_spline: default_yaw_spline(),
            detection: DetectionSpec::default(),
            model: ModelSpec::default(),
            timing: TimingSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn flight_space(&self) -> Result<FlightSpace, ScenarioError> {
        Ok(FlightSpace::new(self.space.cuboid()?))
    }

    pub fn start_position(&self) -> Vec3 {
        Vec3::from(self.start.position_m)
    }

    pub fn target_position(&self) -> Vec3 {
        Vec3::from(self.target.position_m)
    }

    /// Ground-truth obstacles with their appearance times.
    pub fn timed_obstacles(&self) -> Result<Vec<(Cuboid, f64)>, ScenarioError> {
        self.obstacles
            .iter()
            .map(|o| Ok((o.cuboid()?, o.appear_s)))
            .collect()
    }

    /// Ground-truth obstacles present at time `t`.
    pub fn obstacles_at(&self, t: f64) -> Result<Vec<Cuboid>, ScenarioError> {
        Ok(self
            .timed_obstacles()?
            .into_iter()
            .filter(|(_, appear)| *appear <= t)
            .map(|(c, _)| c)
            .collect())
    }

    pub fn camera_model(&self) -> CameraModel {
        CameraModel {
            h_fov: self.camera.h_fov_rad,
            v_fov: self.camera.v_fov_rad,
            max_range: self.camera.max_range_m,
            rays_h: self.camera.rays_h,
            rays_v: self.camera.rays_v,
            noise_sigma: self.camera.noise_sigma_m,
        }
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            rrt: RrtParams {
                max_nodes: self.planner.max_nodes,
                epsilon: self.planner.epsilon_m,
                rho: self.planner.rho_m,
                seed: self.seed,
                max_samples: self.planner.max_samples,
            },
            local_nodes: self.planner.local_nodes,
            position: (&self.position_spline).into(),
            yaw: (&self.yaw_spline).into(),
            margin: self.planner.margin_m,
            check_dt: self.planner.check_dt_s,
            max_refinements: self.planner.max_refinements,
            retry_clearance: self.planner.retry_clearance_m.clone(),
        }
    }

    pub fn quad_model(&self) -> QuadModel {
        let i = &self.model.inertia_kg_m2;
        QuadModel {
            mass: self.model.mass_kg,
            inertia: Matrix3::from_fn(|r, c| i[r][c]),
            arm_length: self.model.arm_length_m,
            gravity: self.model.gravity_m_s2,
            moment_coefficient: self.model.moment_coefficient_m,
        }
    }

    /// Checks every section and that start and target are free.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| ScenarioError::Validation(m);
        let space = self.flight_space()?;
        self.plan_config()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.camera_model()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.quad_model()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if !(self.timing.sensing_period_s > 0.0 && self.timing.sim_step_s > 0.0) {
            return Err(invalid(
                "sensing period and sim step must be positive".into(),
            ));
        }
        if !(self.detection.delta_m > 0.0
            && self.detection.cluster_radius_m > 0.0
            && self.detection.knn_k >= 1)
        {
            return Err(invalid(
                "detection delta, cluster radius and k must be positive".into(),
            ));
        }
        let margin = self.planner.margin_m;
        let timed = self.timed_obstacles()?;
        if let Some((_, t)) = timed.iter().find(|(_, t)| !(*t >= 0.0 && t.is_finite())) {
            return Err(invalid(format!(
                "appearance time {t} must be finite and non-negative"
            )));
        }
        for (name, p, at_start) in [
            ("start", self.start_position(), true),
            ("target", self.target_position(), false),
        ] {
            if !space.contains(&p) {
                return Err(invalid(format!("{name} {p:?} is outside the flight space")));
            }
            for (o, appear) in &timed {
                if at_start && *appear > 0.0 {
                    continue;
                }
                let inflated = o.inflate(margin).map_err(|e| invalid(e.to_string()))?;
                if inflated.contains(&p) {
                    return Err(invalid(format!(
                        "{name} {p:?} lies inside an inflated obstacle"
                    )));
                }
            }
        }
        if (self.start_position() - self.target_position()).norm() < 1e-9 {
            return Err(invalid("start and target coincide".into()));
        }
        Ok(())
    }
}
