//! Quadcopter rigid-body model and the flatness map from position/yaw
//! derivatives to full state and inputs.
//!
//! Attitude uses the Z-X-Y Euler convention `R = Rz(psi) Rx(phi) Ry(theta)`.
//! Angular velocity in [`QuadState`] is expressed in the body frame.

use nalgebra::{Matrix3, Vector4};
use thiserror::Error;

use crate::geometry::Vec3;

/// Below this thrust-direction norm the attitude is undefined.
pub const FREE_FALL_EPS: f64 = 1e-6;
/// Below this `|x_C . x_B|` the yaw-attitude split is singular.
pub const ATTITUDE_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatnessError {
    #[error("invalid quadcopter model: {0}")]
    InvalidModel(String),
    #[error("free-fall singularity: |acc + g e_z| = {norm}")]
    FreeFall { norm: f64 },
    #[error("attitude singular: body z axis is aligned with the heading direction")]
    AttitudeSingular,
    #[error("rotation rate inconsistent with rotation: skew asymmetry {asymmetry}")]
    InconsistentRate { asymmetry: f64 },
    #[error("rotor {rotor} would need negative force {force} N")]
    RotorInfeasible { rotor: usize, force: f64 },
}

/// Physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadModel {
    /// Mass (kg).
    pub mass: f64,
    /// Inertia about the CoM in body axes (kg m^2).
    pub inertia: Matrix3<f64>,
    /// Rotor-to-CoM arm length (m).
    pub arm_length: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
    /// Rotor moment coefficient, `M_i = k_M F_i` (m).
    pub moment_coefficient: f64,
}

impl Default for QuadModel {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: Matrix3::from_diagonal(&Vec3::new(0.0082, 0.0082, 0.0149)),
            arm_length: 0.17,
            gravity: 9.81,
            moment_coefficient: 0.016,
        }
    }
}

impl QuadModel {
    pub fn validate(&self) -> Result<(), FlatnessError> {
        let bad = |m: &str| Err(FlatnessError::InvalidModel(m.into()));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive");
        }
        if !(self.arm_length > 0.0) {
            return bad("arm length must be positive");
        }
        if !(self.moment_coefficient > 0.0) {
            return bad("moment coefficient must be positive");
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return bad("gravity must be finite and non-negative");
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 * self.inertia.amax() {
            return bad("inertia must be symmetric");
        }
        if self.inertia.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        Ok(())
    }
}

/// Position, velocity, attitude (world from body) and body angular
/// velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub rotation: Matrix3<f64>,
    pub angular_velocity: Vec3,
}

impl QuadState {
    pub fn hover(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            rotation: Matrix3::identity(),
            angular_velocity: Vec3::zeros(),
        }
    }
}

/// Net thrust (N) and body moment (N m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadInput {
    pub thrust: f64,
    pub moment: Vec3,
}

/// Time derivative of a [`QuadState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub rotation_rate: Matrix3<f64>,
    pub angular_acceleration: Vec3,
}

/// Flat outputs and their derivatives: `position[k]` and `yaw[k]` are the
/// `k`-th time derivatives, `k = 0..=4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatSample {
    pub position: [Vec3; 5],
    pub yaw: [f64; 5],
}

impl FlatSample {
    /// At rest at `position` with heading `yaw`.
    pub fn rest(position: Vec3, yaw: f64) -> Self {
        let mut s = Self {
            position: [Vec3::zeros(); 5],
            yaw: [0.0; 5],
        };
        s.position[0] = position;
        s.yaw[0] = yaw;
        s
    }
}

/// Skew matrix with `skew(w) v = w x v`.
pub fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rz(psi) Rx(phi) Ry(theta)`.
pub fn euler_zxy_to_rotation(psi: f64, phi: f64, theta: f64) -> Matrix3<f64> {
    let (sps, cps) = psi.sin_cos();
    let (sph, cph) = phi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    Matrix3::new(
        cps * cth - sps * sph * sth,
        -sps * cph,
        cps * sth + sps * sph * cth,
        sps * cth + cps * sph * sth,
        cps * cph,
        sps * sth - cps * sph * cth,
        -cph * sth,
        sph,
        cph * cth,
    )
}

/// Inverse of [`euler_zxy_to_rotation`]: `(psi, phi, theta)` with
/// `phi` in `[-pi/2, pi/2]`. Ill-conditioned near `|phi| = pi/2`.
pub fn rotation_to_euler_zxy(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let phi = r[(2, 1)].clamp(-1.0, 1.0).asin();
    let psi = (-r[(0, 1)]).atan2(r[(1, 1)]);
    let theta = (-r[(2, 0)]).atan2(r[(2, 2)]);
    (psi, phi, theta)
}

/// World-frame angular velocity from `S(w) = Rdot R^T`. The body-frame
/// rate is `R^T w`.
pub fn omega_from_rotation_rate(
    r: &Matrix3<f64>,
    r_dot: &Matrix3<f64>,
) -> Result<Vec3, FlatnessError> {
    let s = r_dot * r.transpose();
    let asymmetry = (s + s.transpose()).norm();
    if asymmetry > 1e-6 {
        return Err(FlatnessError::InconsistentRate { asymmetry });
    }
    Ok(Vec3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    ))
}

/// Rigid-body equations of motion.
pub fn forward_dynamics(
    state: &QuadState,
    input: &QuadInput,
    model: &QuadModel,
) -> StateDerivative {
    let r = &state.rotation;
    let w = &state.angular_velocity;
    let acceleration = r.column(2) * (input.thrust / model.mass) - Vec3::z() * model.gravity;
    let iw = model.inertia * w;
    let inv = model.inertia.try_inverse().unwrap_or_else(Matrix3::zeros);
    StateDerivative {
        velocity: state.velocity,
        acceleration,
        rotation_rate: r * skew(w),
        angular_acceleration: inv * (input.moment - w.cross(&iw)),
    }
}

/// Full output of the flatness map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatMapOutput {
    pub state: QuadState,
    pub input: QuadInput,
    /// Body angular acceleration.
    pub angular_acceleration: Vec3,
}

/// `(x, u)` from flat outputs and their derivatives up to order 4.
pub fn flat_to_state_input(
    s: &FlatSample,
    model: &QuadModel,
) -> Result<(QuadState, QuadInput), FlatnessError> {
    flat_map(s, model).map(|o| (o.state, o.input))
}

/// Flatness map, also returning the body angular acceleration.
pub fn flat_map(s: &FlatSample, model: &QuadModel) -> Result<FlatMapOutput, FlatnessError> {
    let m = model.mass;
    let [_, vel, acc, jerk, snap] = s.position;
    let [psi, psi_d, psi_dd, _, _] = s.yaw;

    let thrust_vec = acc + Vec3::z() * model.gravity;
    let norm = thrust_vec.norm();
    if !(norm >= FREE_FALL_EPS) {
        return Err(FlatnessError::FreeFall { norm });
    }
    let u1 = m * norm;
    let zb = thrust_vec / norm;
    let xc = Vec3::new(psi.cos(), psi.sin(), 0.0);
    let yb_raw = zb.cross(&xc);
    let yb = yb_raw / yb_raw.norm();
    let xb = yb.cross(&zb);
    let cos_theta = xc.dot(&xb);
    if cos_theta.abs() < ATTITUDE_EPS {
        return Err(FlatnessError::AttitudeSingular);
    }
    let rotation = Matrix3::from_columns(&[xb, yb, zb]);

    // angular velocity
    let u1_d = m * zb.dot(&jerk);
    let h_w = (jerk - zb * zb.dot(&jerk)) * (m / u1);
    let p = -h_w.dot(&yb);
    let q = h_w.dot(&xb);
    let phi_d = (p - psi_d * xb.z) / cos_theta;
    let theta_d = q - psi_d * yb.z;
    let r = psi_d * zb.z + phi_d * xc.dot(&zb);
    let omega_b = Vec3::new(p, q, r);
    let omega_w = rotation * omega_b;

    // angular acceleration
    let zb_d = omega_w.cross(&zb);
    let u1_dd = m * zb.dot(&snap) + u1 * (p * p + q * q);
    let h_a = (snap * m - zb * u1_dd - zb_d * (2.0 * u1_d)) / u1 - omega_w.cross(&zb_d);
    let q_d = h_a.dot(&xb);
    let p_d = -h_a.dot(&yb);
    let xc_d = Vec3::z().cross(&xc) * psi_d;
    let yb_d = omega_w.cross(&yb);
    let phi_dd =
        (p_d - psi_dd * xb.z - phi_d * xc_d.dot(&xb) - theta_d * yb_d.dot(&xb)) / cos_theta;
    let r_d =
        psi_dd * zb.z + phi_dd * xc.dot(&zb) + phi_d * xc_d.dot(&zb) + theta_d * yb_d.dot(&zb);
    let alpha_b = Vec3::new(p_d, q_d, r_d);

    let moment = model.inertia * alpha_b + omega_b.cross(&(model.inertia * omega_b));
    Ok(FlatMapOutput {
        state: QuadState {
            position: s.position[0],
            velocity: vel,
            rotation,
            angular_velocity: omega_b,
        },
        input: QuadInput { thrust: u1, moment },
        angular_acceleration: alpha_b,
    })
}

/// Rotor forces for an input, without the non-negativity check.
pub fn rotor_forces(input: &QuadInput, model: &QuadModel) -> Vector4<f64> {
    let a = input.moment.x / model.arm_length;
    let b = input.moment.y / model.arm_length;
    let c = input.moment.z / model.moment_coefficient;
    let odd = 0.5 * (input.thrust + c);
    let even = 0.5 * (input.thrust - c);
    Vector4::new(
        0.5 * (odd - b),
        0.5 * (even + a),
        0.5 * (odd + b),
        0.5 * (even - a),
    )
}

/// Inverts `u1 = sum F_i`, `u2 = [L(F2 - F4), L(F3 - F1), k_M(F1 - F2 + F3 - F4)]`.
pub fn allocate_rotors(
    input: &QuadInput,
    model: &QuadModel,
) -> Result<Vector4<f64>, FlatnessError> {
    let f = rotor_forces(input, model);
    if let Some((i, force)) = f.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(FlatnessError::RotorInfeasible {
            rotor: i + 1,
            force: *force,
        });
    }
    Ok(f)
}

/// Net thrust and moment produced by the given rotor forces.
pub fn rotor_input(forces: &Vector4<f64>, model: &QuadModel) -> QuadInput {
    let [f1, f2, f3, f4] = [forces[0], forces[1], forces[2], forces[3]];
    QuadInput {
        thrust: f1 + f2 + f3 + f4,
        moment: Vec3::new(
            model.arm_length * (f2 - f4),
            model.arm_length * (f3 - f1),
            model.moment_coefficient * (f1 - f2 + f3 - f4),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zxy_matches_axis_product() {
        for (psi, phi, theta) in [(0.3, -0.2, 0.7), (-2.0, 1.1, 0.1), (3.0, 0.0, -1.3)] {
            let direct = euler_zxy_to_rotation(psi, phi, theta);
            let prod = rot_z(psi) * rot_x(phi) * rot_y(theta);
            assert!((direct - prod).amax() < 1e-12);
            let (a, b, c) = rotation_to_euler_zxy(&direct);
            assert!(
                (a - psi).abs() < 1e-12 && (b - phi).abs() < 1e-12 && (c - theta).abs() < 1e-12
            );
        }
    }

    #[test]
    fn pure_yaw_maps_x_to_y() {
        let r = euler_zxy_to_rotation(FRAC_PI_2, 0.0, 0.0);
        assert!((r * Vec3::x() - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn omega_extraction_inverts_skew() {
        let r = euler_zxy_to_rotation(0.4, 0.2, -0.3);
        let w = Vec3::new(0.3, -1.2, 2.0);
        let r_dot = skew(&w) * r;
        assert!((omega_from_rotation_rate(&r, &r_dot).unwrap() - w).norm() < 1e-12);
        assert!(omega_from_rotation_rate(&r, &Matrix3::identity()).is_err());
    }

    #[test]
    fn hover() {
        let model = QuadModel::default();
        let (state, input) =
            flat_to_state_input(&FlatSample::rest(Vec3::new(1.0, 2.0, 3.0), 0.0), &model).unwrap();
        assert_eq!(input.thrust, model.mass * model.gravity);
        assert!(input.moment.amax() < 1e-12);
        assert!((state.rotation - Matrix3::identity()).amax() < 1e-15);
        let f = allocate_rotors(&input, &model).unwrap();
        for i in 0..4 {
            assert!((f[i] - model.mass * model.gravity / 4.0).abs() < 1e-12);
        }
        let d = forward_dynamics(&state, &input, &model);
        assert!(d.acceleration.norm() < 1e-12);
        assert!(d.angular_acceleration.norm() < 1e-12);
    }

    #[test]
    fn free_fall_is_reported() {
        let model = QuadModel::default();
        let mut s = FlatSample::rest(Vec3::zeros(), 0.0);
        s.position[2] = Vec3::new(0.0, 0.0, -model.gravity);
        assert!(matches!(
            flat_to_state_input(&s, &model),
            Err(FlatnessError::FreeFall { .. })
        ));
        let d = forward_dynamics(
            &QuadState::hover(Vec3::zeros()),
            &QuadInput {
                thrust: 0.0,
                moment: Vec3::zeros(),
            },
            &model,
        );
        assert_eq!(d.acceleration, Vec3::new(0.0, 0.0, -model.gravity));
    }

    #[test]
    fn vertical_acceleration() {
        let model = QuadModel::default();
        let mut s = FlatSample::rest(Vec3::zeros(), 0.5);
        s.position[2] = Vec3::new(0.0, 0.0, 1.5);
        let (state, input) = flat_to_state_input(&s, &model).unwrap();
        assert!((input.thrust - model.mass * (model.gravity + 1.5)).abs() < 1e-12);
        assert!((state.rotation.column(2) - Vec3::z()).norm() < 1e-15);
        let (psi, _, _) = rotation_to_euler_zxy(&state.rotation);
        assert!((psi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roll_moment_allocation() {
        let model = QuadModel::default();
        let input = QuadInput {
            thrust: 10.0,
            moment: Vec3::new(0.2, 0.0, 0.0),
        };
        let f = allocate_rotors(&input, &model).unwrap();
        assert!((f[1] - f[3] - 0.2 / model.arm_length).abs() < 1e-12);
        assert!((f[0] - f[2]).abs() < 1e-12);
        let back = rotor_input(&f, &model);
        assert!((back.thrust - 10.0).abs() < 1e-12 && (back.moment - input.moment).norm() < 1e-12);
    }

    #[test]
    fn negative_rotor_force_rejected() {
        let model = QuadModel::default();
        let input = QuadInput {
            thrust: 1.0,
            moment: Vec3::new(5.0, 0.0, 0.0),
        };
        assert!(matches!(
            allocate_rotors(&input, &model),
            Err(FlatnessError::RotorInfeasible { rotor: 4, .. })
        ));
    }

    #[test]
    fn invalid_models() {
        let mut m = QuadModel::default();
        assert!(m.validate().is_ok());
        m.inertia[(0, 0)] = -1.0;
        assert!(m.validate().is_err());
        let m = QuadModel {
            mass: 0.0,
            ..QuadModel::default()
        };
        assert!(m.validate().is_err());
    }
}
