//! Yaw waypoints that keep the front camera pointed along the flight
//! direction, and the [`FlatPath`] bundle of position/yaw waypoints with
//! segment durations.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::geometry::Vec3;
use crate::spline::{segment_times, SplineConfig, SplineError};

/// Horizontal displacement below which a segment has no defined heading.
const VERTICAL_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("a path needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("length mismatch: {positions} positions, {yaws} yaws, {times} segment times")]
    LengthMismatch {
        positions: usize,
        yaws: usize,
        times: usize,
    },
    #[error("segment {index} has non-positive duration {duration}")]
    NonPositiveDuration { index: usize, duration: f64 },
    #[error("yaw jump of {jump} rad between waypoints {index} and {next}", next = index + 1)]
    YawJump { index: usize, jump: f64 },
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Yaw at each waypoint: the user-given start yaw first, then the heading
/// (`atan2(dy, dx)`) of the segment leaving each interior waypoint, then
/// the target yaw. Every value after the first is shifted by multiples of
/// 2pi so consecutive differences stay in `(-pi, pi]`; the final yaw is
/// therefore the target modulo 2pi. Interior waypoints whose outgoing
/// segment is vertical keep the previous yaw.
pub fn yaw_waypoints(
    positions: &[Vec3],
    psi_start: f64,
    psi_target: f64,
) -> Result<Vec<f64>, PathError> {
    let m = positions.len();
    if m < 2 {
        return Err(PathError::TooFewWaypoints(m));
    }
    let mut yaws = Vec::with_capacity(m);
    yaws.push(psi_start);
    for i in 1..m - 1 {
        let prev = yaws[i - 1];
        let d = positions[i + 1] - positions[i];
        let yaw = if d.x.hypot(d.y) < VERTICAL_EPS {
            prev
        } else {
            prev + wrap_angle(d.y.atan2(d.x) - prev)
        };
        yaws.push(yaw);
    }
    let prev = yaws[m - 2];
    yaws.push(prev + wrap_angle(psi_target - prev));
    Ok(yaws)
}

/// Position waypoints, yaw waypoints and the duration of each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPath {
    positions: Vec<Vec3>,
    yaws: Vec<f64>,
    segment_times: Vec<f64>,
}

impl FlatPath {
    pub fn new(
        positions: Vec<Vec3>,
        yaws: Vec<f64>,
        segment_times: Vec<f64>,
    ) -> Result<Self, PathError> {
        let m = positions.len();
        if m < 2 {
            return Err(PathError::TooFewWaypoints(m));
        }
        if yaws.len() != m || segment_times.len() != m - 1 {
            return Err(PathError::LengthMismatch {
                positions: m,
                yaws: yaws.len(),
                times: segment_times.len(),
            });
        }
        if let Some((index, &duration)) =
            segment_times.iter().enumerate().find(|(_, t)| !(**t > 0.0))
        {
            return Err(PathError::NonPositiveDuration { index, duration });
        }
        // slack for the rounding of prev + wrap(heading - prev)
        if let Some(index) = (0..m - 1).find(|&i| (yaws[i + 1] - yaws[i]).abs() > PI + 1e-9) {
            return Err(PathError::YawJump {
                index,
                jump: yaws[index + 1] - yaws[index],
            });
        }
        Ok(Self {
            positions,
            yaws,
            segment_times,
        })
    }

    /// Computes yaw waypoints and segment times for `positions`.
    pub fn from_positions(
        positions: Vec<Vec3>,
        psi_start: f64,
        psi_target: f64,
        config: &SplineConfig,
    ) -> Result<Self, PathError> {
        let yaws = yaw_waypoints(&positions, psi_start, psi_target)?;
        let times = segment_times(&positions, &yaws, config)?;
        Self::new(positions, yaws, times)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn yaws(&self) -> &[f64] {
        &self.yaws
    }

    pub fn segment_times(&self) -> &[f64] {
        &self.segment_times
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.segment_times.iter().sum()
    }

    /// Knot times starting at `t0`.
    pub fn knot_times(&self, t0: f64) -> Vec<f64> {
        std::iter::once(t0)
            .chain(self.segment_times.iter().scan(t0, |t, dt| {
                *t += dt;
                Some(*t)
            }))
            .collect()
    }
}
