//! Piecewise-polynomial trajectories for a single flat output, optimized as
//! an equality-constrained QP.
//!
//! Each segment `j` is a degree-`n` polynomial in local time
//! `tau = t - t_j`. The cost of a segment is
//! `sum_i w_i * integral_0^T (d^i P / dtau^i)^2 dtau = p^T Q p`. Waypoint
//! values are pinned at every knot, derivatives up to the continuity order
//! are continuous across interior knots, and the first/last knots carry
//! boundary states. Interior derivatives are free variables of the
//! optimization.
//!
//! Internally every segment is parameterized in normalized time
//! `s = tau / T_j` and the symmetric KKT matrix is equilibrated before the
//! LU solve; coefficients are converted back to local time on output.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::flatness::FlatSample;
use crate::geometry::Vec3;
use crate::yaw::FlatPath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid spline configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid spline problem: {0}")]
    InvalidProblem(String),
    #[error("constraint system is rank deficient at segment {segment}")]
    RankDeficient { segment: usize },
    #[error("KKT system could not be solved: {0}")]
    Numerical(String),
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

/// Polynomial order, cost weights, continuity and time-allocation
/// settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineConfig {
    /// Polynomial order `n` (each segment has `n + 1` coefficients).
    pub order: usize,
    /// `weights[i - 1]` is the weight `w_i` of the `i`-th derivative.
    pub weights: Vec<f64>,
    /// Derivative order kept continuous at interior knots.
    pub continuity: usize,
    /// Average speed for time allocation (m/s).
    pub avg_speed: f64,
    /// Average yaw rate for time allocation (rad/s).
    pub avg_yaw_rate: f64,
    /// Lower bound on every segment duration (s).
    pub min_segment_time: f64,
}

impl SplineConfig {
    /// Order 7, minimum snap, C4 across knots.
    pub fn minimum_snap() -> Self {
        Self::single_weight(7, 4, 4)
    }

    /// Order 7, minimum acceleration, C2 across knots (yaw default).
    pub fn minimum_yaw_acceleration() -> Self {
        Self::single_weight(7, 2, 2)
    }

    /// Only derivative `derivative` is penalized, with unit weight.
    pub fn single_weight(order: usize, derivative: usize, continuity: usize) -> Self {
        let mut weights = vec![0.0; order];
        if (1..=order).contains(&derivative) {
            weights[derivative - 1] = 1.0;
        }
        Self {
            order,
            weights,
            continuity,
            avg_speed: 0.6,
            avg_yaw_rate: 1.0,
            min_segment_time: 0.2,
        }
    }

    pub fn validate(&self) -> Result<(), SplineError> {
        let bad = |msg: String| Err(SplineError::InvalidConfig(msg));
        if self.order == 0 {
            return bad("order must be at least 1".into());
        }
        if self.weights.len() != self.order {
            return bad(format!(
                "expected {} weights (w_1..w_n), got {}",
                self.order,
                self.weights.len()
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and non-negative".into());
        }
        if !self.weights.iter().any(|w| *w > 0.0) {
            return bad("at least one weight must be positive".into());
        }
        for (name, v) in [
            ("avg_speed", self.avg_speed),
            ("avg_yaw_rate", self.avg_yaw_rate),
            ("min_segment_time", self.min_segment_time),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Highest derivative order pinned at the first and last knot:
    /// `min(continuity, (order - 1) / 2)`, so a single segment is never
    /// over-determined.
    pub fn boundary_order(&self) -> usize {
        self.continuity.min((self.order - 1) / 2)
    }
}

/// Value and derivatives `1..=k` of one flat output at an endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState {
    values: Vec<f64>,
}

impl BoundaryState {
    /// `values[0]` is the value, `values[k]` the `k`-th derivative.
    pub fn new(values: Vec<f64>) -> Result<Self, SplineError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(SplineError::InvalidProblem(
                "boundary state needs finite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    /// At rest: the given value and `order` zero derivatives.
    pub fn rest(value: f64, order: usize) -> Self {
        let mut values = vec![0.0; order + 1];
        values[0] = value;
        Self { values }
    }

    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// Derivative `k` (0 is the value); missing entries read as zero.
    pub fn derivative(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// `i! / (i - k)!`, zero when `k > i`.
fn falling(i: usize, k: usize) -> f64 {
    if k > i {
        0.0
    } else {
        ((i - k + 1)..=i).map(|v| v as f64).product()
    }
}

/// Durations `T_j = max(|dr| / v_avg, |dpsi| / w_avg, T_min)`.
pub fn segment_times(
    positions: &[Vec3],
    yaws: &[f64],
    config: &SplineConfig,
) -> Result<Vec<f64>, SplineError> {
    for (name, v) in [
        ("avg_speed", config.avg_speed),
        ("avg_yaw_rate", config.avg_yaw_rate),
        ("min_segment_time", config.min_segment_time),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SplineError::InvalidConfig(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if positions.len() < 2 || yaws.len() != positions.len() {
        return Err(SplineError::InvalidProblem(format!(
            "need at least 2 waypoints with matching yaws, got {} positions and {} yaws",
            positions.len(),
            yaws.len()
        )));
    }
    Ok(positions
        .windows(2)
        .zip(yaws.windows(2))
        .map(|(p, y)| {
            ((p[1] - p[0]).norm() / config.avg_speed)
                .max((y[1] - y[0]).abs() / config.avg_yaw_rate)
                .max(config.min_segment_time)
        })
        .collect())
}

/// `(n+1) x (n+1)` matrix with `p^T Q p = integral_0^T sum_i w_i (P^(i))^2`
/// for `P(tau) = sum_k p_k tau^k`. `weights[i - 1]` is `w_i`.
pub fn cost_matrix(n: usize, weights: &[f64], duration: f64) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n + 1, n + 1);
    for (idx, &w) in weights.iter().enumerate() {
        let k = idx + 1;
        if w == 0.0 || k > n {
            continue;
        }
        for a in k..=n {
            for b in k..=n {
                let power = (a + b - 2 * k + 1) as i32;
                q[(a, b)] +=
                    w * falling(a, k) * falling(b, k) * duration.powi(power) / power as f64;
            }
        }
    }
    q
}

/// `2(n_c+1) x (n+1)` matrix mapping local-time coefficients to
/// derivatives `0..=n_c` at `tau = 0` (first block) and `tau = T` (second).
pub fn endpoint_map(n: usize, duration: f64, continuity: usize) -> DMatrix<f64> {
    let rows = continuity + 1;
    let mut a = DMatrix::zeros(2 * rows, n + 1);
    for k in 0..=continuity {
        if k <= n {
            a[(k, k)] = falling(k, k);
        }
        for i in k..=n {
            a[(rows + k, i)] = falling(i, k) * duration.powi((i - k) as i32);
        }
    }
    a
}

/// Piecewise polynomial with local-time coefficients per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory {
    order: usize,
    knots: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

impl PiecewiseTrajectory {
    /// `coefficients[j][i]` multiplies `(t - knots[j])^i`.
    pub fn new(knots: Vec<f64>, coefficients: Vec<Vec<f64>>) -> Result<Self, SplineError> {
        if knots.len() < 2 || coefficients.len() != knots.len() - 1 {
            return Err(SplineError::InvalidProblem(format!(
                "{} knots need {} coefficient vectors, got {}",
                knots.len(),
                knots.len().saturating_sub(1),
                coefficients.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SplineError::InvalidProblem(
                "knots must increase strictly".into(),
            ));
        }
        let order = coefficients[0].len().saturating_sub(1);
        if coefficients
            .iter()
            .any(|c| c.len() != order + 1 || c.iter().any(|v| !v.is_finite()))
        {
            return Err(SplineError::InvalidProblem(
                "coefficient vectors must be finite and of equal length".into(),
            ));
        }
        Ok(Self {
            order,
            knots,
            coefficients,
        })
    }

    /// A constant trajectory over `[t0, t1]`.
    pub fn constant(value: f64, t0: f64, t1: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Self {
            order,
            knots: vec![t0, t1],
            coefficients: vec![c],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segment_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self, segment: usize) -> &[f64] {
        &self.coefficients[segment]
    }

    pub fn start_time(&self) -> f64 {
        self.knots[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.knots.last().expect("at least two knots")
    }

    /// Same polynomials with every knot shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            order: self.order,
            knots: self.knots.iter().map(|t| t + dt).collect(),
            coefficients: self.coefficients.clone(),
        }
    }

    /// Segment containing `t` (right-continuous; the end time maps to the
    /// last segment).
    pub fn segment_index(&self, t: f64) -> Result<usize, SplineError> {
        let (start, end) = (self.start_time(), self.end_time());
        if !(t >= start && t <= end) {
            return Err(SplineError::OutOfRange { t, start, end });
        }
        let j = self.knots.partition_point(|&k| k <= t);
        Ok(j.saturating_sub(1).min(self.segment_count() - 1))
    }

    /// `k`-th derivative of segment `j` at local time `tau`, without range
    /// checks.
    pub fn evaluate_segment(&self, segment: usize, tau: f64, k: usize) -> f64 {
        let c = &self.coefficients[segment];
        if k > self.order {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in (k..=self.order).rev() {
            acc = acc * tau + c[i] * falling(i, k);
        }
        acc
    }

    /// `k`-th derivative at `t`.
    pub fn evaluate(&self, t: f64, k: usize) -> Result<f64, SplineError> {
        let j = self.segment_index(t)?;
        Ok(self.evaluate_segment(j, t - self.knots[j], k))
    }

    /// Value and derivatives `1..=order` at `t`.
    pub fn boundary_state(&self, t: f64, order: usize) -> Result<BoundaryState, SplineError> {
        let values = (0..=order)
            .map(|k| self.evaluate(t, k))
            .collect::<Result<Vec<_>, _>>()?;
        BoundaryState::new(values)
    }

    /// Cost `sum_j p_j^T Q_j p_j` under the given weights.
    pub fn cost(&self, weights: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(self.knots.windows(2))
            .map(|(c, k)| {
                let q = cost_matrix(self.order, weights, k[1] - k[0]);
                let p = DVector::from_column_slice(c);
                (p.transpose() * q * &p)[(0, 0)]
            })
            .sum()
    }
}

/// Optimized trajectory plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSolution {
    pub trajectory: PiecewiseTrajectory,
    /// Optimal cost `sum_j J_j`.
    pub cost: f64,
    /// Max of the scaled stationarity and feasibility residuals of the KKT
    /// system.
    pub kkt_residual: f64,
}

struct ConstraintRow {
    entries: Vec<(usize, f64)>,
    rhs: f64,
    segment: usize,
}

/// Minimizes `sum_j J_j` for one flat output through `values` (one per
/// knot) with segment durations `times`, starting at time 0. Derivatives
/// `0..=config.continuity` are continuous at interior knots and
/// derivatives `0..=config.boundary_order()` of `start`/`end` are enforced
/// at the first/last knot (`start`/`end` values must match the first/last
/// waypoint). A `start` of higher order (up to the continuity order) pins
/// that many derivatives, which is how a replanned trajectory joins the
/// old one; it needs at least two segments.
pub fn optimize_spline(
    values: &[f64],
    times: &[f64],
    start: &BoundaryState,
    end: &BoundaryState,
    config: &SplineConfig,
) -> Result<SplineSolution, SplineError> {
    config.validate()?;
    let m = values.len();
    if m < 2 {
        return Err(SplineError::InvalidProblem(format!(
            "need at least 2 waypoints, got {m}"
        )));
    }
    if times.len() != m - 1 {
        return Err(SplineError::InvalidProblem(format!(
            "{m} waypoints need {} segment times, got {}",
            m - 1,
            times.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(SplineError::InvalidProblem(format!(
            "segment time {t} is not positive"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SplineError::InvalidProblem(
            "waypoint values must be finite".into(),
        ));
    }

    let n = config.order;
    let nc = config.continuity;
    let b = config.boundary_order();
    let ncoef = n + 1;
    let nseg = m - 1;
    let nvar = nseg * ncoef;
    let col = |seg: usize, i: usize| seg * ncoef + i;
    // derivative row of a normalized segment at s = 0 or s = 1
    let at_zero = |k: usize| {
        if k <= n {
            vec![(k, falling(k, k))]
        } else {
            Vec::new()
        }
    };
    let at_one = |k: usize| (k..=n).map(|i| (i, falling(i, k))).collect::<Vec<_>>();

    let mut rows: Vec<ConstraintRow> = Vec::new();
    let last = nseg - 1;
    let b_start = b.max(start.order()).min(nc.max(b));
    let mut start_values = vec![values[0]];
    start_values.extend((1..=b_start).map(|k| start.derivative(k)));
    for (k, v) in start_values.iter().enumerate() {
        rows.push(ConstraintRow {
            entries: at_zero(k)
                .into_iter()
                .map(|(i, a)| (col(0, i), a))
                .collect(),
            rhs: v * times[0].powi(k as i32),
            segment: 0,
        });
    }
    for j in 0..nseg - 1 {
        rows.push(ConstraintRow {
            entries: at_one(0).into_iter().map(|(i, a)| (col(j, i), a)).collect(),
            rhs: values[j + 1],
            segment: j,
        });
        let ratio = times[j] / times[j + 1];
        for k in 0..=nc {
            let mut entries: Vec<(usize, f64)> =
                at_one(k).into_iter().map(|(i, a)| (col(j, i), a)).collect();
            let scale = ratio.powi(k as i32);
            entries.extend(
                at_zero(k)
                    .into_iter()
                    .map(|(i, a)| (col(j + 1, i), -a * scale)),
            );
            rows.push(ConstraintRow {
                entries,
                rhs: 0.0,
                segment: j + 1,
            });
        }
    }
    let mut end_values = vec![values[m - 1]];
    end_values.extend((1..=b).map(|k| end.derivative(k)));
    for (k, v) in end_values.iter().enumerate() {
        rows.push(ConstraintRow {
            entries: at_one(k)
                .into_iter()
                .map(|(i, a)| (col(last, i), a))
                .collect(),
            rhs: v * times[last].powi(k as i32),
            segment: last,
        });
    }

    let ncon = rows.len();
    let dim = nvar + ncon;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (j, &t) in times.iter().enumerate() {
        let h = normalized_cost(n, &config.weights, t);
        let o = j * ncoef;
        kkt.view_mut((o, o), (ncoef, ncoef)).copy_from(&(h * 2.0));
    }
    for (r, row) in rows.iter().enumerate() {
        for &(c, a) in &row.entries {
            kkt[(nvar + r, c)] = a;
            kkt[(c, nvar + r)] = a;
        }
        rhs[nvar + r] = row.rhs;
    }

    let scale = equilibrate(&kkt);
    let scaled = DMatrix::from_fn(dim, dim, |i, j| kkt[(i, j)] * scale[i] * scale[j]);
    let scaled_rhs = rhs.component_mul(&scale);

    let lu = scaled.clone().lu();
    let solved = lu.solve(&scaled_rhs).and_then(|mut y| {
        // two rounds of iterative refinement
        for _ in 0..2 {
            let r = &scaled_rhs - &scaled * &y;
            y += lu.solve(&r)?;
        }
        Some(y)
    });
    let y = match solved {
        Some(y) if y.iter().all(|v| v.is_finite()) => y,
        _ => return Err(diagnose(&rows, nvar)),
    };

    let residual = &scaled_rhs - &scaled * &y;
    let denom = |range: std::ops::Range<usize>| {
        let anorm = scaled
            .rows(range.start, range.len())
            .abs()
            .column_sum()
            .max();
        anorm * y.amax() + scaled_rhs.rows(range.start, range.len()).amax()
    };
    let rel = |range: std::ops::Range<usize>| {
        let r = residual.rows(range.start, range.len()).amax();
        let d = denom(range);
        if d > 0.0 {
            r / d
        } else {
            r
        }
    };
    let kkt_residual = rel(0..nvar).max(rel(nvar..dim));
    if !(kkt_residual <= 1e-6) {
        return Err(diagnose(&rows, nvar));
    }

    let x = y.component_mul(&scale);
    let coefficients: Vec<Vec<f64>> = (0..nseg)
        .map(|j| {
            (0..ncoef)
                .map(|i| x[col(j, i)] / times[j].powi(i as i32))
                .collect()
        })
        .collect();
    let cost = (0..nseg)
        .map(|j| {
            let c = x.rows(j * ncoef, ncoef);
            let h = normalized_cost(n, &config.weights, times[j]);
            (c.transpose() * h * c)[(0, 0)]
        })
        .sum();
    let mut knots = vec![0.0];
    for t in times {
        knots.push(knots.last().unwrap() + t);
    }
    Ok(SplineSolution {
        trajectory: PiecewiseTrajectory::new(knots, coefficients)?,
        cost,
        kkt_residual,
    })
}

/// Segment cost in normalized coefficients `c_i = p_i T^i`.
fn normalized_cost(n: usize, weights: &[f64], duration: f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n + 1, n + 1);
    for (idx, &w) in weights.iter().enumerate() {
        let k = idx + 1;
        if w == 0.0 || k > n {
            continue;
        }
        let factor = w * duration.powi(1 - 2 * k as i32);
        for a in k..=n {
            for b in k..=n {
                h[(a, b)] += factor * falling(a, k) * falling(b, k) / (a + b - 2 * k + 1) as f64;
            }
        }
    }
    h
}

/// Symmetric Ruiz scaling: `D K D` has rows of roughly unit max-norm.
fn equilibrate(k: &DMatrix<f64>) -> DVector<f64> {
    let n = k.nrows();
    let mut d = DVector::from_element(n, 1.0);
    for _ in 0..20 {
        let mut done = true;
        let mut update = DVector::from_element(n, 1.0);
        for i in 0..n {
            let row_max = (0..n)
                .map(|j| (k[(i, j)] * d[i] * d[j]).abs())
                .fold(0.0, f64::max);
            if row_max > 0.0 {
                update[i] = 1.0 / row_max.sqrt();
                if (1.0 - row_max).abs() > 1e-3 {
                    done = false;
                }
            }
        }
        d.component_mul_assign(&update);
        if done {
            break;
        }
    }
    d
}

/// Distinguishes a rank-deficient constraint set (reported with the first
/// segment whose constraint is linearly dependent) from other failures.
fn diagnose(rows: &[ConstraintRow], nvar: usize) -> SplineError {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for row in rows {
        let mut v = DVector::zeros(nvar);
        for &(c, a) in &row.entries {
            v[c] = a;
        }
        let norm = v.norm();
        if norm == 0.0 {
            return SplineError::RankDeficient {
                segment: row.segment,
            };
        }
        v /= norm;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let rest = v.norm();
        if rest < 1e-9 {
            return SplineError::RankDeficient {
                segment: row.segment,
            };
        }
        basis.push(v / rest);
    }
    SplineError::Numerical("cost is not positive definite on the constraint null space".into())
}

/// The four flat outputs `x, y, z, yaw` over a common set of knots.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTrajectory {
    pub x: PiecewiseTrajectory,
    pub y: PiecewiseTrajectory,
    pub z: PiecewiseTrajectory,
    pub yaw: PiecewiseTrajectory,
}

/// Boundary states of all four outputs at one endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatBoundary {
    pub position: [BoundaryState; 3],
    pub yaw: BoundaryState,
}

impl FlatBoundary {
    pub fn rest(position: Vec3, yaw: f64, position_order: usize, yaw_order: usize) -> Self {
        Self {
            position: std::array::from_fn(|k| BoundaryState::rest(position[k], position_order)),
            yaw: BoundaryState::rest(yaw, yaw_order),
        }
    }
}

impl FlatTrajectory {
    pub fn outputs(&self) -> [&PiecewiseTrajectory; 4] {
        [&self.x, &self.y, &self.z, &self.yaw]
    }

    pub fn start_time(&self) -> f64 {
        self.x.start_time()
    }

    pub fn end_time(&self) -> f64 {
        self.x.end_time()
    }

    pub fn knots(&self) -> &[f64] {
        self.x.knots()
    }

    pub fn position(&self, t: f64) -> Result<Vec3, SplineError> {
        Ok(Vec3::new(
            self.x.evaluate(t, 0)?,
            self.y.evaluate(t, 0)?,
            self.z.evaluate(t, 0)?,
        ))
    }

    /// Flat outputs and derivatives up to order 4 at `t`.
    pub fn sample(&self, t: f64) -> Result<FlatSample, SplineError> {
        let mut position = [Vec3::zeros(); 5];
        let mut yaw = [0.0; 5];
        for k in 0..5 {
            position[k] = Vec3::new(
                self.x.evaluate(t, k)?,
                self.y.evaluate(t, k)?,
                self.z.evaluate(t, k)?,
            );
            yaw[k] = self.yaw.evaluate(t, k)?;
        }
        Ok(FlatSample { position, yaw })
    }

    /// Boundary states at `t` for use as the start of a new solve.
    pub fn boundary(
        &self,
        t: f64,
        position_order: usize,
        yaw_order: usize,
    ) -> Result<FlatBoundary, SplineError> {
        Ok(FlatBoundary {
            position: [
                self.x.boundary_state(t, position_order)?,
                self.y.boundary_state(t, position_order)?,
                self.z.boundary_state(t, position_order)?,
            ],
            yaw: self.yaw.boundary_state(t, yaw_order)?,
        })
    }
}

/// Solves the four independent output problems for `path`, with knots
/// starting at `t0`. The end is at rest at the last waypoint.
pub fn optimize_flat(
    path: &FlatPath,
    t0: f64,
    start: &FlatBoundary,
    position_config: &SplineConfig,
    yaw_config: &SplineConfig,
) -> Result<(FlatTrajectory, [SplineSolution; 4]), SplineError> {
    let times = path.segment_times();
    let last = path.len() - 1;
    let solve_axis = |k: usize| {
        let values: Vec<f64> = path.positions().iter().map(|p| p[k]).collect();
        let end = BoundaryState::rest(values[last], position_config.boundary_order());
        optimize_spline(&values, times, &start.position[k], &end, position_config)
    };
    let sx = solve_axis(0)?;
    let sy = solve_axis(1)?;
    let sz = solve_axis(2)?;
    let yaw_end = BoundaryState::rest(path.yaws()[last], yaw_config.boundary_order());
    let syaw = optimize_spline(path.yaws(), times, &start.yaw, &yaw_end, yaw_config)?;
    let traj = FlatTrajectory {
        x: sx.trajectory.shifted(t0),
        y: sy.trajectory.shifted(t0),
        z: sz.trajectory.shifted(t0),
        yaw: syaw.trajectory.shifted(t0),
    };
    Ok((traj, [sx, sy, sz, syaw]))
}
