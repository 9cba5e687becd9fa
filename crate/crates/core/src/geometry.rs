//! World model: axis-aligned cuboid obstacles, the flight space, convex
//! distance queries and collision predicates.
//!
//! Contact counts as collision everywhere in this module: a segment that
//! touches a box face, or two boxes sharing a face, are in collision and
//! have distance zero.

use rand::Rng;
use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Rejection-sampling attempts before [`sample_free`] gives up.
pub const MAX_SAMPLE_ATTEMPTS: usize = 10_000;

/// GJK stops once `|v|^2 - v.w` falls below this fraction of `|v|^2`.
const GJK_TOLERANCE: f64 = 1e-10;
const GJK_MAX_ITERATIONS: usize = 64;
/// Distances below this are reported as exact contact.
const CONTACT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid cuboid: min corner {min:?} exceeds max corner {max:?}")]
    InvalidCuboid { min: [f64; 3], max: [f64; 3] },
    #[error("inflation margin must be non-negative, got {0}")]
    NegativeMargin(f64),
    #[error("convex shape needs at least one vertex")]
    EmptyShape,
    #[error("no free sample found after {0} attempts; free space is (nearly) fully occupied")]
    SamplingExhausted(usize),
}

/// Axis-aligned box stored by its min/max corners (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    min: Vec3,
    max: Vec3,
}

impl Cuboid {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, GeometryError> {
        let finite = min.iter().chain(max.iter()).all(|v| v.is_finite());
        if !finite || (0..3).any(|k| min[k] > max[k]) {
            return Err(GeometryError::InvalidCuboid {
                min: min.into(),
                max: max.into(),
            });
        }
        Ok(Self { min, max })
    }

    /// Box spanned by two arbitrary opposite corners.
    pub fn from_corners(a: Vec3, b: Vec3) -> Self {
        Self {
            min: a.inf(&b),
            max: a.sup(&b),
        }
    }

    pub fn from_center_size(center: Vec3, size: Vec3) -> Result<Self, GeometryError> {
        let half = size * 0.5;
        Self::new(center - half, center + half)
    }

    /// Degenerate box containing a single point.
    pub fn point(p: Vec3) -> Self {
        Self { min: p, max: p }
    }

    /// Tight bounding box of a point set; `None` when the set is empty.
    pub fn bounding<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        Some(iter.fold(Self::point(first), |b, p| Self {
            min: b.min.inf(p),
            max: b.max.sup(p),
        }))
    }

    pub fn min(&self) -> Vec3 {
        self.min
    }

    pub fn max(&self) -> Vec3 {
        self.max
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        self.extents().product()
    }

    /// The 8 corners; bit `k` of the index selects max (1) or min (0) on axis `k`.
    pub fn corners(&self) -> [Vec3; 8] {
        std::array::from_fn(|i| {
            Vec3::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            )
        })
    }

    /// Closed containment: points on a face are inside.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Cuboid) -> bool {
        (0..3).all(|k| other.min[k] >= self.min[k] && other.max[k] <= self.max[k])
    }

    /// Closed intersection test (shared faces intersect).
    pub fn intersects(&self, other: &Cuboid) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Pushes every face outward by `margin`.
    pub fn inflate(&self, margin: f64) -> Result<Cuboid, GeometryError> {
        if !(margin >= 0.0) {
            return Err(GeometryError::NegativeMargin(margin));
        }
        let m = Vec3::repeat(margin);
        Ok(Cuboid {
            min: self.min - m,
            max: self.max + m,
        })
    }

    /// Smallest box containing both.
    pub fn merge(&self, other: &Cuboid) -> Cuboid {
        Cuboid {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Euclidean distance from `p` to the box (zero inside).
    pub fn distance_to_point(&self, p: &Vec3) -> f64 {
        let gap = Vec3::from_fn(|k, _| (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]));
        gap.norm()
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|k, _| p[k].clamp(self.min[k], self.max[k]))
    }
}

/// Inflates every box by the same margin.
pub fn inflate_all(boxes: &[Cuboid], margin: f64) -> Result<Vec<Cuboid>, GeometryError> {
    boxes.iter().map(|b| b.inflate(margin)).collect()
}

/// Admissible flight volume. Free space is the bounds minus the (inflated)
/// obstacles handed to the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSpace {
    pub bounds: Cuboid,
}

impl FlightSpace {
    pub fn new(bounds: Cuboid) -> Self {
        Self { bounds }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.bounds.contains(p)
    }

    /// True when `p` lies inside the bounds and outside every obstacle.
    pub fn is_free(&self, p: &Vec3, obstacles: &[Cuboid]) -> bool {
        self.contains(p) && !obstacles.iter().any(|o| o.contains(p))
    }
}

/// Vertex-set convex hull with a support-function interface, the generic
/// GJK operand. A [`Cuboid`] converts to its 8 corners.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHullShape {
    vertices: Vec<Vec3>,
}

impl ConvexHullShape {
    pub fn new(vertices: Vec<Vec3>) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::EmptyShape);
        }
        Ok(Self { vertices })
    }

    pub fn point(p: Vec3) -> Self {
        Self { vertices: vec![p] }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    /// Vertex maximizing `dir · v`; ties resolve to the lowest index.
    pub fn support(&self, dir: &Vec3) -> Vec3 {
        let mut best = self.vertices[0];
        let mut best_dot = best.dot(dir);
        for v in &self.vertices[1..] {
            let d = v.dot(dir);
            if d > best_dot {
                best_dot = d;
                best = *v;
            }
        }
        best
    }
}

impl From<&Cuboid> for ConvexHullShape {
    fn from(c: &Cuboid) -> Self {
        Self {
            vertices: c.corners().to_vec(),
        }
    }
}

impl From<Cuboid> for ConvexHullShape {
    fn from(c: Cuboid) -> Self {
        Self::from(&c)
    }
}

/// Minimum Euclidean distance between two convex hulls (GJK on the
/// Minkowski difference). Returns exactly `0.0` when the hulls touch or
/// overlap.
pub fn gjk_distance(a: &ConvexHullShape, b: &ConvexHullShape) -> f64 {
    let support = |d: &Vec3| a.support(d) - b.support(&-d);

    let mut v = a.vertices[0] - b.vertices[0];
    let mut simplex: Vec<Vec3> = vec![v];
    for _ in 0..GJK_MAX_ITERATIONS {
        let vv = v.norm_squared();
        if vv <= CONTACT_EPS * CONTACT_EPS {
            return 0.0;
        }
        let w = support(&-v);
        if vv - v.dot(&w) <= GJK_TOLERANCE * vv {
            break;
        }
        if simplex.contains(&w) {
            break;
        }
        simplex.push(w);
        let (next, reduced) = closest_on_simplex(&simplex);
        if reduced.len() == 4 {
            return 0.0;
        }
        if next.norm_squared() >= vv {
            // no progress: the previous simplex is already optimal
            break;
        }
        v = next;
        simplex = reduced;
    }
    let d = v.norm();
    if d <= CONTACT_EPS {
        0.0
    } else {
        d
    }
}

/// Distance between two cuboids through GJK on their corner hulls.
pub fn cuboid_distance(a: &Cuboid, b: &Cuboid) -> f64 {
    gjk_distance(&a.into(), &b.into())
}

/// Closest point of the simplex hull to the origin, together with the
/// smallest sub-simplex supporting it. A returned 4-simplex means the origin
/// lies inside the tetrahedron.
fn closest_on_simplex(s: &[Vec3]) -> (Vec3, Vec<Vec3>) {
    match s.len() {
        1 => (s[0], vec![s[0]]),
        2 => closest_on_segment(s[0], s[1]),
        3 => closest_on_triangle(s[0], s[1], s[2]),
        4 => closest_on_tetrahedron(s[0], s[1], s[2], s[3]),
        _ => unreachable!("simplex has at most 4 vertices"),
    }
}

fn closest_on_segment(a: Vec3, b: Vec3) -> (Vec3, Vec<Vec3>) {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom == 0.0 {
        return (a, vec![a]);
    }
    let t = -a.dot(&ab) / denom;
    if t <= 0.0 {
        (a, vec![a])
    } else if t >= 1.0 {
        (b, vec![b])
    } else {
        (a + ab * t, vec![a, b])
    }
}

fn closest_on_triangle(a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Vec<Vec3>) {
    let ab = b - a;
    let ac = c - a;
    let d1 = -ab.dot(&a);
    let d2 = -ac.dot(&a);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let d3 = -ab.dot(&b);
    let d4 = -ac.dot(&b);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a + ab * t, vec![a, b]);
    }
    let d5 = -ab.dot(&c);
    let d6 = -ac.dot(&c);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a + ac * t, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * t, vec![b, c]);
    }
    let sum = va + vb + vc;
    if !(sum > 0.0) {
        // collinear vertices: fall back to the edges
        return [
            closest_on_segment(a, b),
            closest_on_segment(a, c),
            closest_on_segment(b, c),
        ]
        .into_iter()
        .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
        .expect("three candidates");
    }
    let v = vb / sum;
    let w = vc / sum;
    (a + ab * v + ac * w, vec![a, b, c])
}

fn closest_on_tetrahedron(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> (Vec3, Vec<Vec3>) {
    let scale = [b - a, c - a, d - a]
        .iter()
        .map(|e| e.norm())
        .fold(0.0_f64, f64::max);
    let volume = (b - a).dot(&(c - a).cross(&(d - a)));
    let degenerate = volume.abs() <= 1e-12 * scale.powi(3);

    // (face vertices, opposite vertex)
    let faces = [
        ([a, b, c], d),
        ([a, c, d], b),
        ([a, d, b], c),
        ([b, d, c], a),
    ];
    let mut best: Option<(Vec3, Vec<Vec3>)> = None;
    for ([p, q, r], opposite) in faces {
        let n = (q - p).cross(&(r - p));
        let sign_origin = -p.dot(&n);
        let sign_opposite = (opposite - p).dot(&n);
        if degenerate || sign_origin * sign_opposite < 0.0 {
            let cand = closest_on_triangle(p, q, r);
            if best
                .as_ref()
                .is_none_or(|(bv, _)| cand.0.norm_squared() < bv.norm_squared())
            {
                best = Some(cand);
            }
        }
    }
    match best {
        Some(found) => found,
        None => (Vec3::zeros(), vec![a, b, c, d]),
    }
}

/// Exact slab test: does the closed segment `[a, b]` touch the closed box?
pub fn segment_hits_box(a: &Vec3, b: &Vec3, bx: &Cuboid) -> bool {
    let d = b - a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for k in 0..3 {
        if d[k] == 0.0 {
            if a[k] < bx.min[k] || a[k] > bx.max[k] {
                return false;
            }
        } else {
            let inv = 1.0 / d[k];
            let mut ta = (bx.min[k] - a[k]) * inv;
            let mut tb = (bx.max[k] - a[k]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// True iff the closed segment `[a, b]` misses every (already inflated)
/// obstacle.
pub fn segment_collision_free(a: &Vec3, b: &Vec3, obstacles: &[Cuboid]) -> bool {
    !obstacles.iter().any(|o| segment_hits_box(a, b, o))
}

/// Entry parameter of the ray `origin + t * dir` into the box, for
/// `t >= 0`. Rays starting inside the box return `None`.
pub fn ray_box_entry(origin: &Vec3, dir: &Vec3, bx: &Cuboid) -> Option<f64> {
    let mut t0 = 0.0_f64;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if dir[k] == 0.0 {
            if origin[k] < bx.min[k] || origin[k] > bx.max[k] {
                return None;
            }
        } else {
            let inv = 1.0 / dir[k];
            let mut ta = (bx.min[k] - origin[k]) * inv;
            let mut tb = (bx.max[k] - origin[k]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    if bx.contains(origin) {
        None
    } else {
        Some(t0)
    }
}

/// Uniform sample from the bounds, rejected while inside any obstacle.
pub fn sample_free<R: Rng + ?Sized>(
    space: &FlightSpace,
    obstacles: &[Cuboid],
    rng: &mut R,
) -> Result<Vec3, GeometryError> {
    sample_free_in(&space.bounds, obstacles, rng)
}

/// [`sample_free`] restricted to an arbitrary sampling region.
pub fn sample_free_in<R: Rng + ?Sized>(
    region: &Cuboid,
    obstacles: &[Cuboid],
    rng: &mut R,
) -> Result<Vec3, GeometryError> {
    let ext = region.extents();
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let u = Vec3::new(
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
        );
        let p = region.min + ext.component_mul(&u);
        if !obstacles.iter().any(|o| o.contains(&p)) {
            return Ok(p);
        }
    }
    Err(GeometryError::SamplingExhausted(MAX_SAMPLE_ATTEMPTS))
}
