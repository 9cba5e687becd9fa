//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use quadplan::scenario::Scenario;
use quadplan::{Cuboid, Vec3};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load_scenario(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).expect("shipped scenario loads")
}

/// Euclidean distance from `p` to the closed box, by clamping.
pub fn point_box_distance(p: &Vec3, b: &Cuboid) -> f64 {
    let (lo, hi) = (b.min(), b.max());
    let q = Vec3::new(
        p.x.clamp(lo.x, hi.x),
        p.y.clamp(lo.y, hi.y),
        p.z.clamp(lo.z, hi.z),
    );
    (p - q).norm()
}

/// Distance between two boxes from the per-axis interval gaps.
pub fn box_box_distance(a: &Cuboid, b: &Cuboid) -> f64 {
    (0..3)
        .map(|i| {
            let gap = (a.min()[i] - b.max()[i])
                .max(b.min()[i] - a.max()[i])
                .max(0.0);
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

pub fn inside(p: &Vec3, b: &Cuboid) -> bool {
    (0..3).all(|i| p[i] >= b.min()[i] && p[i] <= b.max()[i])
}

/// Slab test: does the closed segment `a -> b` touch the closed box?
pub fn segment_meets_box(a: &Vec3, b: &Vec3, bx: &Cuboid) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..3 {
        let (lo, hi) = (bx.min()[i], bx.max()[i]);
        if d[i] == 0.0 {
            if a[i] < lo || a[i] > hi {
                return false;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo - a[i]) / d[i], (hi - a[i]) / d[i]);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

pub fn segment_clear(a: &Vec3, b: &Vec3, boxes: &[Cuboid]) -> bool {
    !boxes.iter().any(|o| segment_meets_box(a, b, o))
}

/// `d^k/dt^k t^i`, as a coefficient times `t^(i-k)`.
pub fn deriv_factor(i: usize, k: usize) -> f64 {
    if k > i {
        0.0
    } else {
        (0..k).map(|j| (i - j) as f64).product()
    }
}

/// `k`-th derivative of `sum c_i t^i` at `t`.
pub fn poly_eval(c: &[f64], t: f64, k: usize) -> f64 {
    (k..c.len())
        .map(|i| c[i] * deriv_factor(i, k) * t.powi((i - k) as i32))
        .sum()
}

/// `integral_0^T (d^k/dt^k P)^2 dt` by 4-point Gauss-Legendre on 8
/// subintervals (exact for the degrees used here).
pub fn squared_derivative_integral(c: &[f64], duration: f64, k: usize) -> f64 {
    const X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let parts = 8;
    let h = duration / parts as f64;
    let mut sum = 0.0;
    for p in 0..parts {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            let v = poly_eval(c, mid + 0.5 * h * x, k);
            sum += w * 0.5 * h * v * v;
        }
    }
    sum
}

/// Is `needle` an in-order subsequence of `hay` (exact equality)?
pub fn is_subsequence(needle: &[Vec3], hay: &[Vec3]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Replaces each run of duplicate points with a single copy.
pub fn dedup(points: &[Vec3]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    for p in points {
        if out.last() != Some(p) {
            out.push(*p);
        }
    }
    out
}
