//! Synthetic depth scans, Euclidean clustering, the 8-corner obstacle
//! detector and a point-cloud k-NN baseline with a runtime benchmark.

use std::collections::HashMap;
use std::time::Instant;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::{gjk_distance, ray_box_entry, ConvexHullShape, Cuboid, Vec3};

pub type PointCloud = Vec<Vec3>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid detector parameter: {0}")]
    InvalidParameter(String),
}

/// Pinhole-free depth camera model: rays on a regular angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub h_fov: f64,
    pub v_fov: f64,
    pub max_range: f64,
    pub rays_h: usize,
    pub rays_v: usize,
    /// Standard deviation of the range noise (m).
    pub noise_sigma: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            h_fov: 59f64.to_radians(),
            v_fov: 46f64.to_radians(),
            max_range: 3.5,
            rays_h: 64,
            rays_v: 48,
            noise_sigma: 0.01,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = |m: String| Err(PerceptionError::InvalidCamera(m));
        for (name, fov) in [("h_fov", self.h_fov), ("v_fov", self.v_fov)] {
            if !(fov > 0.0 && fov < std::f64::consts::PI) {
                return bad(format!("{name} must be in (0, pi), got {fov}"));
            }
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return bad(format!(
                "max range must be positive, got {}",
                self.max_range
            ));
        }
        if self.rays_h < 2 || self.rays_v < 2 {
            return bad("need at least 2 rays per axis".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative".into());
        }
        Ok(())
    }

    /// Unit ray directions in world frame for a camera at heading `yaw`,
    /// row-major over elevation then azimuth.
    pub fn ray_directions(&self, yaw: f64) -> Vec<Vec3> {
        let lin = |n: usize, fov: f64, i: usize| -0.5 * fov + fov * i as f64 / (n - 1) as f64;
        let mut dirs = Vec::with_capacity(self.rays_h * self.rays_v);
        for iv in 0..self.rays_v {
            let el = lin(self.rays_v, self.v_fov, iv);
            for ih in 0..self.rays_h {
                let az = yaw + lin(self.rays_h, self.h_fov, ih);
                dirs.push(Vec3::new(
                    el.cos() * az.cos(),
                    el.cos() * az.sin(),
                    el.sin(),
                ));
            }
        }
        dirs
    }
}

/// Camera position and heading; the optical axis is the body +x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub yaw: f64,
}

/// Ray-casts the camera grid against `obstacles` (nearest hit wins) and
/// perturbs each hit range with Gaussian noise. Noise draws happen only
/// for hits, in grid order.
pub fn render_depth_scan<R: Rng + ?Sized>(
    pose: &CameraPose,
    obstacles: &[Cuboid],
    camera: &CameraModel,
    rng: &mut R,
) -> PointCloud {
    let mut cloud = Vec::new();
    if obstacles.is_empty() {
        return cloud;
    }
    for dir in camera.ray_directions(pose.yaw) {
        let hit = obstacles
            .iter()
            .filter_map(|b| ray_box_entry(&pose.position, &dir, b))
            .fold(f64::INFINITY, f64::min);
        if hit > camera.max_range {
            continue;
        }
        let range = if camera.noise_sigma > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            (hit + camera.noise_sigma * n).clamp(0.0, camera.max_range)
        } else {
            hit
        };
        cloud.push(pose.position + dir * range);
    }
    cloud
}

/// Points of one connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub points: Vec<Vec3>,
}

impl Cluster {
    pub fn to_box(&self) -> Cuboid {
        convert_pc_to_box(self)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the root, keeps labels stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage components under `|p - q| <= radius`, dropping components
/// with fewer than `min_pts` points. Clusters are ordered by their first
/// point index and keep input order internally.
pub fn cluster_points(cloud: &[Vec3], radius: f64, min_pts: usize) -> Vec<Cluster> {
    assert!(radius > 0.0, "cluster radius must be positive");
    let cell = |p: &Vec3| {
        (
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in cloud.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut uf = UnionFind::new(cloud.len());
    for (i, p) in cloud.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in bucket {
                            if j > i && (cloud[j] - p).norm_squared() <= r2 {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut members: HashMap<usize, Vec<Vec3>> = HashMap::new();
    for (i, p) in cloud.iter().enumerate() {
        let root = uf.find(i);
        members
            .entry(root)
            .or_insert_with(|| {
                order.push(root);
                Vec::new()
            })
            .push(*p);
    }
    order
        .into_iter()
        .filter_map(|root| members.remove(&root))
        .filter(|pts| pts.len() >= min_pts)
        .map(|points| Cluster { points })
        .collect()
}

/// Axis-aligned bounding box of a non-empty cluster.
pub fn convert_pc_to_box(cluster: &Cluster) -> Cuboid {
    Cuboid::bounding(&cluster.points).expect("cluster must not be empty")
}

/// Smallest box containing both.
pub fn merge_boxes(a: &Cuboid, b: &Cuboid) -> Cuboid {
    a.merge(b)
}

/// Distance from each corner of `c` to the box `o`.
pub fn corner_distances(c: &Cuboid, o: &Cuboid) -> [f64; 8] {
    c.corners().map(|p| o.distance_to_point(&p))
}

/// Outcome of one 8-corner detection call.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// New or merged obstacles produced in this call.
    pub new: Vec<Cuboid>,
    /// Known obstacles that were not absorbed by a merge.
    pub known: Vec<Cuboid>,
}

impl Detection {
    /// Full obstacle set after the update.
    pub fn all(&self) -> Vec<Cuboid> {
        self.known.iter().chain(&self.new).copied().collect()
    }
}

/// Eight-corner detection. Each cluster box is compared with the closest
/// obstacle among the remaining known ones and those already produced in
/// this call (ties to the lowest index, known first):
/// farther than `delta` it is new; touching it is merged into it; closer
/// than `delta` with some corner beyond `delta` it is merged as well;
/// otherwise it is redundant and dropped.
pub fn detect_obstacles_8corner(known: &[Cuboid], clusters: &[Cluster], delta: f64) -> Detection {
    let boxes: Vec<Cuboid> = clusters.iter().map(convert_pc_to_box).collect();
    if known.is_empty() {
        return Detection {
            new: boxes,
            known: Vec::new(),
        };
    }
    let mut known = known.to_vec();
    let mut new: Vec<Cuboid> = Vec::new();
    for c in boxes {
        let hull = ConvexHullShape::from(&c);
        let mut best: Option<(f64, usize)> = None;
        for (i, o) in known.iter().chain(&new).enumerate() {
            let d = gjk_distance(&hull, &ConvexHullShape::from(o));
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let Some((d, idx)) = best else {
            new.push(c);
            continue;
        };
        let target = if idx < known.len() {
            known[idx]
        } else {
            new[idx - known.len()]
        };
        let merge = if d > delta {
            new.push(c);
            false
        } else if d == 0.0 {
            true
        } else {
            d < delta && corner_distances(&c, &target).iter().any(|&cd| cd > delta)
        };
        if merge {
            if idx < known.len() {
                known.remove(idx);
            } else {
                new.remove(idx - known.len());
            }
            new.push(merge_boxes(&c, &target));
        }
    }
    Detection { new, known }
}

/// Baseline classification of one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    New,
    /// Matched to the known cloud at this index, with its distance.
    Same {
        index: usize,
        distance: f64,
    },
}

/// A stored cloud with its k-d tree.
pub struct KnownCloud {
    points: Vec<Vec3>,
    tree: ImmutableKdTree<f64, u64, 3, 32>,
}

impl KnownCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        let tree = build_tree(&points);
        Self { points, tree }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn extend(&mut self, more: &[Vec3]) {
        self.points.extend_from_slice(more);
        self.tree = build_tree(&self.points);
    }

    /// Mean of the `k` smallest nearest-neighbour distances from the
    /// cluster points to this cloud.
    pub fn distance(&self, cluster: &[Vec3], k: usize) -> f64 {
        let mut d: Vec<f64> = cluster
            .iter()
            .map(|p| {
                self.tree
                    .nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z])
                    .distance
                    .sqrt()
            })
            .collect();
        let k = k.min(d.len()).max(1);
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        d[..k].iter().sum::<f64>() / k as f64
    }
}

impl std::fmt::Debug for KnownCloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnownCloud")
            .field("points", &self.points.len())
            .finish()
    }
}

fn build_tree(points: &[Vec3]) -> ImmutableKdTree<f64, u64, 3, 32> {
    let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    ImmutableKdTree::new_from_slice(&raw)
}

/// Point-cloud baseline: each cluster is matched to the known cloud with
/// the smallest k-NN distance; it is new when that distance exceeds
/// `delta`. Matched points are appended to the matched cloud, new clusters
/// become known clouds.
pub fn detect_obstacles_pointcloud_baseline(
    known: &mut Vec<KnownCloud>,
    clusters: &[Cluster],
    delta: f64,
    k: usize,
) -> Vec<Classification> {
    assert!(k >= 1, "k must be at least 1");
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        if c.points.is_empty() {
            continue;
        }
        let best = known
            .iter()
            .enumerate()
            .map(|(i, kc)| (kc.distance(&c.points, k), i))
            .fold(None, |acc: Option<(f64, usize)>, x| match acc {
                Some(a) if a.0 <= x.0 => Some(a),
                _ => Some(x),
            });
        match best {
            Some((distance, index)) if distance <= delta => {
                known[index].extend(&c.points);
                out.push(Classification::Same { index, distance });
            }
            _ => {
                known.push(KnownCloud::new(c.points.clone()));
                out.push(Classification::New);
            }
        }
    }
    out
}

/// Parameters shared by both detectors in the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub delta: f64,
    pub k: usize,
    pub cluster_radius: f64,
    pub min_pts: usize,
    pub trials: usize,
    /// Extra Gaussian jitter applied to every point per trial (m).
    pub jitter_sigma: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            delta: 0.3,
            k: 5,
            cluster_radius: 0.15,
            min_pts: 10,
            trials: 20,
            jitter_sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub frames: usize,
    pub trials: usize,
    /// Obstacle count at the end of the last trial.
    pub obstacles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,mean_ms,std_ms,frames,trials,obstacles\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method, r.mean_ms, r.std_ms, r.frames, r.trials, r.obstacles
            ));
        }
        s
    }

    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs both detectors over the frame sequence `trials` times. Each trial
/// jitters the points with its own noise draw, clusters every frame, then
/// times each detector per frame (clustering is shared and not timed).
pub fn benchmark_detectors<R: Rng + ?Sized>(
    frames: &[PointCloud],
    config: &BenchConfig,
    rng: &mut R,
) -> Result<BenchReport, PerceptionError> {
    if frames.is_empty() {
        return Err(PerceptionError::InvalidParameter(
            "need at least one frame".into(),
        ));
    }
    if config.trials == 0
        || config.k == 0
        || !(config.delta > 0.0)
        || !(config.cluster_radius > 0.0)
    {
        return Err(PerceptionError::InvalidParameter(
            "trials and k must be positive, delta and cluster radius positive".into(),
        ));
    }
    let mut t_corner = Vec::with_capacity(frames.len() * config.trials);
    let mut t_cloud = Vec::with_capacity(frames.len() * config.trials);
    let mut n_corner = 0;
    let mut n_cloud = 0;
    for _ in 0..config.trials {
        let clustered: Vec<Vec<Cluster>> = frames
            .iter()
            .map(|f| {
                let jittered: PointCloud = if config.jitter_sigma > 0.0 {
                    f.iter()
                        .map(|p| {
                            let n = Vec3::from_fn(|_, _| StandardNormal.sample(&mut *rng));
                            p + n * config.jitter_sigma
                        })
                        .collect()
                } else {
                    f.clone()
                };
                cluster_points(&jittered, config.cluster_radius, config.min_pts)
            })
            .collect();

        let mut boxes: Vec<Cuboid> = Vec::new();
        for clusters in &clustered {
            let start = Instant::now();
            let det = detect_obstacles_8corner(&boxes, clusters, config.delta);
            boxes = det.all();
            t_corner.push(start.elapsed().as_secs_f64() * 1e3);
        }
        n_corner = boxes.len();

        let mut clouds: Vec<KnownCloud> = Vec::new();
        for clusters in &clustered {
            let start = Instant::now();
            detect_obstacles_pointcloud_baseline(&mut clouds, clusters, config.delta, config.k);
            t_cloud.push(start.elapsed().as_secs_f64() * 1e3);
        }
        n_cloud = clouds.len();
    }
    let row = |method: &str, t: &[f64], obstacles| {
        let (mean_ms, std_ms) = mean_std(t);
        BenchRow {
            method: method.into(),
            mean_ms,
            std_ms,
            frames: frames.len(),
            trials: config.trials,
            obstacles,
        }
    };
    Ok(BenchReport {
        rows: vec![
            row("8corner", &t_corner, n_corner),
            row("pointcloud_knn", &t_cloud, n_cloud),
        ],
    })
}
