//! RRT* grown from the target.
//!
//! The tree is rooted at `r_t`; every node stores its parent (the neighbor
//! that leads to the target with the least total distance) and its cost,
//! the path length to the target. The start is inserted last without
//! steering so the extracted path begins exactly at `r_s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{sample_free_in, segment_collision_free, Cuboid, FlightSpace, Vec3};

/// Nodes closer than this to their would-be parent are not inserted.
const DUPLICATE_EPS: f64 = 1e-12;
/// Rewiring only happens for strict cost improvements larger than this.
const REWIRE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrtError {
    #[error("invalid RRT* parameters: {0}")]
    InvalidParams(String),
    #[error("invalid planning input: {0}")]
    InvalidInput(String),
    #[error(
        "planning failed: start could not be connected after {samples} samples ({nodes} nodes)"
    )]
    PlanningFailure { nodes: usize, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtParams {
    /// Growth stops once the tree holds more than this many nodes (the
    /// root counts).
    pub max_nodes: usize,
    /// Steering length (m).
    pub epsilon: f64,
    /// Neighborhood radius for parent choice and rewiring (m).
    pub rho: f64,
    pub seed: u64,
    /// Upper bound on random samples drawn while growing.
    pub max_samples: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            max_nodes: 2000,
            epsilon: 0.3,
            rho: 0.9,
            seed: 0,
            max_samples: 100_000,
        }
    }
}

impl RrtParams {
    pub fn validate(&self) -> Result<(), RrtError> {
        if !(self.epsilon > 0.0 && self.epsilon <= self.rho && self.rho.is_finite()) {
            return Err(RrtError::InvalidParams(format!(
                "need 0 < epsilon <= rho, got epsilon={} rho={}",
                self.epsilon, self.rho
            )));
        }
        if self.max_nodes < 2 {
            return Err(RrtError::InvalidParams(format!(
                "max_nodes must be at least 2, got {}",
                self.max_nodes
            )));
        }
        Ok(())
    }
}

/// RRT* graph: node positions, parent links toward the root, and the path
/// length from each node to the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Vec3>,
    parents: Vec<Option<usize>>,
    costs: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new(root: Vec3) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![None],
            costs: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Vec3 {
        self.nodes[0]
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec3 {
        self.nodes[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    /// Path length from node `i` to the root.
    pub fn cost(&self, i: usize) -> f64 {
        self.costs[i]
    }

    /// Node positions from `i` up to and including the root.
    pub fn path_to_root(&self, i: usize) -> Vec<Vec3> {
        let mut path = vec![self.nodes[i]];
        let mut cur = i;
        while let Some(p) = self.parents[cur] {
            path.push(self.nodes[p]);
            cur = p;
        }
        path
    }

    /// Index of the node closest to `p` (lowest index on ties).
    pub fn nearest(&self, p: &Vec3) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n - p).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Indices of nodes within `radius` of `p`, in index order.
    pub fn near(&self, p: &Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| (*n - p).norm_squared() <= r2)
            .map(|(i, _)| i)
            .collect()
    }

    fn push(&mut self, p: Vec3, parent: usize) -> usize {
        let idx = self.nodes.len();
        let cost = self.costs[parent] + (p - self.nodes[parent]).norm();
        self.nodes.push(p);
        self.parents.push(Some(parent));
        self.costs.push(cost);
        self.children.push(Vec::new());
        self.children[parent].push(idx);
        idx
    }

    fn reparent(&mut self, node: usize, new_parent: usize) {
        if let Some(old) = self.parents[node] {
            self.children[old].retain(|&c| c != node);
        }
        self.parents[node] = Some(new_parent);
        self.children[new_parent].push(node);
        let new_cost = self.costs[new_parent] + (self.nodes[node] - self.nodes[new_parent]).norm();
        let delta = new_cost - self.costs[node];
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.costs[n] += delta;
            stack.extend(self.children[n].iter().copied());
        }
    }

    /// Copy of the tree without nodes inside `obstacles` or whose parent
    /// edge collides with them. Descendants of removed nodes are dropped
    /// too. Returns `None` when the root itself is blocked.
    pub fn pruned(&self, obstacles: &[Cuboid]) -> Option<Tree> {
        if obstacles.iter().any(|o| o.contains(&self.nodes[0])) {
            return None;
        }
        let mut out = Tree::new(self.nodes[0]);
        let mut stack: Vec<(usize, usize)> =
            self.children[0].iter().rev().map(|&c| (c, 0)).collect();
        while let Some((old, new_parent)) = stack.pop() {
            let p = self.nodes[old];
            if !segment_collision_free(&out.nodes[new_parent], &p, obstacles) {
                continue;
            }
            let idx = out.push(p, new_parent);
            stack.extend(self.children[old].iter().rev().map(|&c| (c, idx)));
        }
        Some(out)
    }
}

/// How far a new node may be placed from its parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Steer {
    /// Truncate at this distance (the steering length epsilon).
    Truncate(f64),
    /// Insert the point itself.
    Exact,
}

/// Adds one node toward `r_rand`: from the nodes within `rho` of `r_rand`,
/// parents are tried in order of total distance to the target
/// (`cost + |r_rand - node|`, ties by lowest index); the first whose steered
/// edge is collision-free receives the new node, which is placed `epsilon`
/// from it on the segment toward `r_rand` (or at `r_rand` when closer).
/// When no node lies within `rho`, the nearest node is the only candidate.
/// Neighbors of the new node within `rho` are then rewired through it when
/// that lowers their cost. Returns the new node index, or `None` when the
/// tree is left unchanged.
pub fn add_node(
    tree: &mut Tree,
    r_rand: &Vec3,
    obstacles: &[Cuboid],
    epsilon: f64,
    rho: f64,
) -> Option<usize> {
    insert(tree, r_rand, obstacles, Steer::Truncate(epsilon), rho)
}

/// General insertion used by [`add_node`], also for exact (unsteered)
/// insertion of the start point.
pub fn insert(
    tree: &mut Tree,
    r_rand: &Vec3,
    obstacles: &[Cuboid],
    steer: Steer,
    rho: f64,
) -> Option<usize> {
    let mut candidates: Vec<(f64, usize)> = tree
        .near(r_rand, rho)
        .into_iter()
        .map(|i| (tree.costs[i] + (r_rand - tree.nodes[i]).norm(), i))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if candidates.is_empty() {
        // nothing within rho: extend from the nearest node instead
        if let Some(i) = tree.nearest(r_rand) {
            candidates.push((0.0, i));
        }
    }

    for (_, parent) in candidates {
        let from = tree.nodes[parent];
        let offset = r_rand - from;
        let dist = offset.norm();
        if dist < DUPLICATE_EPS {
            continue;
        }
        let new_point = match steer {
            Steer::Truncate(eps) if dist > eps => from + offset * (eps / dist),
            _ => *r_rand,
        };
        if !segment_collision_free(&from, &new_point, obstacles) {
            continue;
        }
        let idx = tree.push(new_point, parent);
        rewire(tree, idx, obstacles, rho);
        return Some(idx);
    }
    None
}

fn rewire(tree: &mut Tree, new: usize, obstacles: &[Cuboid], rho: f64) {
    let p = tree.nodes[new];
    for j in tree.near(&p, rho) {
        if j == new || Some(j) == tree.parents[new] || j == 0 {
            continue;
        }
        let through = tree.costs[new] + (tree.nodes[j] - p).norm();
        if through < tree.costs[j] - REWIRE_EPS
            && segment_collision_free(&p, &tree.nodes[j], obstacles)
        {
            tree.reparent(j, new);
        }
    }
}

/// Grows `tree` with uniform samples from `region` until it holds more than
/// `params.max_nodes` nodes or the sample budget runs out. Returns the
/// number of samples drawn.
pub fn grow<R: Rng + ?Sized>(
    tree: &mut Tree,
    region: &Cuboid,
    obstacles: &[Cuboid],
    params: &RrtParams,
    rng: &mut R,
) -> usize {
    let mut samples = 0;
    while tree.len() <= params.max_nodes && samples < params.max_samples {
        let Ok(r_rand) = sample_free_in(region, obstacles, rng) else {
            break;
        };
        samples += 1;
        add_node(tree, &r_rand, obstacles, params.epsilon, params.rho);
    }
    samples
}

/// Builds the tree from `target`, then connects `start` and extracts the
/// waypoint path `[start, ..., target]`. `obstacles` must already be
/// inflated.
pub fn build_tree(
    start: &Vec3,
    target: &Vec3,
    space: &FlightSpace,
    obstacles: &[Cuboid],
    params: &RrtParams,
) -> Result<(Tree, Vec<Vec3>), RrtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    build_tree_with_rng(start, target, space, obstacles, params, &mut rng)
}

pub fn build_tree_with_rng<R: Rng + ?Sized>(
    start: &Vec3,
    target: &Vec3,
    space: &FlightSpace,
    obstacles: &[Cuboid],
    params: &RrtParams,
    rng: &mut R,
) -> Result<(Tree, Vec<Vec3>), RrtError> {
    params.validate()?;
    for (name, p) in [("start", start), ("target", target)] {
        if !space.contains(p) {
            return Err(RrtError::InvalidInput(format!(
                "{name} {p:?} outside flight space"
            )));
        }
        if obstacles.iter().any(|o| o.contains(p)) {
            return Err(RrtError::InvalidInput(format!(
                "{name} {p:?} inside an obstacle"
            )));
        }
    }
    if (start - target).norm() < DUPLICATE_EPS {
        return Err(RrtError::InvalidInput("start coincides with target".into()));
    }

    let mut tree = Tree::new(*target);
    let samples = grow(&mut tree, &space.bounds, obstacles, params, rng);
    let path = connect_start(&mut tree, start, obstacles, params.rho).ok_or(
        RrtError::PlanningFailure {
            nodes: tree.len(),
            samples,
        },
    )?;
    Ok((tree, path))
}

/// Inserts `start` without steering and returns the path to the root.
pub fn connect_start(
    tree: &mut Tree,
    start: &Vec3,
    obstacles: &[Cuboid],
    rho: f64,
) -> Option<Vec<Vec3>> {
    let idx = insert(tree, start, obstacles, Steer::Exact, rho)?;
    Some(tree.path_to_root(idx))
}
