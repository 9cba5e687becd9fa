//! Line-of-sight pruning of a waypoint path.

use crate::geometry::{segment_collision_free, Cuboid, Vec3};

/// Removes redundant waypoints: from the current anchor, the farthest
/// waypoint reachable by a collision-free straight segment is found by
/// probing backwards from the end of the path; everything strictly between
/// the two is deleted and the anchor moves to the probe. First and last
/// waypoints are always kept.
///
/// Consecutive input waypoints are expected to be mutually visible. If they
/// are not, the anchor still advances one waypoint at a time.
pub fn los_prune(path: &[Vec3], obstacles: &[Cuboid]) -> Vec<Vec3> {
    let mut path = path.to_vec();
    if path.len() <= 2 {
        return path;
    }
    let mut anchor = 0;
    let mut i = 0;
    while anchor + 1 < path.len() {
        let probe = (path.len() - 1 - i).max(anchor + 1);
        if probe == anchor + 1 || segment_collision_free(&path[anchor], &path[probe], obstacles) {
            path.drain(anchor + 1..probe);
            anchor += 1;
            i = 0;
        } else {
            i += 1;
        }
    }
    path
}
