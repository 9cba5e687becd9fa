//! Grows an RRT* tree around two walls and prunes the path by line of
//! sight.

use quadplan::geometry::{inflate_all, segment_collision_free, Cuboid, FlightSpace, Vec3};
use quadplan::los::los_prune;
use quadplan::rrt_star::{build_tree, RrtParams};

fn main() {
    let space = FlightSpace::new(Cuboid::new(Vec3::zeros(), Vec3::new(6.0, 4.0, 2.0)).unwrap());
    let walls = [
        Cuboid::new(Vec3::new(1.8, 0.0, 0.0), Vec3::new(2.0, 2.8, 2.0)).unwrap(),
        Cuboid::new(Vec3::new(3.8, 1.2, 0.0), Vec3::new(4.0, 4.0, 2.0)).unwrap(),
    ];
    let obstacles = inflate_all(&walls, 0.3).unwrap();
    let start = Vec3::new(0.5, 0.5, 1.0);
    let target = Vec3::new(5.5, 3.5, 1.0);
    let params = RrtParams {
        seed: 11,
        ..RrtParams::default()
    };

    let (tree, raw) = build_tree(&start, &target, &space, &obstacles, &params).expect("path found");
    let pruned = los_prune(&raw, &obstacles);
    let length = |p: &[Vec3]| p.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>();
    println!("tree nodes: {}", tree.len());
    println!(
        "raw path:    {:2} waypoints, {:.3} m",
        raw.len(),
        length(&raw)
    );
    println!(
        "pruned path: {:2} waypoints, {:.3} m",
        pruned.len(),
        length(&pruned)
    );
    for p in &pruned {
        println!("  ({:.3}, {:.3}, {:.3})", p.x, p.y, p.z);
    }
    assert!(pruned
        .windows(2)
        .all(|w| segment_collision_free(&w[0], &w[1], &obstacles)));
}
