//! Distances between convex shapes with GJK, compared with the closed-form
//! box distance.

use quadplan::geometry::{cuboid_distance, gjk_distance, ConvexHullShape, Cuboid, Vec3};

fn main() {
    let a = Cuboid::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
    let b = Cuboid::new(Vec3::new(2.0, 0.5, 3.0), Vec3::new(2.5, 2.0, 4.0)).unwrap();
    let d = gjk_distance(&ConvexHullShape::from(&a), &ConvexHullShape::from(&b));
    println!(
        "box-box   gjk = {d:.12}  closed form = {:.12}",
        cuboid_distance(&a, &b)
    );

    let p = Vec3::new(-1.0, 0.5, 2.0);
    let d = gjk_distance(&ConvexHullShape::point(p), &ConvexHullShape::from(&a));
    println!(
        "point-box gjk = {d:.12}  closed form = {:.12}",
        a.distance_to_point(&p)
    );

    // a tetrahedron touching the unit cube at a corner
    let tet = ConvexHullShape::new(vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(2.0, 1.0, 1.0),
        Vec3::new(1.0, 2.0, 1.0),
        Vec3::new(1.0, 1.0, 2.0),
    ])
    .unwrap();
    println!(
        "touching  gjk = {:.3e}",
        gjk_distance(&tet, &ConvexHullShape::from(&a))
    );
}
