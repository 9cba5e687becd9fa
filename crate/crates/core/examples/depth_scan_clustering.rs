//! Renders a synthetic depth scan of two boxes and clusters it into
//! bounding boxes.

use quadplan::perception::{
    cluster_points, convert_pc_to_box, render_depth_scan, CameraModel, CameraPose,
};
use quadplan::{Cuboid, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let scene = [
        Cuboid::new(Vec3::new(2.0, -0.8, 0.0), Vec3::new(2.3, -0.2, 1.6)).unwrap(),
        Cuboid::new(Vec3::new(3.0, 0.3, 0.4), Vec3::new(3.2, 1.1, 1.8)).unwrap(),
    ];
    let camera = CameraModel::default();
    let pose = CameraPose {
        position: Vec3::new(0.0, 0.0, 1.0),
        yaw: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cloud = render_depth_scan(&pose, &scene, &camera, &mut rng);
    println!(
        "{} returns from {} rays",
        cloud.len(),
        camera.rays_h * camera.rays_v
    );
    for (i, c) in cluster_points(&cloud, 0.15, 10).iter().enumerate() {
        let b = convert_pc_to_box(c);
        println!(
            "cluster {i}: {} points, box {:?} .. {:?}",
            c.points.len(),
            b.min().as_slice(),
            b.max().as_slice()
        );
    }
}
