//! Maps a flat trajectory sample to attitude, body rates, thrust, moments
//! and rotor forces.

use quadplan::flatness::{allocate_rotors, flat_map, rotation_to_euler_zxy, FlatSample, QuadModel};
use quadplan::Vec3;

fn main() {
    let model = QuadModel::default();

    let hover = flat_map(&FlatSample::rest(Vec3::new(0.0, 0.0, 1.0), 0.3), &model).unwrap();
    println!(
        "hover: u1 = {} N (m g = {} N), u2 = {:?}",
        hover.input.thrust,
        model.mass * model.gravity,
        hover.input.moment.as_slice()
    );

    // a point on a horizontal circle of radius 1 m at 1 rad/s, facing along
    // the velocity
    let w: f64 = 1.0;
    let t: f64 = 0.4;
    let (s, c) = t.sin_cos();
    let sample = FlatSample {
        position: [
            Vec3::new(c, s, 1.0),
            Vec3::new(-s, c, 0.0) * w,
            Vec3::new(-c, -s, 0.0) * w * w,
            Vec3::new(s, -c, 0.0) * w.powi(3),
            Vec3::new(c, s, 0.0) * w.powi(4),
        ],
        yaw: [t + std::f64::consts::FRAC_PI_2, w, 0.0, 0.0, 0.0],
    };
    let out = flat_map(&sample, &model).unwrap();
    let (psi, phi, theta) = rotation_to_euler_zxy(&out.state.rotation);
    println!("circle: yaw {psi:.4} roll {phi:.4} pitch {theta:.4} rad");
    println!("  body rates {:?}", out.state.angular_velocity.as_slice());
    println!(
        "  thrust {:.4} N, moments {:?}",
        out.input.thrust,
        out.input.moment.as_slice()
    );
    println!(
        "  rotor forces {:?}",
        allocate_rotors(&out.input, &model).unwrap().as_slice()
    );
}
