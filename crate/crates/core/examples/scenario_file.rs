//! Builds a scenario in code, writes it as TOML and reads it back.

use quadplan::scenario::{ObstacleSpec, Scenario};
use quadplan::{Cuboid, Vec3};

fn main() {
    let mut s = Scenario::empty(
        Cuboid::new(Vec3::zeros(), Vec3::new(3.5, 2.5, 2.0)).unwrap(),
        Vec3::new(0.3, 1.25, 1.0),
        0.0,
        Vec3::new(3.2, 1.25, 1.0),
        0.0,
    );
    s.name = "example".into();
    s.obstacles.push(ObstacleSpec {
        min_m: [1.4, 0.8, 0.0],
        max_m: [1.6, 1.7, 0.7],
        appear_s: 0.0,
    });
    let text = s.to_toml();
    println!("{text}");
    let back = Scenario::from_toml(&text).unwrap();
    assert_eq!(back, s);
    println!(
        "round trip ok; obstacles present at t = 0: {}",
        back.obstacles_at(0.0).unwrap().len()
    );
}
