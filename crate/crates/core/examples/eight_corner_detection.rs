//! Walks through the 8-corner detector: a first sighting, a far new box, a
//! box overlapping a known one and a nearby surface fragment.

use quadplan::perception::{detect_obstacles_8corner, Cluster};
use quadplan::Cuboid;

fn cluster(min: [f64; 3], max: [f64; 3]) -> Cluster {
    // the 8 corners are enough to span the box
    let b = Cuboid::new(min.into(), max.into()).unwrap();
    Cluster {
        points: b.corners().to_vec(),
    }
}

fn show(label: &str, boxes: &[Cuboid]) {
    println!("{label}:");
    for b in boxes {
        println!("  {:?} .. {:?}", b.min().as_slice(), b.max().as_slice());
    }
}

fn main() {
    let delta = 0.3;
    let det = detect_obstacles_8corner(&[], &[cluster([0.0; 3], [1.0, 1.0, 1.0])], delta);
    show("first sighting, new", &det.new);
    let known = det.all();

    let det = detect_obstacles_8corner(&known, &[cluster([3.0, 0.0, 0.0], [3.5, 0.5, 1.0])], delta);
    show("far away box, new", &det.new);

    let det = detect_obstacles_8corner(&known, &[cluster([0.8, 0.2, 0.0], [1.4, 0.8, 1.0])], delta);
    show("overlapping box, merged", &det.all());

    let det = detect_obstacles_8corner(&known, &[cluster([1.1, 0.0, 0.0], [1.5, 1.0, 1.0])], delta);
    show("surface fragment 0.1 m away, merged", &det.all());
}
