//! Offline plan in an empty corridor, then a box dropped onto the path
//! mid-flight: only the blocked stretch is searched again and the new
//! trajectory joins the old one smoothly.

use quadplan::geometry::{Cuboid, FlightSpace, Vec3};
use quadplan::replan::{trajectory_feasible, PlanConfig, PlanContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let space = FlightSpace::new(Cuboid::new(Vec3::zeros(), Vec3::new(10.0, 4.0, 3.0)).unwrap());
    let mut ctx = PlanContext::plan_offline(
        space,
        Vec3::new(0.5, 2.0, 1.5),
        0.0,
        Vec3::new(9.5, 2.0, 1.5),
        0.0,
        &[],
        PlanConfig::default(),
    )
    .unwrap();
    println!(
        "offline: {} waypoints, {:.2} s",
        ctx.path().len(),
        ctx.trajectory().end_time()
    );

    let t = 4.0;
    let before = ctx.trajectory().clone();
    let intruder = Cuboid::new(Vec3::new(5.5, 1.5, 0.0), Vec3::new(6.0, 2.5, 3.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let report = ctx.replan(t, &[intruder], &mut rng).unwrap();
    println!(
        "replanned: blocked edges {:?}, fallback {}",
        report.blocked, report.fallback
    );
    for p in ctx.path().positions() {
        println!("  ({:.3}, {:.3}, {:.3})", p.x, p.y, p.z);
    }
    let jump = (0..=2)
        .flat_map(|k| {
            let (old, new) = (&before, ctx.trajectory());
            [
                (old.x.evaluate(t, k).unwrap() - new.x.evaluate(t, k).unwrap()).abs(),
                (old.y.evaluate(t, k).unwrap() - new.y.evaluate(t, k).unwrap()).abs(),
                (old.z.evaluate(t, k).unwrap() - new.z.evaluate(t, k).unwrap()).abs(),
                (old.yaw.evaluate(t, k).unwrap() - new.yaw.evaluate(t, k).unwrap()).abs(),
            ]
        })
        .fold(0.0, f64::max);
    println!("max jump in derivatives 0..=2 at t = {t}: {jump:.1e}");
    println!(
        "collision check: {:?}",
        trajectory_feasible(ctx.trajectory(), ctx.inflated_obstacles(), 0.01, t)
    );
}
