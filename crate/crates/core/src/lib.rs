//! # quadplan
//!
//! Two-step online trajectory planning for a quadcopter flying through an
//! indoor space with initially unknown cuboid obstacles.
//!
//! 1. A collision-free waypoint path is grown with RRT* (tree rooted at the
//!    target) and shortened by line-of-sight pruning.
//! 2. Yaw waypoints are derived from the path headings and every flat output
//!    `(x, y, z, yaw)` is turned into a piecewise polynomial by an
//!    equality-constrained QP solved through its KKT system.
//!
//! Differential flatness maps the resulting flat trajectory to full state and
//! rotor inputs. Obstacles are detected online from synthetic depth scans
//! with the 8-corner box method and the trajectory is repaired locally when
//! a new obstacle blocks it.
//!
//! ## Modules
//!
//! - [`geometry`]: cuboids, inflation, GJK distance, segment tests, sampling
//! - [`rrt_star`]: tree growth and path extraction
//! - [`los`]: line-of-sight waypoint pruning
//! - [`yaw`]: heading waypoints and the [`yaw::FlatPath`] bundle
//! - [`spline`]: cost/endpoint matrices, KKT solve, piecewise evaluation
//! - [`flatness`]: quadcopter model, dynamics, flat map, rotor allocation
//! - [`perception`]: depth scans, clustering, 8-corner and k-NN detectors
//! - [`replan`]: offline planning pipeline and online replanning
//! - [`sim`]: deterministic scenario engine and trace records
//! - [`scenario`]: scenario file format
//! - [`cli`]: command-line front end used by the `quadplan` binary
//!
//! Runnable walkthroughs of each capability live in `examples/`:
//!
//! ```bash
//! cargo run --release -p quadplan --example gjk_distance
//! cargo run --release -p quadplan --example simulate_replan
//! ```
//!
//! ## Example
//!
//! ```
//! use quadplan::geometry::{gjk_distance, ConvexHullShape, Cuboid, Vec3};
//!
//! let cube = Cuboid::new(Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.5, 0.5, 0.5)).unwrap();
//! let point = ConvexHullShape::point(Vec3::new(2.0, 0.0, 0.0));
//! let d = gjk_distance(&point, &ConvexHullShape::from(&cube));
//! assert!((d - 1.5).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod flatness;
pub mod geometry;
pub mod los;
pub mod perception;
pub mod replan;
pub mod rrt_star;
pub mod scenario;
pub mod sim;
pub mod spline;
pub mod yaw;

pub use geometry::{Cuboid, FlightSpace, Vec3};
