//! Command-line front end (`quadplan plan | simulate | bench-detect`).
//!
//! Exit codes: 0 ok, 2 parse, 3 validation, 4 planning failure,
//! 5 mid-mission failure. Errors are reported on stderr as one JSON object.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::perception::{benchmark_detectors, BenchConfig};
use crate::replan::{PlanContext, PlanError};
use crate::scenario::{Scenario, ScenarioError};
use crate::sim::{benchmark_frames, events_jsonl, run_scenario, trace_csv, SimError};
use crate::spline::PiecewiseTrajectory;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_PLANNING: i32 = 4;
pub const EXIT_MID_MISSION: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "quadplan",
    version,
    about = "Quadcopter trajectory planning and replanning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Offline plan: waypoints, spline coefficients and a sampled table.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// JSON output; the sampled table goes next to it with a `.csv` extension.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Sampling step of the trajectory table (s).
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Full mission: writes trace.csv, events.jsonl and summary.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runtime comparison of the 8-corner detector and the k-NN baseline.
    BenchDetect {
        #[arg(long)]
        scenario: PathBuf,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 81)]
        frames: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Disable sensor noise and jitter.
        #[arg(long)]
        noise_free: bool,
    },
}

/// A failed command: exit code plus a machine-readable report.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub time_s: Option<f64>,
}

impl Failure {
    fn new(code: i32, kind: &'static str, message: impl ToString) -> Self {
        Self {
            code,
            kind,
            message: message.to_string(),
            time_s: None,
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": self.kind,
            "exit_code": self.code,
            "message": self.message,
            "time_s": self.time_s,
        })
        .to_string()
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(_) | ScenarioError::Parse(_) => Failure::new(EXIT_PARSE, "parse", e),
            ScenarioError::Validation(_) => Failure::new(EXIT_VALIDATION, "validation", e),
        }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        if e.is_validation() {
            Failure::new(EXIT_VALIDATION, "validation", e)
        } else {
            Failure::new(EXIT_PLANNING, "planning", e)
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let time = e.time();
        let mut f = match e {
            SimError::Scenario(s) => return s.into(),
            SimError::Planning { time: 0.0, source } => source.into(),
            SimError::Planning { source, .. } if source.is_validation() => source.into(),
            other => Failure::new(EXIT_MID_MISSION, "mid_mission", other),
        };
        f.time_s = time;
        f
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_VALIDATION, "io", format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn poly_json(p: &PiecewiseTrajectory) -> serde_json::Value {
    json!({
        "knots_s": p.knots(),
        "coefficients": (0..p.segment_count()).map(|j| p.coefficients(j).to_vec()).collect::<Vec<_>>(),
    })
}

/// Offline plan as JSON. Coefficient `i` of segment `j` multiplies
/// `(t - knots_s[j])^i`.
pub fn plan_json(ctx: &PlanContext) -> serde_json::Value {
    let v = |p: &crate::Vec3| [p.x, p.y, p.z];
    let traj = ctx.trajectory();
    json!({
        "raw_waypoints_m": ctx.raw_path().iter().map(v).collect::<Vec<_>>(),
        "waypoints_m": ctx.path().positions().iter().map(v).collect::<Vec<_>>(),
        "yaw_waypoints_rad": ctx.path().yaws(),
        "segment_times_s": ctx.path().segment_times(),
        "duration_s": traj.end_time() - traj.start_time(),
        "spline": {
            "x": poly_json(&traj.x),
            "y": poly_json(&traj.y),
            "z": poly_json(&traj.z),
            "yaw": poly_json(&traj.yaw),
        },
    })
}

/// Sampled table `t,x,y,z,yaw,vx,vy,vz,yaw_rate` at step `dt`, closed at
/// the end time.
pub fn plan_samples_csv(ctx: &PlanContext, dt: f64) -> Result<String, Failure> {
    let traj = ctx.trajectory();
    let (t0, t1) = (traj.start_time(), traj.end_time());
    let mut s = String::from("t,x,y,z,yaw,vx,vy,vz,yaw_rate\n");
    let mut k = 0u64;
    loop {
        let t = (t0 + k as f64 * dt).min(t1);
        let f = traj
            .sample(t)
            .map_err(|e| Failure::new(EXIT_PLANNING, "planning", e))?;
        let (p, v) = (f.position[0], f.position[1]);
        let _ = writeln!(
            s,
            "{t},{},{},{},{},{},{},{},{}",
            p.x, p.y, p.z, f.yaw[0], v.x, v.y, v.z, f.yaw[1]
        );
        if t >= t1 {
            return Ok(s);
        }
        k += 1;
    }
}

pub fn cmd_plan(scenario: &Path, out: &Path, seed: Option<u64>, dt: f64) -> Result<(), Failure> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Failure::new(
            EXIT_VALIDATION,
            "validation",
            "--dt must be positive",
        ));
    }
    let s = load(scenario, seed)?;
    let ctx = PlanContext::plan_offline(
        s.flight_space()?,
        s.start_position(),
        s.start.yaw_rad,
        s.target_position(),
        s.target.yaw_rad,
        &s.obstacles_at(0.0)?,
        s.plan_config(),
    )?;
    let body = serde_json::to_string_pretty(&plan_json(&ctx)).expect("plan serializes");
    write(out, &(body + "\n"))?;
    write(&out.with_extension("csv"), &plan_samples_csv(&ctx, dt)?)
}

pub fn cmd_simulate(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let s = load(scenario, seed)?;
    let result = run_scenario(&s)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    write(&out.join("trace.csv"), &trace_csv(&result.trace))?;
    write(&out.join("events.jsonl"), &events_jsonl(&result.events))?;
    let summary = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    write(&out.join("summary.json"), &(summary + "\n"))?;
    Ok(())
}

pub fn cmd_bench_detect(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    frames: usize,
    trials: usize,
    noise_free: bool,
) -> Result<String, Failure> {
    if frames == 0 || trials == 0 {
        return Err(Failure::new(
            EXIT_VALIDATION,
            "validation",
            "--frames and --trials must be at least 1",
        ));
    }
    let s = load(scenario, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let clouds = benchmark_frames(&s, frames, noise_free, &mut rng)?;
    let config = BenchConfig {
        delta: s.detection.delta_m,
        k: s.detection.knn_k,
        cluster_radius: s.detection.cluster_radius_m,
        min_pts: s.detection.min_pts,
        trials,
        jitter_sigma: if noise_free {
            0.0
        } else {
            BenchConfig::default().jitter_sigma
        },
    };
    let report = benchmark_detectors(&clouds, &config, &mut rng)
        .map_err(|e| Failure::new(EXIT_VALIDATION, "validation", e))?;
    let csv = report.to_csv();
    write(out, &csv)?;
    Ok(csv)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Plan {
            scenario,
            out,
            seed,
            dt,
        } => cmd_plan(&scenario, &out, seed, dt),
        Command::Simulate {
            scenario,
            out,
            seed,
        } => cmd_simulate(&scenario, &out, seed),
        Command::BenchDetect {
            scenario,
            out,
            seed,
            frames,
            trials,
            noise_free,
        } => cmd_bench_detect(&scenario, &out, seed, frames, trials, noise_free)
            .map(|csv| print!("{csv}")),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code
        }
    }
}
