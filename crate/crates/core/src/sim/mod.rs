//! Closed-loop simulation of the transfer pipeline.

pub mod plot;
pub mod trace;
pub mod vehicle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{build_command_pairs, command_grid, CalibrationError};
use crate::config::ScenarioConfig;
use crate::geometry::{self, Point};
use crate::planner::{build_library, plan_step, replan_threshold, should_replan, PathSpec, PlannerError, PrimitiveLibrary};
use crate::transfer::{build_capability_hull, Command, CommandMapper, CommandPair, TransferError};

pub use trace::{trace_metrics, Outcome, SimTrace, TraceMetrics, TraceRecord};
pub use vehicle::{step_vehicle, Pose, SimState, SimulatedVehicle, VehicleParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Obstacle {
    pub fn centre(&self) -> Point {
        [self.x, self.y]
    }

    pub fn contains(&self, p: Point) -> bool {
        geometry::dist(p, self.centre()) < self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub obstacles: Vec<Obstacle>,
    pub fov_radius: f64,
    pub path: PathSpec,
}

impl Environment {
    /// Centres of the obstacles within view of `p`.
    pub fn obstacles_in_fov(&self, p: Point) -> Vec<Point> {
        self.obstacles
            .iter()
            .map(Obstacle::centre)
            .filter(|&c| geometry::dist(p, c) <= self.fov_radius)
            .collect()
    }

    pub fn collides(&self, p: Point) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }
}

/// Fixed-gain position filter. The prediction rolls the estimate forward
/// with the teacher model of the executing primitive; each reading then
/// pulls the estimate by `gain` towards it. Heading is read directly.
#[derive(Clone, Debug)]
pub struct PositionFilter {
    state: SimState,
    gain: f64,
}

impl PositionFilter {
    pub fn new(first: SimState, gain: f64) -> Self {
        PositionFilter { state: first, gain }
    }

    pub fn predict(&mut self, teacher_cmd: Command, teacher: &VehicleParams, dt: f64) {
        let mut no_noise = rand::rngs::mock::StepRng::new(0, 0);
        self.state = step_vehicle(&self.state, teacher_cmd, teacher, dt, 0.0, &mut no_noise);
    }

    pub fn update(&mut self, reading: &SimState) {
        self.state.x += self.gain * (reading.x - self.state.x);
        self.state.y += self.gain * (reading.y - self.state.y);
        self.state.theta = reading.theta;
        self.state.t = reading.t;
    }

    pub fn position(&self) -> Point {
        [self.state.x, self.state.y]
    }

    pub fn pose(&self) -> Pose {
        self.state.pose()
    }
}

/// How planned teacher commands reach the learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Capability-filtered library, commands mapped through the pairs.
    Transfer,
    /// Full teacher library, teacher commands sent unchanged.
    Baseline,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ConfigInvalid(String),
    #[error("mission failed: {reason}")]
    MissionFailed { reason: Outcome, trace: Box<SimTrace> },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Everything a run produces besides the trace itself.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub trace: SimTrace,
    pub metrics: TraceMetrics,
    pub pairs: Vec<CommandPair>,
    pub library: PrimitiveLibrary,
}

/// Library and learner-side commands for each primitive. Primitives whose
/// command cannot be mapped are dropped from the admissible set.
pub fn prepare_library(
    cfg: &ScenarioConfig,
    mode: Mode,
    pairs: &[CommandPair],
) -> Result<(PrimitiveLibrary, Vec<Option<crate::transfer::Command>>), SimError> {
    let grid = command_grid(cfg.primitives.nv, cfg.primitives.ngamma);
    match mode {
        Mode::Baseline => {
            let lib = PrimitiveLibrary::unfiltered(&grid, &cfg.teacher, cfg.primitives.duration, cfg.dt)?;
            let cmds = lib.primitives.iter().map(|p| Some(p.command)).collect();
            Ok((lib, cmds))
        }
        Mode::Transfer => {
            let hull = build_capability_hull(pairs)?;
            let mut lib = build_library(&grid, &hull, &cfg.teacher, cfg.primitives.duration, cfg.dt)?;
            let mapper = CommandMapper::new(hull, cfg.psi, cfg.region_vertices)?;
            let mut cmds = vec![None; lib.primitives.len()];
            for i in lib.admissible_indices() {
                match mapper.map(lib.primitives[i].command) {
                    Ok(u) => cmds[i] = Some(u),
                    Err(_) => lib.admissible[i] = false,
                }
            }
            if !lib.admissible.iter().any(|&a| a) {
                return Err(PlannerError::EmptyAdmissibleSet.into());
            }
            Ok((lib, cmds))
        }
    }
}

/// Calibrates (transfer mode), then plans, maps and executes until the goal
/// is reached, an obstacle is hit or the step budget runs out.
pub fn run_scenario(cfg: &ScenarioConfig, mode: Mode) -> Result<ScenarioRun, SimError> {
    cfg.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
    let env = cfg.environment();
    let mut learner = SimulatedVehicle::new(cfg.learner, cfg.dt, cfg.noise_sigma, cfg.seed);
    let pairs = match mode {
        Mode::Transfer => build_command_pairs(
            &mut learner,
            &command_grid(cfg.calibration.nv, cfg.calibration.ngamma),
            cfg.calibration.duration,
            &cfg.teacher,
        )?,
        Mode::Baseline => Vec::new(),
    };
    let (library, learner_cmds) = prepare_library(cfg, mode, &pairs)?;

    learner.place(cfg.start_pose());
    let mut trace = SimTrace::default();
    let mut filter = PositionFilter::new(learner.measure(), cfg.estimator_gain);
    let mut steps = 0usize;
    let outcome = 'mission: loop {
        let plan = plan_step(&filter.pose(), &env.path, &library, cfg.horizon, cfg.gains)?;
        let polyline = plan.polyline();
        let plan_id = trace.plans.len();
        trace.plans.push(polyline.clone());
        for &i in &plan.chosen {
            let prim = &library.primitives[i];
            let u = learner_cmds[i].expect("admissible primitives have learner commands");
            for _ in 1..prim.states.len() {
                learner.advance(u);
                steps += 1;
                let truth = learner.true_state();
                filter.predict(prim.command, &cfg.teacher, cfg.dt);
                let reading = learner.measure();
                filter.update(&reading);
                let pos = filter.position();
                let d_e = geometry::point_polyline_distance(pos, &polyline);
                let epsilon = replan_threshold(pos, &env.obstacles_in_fov(pos), cfg.eta);
                let replan = should_replan(d_e, epsilon);
                trace.records.push(TraceRecord {
                    t: truth.t,
                    teacher: prim.command,
                    learner: u,
                    state: truth,
                    measured: [reading.x, reading.y],
                    estimate: pos,
                    plan_id,
                    d_e,
                    epsilon,
                    replan,
                });
                if env.collides([truth.x, truth.y]) {
                    break 'mission Outcome::Collision;
                }
                if geometry::dist(pos, env.path.goal) <= cfg.goal_tolerance {
                    break 'mission Outcome::Reached;
                }
                if steps >= cfg.max_steps {
                    break 'mission Outcome::BudgetExhausted;
                }
                if replan {
                    continue 'mission;
                }
            }
        }
    };
    trace.outcome = Some(outcome);
    let metrics = trace_metrics(&trace, &env.path);
    if outcome != Outcome::Reached {
        return Err(SimError::MissionFailed {
            reason: outcome,
            trace: Box::new(trace),
        });
    }
    Ok(ScenarioRun {
        trace,
        metrics,
        pairs,
        library,
    })
}
