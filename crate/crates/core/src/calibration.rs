//! Learner probing and retrieval of equivalent teacher commands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::vehicle::{wrap_angle, Pose, SimState, VehicleParams};
use crate::transfer::{Command, CommandPair};

/// Slack above the unit command box before a retrieved command is treated as
/// beyond the teacher's capability.
const CAPABILITY_SLACK: f64 = 0.05;

/// A vehicle reachable only through commands and state readings.
pub trait BlackBox {
    /// Returns the vehicle to the canonical start pose and reports it.
    fn reset(&mut self) -> SimState;
    /// Holds `u` for one control step and reports the new state.
    fn step(&mut self, u: Command) -> SimState;
    /// Length of one control step in seconds.
    fn step_dt(&self) -> f64;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("black box returned a non-finite state for command {0:?}")]
    BlackBoxFault(Command),
    #[error("probe duration {duration} s is shorter than one control step ({dt} s)")]
    InvalidDuration { duration: f64, dt: f64 },
    #[error("observed motion needs teacher command {0:?}, beyond the teacher's capability")]
    InconsistentMotion(Command),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionObservation {
    pub command: Command,
    pub start: Pose,
    pub end: Pose,
    pub duration: f64,
    /// Integration step of the probe, when the motion came from a
    /// step-wise simulation; `None` means continuous-time motion.
    pub step: Option<f64>,
}

/// Retrieved teacher command; `clamped` marks results pulled back into the
/// unit command box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Retrieval {
    pub command: Command,
    pub clamped: bool,
}

/// Rectangular command grid: `nv` speeds over [0, 1] times `ngamma`
/// steering values over [−1, 1], speed-major.
pub fn command_grid(nv: usize, ngamma: usize) -> Vec<Command> {
    let lin = |k: usize, n: usize, lo: f64, hi: f64| {
        if n <= 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    (0..nv)
        .flat_map(|i| (0..ngamma).map(move |j| Command::new(lin(i, nv, 0.0, 1.0), lin(j, ngamma, -1.0, 1.0))))
        .collect()
}

/// Drives the black box with each grid command for `duration` seconds from
/// its canonical pose.
pub fn probe_learner<B: BlackBox + ?Sized>(
    black_box: &mut B,
    grid: &[Command],
    duration: f64,
) -> Result<Vec<MotionObservation>, CalibrationError> {
    let dt = black_box.step_dt();
    let steps = (duration / dt).round();
    if !(steps >= 1.0) {
        return Err(CalibrationError::InvalidDuration { duration, dt });
    }
    let mut out = Vec::with_capacity(grid.len());
    for &u in grid {
        let start = black_box.reset();
        let mut end = start;
        for _ in 0..steps as usize {
            end = black_box.step(u);
        }
        let finite = [start.x, start.y, start.theta, end.x, end.y, end.theta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(CalibrationError::BlackBoxFault(u));
        }
        out.push(MotionObservation {
            command: u,
            start: start.pose(),
            end: end.pose(),
            duration: steps * dt,
            step: Some(dt),
        });
    }
    Ok(out)
}

/// Teacher command that reproduces the observed heading change and chord
/// under constant input.
pub fn retrieve_teacher_equivalent(
    obs: &MotionObservation,
    teacher: &VehicleParams,
) -> Result<Retrieval, CalibrationError> {
    let t = obs.duration;
    let dtheta = wrap_angle(obs.end.theta - obs.start.theta);
    let chord = (obs.end.x - obs.start.x).hypot(obs.end.y - obs.start.y);
    let half = 0.5 * dtheta;
    // Arc length over chord for a constant-curvature path; the stepped form
    // is the exact ratio for n Euler steps of equal turn.
    let ratio = if half.abs() < 1e-12 {
        1.0
    } else {
        match obs.step {
            Some(h) => {
                let n = (t / h).round().max(1.0);
                n * (half / n).sin() / half.sin()
            }
            None => half / half.sin(),
        }
    };
    let v = chord * ratio / (teacher.v_max * t);
    let gamma = dtheta / (teacher.gamma_max * t);
    let raw = Command::new(v, gamma);
    if v > 1.0 + CAPABILITY_SLACK || gamma.abs() > 1.0 + CAPABILITY_SLACK {
        return Err(CalibrationError::InconsistentMotion(raw));
    }
    let command = Command::new(v.clamp(0.0, 1.0), gamma.clamp(-1.0, 1.0));
    Ok(Retrieval {
        command,
        clamped: command != raw,
    })
}

/// Probes the learner over the grid and pairs each learner command with its
/// teacher equivalent; clamped retrievals are dropped.
pub fn build_command_pairs<B: BlackBox + ?Sized>(
    black_box: &mut B,
    grid: &[Command],
    duration: f64,
    teacher: &VehicleParams,
) -> Result<Vec<CommandPair>, CalibrationError> {
    let mut pairs = Vec::new();
    for obs in probe_learner(black_box, grid, duration)? {
        let r = retrieve_teacher_equivalent(&obs, teacher)?;
        if !r.clamped {
            pairs.push(CommandPair {
                teacher: r.command,
                learner: obs.command,
            });
        }
    }
    Ok(pairs)
}
