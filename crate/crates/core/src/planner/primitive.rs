use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::sim::vehicle::{step_vehicle, Pose, SimState, VehicleParams};
use crate::transfer::{CapabilityHull, Command};

/// A teacher command held for `duration`, with the body-frame states it
/// produces at every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub command: Command,
    pub duration: f64,
    pub states: Vec<Pose>,
}

impl Primitive {
    pub fn end(&self) -> Pose {
        *self.states.last().expect("primitive has at least its start state")
    }

    /// Path length travelled.
    pub fn arc_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// States mapped into the world frame of `origin`.
    pub fn placed(&self, origin: &Pose) -> Vec<Pose> {
        self.states.iter().map(|s| origin.compose(s)).collect()
    }
}

/// Forward-Euler rollout of the teacher from the body-frame origin.
pub fn generate_primitive(u: Command, teacher: &VehicleParams, duration: f64, dt: f64) -> Primitive {
    let steps = (duration / dt).round().max(1.0) as usize;
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let mut s = SimState::default();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s.pose());
    for _ in 0..steps {
        s = step_vehicle(&s, u, teacher, dt, 0.0, &mut rng);
        states.push(s.pose());
    }
    Primitive {
        command: u,
        duration,
        states,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveLibrary {
    pub primitives: Vec<Primitive>,
    pub dt: f64,
    pub admissible: Vec<bool>,
}

impl PrimitiveLibrary {
    /// Library with every primitive admissible (no capability filter).
    pub fn unfiltered(grid: &[Command], teacher: &VehicleParams, duration: f64, dt: f64) -> Result<Self, PlannerError> {
        if grid.is_empty() {
            return Err(PlannerError::EmptyGrid);
        }
        Ok(PrimitiveLibrary {
            primitives: grid.iter().map(|&u| generate_primitive(u, teacher, duration, dt)).collect(),
            dt,
            admissible: vec![true; grid.len()],
        })
    }

    pub fn admissible_indices(&self) -> Vec<usize> {
        (0..self.primitives.len()).filter(|&i| self.admissible[i]).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Generates all grid primitives and marks those whose command lies strictly
/// inside the capability hull.
pub fn build_library(
    grid: &[Command],
    hull: &CapabilityHull,
    teacher: &VehicleParams,
    duration: f64,
    dt: f64,
) -> Result<PrimitiveLibrary, PlannerError> {
    let mut lib = PrimitiveLibrary::unfiltered(grid, teacher, duration, dt)?;
    lib.admissible = grid.iter().map(|&u| hull.contains_strictly(u)).collect();
    if !lib.admissible.iter().any(|&a| a) {
        return Err(PlannerError::EmptyAdmissibleSet);
    }
    Ok(lib)
}
