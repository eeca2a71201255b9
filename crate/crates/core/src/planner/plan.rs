use serde::{Deserialize, Serialize};

use super::dtw::dtw;
use super::path::PathSpec;
use super::primitive::PrimitiveLibrary;
use super::PlannerError;
use crate::geometry::{self, Point};
use crate::sim::vehicle::{wrap_angle, Pose};

const MIN_ARC_LENGTH: f64 = 1e-9;

/// Weights of the tracking cost: `k_d` on the DTW distance to the path
/// window, `k_theta` on the end-heading error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub k_d: f64,
    pub k_theta: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains { k_d: 1.0, k_theta: 0.5 }
    }
}

/// Cost of a world-placed primitive against a path window whose end
/// heading is `path_heading`.
pub fn primitive_cost(segment: &[Point], path_heading: f64, placed: &[Pose], gains: Gains) -> f64 {
    let pts: Vec<Point> = placed.iter().map(|p| p.position()).collect();
    let end = placed.last().map(|p| p.theta).unwrap_or(0.0);
    gains.k_d * dtw(segment, &pts) + gains.k_theta * wrap_angle(path_heading - end).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Library indices, one per horizon step.
    pub chosen: Vec<usize>,
    /// World-frame states of each chosen primitive; each segment starts at
    /// the previous segment's end pose.
    pub segments: Vec<Vec<Pose>>,
    pub costs: Vec<f64>,
}

impl PlanResult {
    /// Concatenated trajectory with shared endpoints listed once.
    pub fn world_states(&self) -> Vec<Pose> {
        let mut out: Vec<Pose> = Vec::new();
        for seg in &self.segments {
            let skip = usize::from(!out.is_empty());
            out.extend(seg.iter().skip(skip));
        }
        out
    }

    pub fn polyline(&self) -> Vec<Point> {
        self.world_states().iter().map(|p| p.position()).collect()
    }
}

/// Scores every admissible primitive at `pose` and returns the cheapest
/// (lowest index on ties) with its cost. Primitives that do not move are
/// skipped: their path window is empty, so they would always score zero.
pub fn best_primitive(pose: &Pose, path: &PathSpec, lib: &PrimitiveLibrary, gains: Gains) -> Option<(usize, f64)> {
    let s0 = path.project(pose.position());
    let mut best: Option<(usize, f64)> = None;
    for i in lib.admissible_indices() {
        let prim = &lib.primitives[i];
        if prim.arc_length() <= MIN_ARC_LENGTH {
            continue;
        }
        let (segment, heading) = path.window(s0, prim.arc_length(), prim.states.len());
        let cost = primitive_cost(&segment, heading, &prim.placed(pose), gains);
        if best.is_none_or(|b| cost < b.1) {
            best = Some((i, cost));
        }
    }
    best
}

/// Greedy plan over `horizon` primitives starting at `pose`.
pub fn plan_step(
    pose: &Pose,
    path: &PathSpec,
    lib: &PrimitiveLibrary,
    horizon: usize,
    gains: Gains,
) -> Result<PlanResult, PlannerError> {
    let mut at = *pose;
    let mut plan = PlanResult {
        chosen: Vec::with_capacity(horizon),
        segments: Vec::with_capacity(horizon),
        costs: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let (i, cost) = best_primitive(&at, path, lib, gains).ok_or(PlannerError::EmptyAdmissibleSet)?;
        let seg = lib.primitives[i].placed(&at);
        at = *seg.last().expect("primitive has states");
        plan.chosen.push(i);
        plan.segments.push(seg);
        plan.costs.push(cost);
    }
    Ok(plan)
}

/// Replanning threshold: `eta` times the distance to the nearest obstacle
/// in view, or infinity with none in view.
pub fn replan_threshold(position: Point, obstacles_in_fov: &[Point], eta: f64) -> f64 {
    obstacles_in_fov
        .iter()
        .map(|&o| geometry::dist(position, o))
        .reduce(f64::min)
        .map_or(f64::INFINITY, |d| eta * d)
}

pub fn should_replan(deviation: f64, epsilon: f64) -> bool {
    deviation > epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::command_grid;
    use crate::planner::primitive::generate_primitive;
    use crate::sim::vehicle::VehicleParams;
    use crate::transfer::Command;
    use std::f64::consts::PI;

    fn teacher() -> VehicleParams {
        VehicleParams::new(3.0, PI / 3.0)
    }

    #[test]
    fn on_path_primitive_costs_nothing() {
        let prim = generate_primitive(Command::new(0.5, 0.0), &teacher(), 1.0, 0.05);
        let seg: Vec<Point> = prim.states.iter().map(|p| p.position()).collect();
        assert_eq!(primitive_cost(&seg, 0.0, &prim.states, Gains::default()), 0.0);
        let no_heading = Gains { k_d: 2.0, k_theta: 0.0 };
        let off: Vec<Point> = seg.iter().map(|p| [p[0], p[1] + 0.1]).collect();
        let c = primitive_cost(&off, 1.0, &prim.states, no_heading);
        assert!((c - 2.0 * dtw(&off, &seg)).abs() < 1e-15);
    }

    #[test]
    fn heading_error_wraps() {
        let placed = [Pose::new(0.0, 0.0, 0.0)];
        let c = primitive_cost(&[[0.0, 0.0]], 1.5 * PI, &placed, Gains { k_d: 0.0, k_theta: 1.0 });
        assert!((c - 0.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn straight_path_picks_straight_primitive() {
        let grid = command_grid(3, 5);
        let lib = PrimitiveLibrary::unfiltered(&grid, &teacher(), 1.0, 0.05).unwrap();
        let path = PathSpec::from_waypoints(vec![[0.0, 0.0], [20.0, 0.0]]).unwrap();
        let plan = plan_step(&Pose::default(), &path, &lib, 2, Gains::default()).unwrap();
        for &i in &plan.chosen {
            assert_eq!(lib.primitives[i].command.gamma, 0.0);
            assert!(lib.primitives[i].command.v > 0.0);
        }
        let segs = &plan.segments;
        assert_eq!(segs[0].last(), segs[1].first());
    }

    #[test]
    fn thresholds() {
        assert_eq!(replan_threshold([0.0, 0.0], &[], 0.5), f64::INFINITY);
        assert_eq!(replan_threshold([0.0, 0.0], &[[2.0, 0.0]], 0.5), 1.0);
        assert_eq!(replan_threshold([0.0, 0.0], &[[0.0, 3.0], [1.0, 0.0]], 0.5), 0.5);
        assert!(!should_replan(0.0, 1.0));
        assert!(!should_replan(1e9, f64::INFINITY));
        assert!(should_replan(1.1, 1.0));
    }
}
