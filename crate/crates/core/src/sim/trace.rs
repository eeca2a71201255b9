use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::vehicle::SimState;
use crate::geometry::{self, Point};
use crate::planner::PathSpec;
use crate::transfer::Command;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Collision,
    BudgetExhausted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Reached => "goal reached",
            Outcome::Collision => "collision with an obstacle",
            Outcome::BudgetExhausted => "step budget exhausted",
        })
    }
}

/// One control step. `state` is ground truth, `measured` the noisy reading
/// and `estimate` the filtered position the controller acted on.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub teacher: Command,
    pub learner: Command,
    pub state: SimState,
    pub measured: Point,
    pub estimate: Point,
    pub plan_id: usize,
    pub d_e: f64,
    pub epsilon: f64,
    pub replan: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
    /// Planned polylines, indexed by `TraceRecord::plan_id`.
    pub plans: Vec<Vec<Point>>,
    pub outcome: Option<Outcome>,
}

const HEADER: [&str; 16] = [
    "t", "x", "y", "theta", "meas_x", "meas_y", "est_x", "est_y", "v_teacher", "gamma_teacher", "v_learner", "gamma_learner", "plan_id",
    "d_e", "epsilon", "replan",
];

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, e)
}

impl SimTrace {
    pub fn positions(&self) -> Vec<Point> {
        self.records.iter().map(|r| [r.state.x, r.state.y]).collect()
    }

    pub fn replan_count(&self) -> usize {
        self.records.iter().filter(|r| r.replan).count()
    }

    /// One row per control step. Floats use the shortest representation
    /// that reads back to the same value.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER).map_err(csv_err)?;
        for r in &self.records {
            let row = [
                r.t.to_string(),
                r.state.x.to_string(),
                r.state.y.to_string(),
                r.state.theta.to_string(),
                r.measured[0].to_string(),
                r.measured[1].to_string(),
                r.estimate[0].to_string(),
                r.estimate[1].to_string(),
                r.teacher.v.to_string(),
                r.teacher.gamma.to_string(),
                r.learner.v.to_string(),
                r.learner.gamma.to_string(),
                r.plan_id.to_string(),
                r.d_e.to_string(),
                r.epsilon.to_string(),
                u8::from(r.replan).to_string(),
            ];
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()
    }

    /// Plans as `plan_id,k,x,y` rows.
    pub fn write_plans_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["plan_id", "k", "x", "y"]).map_err(csv_err)?;
        for (id, plan) in self.plans.iter().enumerate() {
            for (k, p) in plan.iter().enumerate() {
                w.write_record([id.to_string(), k.to_string(), p[0].to_string(), p[1].to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()
    }

    pub fn read_csv<R: Read, P: Read>(trace: R, plans: P) -> std::io::Result<SimTrace> {
        let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
        let mut out = SimTrace::default();
        let mut r = csv::Reader::from_reader(trace);
        for row in r.records() {
            let row = row.map_err(csv_err)?;
            let f = |i: usize| -> std::io::Result<f64> {
                row.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(format!("column {} of row {:?}", HEADER[i], row.position())))
            };
            out.records.push(TraceRecord {
                t: f(0)?,
                state: SimState {
                    x: f(1)?,
                    y: f(2)?,
                    theta: f(3)?,
                    t: f(0)?,
                },
                measured: [f(4)?, f(5)?],
                estimate: [f(6)?, f(7)?],
                teacher: Command::new(f(8)?, f(9)?),
                learner: Command::new(f(10)?, f(11)?),
                plan_id: f(12)? as usize,
                d_e: f(13)?,
                epsilon: f(14)?,
                replan: f(15)? != 0.0,
            });
        }
        let mut r = csv::Reader::from_reader(plans);
        for row in r.records() {
            let row = row.map_err(csv_err)?;
            let f = |i: usize| -> std::io::Result<f64> {
                row.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(format!("plans column {i}")))
            };
            let id = f(0)? as usize;
            if out.plans.len() <= id {
                out.plans.resize(id + 1, Vec::new());
            }
            out.plans[id].push([f(2)?, f(3)?]);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    /// Largest distance from the true trajectory to the desired path.
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// Largest distance from the true position to the plan being executed.
    pub max_plan_deviation: f64,
    pub replan_count: usize,
    pub steps: usize,
    pub duration: f64,
    pub outcome: Option<Outcome>,
    pub success: bool,
}

pub fn trace_metrics(trace: &SimTrace, path: &PathSpec) -> TraceMetrics {
    let dev: Vec<f64> = trace.positions().iter().map(|&p| path.distance(p)).collect();
    let plan_dev = trace
        .records
        .iter()
        .filter_map(|r| {
            let plan = trace.plans.get(r.plan_id)?;
            Some(geometry::point_polyline_distance([r.state.x, r.state.y], plan))
        })
        .fold(0.0, f64::max);
    TraceMetrics {
        max_deviation: dev.iter().copied().fold(0.0, f64::max),
        mean_deviation: if dev.is_empty() { 0.0 } else { dev.iter().sum::<f64>() / dev.len() as f64 },
        max_plan_deviation: plan_dev,
        replan_count: trace.replan_count(),
        steps: trace.records.len(),
        duration: trace.records.last().map_or(0.0, |r| r.t),
        outcome: trace.outcome,
        success: trace.outcome == Some(Outcome::Reached),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(x: f64, y: f64, t: f64) -> TraceRecord {
        TraceRecord {
            t,
            teacher: Command::new(0.1, 0.0),
            learner: Command::new(0.3, 0.0),
            state: SimState { x, y, theta: 0.0, t },
            measured: [x, y],
            estimate: [x, y],
            plan_id: 0,
            d_e: 0.0,
            epsilon: f64::INFINITY,
            replan: false,
        }
    }

    #[test]
    fn on_path_and_offset_traces() {
        let path = PathSpec::from_waypoints(vec![[0.0, 0.0], [10.0, 0.0]]).unwrap();
        let mut trace = SimTrace {
            records: (0..10).map(|k| record(k as f64, 0.0, k as f64 * 0.05)).collect(),
            plans: vec![vec![[0.0, 0.0], [10.0, 0.0]]],
            outcome: Some(Outcome::Reached),
        };
        assert_eq!(trace_metrics(&trace, &path).max_deviation, 0.0);
        for r in &mut trace.records {
            r.state.y = 0.2;
        }
        let m = trace_metrics(&trace, &path);
        assert!((m.max_deviation - 0.2).abs() < 1e-15 && (m.mean_deviation - 0.2).abs() < 1e-15);
        assert!(m.success);
    }

    #[test]
    fn csv_round_trip() {
        let trace = SimTrace {
            records: vec![record(0.1, 0.2, 0.05), record(1.0 / 3.0, -2.5e-7, 0.1)],
            plans: vec![vec![[0.0, 0.0], [1.0, 0.5]]],
            outcome: None,
        };
        let (mut a, mut b) = (Vec::new(), Vec::new());
        trace.write_csv(&mut a).unwrap();
        trace.write_plans_csv(&mut b).unwrap();
        assert!(String::from_utf8_lossy(&a).starts_with("t,x,y,theta,"));
        let back = SimTrace::read_csv(&a[..], &b[..]).unwrap();
        assert_eq!(back, trace);
    }
}
