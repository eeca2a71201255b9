//! Command transfer between a teacher vehicle with known kinematics and a
//! black-box learner, built on Schwarz–Christoffel rectangle maps of
//! command-space polygons, plus a capability-aware motion-primitive planner
//! and a closed-loop simulator.

pub mod calibration;
pub mod config;
pub mod geometry;
pub mod planner;
pub mod scm;
pub mod sim;
pub mod transfer;

pub use transfer::{Command, CommandPair};
