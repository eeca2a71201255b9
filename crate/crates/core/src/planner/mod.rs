//! Capability-filtered motion-primitive planning.

pub mod dtw;
pub mod path;
pub mod plan;
pub mod primitive;

use thiserror::Error;

pub use dtw::dtw;
pub use path::{PathError, PathSpec};
pub use plan::{best_primitive, plan_step, primitive_cost, replan_threshold, should_replan, Gains, PlanResult};
pub use primitive::{build_library, generate_primitive, Primitive, PrimitiveLibrary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("primitive grid is empty")]
    EmptyGrid,
    #[error("no primitive command lies strictly inside the capability hull")]
    EmptyAdmissibleSet,
    #[error(transparent)]
    Path(#[from] PathError),
}
