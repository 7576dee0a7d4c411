//! Visibility-aware sampling-based planning for a unicycle with a limited
//! field-of-view sensor.
//!
//! The pipeline: [`planner::plan`] grows an RRT* tree whose edges are
//! [`lqr::Steer`] rollouts certified against collision HOCBFs and a
//! visibility constraint; [`control`] tracks the resulting waypoints with a
//! CBF-QP or a gatekeeper filter; [`sim`] closes the loop with a sector
//! sensor that reveals hidden obstacles.

// Parameter checks use `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod control;
pub mod dynamics;
pub mod fixtures;
pub mod lqr;
pub mod planner;
pub mod safety;
pub mod sim;
pub mod world;

pub use barrier::{Barrier, BarrierError, BarrierSpec, ClassK, PsiSeries};
pub use dynamics::{Control, Limits, State, Vec2};
pub use lqr::{LqrError, Sample, Steer, SteerConfig, SteerError, TrajectorySegment, Violation};
pub use planner::{plan, PlanError, PlanResult, PlannerParams, Tree};
pub use safety::{BarrierGains, Footprint, SensorSpec, VisibilityConstraint};
pub use world::{load_world, Obstacle, WorldError, WorldModel};
