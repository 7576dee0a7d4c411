//! Safety-critical tracking downstream of the planner.

pub mod gatekeeper;
pub mod qp;
pub mod tracker;

pub use gatekeeper::{
    braking_trajectory, gatekeeper_commit, CommitDecision, GatekeeperParams, Region,
};
pub use qp::{solve_qp, HalfPlane, Infeasible, QpProblem};
pub use tracker::{cbf_qp_track, nominal_control, TrackerGains, WaypointFollower};
