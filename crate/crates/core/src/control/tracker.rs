//! Waypoint tracking: a proportional nominal law and its CBF-QP filter.

use super::qp::{solve_qp, HalfPlane, Infeasible, QpProblem};
use crate::dynamics::{wrap_angle, Control, Limits, State, Vec2};
use crate::safety::{BarrierGains, CollisionBarrier};
use crate::world::Obstacle;
use crate::BarrierSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerGains {
    pub k_v: f64,
    pub k_omega: f64,
    pub v_cruise: f64,
    /// Distance at which the follower advances to the next waypoint (m).
    pub switch_radius: f64,
    /// `v_des ≤ goal_gain · distance` on the final waypoint.
    pub goal_gain: f64,
    /// Class-K gains of the collision HOCBF rows in the QP.
    pub barrier: BarrierGains,
}

impl Default for TrackerGains {
    fn default() -> Self {
        Self {
            k_v: 1.0,
            k_omega: 2.0,
            v_cruise: 1.0,
            switch_radius: 0.3,
            goal_gain: 1.0,
            barrier: BarrierGains::default(),
        }
    }
}

/// Heading-and-speed law toward `waypoint`, unclamped.
pub fn nominal_control(s: &State, waypoint: Vec2, is_final: bool, gains: &TrackerGains) -> Control {
    let d = waypoint - s.position();
    let dist = d.norm();
    let bearing_error = if dist > 1e-9 {
        wrap_angle(d.y.atan2(d.x) - s.theta)
    } else {
        0.0
    };
    let mut v_des = gains.v_cruise * bearing_error.cos().max(0.0);
    if is_final {
        v_des = v_des.min(gains.goal_gain * dist);
    }
    Control::new(gains.k_v * (v_des - s.v), gains.k_omega * bearing_error)
}

/// One `ψ_2(x, u) ≥ 0` row per obstacle, inflated by `inflation`.
pub fn collision_rows(
    s: &State,
    obstacles: &[Obstacle],
    inflation: f64,
    gains: BarrierGains,
) -> Vec<HalfPlane> {
    obstacles
        .iter()
        .map(|o| {
            let spec = BarrierSpec::new(CollisionBarrier::new(o, inflation), gains.alphas());
            let psi = spec
                .eval_psi_series(s)
                .expect("collision barrier has relative degree 2");
            HalfPlane::new(psi.gain, psi.offset)
        })
        .collect()
}

/// CBF-QP tracking input: the nominal law projected onto the input box and
/// the collision HOCBF half-planes.
pub fn cbf_qp_track(
    s: &State,
    waypoint: Vec2,
    is_final: bool,
    obstacles: &[Obstacle],
    inflation: f64,
    gains: &TrackerGains,
    limits: &Limits,
) -> Result<Control, Infeasible> {
    let u_nom = nominal_control(s, waypoint, is_final, gains).to_vector();
    let rows = collision_rows(s, obstacles, inflation, gains.barrier);
    let qp = QpProblem::new(u_nom, rows, limits.input_lower(), limits.input_upper());
    solve_qp(&qp).map(|u| Control::from_vector(&u))
}

/// Advances through a waypoint list; the first waypoint is the start and is
/// skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointFollower {
    waypoints: Vec<Vec2>,
    index: usize,
    switch_radius: f64,
}

impl WaypointFollower {
    pub fn new(waypoints: Vec<Vec2>, switch_radius: f64) -> Self {
        assert!(!waypoints.is_empty(), "no waypoints to follow");
        let index = usize::from(waypoints.len() > 1);
        Self {
            waypoints,
            index,
            switch_radius,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Current target and whether it is the last one, after advancing past
    /// every waypoint within the switch radius of `p`.
    pub fn target(&mut self, p: Vec2) -> (Vec2, bool) {
        let last = self.waypoints.len() - 1;
        while self.index < last && (self.waypoints[self.index] - p).norm() <= self.switch_radius {
            self.index += 1;
        }
        (self.waypoints[self.index], self.index == last)
    }
}
