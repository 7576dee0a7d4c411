//! Collision HOCBF, sensor footprint geometry and the visibility constraint.

use crate::barrier::{Barrier, BarrierSpec, ClassK, LieTower};
use crate::dynamics::{wrap_angle, State, Vec2};
use crate::lqr::Sample;
use crate::world::{Obstacle, WorldModel};
use nalgebra::{SVector, Vector2};
use serde::{Deserialize, Serialize};

/// Spacing of the straight continuation appended after a trajectory's last
/// sample when scanning for visibility.
pub const EXTENSION_STEP: f64 = 0.05;

/// Field of view (full cone angle, rad) and sensing range (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub fov: f64,
    pub range: f64,
}

impl SensorSpec {
    /// # Panics
    /// Unless `0 < fov ≤ 2π` and `range > 0`.
    pub fn new(fov: f64, range: f64) -> Self {
        assert!(
            fov > 0.0 && fov <= 2.0 * std::f64::consts::PI,
            "fov out of (0, 2π]: {fov}"
        );
        assert!(range > 0.0, "sensor range must be positive: {range}");
        Self { fov, range }
    }

    pub fn from_degrees(fov_deg: f64, range: f64) -> Self {
        Self::new(fov_deg.to_radians(), range)
    }

    pub fn half_fov(&self) -> f64 {
        self.fov / 2.0
    }
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self::from_degrees(45.0, 3.0)
    }
}

/// Closed circular sector sensed from one pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub position: Vec2,
    pub heading: f64,
    pub spec: SensorSpec,
}

impl Footprint {
    pub fn new(position: Vec2, heading: f64, spec: SensorSpec) -> Self {
        Self {
            position,
            heading,
            spec,
        }
    }

    pub fn from_state(s: &State, spec: SensorSpec) -> Self {
        Self::new(s.position(), s.theta, spec)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_visible(self, p)
    }

    /// Bearing of `p` relative to the heading, in `(-π, π]`.
    pub fn relative_bearing(&self, p: Vec2) -> f64 {
        let d = p - self.position;
        wrap_angle(d.y.atan2(d.x) - self.heading)
    }
}

pub fn point_visible(fp: &Footprint, p: Vec2) -> bool {
    let d = p - fp.position;
    let dist = d.norm();
    if dist > fp.spec.range {
        return false;
    }
    dist == 0.0 || fp.relative_bearing(p).abs() <= fp.spec.half_fov()
}

/// Class-K gains of the second-order collision barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierGains {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for BarrierGains {
    fn default() -> Self {
        Self {
            gamma1: 1.0,
            gamma2: 1.0,
        }
    }
}

impl BarrierGains {
    pub fn alphas(&self) -> Vec<ClassK> {
        vec![ClassK::linear(self.gamma1), ClassK::linear(self.gamma2)]
    }
}

/// `h(x) = ‖p − c‖² − ρ²` under the unicycle; inputs ordered `(a, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionBarrier {
    pub center: Vec2,
    pub rho: f64,
}

impl CollisionBarrier {
    pub fn new(obstacle: &Obstacle, inflation: f64) -> Self {
        Self {
            center: obstacle.center,
            rho: obstacle.radius + inflation,
        }
    }
}

impl Barrier<2> for CollisionBarrier {
    type State = State;

    fn lie_tower(&self, s: &State, depth: usize) -> LieTower<2> {
        let d = s.position() - self.center;
        let e = s.heading();
        let e_perp = Vector2::new(-e.y, e.x);
        let along = d.dot(&e);
        let across = d.dot(&e_perp);
        let v = s.v;
        // h, L_f h = 2v(d·e), L_f² h = 2v², L_f³ h = 0.
        let mut drift = vec![
            d.norm_squared() - self.rho * self.rho,
            2.0 * v * along,
            2.0 * v * v,
            0.0,
        ];
        // L_g h = 0, L_g L_f h = (2 d·e, 2v d·e⊥), L_g L_f² h = (4v, 0).
        let mut input = vec![
            SVector::<f64, 2>::zeros(),
            SVector::from([2.0 * along, 2.0 * v * across]),
            SVector::from([4.0 * v, 0.0]),
        ];
        drift.resize(depth + 1, 0.0);
        input.resize(depth.max(1), SVector::zeros());
        LieTower { drift, input }
    }
}

/// Collision HOCBF for one obstacle, inflated by robot radius plus tracking
/// error.
pub fn collision_barrier(
    obs: &Obstacle,
    world: &WorldModel,
    gains: BarrierGains,
) -> BarrierSpec<CollisionBarrier> {
    BarrierSpec::new(
        CollisionBarrier::new(obs, world.inflation()),
        gains.alphas(),
    )
}

/// Range branch of the visibility constraint as a first-order barrier:
/// `h = reach − v²/(2 a_max) − headway · v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakingRangeBarrier {
    pub reach: f64,
    pub a_max: f64,
    pub headway: f64,
}

impl Barrier<2> for BrakingRangeBarrier {
    type State = State;

    fn lie_tower(&self, s: &State, depth: usize) -> LieTower<2> {
        let v = s.v.max(0.0);
        let mut drift = vec![self.reach - braking_distance(v, self.a_max) - self.headway * v];
        let mut input = vec![SVector::from([-v / self.a_max - self.headway, 0.0])];
        drift.resize(depth + 1, 0.0);
        input.resize(depth.max(1), SVector::zeros());
        LieTower { drift, input }
    }
}

pub fn braking_distance(v: f64, a_max: f64) -> f64 {
    let v = v.max(0.0);
    v * v / (2.0 * a_max)
}

/// First trajectory sample outside a footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub point: Vec2,
    pub arc_index: usize,
    /// Arc length from the first sample to `point`.
    pub arc_length: f64,
    /// No sample left the footprint; `point` is the final sample.
    pub fully_visible: bool,
}

/// # Panics
/// If `traj` is empty.
pub fn critical_point(traj: &[Sample], fp: &Footprint) -> CriticalPoint {
    assert!(!traj.is_empty(), "critical_point on an empty trajectory");
    let mut arc = 0.0;
    let mut prev = traj[0].state.position();
    for (i, sample) in traj.iter().enumerate() {
        let p = sample.state.position();
        arc += (p - prev).norm();
        prev = p;
        if !fp.contains(p) {
            return CriticalPoint {
                point: p,
                arc_index: i,
                arc_length: arc,
                fully_visible: false,
            };
        }
    }
    CriticalPoint {
        point: prev,
        arc_index: traj.len() - 1,
        arc_length: arc,
        fully_visible: true,
    }
}

/// Points along a trajectory with their arc length, continued straight along
/// the final heading for `extension` metres.
fn walk(traj: &[Sample], extension: f64) -> impl Iterator<Item = (f64, Vec2)> + '_ {
    let last = traj.last().map(|s| s.state);
    let mut arc = 0.0;
    let mut prev: Option<Vec2> = None;
    let along = traj.iter().map(move |s| {
        let p = s.state.position();
        if let Some(q) = prev {
            arc += (p - q).norm();
        }
        prev = Some(p);
        (arc, p)
    });
    let tail_arc = arc_length(traj);
    let steps = (extension / EXTENSION_STEP).ceil() as usize;
    let tail = (1..=steps).filter_map(move |k| {
        let s = last?;
        let d = k as f64 * EXTENSION_STEP;
        Some((tail_arc + d, s.position() + s.heading() * d))
    });
    along.chain(tail)
}

pub fn arc_length(traj: &[Sample]) -> f64 {
    traj.windows(2)
        .map(|w| (w[1].state.position() - w[0].state.position()).norm())
        .sum()
}

/// Parameters of the visibility constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityConstraint {
    pub sensor: SensorSpec,
    /// Braking deceleration used for the stopping distance (m/s², > 0).
    pub a_max: f64,
    /// Reaction time (s): `headway · v` must be seen beyond the stopping
    /// distance, so a robot at rest may turn freely.
    pub headway: f64,
}

/// Both branches of the visibility constraint at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityValue {
    /// Seen arc length along the remaining path minus the look-ahead distance.
    pub range: f64,
    /// Half FOV minus the bearing of the look-ahead point (rad).
    pub fov: f64,
}

impl VisibilityValue {
    pub fn value(&self) -> f64 {
        self.range.min(self.fov)
    }
}

impl VisibilityConstraint {
    /// Evaluates `h_vis` at `remaining[0]` against the remaining trajectory.
    ///
    /// The remaining path is continued straight along its final heading so the
    /// last samples still see a look-ahead point. Seen arc length is the arc at
    /// the first point outside the current footprint, capped at the range.
    pub fn evaluate(&self, remaining: &[Sample]) -> VisibilityValue {
        assert!(
            !remaining.is_empty(),
            "visibility check on an empty trajectory"
        );
        let s = remaining[0].state;
        let fp = Footprint::from_state(&s, self.sensor);
        let range = self.sensor.range;
        let lookahead = self.lookahead(s.v);

        let mut seen = range;
        let mut lookahead_point = None;
        let mut prev = (0.0, s.position());
        for (arc, p) in walk(remaining, range + EXTENSION_STEP) {
            if lookahead_point.is_none() && arc >= lookahead {
                let (a0, p0) = prev;
                let t = if arc > a0 {
                    (lookahead - a0) / (arc - a0)
                } else {
                    1.0
                };
                lookahead_point = Some(p0 + (p - p0) * t);
            }
            if arc > range {
                break;
            }
            if !fp.contains(p) {
                seen = arc;
                break;
            }
            prev = (arc, p);
        }
        // A look-ahead past the scanned path lies beyond the range anyway, so
        // the range branch is already negative there.
        let bearing = match lookahead_point {
            Some(q) if (q - s.position()).norm() > 1e-12 => fp.relative_bearing(q).abs(),
            Some(_) => 0.0,
            None => 0.0,
        };
        VisibilityValue {
            range: seen - lookahead,
            fov: self.sensor.half_fov() - bearing,
        }
    }

    pub fn value(&self, remaining: &[Sample]) -> f64 {
        self.evaluate(remaining).value()
    }

    /// Distance that must be seen at speed `v`: stopping distance plus headway.
    pub fn lookahead(&self, v: f64) -> f64 {
        braking_distance(v, self.a_max) + self.headway * v.max(0.0)
    }

    /// Range branch as a first-order barrier for a given seen arc length.
    pub fn range_barrier(&self, seen: f64) -> BarrierSpec<BrakingRangeBarrier> {
        BarrierSpec::new(
            BrakingRangeBarrier {
                reach: seen,
                a_max: self.a_max,
                headway: self.headway,
            },
            vec![ClassK::linear(1.0)],
        )
    }
}

/// `h_vis` at `remaining[0]`; non-negative means everything within stopping
/// distance plus headway along the remaining path is currently sensed.
pub fn visibility_constraint(
    remaining: &[Sample],
    spec: SensorSpec,
    a_max: f64,
    headway: f64,
) -> f64 {
    VisibilityConstraint {
        sensor: spec,
        a_max,
        headway,
    }
    .value(remaining)
}
