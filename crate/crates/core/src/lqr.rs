//! Discrete LQR and the LQR-CBF steering rollout.
//!
//! Steering rolls out a clamped LQR tracking law toward a target position and
//! certifies every sample against the collision HOCBFs and the visibility
//! constraint; the rollout is cut at the first violation.

use crate::barrier::BarrierError;
use crate::dynamics::{self, wrap_angle, Control, Limits, State, Vec2};
use crate::safety::{collision_barrier, BarrierGains, SensorSpec, VisibilityConstraint};
use crate::world::WorldModel;
use nalgebra::{DMatrix, Matrix2x4, Matrix4, SMatrix, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DARE_TOLERANCE: f64 = 1e-10;
pub const DARE_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqrError {
    #[error("Riccati iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("R + BᵀPB is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrGain {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub iterations: usize,
}

/// Solves `P = Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA` by fixed-point iteration from
/// `P = Q` and returns `K = (R + BᵀPB)⁻¹BᵀPA`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrGain, LqrError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LqrError::Dimensions(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    for it in 1..=DARE_MAX_ITERATIONS {
        let gain = riccati_gain(a, b, &bt, r, &p)?;
        let mut next = q + &at * &p * a - &at * &p * b * &gain;
        next = (&next + next.transpose()) * 0.5;
        let delta = (&next - &p).amax();
        p = next;
        if !delta.is_finite() {
            break;
        }
        if delta < DARE_TOLERANCE {
            let k = riccati_gain(a, b, &bt, r, &p)?;
            return Ok(LqrGain {
                k,
                p,
                q: q.clone(),
                r: r.clone(),
                iterations: it,
            });
        }
    }
    Err(LqrError::NonConvergence(DARE_MAX_ITERATIONS))
}

fn riccati_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    bt: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    let s = r + bt * p * b;
    let rhs = bt * p * a;
    s.lu().solve(&rhs).ok_or(LqrError::Singular)
}

/// `‖P − (Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA)‖_∞`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let at = a.transpose();
    let bt = b.transpose();
    let s = (r + &bt * p * b)
        .try_inverse()
        .expect("R + BᵀPB invertible");
    let rhs = q + &at * p * a - &at * p * b * s * &bt * p * a;
    (p - rhs).amax()
}

/// One rollout sample: the state and the input applied from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: State,
    pub control: Control,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    Collision,
    Visibility,
    InputBoundsExhausted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub samples: Vec<Sample>,
    pub truncated: bool,
    pub violation: Option<Violation>,
}

impl TrajectorySegment {
    pub fn arc_length(&self) -> f64 {
        crate::safety::arc_length(&self.samples)
    }

    pub fn end_state(&self) -> Option<State> {
        self.samples.last().map(|s| s.state)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteerError {
    #[error("steering violated {0:?} at the first sample")]
    Empty(Violation),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

/// Steering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteerConfig {
    pub q_diag: [f64; 4],
    pub r_diag: [f64; 2],
    pub max_horizon: usize,
    pub dt: f64,
    /// Rollout stops once within this distance of the target (m).
    pub tolerance: f64,
    /// Forward speed of the linearisation point. At `v = 0` the lateral
    /// direction is not stabilisable.
    pub linearization_speed: f64,
    /// Reference speed at the steering target (m/s).
    pub target_speed: f64,
    pub gains: BarrierGains,
    /// Enforce the visibility constraint (off for the ablated baseline).
    pub visibility: bool,
    /// Reaction time (s) added to the stopping distance by the visibility
    /// constraint.
    pub visibility_headway: f64,
    /// Also enforce the range branch as a first-order CBF on the executed input.
    pub visibility_cbf: bool,
}

impl Default for SteerConfig {
    fn default() -> Self {
        Self {
            q_diag: [1.0, 1.0, 0.5, 0.1],
            r_diag: [0.5, 0.5],
            max_horizon: 200,
            dt: 0.05,
            tolerance: 0.05,
            linearization_speed: 0.5,
            target_speed: 0.0,
            gains: BarrierGains::default(),
            visibility: true,
            visibility_headway: 0.1,
            visibility_cbf: false,
        }
    }
}

/// Reusable steering primitive.
///
/// The unicycle linearisation is rotation-equivariant and `Q` weights `x` and
/// `y` equally, so the gain for reference heading `θ` is the heading-zero gain
/// applied to the error expressed in the reference frame. It is computed once.
#[derive(Debug, Clone)]
pub struct Steer {
    pub config: SteerConfig,
    pub limits: Limits,
    gain: Matrix2x4<f64>,
}

impl Steer {
    pub fn new(config: SteerConfig, limits: Limits) -> Result<Self, LqrError> {
        let reference = State::new(0.0, 0.0, 0.0, config.linearization_speed);
        let lin = dynamics::linearize(&reference, Control::ZERO, config.dt);
        let q = Matrix4::from_diagonal(&Vector4::from(config.q_diag));
        let r = SMatrix::<f64, 2, 2>::from_diagonal(&config.r_diag.into());
        let solved = solve_dare(
            &DMatrix::from_column_slice(4, 4, lin.a.as_slice()),
            &DMatrix::from_column_slice(4, 2, lin.b.as_slice()),
            &DMatrix::from_column_slice(4, 4, q.as_slice()),
            &DMatrix::from_column_slice(2, 2, r.as_slice()),
        )?;
        Ok(Self {
            config,
            limits,
            gain: Matrix2x4::from_column_slice(solved.k.as_slice()),
        })
    }

    pub fn gain(&self) -> &Matrix2x4<f64> {
        &self.gain
    }

    pub fn visibility_constraint(&self, sensor: SensorSpec) -> VisibilityConstraint {
        VisibilityConstraint {
            sensor,
            a_max: -self.limits.a_min,
            headway: self.config.visibility_headway,
        }
    }

    /// LQR input toward `reference`, clamped to `U`.
    pub fn control(&self, s: &State, reference: &State) -> Control {
        let (sin, cos) = reference.theta.sin_cos();
        let dx = s.x - reference.x;
        let dy = s.y - reference.y;
        let err = Vector4::new(
            cos * dx + sin * dy,
            -sin * dx + cos * dy,
            wrap_angle(s.theta - reference.theta),
            s.v - reference.v,
        );
        let u = -(self.gain * err);
        self.limits.clamp(Control::new(u[0], u[1])).0
    }

    /// Unchecked rollout toward `to`.
    pub fn rollout(&self, from: &State, to: Vec2, max_horizon: usize) -> Vec<Sample> {
        let d = to - from.position();
        let bearing = if d.norm() > 1e-12 {
            d.y.atan2(d.x)
        } else {
            from.theta
        };
        let reference = State::new(to.x, to.y, bearing, self.config.target_speed);
        let dt = self.config.dt;
        let mut samples = Vec::with_capacity(max_horizon + 1);
        let mut s = *from;
        for k in 0..=max_horizon {
            let t = k as f64 * dt;
            if (s.position() - to).norm() <= self.config.tolerance || k == max_horizon {
                samples.push(Sample {
                    state: s,
                    control: Control::ZERO,
                    t,
                });
                break;
            }
            let u = self.control(&s, &reference);
            samples.push(Sample {
                state: s,
                control: u,
                t,
            });
            s = dynamics::step(&s, u, dt, &self.limits).state;
        }
        samples
    }

    /// Index of the first sample that violates a safety check, if any.
    ///
    /// Checks at sample `k`: every collision barrier's set intersection, its
    /// `ψ_2` admissibility for the executed input (except on the final sample,
    /// which executes nothing), and `h_vis ≥ 0` against `samples[k..]`.
    pub fn first_violation(
        &self,
        samples: &[Sample],
        world: &WorldModel,
        sensor: SensorSpec,
    ) -> Result<Option<(usize, Violation)>, BarrierError> {
        let barriers: Vec<_> = world
            .known_obstacles
            .iter()
            .map(|o| collision_barrier(o, world, self.config.gains))
            .collect();
        let vis = self.visibility_constraint(sensor);
        let last = samples.len().saturating_sub(1);
        for (k, sample) in samples.iter().enumerate() {
            let s = &sample.state;
            if !world.bounds.contains(s.position()) {
                return Ok(Some((k, Violation::Collision)));
            }
            for b in &barriers {
                let psi = b.eval_psi_series(s)?;
                if !psi.in_set_intersection() {
                    return Ok(Some((k, Violation::Collision)));
                }
                if k < last
                    && psi.last(&sample.control.to_vector()) < -crate::barrier::PSI_TOLERANCE
                {
                    return Ok(Some((k, Violation::Collision)));
                }
            }
            if self.config.visibility {
                let value = vis.evaluate(&samples[k..]);
                if value.value() < 0.0 {
                    return Ok(Some((k, Violation::Visibility)));
                }
                if self.config.visibility_cbf && k < last {
                    let seen = value.range + vis.lookahead(s.v);
                    if !vis
                        .range_barrier(seen)
                        .admissible(s, &sample.control.to_vector())?
                    {
                        return Ok(Some((k, Violation::Visibility)));
                    }
                }
            }
        }
        Ok(None)
    }

    /// LQR-CBF steering from `from` toward `to`.
    ///
    /// The rollout is truncated before the first violating sample and the
    /// prefix re-checked until it certifies on its own (visibility depends on
    /// the remaining path, which truncation shortens).
    pub fn steer(
        &self,
        from: &State,
        to: Vec2,
        world: &WorldModel,
        sensor: SensorSpec,
    ) -> Result<TrajectorySegment, SteerError> {
        self.steer_with_horizon(from, to, world, sensor, self.config.max_horizon)
    }

    pub fn steer_with_horizon(
        &self,
        from: &State,
        to: Vec2,
        world: &WorldModel,
        sensor: SensorSpec,
        max_horizon: usize,
    ) -> Result<TrajectorySegment, SteerError> {
        let mut samples = self.rollout(from, to, max_horizon);
        let mut first = None;
        while let Some((k, violation)) = self.first_violation(&samples, world, sensor)? {
            if k == 0 {
                return Err(SteerError::Empty(violation));
            }
            first.get_or_insert(violation);
            samples.truncate(k);
            // The prefix end executes nothing any more.
            samples[k - 1].control = Control::ZERO;
        }
        Ok(TrajectorySegment {
            samples,
            truncated: first.is_some(),
            violation: first,
        })
    }
}

/// One-shot steering with default parameters and limits.
pub fn lqr_cbf_steer(
    from: &State,
    to: Vec2,
    world: &WorldModel,
    sensor: SensorSpec,
    max_horizon: usize,
) -> Result<TrajectorySegment, SteerError> {
    let steer = Steer::new(SteerConfig::default(), Limits::default()).expect("default LQR gain");
    steer.steer_with_horizon(from, to, world, sensor, max_horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::load_world;
    use proptest::prelude::*;

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn world(obstacles: &str) -> WorldModel {
        load_world(&format!(
            "bounds = [-5.0, -5.0, 10.0, 5.0]\nstart = [0.0, 0.0, 0.0, 0.0]\ngoal = [4.0, 0.0]\n\
             goal_tolerance = 0.2\nrobot_radius = 0.2\ntracking_error = 0.1\nobstacles = [{obstacles}]"
        ))
        .unwrap()
    }

    fn steer(visibility: bool) -> Steer {
        let config = SteerConfig {
            visibility,
            ..SteerConfig::default()
        };
        Steer::new(config, Limits::default()).unwrap()
    }

    #[test]
    fn dare_scalar_golden_ratio() {
        let one = scalar(1.0);
        let g = solve_dare(&one, &one, &one, &one).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((g.p[(0, 0)] - phi).abs() < 1e-9);
        assert!((g.k[(0, 0)] - (phi - 1.0)).abs() < 1e-9);
        let p = g.p[(0, 0)];
        assert!((p * p - p - 1.0).abs() < 1e-9);
        assert!(dare_residual(&one, &one, &one, &one, &g.p) < 1e-9);
    }

    #[test]
    fn dare_without_input_is_a_geometric_series() {
        let g = solve_dare(&scalar(0.5), &scalar(0.0), &scalar(1.0), &scalar(1.0)).unwrap();
        let series: f64 = (0..200).map(|k| 0.25f64.powi(k)).sum();
        assert!((g.p[(0, 0)] - series).abs() < 1e-9);
        assert!((g.p[(0, 0)] - 4.0 / 3.0).abs() < 1e-9);
        assert_eq!(g.k[(0, 0)], 0.0);
    }

    #[test]
    fn dare_zero_cost() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.1]);
        let g = solve_dare(&a, &b, &DMatrix::zeros(2, 2), &scalar(1.0)).unwrap();
        assert_eq!(g.p.amax(), 0.0);
        assert_eq!(g.k.amax(), 0.0);
    }

    #[test]
    fn dare_rejects_unstabilizable_and_bad_shapes() {
        assert_eq!(
            solve_dare(&scalar(2.0), &scalar(0.0), &scalar(1.0), &scalar(1.0)),
            Err(LqrError::NonConvergence(DARE_MAX_ITERATIONS))
        );
        assert!(matches!(
            solve_dare(
                &scalar(1.0),
                &DMatrix::zeros(2, 1),
                &scalar(1.0),
                &scalar(1.0)
            ),
            Err(LqrError::Dimensions(_))
        ));
    }

    #[test]
    fn unicycle_gain_stabilizes_linearization() {
        let s = steer(true);
        let lin = dynamics::linearize(&State::new(0.0, 0.0, 0.0, 0.5), Control::ZERO, 0.05);
        let closed = lin.a - lin.b * s.gain();
        let radius = closed
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(radius < 1.0, "{radius}");
    }

    proptest! {
        #[test]
        fn dare_residual_small_on_random_systems(
            a in prop::collection::vec(-1.5f64..1.5, 16),
            b in prop::collection::vec(-1.0f64..1.0, 8),
            q in prop::collection::vec(0.1f64..2.0, 4),
            r in prop::collection::vec(0.1f64..2.0, 2),
        ) {
            let a = DMatrix::from_row_slice(4, 4, &a);
            let b = DMatrix::from_row_slice(4, 2, &b);
            let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(q));
            let r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r));
            // Random pairs are almost surely controllable; non-convergence is the
            // only other accepted outcome.
            if let Ok(g) = solve_dare(&a, &b, &q, &r) {
                let scale = g.p.amax().max(1.0);
                prop_assert!(dare_residual(&a, &b, &q, &r, &g.p) / scale < 1e-8);
                prop_assert!((&g.p - g.p.transpose()).amax() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn empty_world_reaches_target() {
        let w = world("");
        let seg = steer(true)
            .steer(&w.start, Vec2::new(1.0, 0.0), &w, SensorSpec::default())
            .unwrap();
        assert!(!seg.truncated);
        assert_eq!(seg.violation, None);
        let end = seg.end_state().unwrap();
        assert!((end.position() - Vec2::new(1.0, 0.0)).norm() <= 0.05);
        for pair in seg.samples.windows(2) {
            let next =
                dynamics::step(&pair[0].state, pair[0].control, 0.05, &Limits::default()).state;
            assert_eq!(next, pair[1].state);
        }
    }

    /// `ψ_0 = h`, `ψ_1 = ḣ + γ₁h`, `ψ_2(u) = ḧ(u) + (γ₁+γ₂)ḣ + γ₁γ₂h`.
    fn collision_ok(s: &State, u: Option<Control>, c: Vec2, rho: f64, g: f64) -> bool {
        let d = s.position() - c;
        let (e, n) = (
            Vec2::new(s.theta.cos(), s.theta.sin()),
            Vec2::new(-s.theta.sin(), s.theta.cos()),
        );
        let h = d.norm_squared() - rho * rho;
        let hd = 2.0 * s.v * d.dot(&e);
        let tol = 1e-9;
        let mut ok = h >= -tol && hd + g * h >= -tol;
        if let Some(u) = u {
            let hdd = 2.0 * s.v * s.v + 2.0 * d.dot(&e) * u.a + 2.0 * s.v * d.dot(&n) * u.omega;
            ok &= hdd + 2.0 * g * hd + g * g * h >= -tol;
        }
        ok
    }

    #[test]
    fn blocked_target_truncates_at_first_collision() {
        let w = world("[3.0, 0.0, 0.5]");
        let s = steer(false);
        let to = Vec2::new(6.0, 0.0);
        let seg = s.steer(&w.start, to, &w, SensorSpec::default()).unwrap();
        assert!(seg.truncated);
        assert_eq!(seg.violation, Some(Violation::Collision));
        let raw = s.rollout(&w.start, to, s.config.max_horizon);
        let last = raw.len() - 1;
        let first_bad = raw
            .iter()
            .enumerate()
            .position(|(k, smp)| {
                let u = (k < last).then_some(smp.control);
                !collision_ok(&smp.state, u, Vec2::new(3.0, 0.0), 0.8, 1.0)
            })
            .unwrap();
        assert_eq!(seg.len(), first_bad);
        assert_eq!(&seg.samples[..first_bad - 1], &raw[..first_bad - 1]);
    }

    #[test]
    fn short_range_truncates_on_visibility() {
        let w = world("");
        let sensor = SensorSpec::from_degrees(45.0, 0.3);
        let s = steer(true);
        let to = Vec2::new(4.0, 0.0);
        let seg = s.steer(&w.start, to, &w, sensor).unwrap();
        assert!(seg.truncated);
        assert_eq!(seg.violation, Some(Violation::Visibility));
        let vis = s.visibility_constraint(sensor);
        for k in 0..seg.len() {
            assert!(
                crate::safety::visibility_constraint(
                    &seg.samples[k..],
                    sensor,
                    vis.a_max,
                    vis.headway
                ) >= 0.0
            );
        }
        // Truncation shortens the remaining path, so it can only cut earlier than
        // the first failing sample of the raw rollout.
        let raw = s.rollout(&w.start, to, s.config.max_horizon);
        let first_bad = (0..raw.len())
            .find(|&k| vis.value(&raw[k..]) < 0.0)
            .unwrap();
        assert!(seg.len() <= first_bad);
        // The robot would need to see 0.3 m at the end: v²/2 + 0.1 v ≤ 0.3.
        let v_end = seg.end_state().unwrap().v;
        assert!(v_end * v_end / 2.0 + 0.1 * v_end <= 0.3 + 1e-9);
    }

    #[test]
    fn start_in_violation_is_an_error() {
        let w = world("[0.9, 0.0, 0.5]");
        let from = State::new(0.0, 0.0, 0.0, 1.0);
        assert_eq!(
            steer(false).steer(&from, Vec2::new(4.0, 0.0), &w, SensorSpec::default()),
            Err(SteerError::Empty(Violation::Collision))
        );
    }

    #[test]
    fn one_shot_matches_default_steer() {
        let w = world("[2.0, 1.0, 0.4]");
        let to = Vec2::new(3.0, 0.5);
        let a = lqr_cbf_steer(&w.start, to, &w, SensorSpec::default(), 120).unwrap();
        let b = steer(true)
            .steer_with_horizon(&w.start, to, &w, SensorSpec::default(), 120)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn targets_behind_are_approached_after_a_turn() {
        let w = world("");
        let s = steer(false);
        let to = Vec2::new(-1.8, 0.5);
        let d0 = (w.start.position() - to).norm();
        let seg = s
            .steer_with_horizon(&w.start, to, &w, SensorSpec::default(), 200)
            .unwrap();
        let d: Vec<f64> = seg
            .samples
            .iter()
            .map(|smp| (smp.state.position() - to).norm())
            .collect();
        assert!(d[20] > d0);
        assert!(*d.last().unwrap() < 0.5 * d0);
    }

    fn obstacle_field() -> WorldModel {
        world("[2.0, 0.8, 0.5], [1.5, -1.5, 0.4], [3.5, -0.2, 0.3], [-1.0, 1.5, 0.6]")
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn steer_is_deterministic(tx in -4.0f64..9.0, ty in -4.0f64..4.0) {
            let w = obstacle_field();
            let s = steer(true);
            let to = Vec2::new(tx, ty);
            let a = s.steer(&w.start, to, &w, SensorSpec::default());
            let b = s.steer(&w.start, to, &w, SensorSpec::default());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn returned_prefix_rescans_clean(
            tx in -4.0f64..9.0, ty in -4.0f64..4.0, theta in -3.1f64..3.1, v in 0.0f64..0.6, vis in any::<bool>(),
        ) {
            let w = obstacle_field();
            let s = steer(vis);
            let sensor = SensorSpec::default();
            let from = State::new(0.0, 0.0, theta, v);
            if let Ok(seg) = s.steer(&from, Vec2::new(tx, ty), &w, sensor) {
                let vc = s.visibility_constraint(sensor);
                let last = seg.len() - 1;
                for (k, smp) in seg.samples.iter().enumerate() {
                    prop_assert!(w.bounds.contains(smp.state.position()));
                    for o in &w.known_obstacles {
                        let u = (k < last).then_some(smp.control);
                        prop_assert!(collision_ok(&smp.state, u, o.center, o.radius + w.inflation(), 1.0), "k = {}", k);
                    }
                    if vis {
                        prop_assert!(crate::safety::visibility_constraint(&seg.samples[k..], sensor, vc.a_max, vc.headway) >= 0.0);
                    }
                }
            }
        }

        #[test]
        fn goal_attraction_in_empty_world(
            tx in 0.5f64..9.0, slope in -0.5f64..0.5, h1 in 1usize..200, h2 in 1usize..200,
        ) {
            // Only targets ahead: anything behind needs a turn that first
            // drives away (see `targets_behind_are_approached_after_a_turn`).
            let w = world("");
            let s = steer(false);
            let to = Vec2::new(tx, slope * tx);
            let (lo, hi) = (h1.min(h2), h1.max(h2));
            let dist = |h| {
                let seg = s.steer_with_horizon(&w.start, to, &w, SensorSpec::default(), h).unwrap();
                (seg.end_state().unwrap().position() - to).norm()
            };
            let (d_lo, d_hi) = (dist(lo), dist(hi));
            // At rest a braking input still moves the RK4 position by up to
            // a_max·dt²/2 before the speed clamp; allow that creep per step.
            let creep = (hi - lo) as f64 * 0.5 * s.config.dt * s.config.dt;
            prop_assert!(d_hi <= d_lo.max(s.config.tolerance) + creep, "{} -> {}, {} -> {}", lo, d_lo, hi, d_hi);
        }
    }
}
