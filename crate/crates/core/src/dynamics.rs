//! Acceleration-driven unicycle.
//!
//! State `(x, y, θ, v)`, input `(a, ω)`:
//!
//! ```text
//! ẋ = v cos θ    ẏ = v sin θ    θ̇ = ω    v̇ = a
//! ```
//!
//! written in control-affine form `ẋ = f(x) + g(x) u`. Position has relative
//! degree two with respect to the input, which is what the collision HOCBF
//! relies on.

use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec2 = Vector2<f64>;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

impl State {
    pub fn new(x: f64, y: f64, theta: f64, v: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Unit vector along the heading.
    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.theta, self.v)
    }

    /// Builds a state from a raw vector, wrapping the heading.
    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.theta, self.v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    /// Longitudinal acceleration (m/s²).
    pub a: f64,
    /// Turn rate (rad/s).
    pub omega: f64,
}

impl Control {
    pub const ZERO: Control = Control { a: 0.0, omega: 0.0 };

    pub fn new(a: f64, omega: f64) -> Self {
        Self { a, omega }
    }

    pub fn to_vector(&self) -> Vec2 {
        Vec2::new(self.a, self.omega)
    }

    pub fn from_vector(u: &Vec2) -> Self {
        Self::new(u[0], u[1])
    }
}

/// Speed and input box `U = [a_min, a_max] × [ω_min, ω_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 1.0,
            a_min: -1.0,
            a_max: 1.0,
            omega_min: -1.0,
            omega_max: 1.0,
        }
    }
}

impl Limits {
    /// Clamps `u` into the input box. The flag reports whether anything changed.
    pub fn clamp(&self, u: Control) -> (Control, bool) {
        let a = u.a.clamp(self.a_min, self.a_max);
        let omega = u.omega.clamp(self.omega_min, self.omega_max);
        (Control::new(a, omega), a != u.a || omega != u.omega)
    }

    pub fn contains(&self, u: Control) -> bool {
        (self.a_min..=self.a_max).contains(&u.a)
            && (self.omega_min..=self.omega_max).contains(&u.omega)
    }

    pub fn input_lower(&self) -> Vec2 {
        Vec2::new(self.a_min, self.omega_min)
    }

    pub fn input_upper(&self) -> Vec2 {
        Vec2::new(self.a_max, self.omega_max)
    }
}

/// Drift and actuation fields evaluated at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFields {
    pub drift: Vector4<f64>,
    pub actuation: Matrix4x2<f64>,
}

impl AffineFields {
    /// `f(x) + g(x) u`.
    pub fn velocity(&self, u: Control) -> Vector4<f64> {
        self.drift + self.actuation * u.to_vector()
    }
}

pub fn affine_fields(s: &State) -> AffineFields {
    AffineFields {
        drift: Vector4::new(s.v * s.theta.cos(), s.v * s.theta.sin(), 0.0, 0.0),
        actuation: actuation(),
    }
}

/// `g` does not depend on the state: `a` drives `v̇`, `ω` drives `θ̇`.
fn actuation() -> Matrix4x2<f64> {
    Matrix4x2::new(
        0.0, 0.0, //
        0.0, 0.0, //
        0.0, 1.0, //
        1.0, 0.0,
    )
}

fn vector_field(x: &Vector4<f64>, u: &Vec2) -> Vector4<f64> {
    Vector4::new(x[3] * x[2].cos(), x[3] * x[2].sin(), u[1], u[0])
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: State,
    /// The requested input was outside `U` and got clamped.
    pub input_clamped: bool,
}

/// One RK4 step of the unicycle. The input is clamped to `U`, the heading
/// re-wrapped and the speed clamped to `[v_min, v_max]` afterwards.
pub fn step(s: &State, u: Control, dt: f64, limits: &Limits) -> Step {
    debug_assert!(dt > 0.0);
    let (u, input_clamped) = limits.clamp(u);
    let uv = u.to_vector();
    let x = s.to_vector();
    let k1 = vector_field(&x, &uv);
    let k2 = vector_field(&(x + k1 * (dt / 2.0)), &uv);
    let k3 = vector_field(&(x + k2 * (dt / 2.0)), &uv);
    let k4 = vector_field(&(x + k3 * dt), &uv);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let mut state = State::from_vector(&next);
    state.v = state.v.clamp(limits.v_min, limits.v_max);
    Step {
        state,
        input_clamped,
    }
}

/// Continuous-time Jacobians `(∂F/∂x, ∂F/∂u)` of `F = f + g u`.
pub fn jacobians(s: &State, _u: Control) -> (Matrix4<f64>, Matrix4x2<f64>) {
    let (sin, cos) = s.theta.sin_cos();
    let mut a = Matrix4::zeros();
    a[(0, 2)] = -s.v * sin;
    a[(0, 3)] = cos;
    a[(1, 2)] = s.v * cos;
    a[(1, 3)] = sin;
    (a, actuation())
}

/// Forward-Euler discretisation of the Jacobians: `A_d = I + A dt`, `B_d = B dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
}

pub fn linearize(s: &State, u: Control, dt: f64) -> Linearization {
    let (a, b) = jacobians(s, u);
    Linearization {
        a: Matrix4::identity() + a * dt,
        b: b * dt,
    }
}
