//! Oracles shared by the integration tests. Everything here is written from
//! the closed-form definitions, not through the library's own checks.
#![allow(dead_code)]

use visrrt_core::control::{HalfPlane, QpProblem};
use visrrt_core::sim::suite::{RunSpec, Suite};
use visrrt_core::sim::ExperimentParams;
use visrrt_core::{fixtures, load_world, Sample, SensorSpec, State, Vec2, WorldModel};

/// `(h, ψ_1)` of `‖p − c‖² − ρ²` under the unicycle with linear gains.
pub fn collision_psi(s: &State, c: Vec2, rho: f64, gamma1: f64) -> (f64, f64) {
    let d = Vec2::new(s.x - c.x, s.y - c.y);
    let h = d.norm_squared() - rho * rho;
    let h_dot = 2.0 * s.v * (d.x * s.theta.cos() + d.y * s.theta.sin());
    (h, h_dot + gamma1 * h)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Rescan {
    pub collisions: usize,
    pub visibility: usize,
}

/// Per-sample check of a reference path: bounds, `h ≥ 0` and `ψ_1 ≥ 0` for
/// every known obstacle, and `h_vis ≥ 0` against the rest of the path.
pub fn rescan(
    path: &[Sample],
    world: &WorldModel,
    sensor: SensorSpec,
    params: &ExperimentParams,
) -> Rescan {
    let rho = |r: f64| r + world.robot_radius + world.tracking_error;
    let gamma1 = params.steer.gains.gamma1;
    let collisions = path
        .iter()
        .filter(|smp| {
            let s = &smp.state;
            !world.bounds.contains(s.position())
                || world.known_obstacles.iter().any(|o| {
                    let (h, psi1) = collision_psi(s, o.center, rho(o.radius), gamma1);
                    h < -1e-9 || psi1 < -1e-9
                })
        })
        .count();
    let a_max = -params.limits.a_min;
    let visibility = (0..path.len())
        .filter(|&k| {
            visrrt_core::safety::visibility_constraint(
                &path[k..],
                sensor,
                a_max,
                params.steer.visibility_headway,
            ) < 0.0
        })
        .count();
    Rescan {
        collisions,
        visibility,
    }
}

pub fn suite() -> Suite {
    Suite::parse(fixtures::FIGS_SUITE).expect("pinned suite parses")
}

pub fn world_for(suite: &Suite, run: &RunSpec) -> WorldModel {
    load_world(fixtures::env(&suite.envs[&run.env]).expect("shipped env")).expect("fixture loads")
}

/// Brute-force answer for a 2-variable QP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QpOracle {
    Feasible(Vec2),
    Infeasible,
    /// Too close to the feasibility boundary for the grid to decide.
    Ambiguous,
}

/// Grid resolution of the feasibility scan, per box side.
const GRID: usize = 400;
/// Feasibility verdicts need the grid's best margin at least this far from 0.
pub const AMBIGUITY_MARGIN: f64 = 0.01;
const ANGLES: usize = 7200;

/// Feasibility from the largest normalised slack over a grid on the input
/// box, then the optimum by scanning rays out of `u_nom`: each ray meets the
/// polygon in an interval, and the nearest entry over all directions is the
/// projection. The best grid direction is refined by ternary search, which
/// is valid because the set of directions reaching within a radius is an
/// interval.
pub fn qp_oracle(p: &QpProblem) -> QpOracle {
    let rows = p.all_constraints();
    let margin = |u: &Vec2| {
        rows.iter()
            .map(|h| {
                if h.c.norm() > 0.0 {
                    h.slack(u) / h.c.norm()
                } else if h.c0 >= 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut best_margin = f64::NEG_INFINITY;
    for i in 0..=GRID {
        for j in 0..=GRID {
            let u = Vec2::new(
                p.lower.x + (p.upper.x - p.lower.x) * i as f64 / GRID as f64,
                p.lower.y + (p.upper.y - p.lower.y) * j as f64 / GRID as f64,
            );
            best_margin = best_margin.max(margin(&u));
        }
    }
    if best_margin.abs() < AMBIGUITY_MARGIN {
        return QpOracle::Ambiguous;
    }
    if best_margin < 0.0 {
        return QpOracle::Infeasible;
    }
    if margin(&p.u_nom) >= 0.0 {
        return QpOracle::Feasible(p.u_nom);
    }
    let entry = |phi: f64| ray_entry(&rows, p.u_nom, phi);
    let step = std::f64::consts::TAU / ANGLES as f64;
    let best = (0..ANGLES)
        .map(|k| (entry(k as f64 * step), k))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    let (mut lo, mut hi) = ((best.1 as f64 - 1.0) * step, (best.1 as f64 + 1.0) * step);
    // Keep the best probe: at a vertex the optimum sits where the entry jumps
    // to infinity, and the bracket midpoint may round onto the wrong side.
    let (mut r, mut phi) = (best.0, best.1 as f64 * step);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let (f1, f2) = (entry(m1), entry(m2));
        for (f, m) in [(f1, m1), (f2, m2)] {
            if f < r {
                (r, phi) = (f, m);
            }
        }
        if f1 <= f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    QpOracle::Feasible(p.u_nom + Vec2::new(phi.cos(), phi.sin()) * r)
}

/// Smallest `r ≥ 0` with `u0 + r·(cos φ, sin φ)` feasible; infinity if the
/// ray misses.
fn ray_entry(rows: &[HalfPlane], u0: Vec2, phi: f64) -> f64 {
    let e = Vec2::new(phi.cos(), phi.sin());
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for h in rows {
        let s0 = h.slack(&u0);
        let ce = h.c.dot(&e);
        if ce > 0.0 {
            lo = lo.max(-s0 / ce);
        } else if ce < 0.0 {
            hi = hi.min(s0 / -ce);
        } else if s0 < 0.0 {
            return f64::INFINITY;
        }
    }
    if lo <= hi {
        lo
    } else {
        f64::INFINITY
    }
}
