//! Minimum-deviation QP in two variables, solved by exact enumeration.
//!
//! The optimum of `‖u − u_nom‖²` over a convex polygon is either `u_nom`
//! itself, the projection of `u_nom` onto one edge line, or a vertex, so
//! checking every such candidate for feasibility is exact.

use crate::dynamics::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when testing a candidate against a constraint.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// `c·u + c0 ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub c: Vec2,
    pub c0: f64,
}

impl HalfPlane {
    pub fn new(c: Vec2, c0: f64) -> Self {
        Self { c, c0 }
    }

    pub fn slack(&self, u: &Vec2) -> f64 {
        self.c.dot(u) + self.c0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    pub u_nom: Vec2,
    pub constraints: Vec<HalfPlane>,
    pub lower: Vec2,
    pub upper: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("QP infeasible: constraints and input box have empty intersection")]
pub struct Infeasible;

impl QpProblem {
    /// # Panics
    /// If the box is empty.
    pub fn new(u_nom: Vec2, constraints: Vec<HalfPlane>, lower: Vec2, upper: Vec2) -> Self {
        assert!(lower.x <= upper.x && lower.y <= upper.y, "empty input box");
        Self {
            u_nom,
            constraints,
            lower,
            upper,
        }
    }

    /// Box sides followed by the user constraints.
    pub fn all_constraints(&self) -> Vec<HalfPlane> {
        let mut all = vec![
            HalfPlane::new(Vec2::new(1.0, 0.0), -self.lower.x),
            HalfPlane::new(Vec2::new(-1.0, 0.0), self.upper.x),
            HalfPlane::new(Vec2::new(0.0, 1.0), -self.lower.y),
            HalfPlane::new(Vec2::new(0.0, -1.0), self.upper.y),
        ];
        all.extend_from_slice(&self.constraints);
        all
    }

    pub fn is_feasible_point(&self, u: &Vec2) -> bool {
        feasible(&self.all_constraints(), u)
    }
}

fn feasible(rows: &[HalfPlane], u: &Vec2) -> bool {
    rows.iter()
        .all(|h| h.slack(u) >= -FEASIBILITY_TOLERANCE * (1.0 + h.c.norm()))
}

pub fn solve_qp(p: &QpProblem) -> Result<Vec2, Infeasible> {
    let rows = p.all_constraints();
    // Rows with a vanishing normal are either always true or never.
    let mut lines = Vec::with_capacity(rows.len());
    for h in &rows {
        if h.c.norm_squared() < 1e-24 {
            if h.c0 < -FEASIBILITY_TOLERANCE {
                return Err(Infeasible);
            }
        } else {
            lines.push(*h);
        }
    }
    if feasible(&lines, &p.u_nom) {
        return Ok(p.u_nom);
    }
    let mut best: Option<(f64, Vec2)> = None;
    let mut consider = |u: Vec2| {
        if feasible(&lines, &u) {
            let d = (u - p.u_nom).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, u));
            }
        }
    };
    for h in &lines {
        let n2 = h.c.norm_squared();
        consider(p.u_nom - h.c * (h.slack(&p.u_nom) / n2));
    }
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            let det = a.c.x * b.c.y - a.c.y * b.c.x;
            if det.abs() < 1e-14 * a.c.norm() * b.c.norm() {
                continue;
            }
            // Solve a.c·u = −a.c0, b.c·u = −b.c0.
            let x = (-a.c0 * b.c.y + b.c0 * a.c.y) / det;
            let y = (-b.c0 * a.c.x + a.c0 * b.c.x) / det;
            consider(Vec2::new(x, y));
        }
    }
    best.map(|(_, u)| u).ok_or(Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(u_nom: Vec2, constraints: Vec<HalfPlane>) -> QpProblem {
        QpProblem::new(
            u_nom,
            constraints,
            Vec2::new(-2.0, -2.0),
            Vec2::new(2.0, 2.0),
        )
    }

    #[test]
    fn unconstrained_interior_returns_nominal() {
        let p = unit_box(Vec2::new(0.3, -1.1), vec![]);
        assert_eq!(solve_qp(&p).unwrap(), Vec2::new(0.3, -1.1));
    }

    #[test]
    fn single_half_plane_projects_orthogonally() {
        let p = unit_box(
            Vec2::zeros(),
            vec![HalfPlane::new(Vec2::new(1.0, 0.0), -1.0)],
        );
        let u = solve_qp(&p).unwrap();
        assert!((u - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn nominal_outside_box_clamps() {
        let p = unit_box(Vec2::new(5.0, -7.0), vec![]);
        let u = solve_qp(&p).unwrap();
        assert!((u - Vec2::new(2.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn vertex_solution() {
        // u_a ≥ 1 and u_b ≥ 1 from the origin: optimum at the corner.
        let p = unit_box(
            Vec2::zeros(),
            vec![
                HalfPlane::new(Vec2::new(1.0, 0.0), -1.0),
                HalfPlane::new(Vec2::new(0.0, 1.0), -1.0),
            ],
        );
        let u = solve_qp(&p).unwrap();
        assert!((u - Vec2::new(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn half_plane_outside_box_is_infeasible() {
        let p = unit_box(
            Vec2::zeros(),
            vec![HalfPlane::new(Vec2::new(1.0, 0.0), -3.0)],
        );
        assert_eq!(solve_qp(&p), Err(Infeasible));
    }

    #[test]
    fn contradictory_half_planes_are_infeasible() {
        let p = unit_box(
            Vec2::zeros(),
            vec![
                HalfPlane::new(Vec2::new(1.0, 1.0), -1.0),
                HalfPlane::new(Vec2::new(-1.0, -1.0), 0.5),
            ],
        );
        assert_eq!(solve_qp(&p), Err(Infeasible));
    }

    #[test]
    fn zero_normal_rows() {
        let ok = unit_box(
            Vec2::new(0.5, 0.5),
            vec![HalfPlane::new(Vec2::zeros(), 0.1)],
        );
        assert_eq!(solve_qp(&ok).unwrap(), Vec2::new(0.5, 0.5));
        let bad = unit_box(
            Vec2::new(0.5, 0.5),
            vec![HalfPlane::new(Vec2::zeros(), -0.1)],
        );
        assert_eq!(solve_qp(&bad), Err(Infeasible));
    }

    #[test]
    fn degenerate_box_is_a_point() {
        let p = QpProblem::new(
            Vec2::new(3.0, 3.0),
            vec![],
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 1.0),
        );
        assert_eq!(solve_qp(&p).unwrap(), Vec2::new(1.0, 1.0));
    }

    /// Active-set KKT: `u − u_nom = Σ λ_i c_i` with `λ ≥ 0` over active rows.
    fn kkt_residual(p: &QpProblem, u: &Vec2) -> f64 {
        let rows = p.all_constraints();
        let active: Vec<_> = rows.iter().filter(|h| h.slack(u).abs() < 1e-7).collect();
        let g = u - p.u_nom;
        if active.is_empty() {
            return g.norm();
        }
        // Best non-negative combination over active pairs and singles.
        let mut best = f64::INFINITY;
        for a in &active {
            let l = (g.dot(&a.c) / a.c.norm_squared()).max(0.0);
            best = best.min((g - a.c * l).norm());
        }
        for (i, a) in active.iter().enumerate() {
            for b in &active[i + 1..] {
                let m = nalgebra::Matrix2::from_columns(&[a.c, b.c]);
                if let Some(inv) = m.try_inverse() {
                    let l = inv * g;
                    if l.x >= -1e-9 && l.y >= -1e-9 {
                        best = best.min((g - m * l).norm());
                    }
                }
            }
        }
        best
    }

    fn arb_problem() -> impl Strategy<Value = QpProblem> {
        let row = (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_map(|(a, b, c0)| HalfPlane::new(Vec2::new(a, b), c0));
        (
            -3.0..3.0f64,
            -3.0..3.0f64,
            proptest::collection::vec(row, 0..6),
        )
            .prop_map(|(x, y, rows)| unit_box(Vec2::new(x, y), rows))
    }

    proptest! {
        #[test]
        fn solution_satisfies_kkt(p in arb_problem()) {
            if let Ok(u) = solve_qp(&p) {
                for h in p.all_constraints() {
                    prop_assert!(h.slack(&u) >= -1e-9 * (1.0 + h.c.norm()));
                }
                prop_assert!(kkt_residual(&p, &u) < 1e-6);
            }
        }

        #[test]
        fn feasible_nominal_is_fixed_point(p in arb_problem()) {
            if p.is_feasible_point(&p.u_nom) {
                prop_assert_eq!(solve_qp(&p).unwrap(), p.u_nom);
            }
        }

        #[test]
        fn solution_beats_random_feasible_points(p in arb_problem(), probes in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 50)) {
            let result = solve_qp(&p);
            for (x, y) in probes {
                let q = Vec2::new(x, y);
                if p.is_feasible_point(&q) {
                    let u = result.expect("feasible probe implies feasible problem");
                    prop_assert!((u - p.u_nom).norm() <= (q - p.u_nom).norm() + 1e-9);
                }
            }
        }
    }
}
