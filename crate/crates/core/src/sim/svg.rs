//! Deterministic SVG rendering of worlds, trees, paths and runs.

use super::{LocalFreeSet, RunMetrics};
use crate::dynamics::{State, Vec2};
use crate::planner::PlanResult;
use crate::safety::Footprint;
use crate::world::WorldModel;
use std::fmt::Write;

const SCALE: f64 = 50.0;
const MARKER: f64 = 0.3;

/// Optional layers on top of the plan.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overlay<'a> {
    pub metrics: Option<&'a RunMetrics>,
    pub free_set: Option<&'a LocalFreeSet>,
    pub trajectory: &'a [State],
}

struct Canvas<'a> {
    world: &'a WorldModel,
    out: String,
}

impl Canvas<'_> {
    fn px(&self, p: Vec2) -> (f64, f64) {
        let b = &self.world.bounds;
        ((p.x - b.min.x) * SCALE, (b.max.y - p.y) * SCALE)
    }

    fn circle(&mut self, class: &str, c: Vec2, r: f64) {
        let (x, y) = self.px(c);
        let _ = writeln!(
            self.out,
            r#"<circle class="{class}" cx="{x:.2}" cy="{y:.2}" r="{:.2}"/>"#,
            r * SCALE
        );
    }

    fn square(&mut self, class: &str, c: Vec2) {
        let (x, y) = self.px(c - Vec2::new(MARKER / 2.0, -MARKER / 2.0));
        let side = MARKER * SCALE;
        let _ = writeln!(
            self.out,
            r#"<rect class="{class}" x="{x:.2}" y="{y:.2}" width="{side:.2}" height="{side:.2}"/>"#
        );
    }

    fn polyline(&mut self, class: &str, points: impl Iterator<Item = Vec2>) {
        let mut pts = String::new();
        for p in points {
            let (x, y) = self.px(p);
            let _ = write!(pts, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.out,
            r#"<polyline class="{class}" points="{}"/>"#,
            pts.trim_end()
        );
    }

    fn sector(&mut self, fp: &Footprint) {
        let half = fp.spec.half_fov();
        let r = fp.spec.range;
        let at = |a: f64| fp.position + Vec2::new(a.cos(), a.sin()) * r;
        let (ox, oy) = self.px(fp.position);
        let (ax, ay) = self.px(at(fp.heading - half));
        let (bx, by) = self.px(at(fp.heading + half));
        let large = u8::from(2.0 * half > std::f64::consts::PI);
        let rr = r * SCALE;
        // y is flipped, so counter-clockwise in the world is sweep 0 on screen.
        let _ = writeln!(
            self.out,
            r#"<path class="footprint" d="M{ox:.2},{oy:.2} L{ax:.2},{ay:.2} A{rr:.2},{rr:.2} 0 {large} 0 {bx:.2},{by:.2} Z"/>"#
        );
    }
}

const STYLE: &str = "<style>\
.obstacle{fill:black}\
.hidden{fill:orange}\
.edge{fill:none;stroke:green;stroke-width:0.8}\
.path{fill:none;stroke:red;stroke-width:2.5}\
.trajectory{fill:none;stroke:blue;stroke-width:1.5;stroke-dasharray:4 2}\
.footprint{fill:gray;fill-opacity:0.04;stroke:none}\
.detection{fill:red}\
.start{fill:blue}\
.goal{fill:yellow;stroke:black}\
</style>";

/// Obstacles, hidden obstacles, tree edges, reference path and start/goal
/// markers, plus detections when `metrics` is given.
pub fn render_svg(plan: &PlanResult, metrics: Option<&RunMetrics>, world: &WorldModel) -> String {
    render_overlay(
        plan,
        world,
        Overlay {
            metrics,
            ..Overlay::default()
        },
    )
}

pub fn render_overlay(plan: &PlanResult, world: &WorldModel, overlay: Overlay<'_>) -> String {
    let b = &world.bounds;
    let (w, h) = (b.width() * SCALE, b.height() * SCALE);
    let mut c = Canvas {
        world,
        out: String::new(),
    };
    let _ = writeln!(
        c.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    c.out.push_str(STYLE);
    c.out.push('\n');
    let _ = writeln!(c.out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(bt) = overlay.free_set {
        for fp in bt.footprints() {
            c.sector(fp);
        }
    }
    for o in &world.known_obstacles {
        c.circle("obstacle", o.center, o.radius);
    }
    for o in &world.hidden_obstacles {
        c.circle("hidden", o.center, o.radius);
    }
    for node in plan.tree.nodes.iter().filter(|n| n.parent.is_some()) {
        c.polyline(
            "edge",
            node.segment.samples.iter().map(|s| s.state.position()),
        );
    }
    if plan.path.len() > 1 {
        c.polyline("path", plan.path.iter().map(|s| s.state.position()));
    }
    if overlay.trajectory.len() > 1 {
        c.polyline("trajectory", overlay.trajectory.iter().map(State::position));
    }
    if let Some(m) = overlay.metrics {
        for d in &m.detections {
            c.circle("detection", d.point(), 0.08);
        }
    }
    c.square("start", world.start.position());
    c.square("goal", world.goal);
    c.out.push_str("</svg>\n");
    c.out
}
