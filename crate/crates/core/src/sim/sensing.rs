//! Sector sensing and the accumulated local free set `B_t`.

use crate::dynamics::{State, Vec2};
use crate::safety::{point_visible, Footprint, SensorSpec};
use crate::world::Obstacle;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Above this many footprints, membership goes through the grid index.
pub const GRID_THRESHOLD: usize = 1000;
const GRID_CELL: f64 = 0.5;

/// Union of every footprint sensed so far.
#[derive(Debug, Clone, Default)]
pub struct LocalFreeSet {
    footprints: Vec<Footprint>,
    cells: HashMap<(i64, i64), Vec<u32>>,
}

fn cell_of(p: Vec2) -> (i64, i64) {
    (
        (p.x / GRID_CELL).floor() as i64,
        (p.y / GRID_CELL).floor() as i64,
    )
}

impl LocalFreeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn footprints(&self) -> &[Footprint] {
        &self.footprints
    }

    pub fn len(&self) -> usize {
        self.footprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.footprints.is_empty()
    }

    pub fn push(&mut self, fp: Footprint) {
        let id = self.footprints.len() as u32;
        // Register in every cell touched by the range disk's bounding box.
        let r = fp.spec.range;
        let lo = cell_of(fp.position - Vec2::new(r, r));
        let hi = cell_of(fp.position + Vec2::new(r, r));
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                self.cells.entry((i, j)).or_default().push(id);
            }
        }
        self.footprints.push(fp);
    }

    pub fn contains(&self, p: Vec2) -> bool {
        if self.footprints.len() <= GRID_THRESHOLD {
            return self.contains_scan(p);
        }
        self.cells.get(&cell_of(p)).is_some_and(|ids| {
            ids.iter()
                .any(|&i| point_visible(&self.footprints[i as usize], p))
        })
    }

    /// Membership by scanning every footprint.
    pub fn contains_scan(&self, p: Vec2) -> bool {
        self.footprints.iter().any(|fp| point_visible(fp, p))
    }
}

/// Hidden-obstacle detection event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub t: f64,
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Detection {
    pub fn point(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Closest point to the sensor origin among the disk points inside the
/// footprint, or `None` when the disk misses the sector. Assumes a field of
/// view of at most 180°, where the sector is convex.
pub fn disk_sector_contact(fp: &Footprint, obstacle: &Obstacle) -> Option<Vec2> {
    let o = fp.position;
    let c = obstacle.center;
    let r = obstacle.radius;
    let oc = c - o;
    let dist = oc.norm();
    if dist <= r {
        return Some(o);
    }
    let nearest = c - oc * (r / dist);
    if point_visible(fp, nearest) {
        return Some(nearest);
    }
    // Otherwise the minimum over the convex intersection sits on an edge ray.
    let half = fp.spec.half_fov();
    let mut best: Option<(f64, Vec2)> = None;
    for side in [-1.0, 1.0] {
        let angle = fp.heading + side * half;
        let u = Vec2::new(angle.cos(), angle.sin());
        let t0 = oc.dot(&u);
        let perp2 = oc.norm_squared() - t0 * t0;
        // The origin is outside the disk, so t0 < 0 means the line meets it
        // only behind the sensor.
        if perp2 > r * r || t0 < 0.0 {
            continue;
        }
        let t = (t0 - (r * r - perp2).sqrt()).max(0.0);
        if t <= fp.spec.range && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, o + u * t));
        }
    }
    best.map(|(_, p)| p)
}

/// Appends the footprint at `s` to `bt` and reports hidden obstacles seen for
/// the first time. `detected[i]` tracks obstacle `i` across calls.
pub fn sense(
    s: &State,
    hidden: &[Obstacle],
    spec: SensorSpec,
    bt: &mut LocalFreeSet,
    detected: &mut [bool],
    t: f64,
) -> Vec<Detection> {
    let fp = Footprint::from_state(s, spec);
    bt.push(fp);
    let mut out = Vec::new();
    for (id, obstacle) in hidden.iter().enumerate() {
        if detected[id] {
            continue;
        }
        if let Some(p) = disk_sector_contact(&fp, obstacle) {
            detected[id] = true;
            out.push(Detection {
                t,
                id,
                x: p.x,
                y: p.y,
            });
        }
    }
    out
}
