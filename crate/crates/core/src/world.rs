//! Environment model: bounds, circular obstacles (known and hidden), start,
//! goal and robot geometry.

use crate::dynamics::{State, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("malformed world config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid world: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Self {
        Self {
            center: Vec2::new(cx, cy),
            radius,
        }
    }

    /// Signed distance from `p` to the disk boundary.
    pub fn distance(&self, p: Vec2) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            min: Vec2::new(xmin, ymin),
            max: Vec2::new(xmax, ymax),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub bounds: Bounds,
    pub known_obstacles: Vec<Obstacle>,
    /// Obstacles the planner never sees; only the onboard sensor reveals them.
    pub hidden_obstacles: Vec<Obstacle>,
    pub start: State,
    pub goal: Vec2,
    pub goal_tolerance: f64,
    pub robot_radius: f64,
    /// Maximum tracking error ε of the downstream controller.
    pub tracking_error: f64,
}

/// On-disk schema of a world file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub bounds: [f64; 4],
    pub start: [f64; 4],
    pub goal: [f64; 2],
    pub goal_tolerance: f64,
    pub robot_radius: f64,
    pub tracking_error: f64,
    #[serde(default)]
    pub obstacles: Vec<[f64; 3]>,
    #[serde(default)]
    pub hidden: Vec<[f64; 3]>,
}

impl WorldConfig {
    pub fn into_world(self) -> Result<WorldModel, WorldError> {
        let [xmin, ymin, xmax, ymax] = self.bounds;
        let to_obstacles = |v: Vec<[f64; 3]>| {
            v.into_iter()
                .map(|[cx, cy, r]| Obstacle::new(cx, cy, r))
                .collect::<Vec<_>>()
        };
        let [sx, sy, st, sv] = self.start;
        let world = WorldModel {
            bounds: Bounds::new(xmin, ymin, xmax, ymax),
            known_obstacles: to_obstacles(self.obstacles),
            hidden_obstacles: to_obstacles(self.hidden),
            start: State::new(sx, sy, st, sv),
            goal: Vec2::new(self.goal[0], self.goal[1]),
            goal_tolerance: self.goal_tolerance,
            robot_radius: self.robot_radius,
            tracking_error: self.tracking_error,
        };
        world.validate()?;
        Ok(world)
    }
}

impl From<&WorldModel> for WorldConfig {
    fn from(w: &WorldModel) -> Self {
        let obs = |v: &[Obstacle]| {
            v.iter()
                .map(|o| [o.center.x, o.center.y, o.radius])
                .collect()
        };
        WorldConfig {
            bounds: [
                w.bounds.min.x,
                w.bounds.min.y,
                w.bounds.max.x,
                w.bounds.max.y,
            ],
            start: w.start.to_array(),
            goal: [w.goal.x, w.goal.y],
            goal_tolerance: w.goal_tolerance,
            robot_radius: w.robot_radius,
            tracking_error: w.tracking_error,
            obstacles: obs(&w.known_obstacles),
            hidden: obs(&w.hidden_obstacles),
        }
    }
}

/// Parses and validates a world config.
pub fn load_world(config_text: &str) -> Result<WorldModel, WorldError> {
    let config: WorldConfig = toml::from_str(config_text)?;
    config.into_world()
}

/// Which obstacle sets a clearance query covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleSet {
    Known,
    All,
}

impl WorldModel {
    pub fn validate(&self) -> Result<(), WorldError> {
        let invalid = |msg: String| Err(WorldError::Invalid(msg));
        let b = &self.bounds;
        if !(b.min.x < b.max.x && b.min.y < b.max.y) {
            return invalid(format!("degenerate bounds {:?}", b));
        }
        if !(self.goal_tolerance > 0.0) {
            return invalid("goal_tolerance must be positive".into());
        }
        if !(self.robot_radius > 0.0) {
            return invalid("robot_radius must be positive".into());
        }
        if !(self.tracking_error >= 0.0) {
            return invalid("tracking_error must be non-negative".into());
        }
        if let Some(o) = self
            .known_obstacles
            .iter()
            .chain(&self.hidden_obstacles)
            .find(|o| !(o.radius > 0.0))
        {
            return invalid(format!(
                "obstacle at {:?} has non-positive radius",
                o.center
            ));
        }
        if !b.contains(self.goal) {
            return invalid(format!("goal {:?} outside bounds", self.goal));
        }
        let start = self.start.position();
        if !b.contains(start) {
            return invalid(format!("start {:?} outside bounds", start));
        }
        let inflation = self.inflation();
        if let Some(o) = self
            .known_obstacles
            .iter()
            .find(|o| o.distance(start) < inflation)
        {
            return invalid(format!(
                "start {:?} collides with obstacle at {:?} inflated by {inflation}",
                start, o.center
            ));
        }
        Ok(())
    }

    /// Robot radius plus tracking error, the margin every planned sample keeps.
    pub fn inflation(&self) -> f64 {
        self.robot_radius + self.tracking_error
    }

    /// Same world with the hidden obstacles removed: the planner's view.
    pub fn without_hidden(&self) -> WorldModel {
        WorldModel {
            hidden_obstacles: Vec::new(),
            ..self.clone()
        }
    }

    pub fn obstacles(&self, set: ObstacleSet) -> impl Iterator<Item = &Obstacle> {
        let hidden: &[Obstacle] = match set {
            ObstacleSet::Known => &[],
            ObstacleSet::All => &self.hidden_obstacles,
        };
        self.known_obstacles.iter().chain(hidden)
    }

    pub fn clearance(&self, p: Vec2, set: ObstacleSet) -> f64 {
        clearance(p, self.obstacles(set))
    }

    pub fn goal_reached(&self, p: Vec2) -> bool {
        (p - self.goal).norm() <= self.goal_tolerance
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&WorldConfig::from(self)).expect("world config serializes")
    }
}

/// Minimum signed distance from `p` to the given obstacles, `f64::MAX` when
/// there are none.
pub fn clearance<'a>(p: Vec2, obstacles: impl IntoIterator<Item = &'a Obstacle>) -> f64 {
    obstacles
        .into_iter()
        .map(|o| o.distance(p))
        .fold(f64::MAX, f64::min)
}

/// Membership in the true collision-free set: inside the bounds and at least
/// one robot radius away from every known or hidden obstacle (closed set).
pub fn in_true_free_set(s: &State, world: &WorldModel) -> bool {
    let p = s.position();
    world.bounds.contains(p) && world.clearance(p, ObstacleSet::All) >= world.robot_radius
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY: &str = r#"
        bounds = [-1.0, -1.0, 6.0, 1.0]
        start = [0.0, 0.0, 0.0, 0.0]
        goal = [5.0, 0.0]
        goal_tolerance = 0.2
        robot_radius = 0.3
        tracking_error = 0.1
    "#;

    fn world_with(obstacles: &[[f64; 3]], hidden: &[[f64; 3]]) -> WorldModel {
        let mut w = load_world(EMPTY).unwrap();
        w.known_obstacles = obstacles
            .iter()
            .map(|o| Obstacle::new(o[0], o[1], o[2]))
            .collect();
        w.hidden_obstacles = hidden
            .iter()
            .map(|o| Obstacle::new(o[0], o[1], o[2]))
            .collect();
        w
    }

    #[test]
    fn empty_world_loads() {
        let w = load_world(EMPTY).unwrap();
        assert!(w.known_obstacles.is_empty() && w.hidden_obstacles.is_empty());
        assert_eq!(w.goal, Vec2::new(5.0, 0.0));
        assert_eq!(w.start, State::new(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn start_at_obstacle_center_is_rejected() {
        let text = format!("{EMPTY}\nobstacles = [[0.0, 0.0, 0.5]]");
        assert!(matches!(load_world(&text), Err(WorldError::Invalid(_))));
    }

    #[test]
    fn goal_outside_bounds_is_rejected() {
        let text = EMPTY.replace("goal = [5.0, 0.0]", "goal = [9.0, 0.0]");
        assert!(matches!(load_world(&text), Err(WorldError::Invalid(_))));
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        assert!(matches!(
            load_world("bounds = [1, 2"),
            Err(WorldError::Parse(_))
        ));
        let missing = EMPTY.replace("robot_radius = 0.3", "");
        assert!(matches!(load_world(&missing), Err(WorldError::Parse(_))));
    }

    #[test]
    fn fixtures_load() {
        let env1 = load_world(crate::fixtures::ENV1).unwrap();
        assert_eq!(env1.hidden_obstacles.len(), 1);
        let env2 = load_world(crate::fixtures::ENV2).unwrap();
        assert!(!env2.hidden_obstacles.is_empty());
    }

    #[test]
    fn clearance_examples() {
        let w = world_with(&[[0.0, 0.0, 1.0]], &[]);
        assert_eq!(w.clearance(Vec2::new(3.0, 0.0), ObstacleSet::Known), 2.0);
        assert_eq!(w.clearance(Vec2::new(0.0, 0.0), ObstacleSet::Known), -1.0);
        let empty = world_with(&[], &[]);
        assert_eq!(
            empty.clearance(Vec2::new(0.0, 0.0), ObstacleSet::All),
            f64::MAX
        );
    }

    #[test]
    fn clearance_respects_obstacle_set() {
        let w = world_with(&[[4.0, 0.0, 0.5]], &[[1.0, 0.0, 0.5]]);
        let p = Vec2::new(0.0, 0.0);
        assert_eq!(w.clearance(p, ObstacleSet::Known), 3.5);
        assert_eq!(w.clearance(p, ObstacleSet::All), 0.5);
        assert!(w.without_hidden().hidden_obstacles.is_empty());
    }

    #[test]
    fn true_free_set_membership() {
        let w = world_with(&[[2.0, 0.0, 1.0]], &[]);
        assert!(in_true_free_set(&State::new(-1.0, 0.0, 0.0, 0.0), &w));
        // Exactly on the inflated boundary counts as free.
        assert!(in_true_free_set(&State::new(0.7, 0.0, 0.0, 0.0), &w));
        assert!(!in_true_free_set(&State::new(0.8, 0.0, 0.0, 0.0), &w));
        assert!(!in_true_free_set(&State::new(-3.0, 0.0, 0.0, 0.0), &w));
    }

    #[test]
    fn toml_round_trip() {
        let w = world_with(&[[2.0, 0.5, 0.4]], &[[3.0, -0.5, 0.2]]);
        assert_eq!(load_world(&w.to_toml()).unwrap(), w);
    }

    proptest::proptest! {
        #[test]
        fn clearance_is_one_lipschitz(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64, bx in -5.0..5.0f64, by in -5.0..5.0f64,
            obs in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0.1..2.0f64), 0..6),
        ) {
            let obs: Vec<Obstacle> = obs.into_iter().map(|(x, y, r)| Obstacle::new(x, y, r)).collect();
            let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
            if !obs.is_empty() {
                proptest::prop_assert!((clearance(a, &obs) - clearance(b, &obs)).abs() <= (a - b).norm() + 1e-12);
            }
        }

        #[test]
        fn free_set_matches_per_obstacle_loop(
            px in -1.5..6.5f64, py in -1.5..1.5f64,
            obs in proptest::collection::vec((-1.0..6.0f64, -1.0..1.0f64, 0.05..0.5f64), 0..5),
        ) {
            let obs: Vec<[f64; 3]> = obs.into_iter().map(|(x, y, r)| [x, y, r]).collect();
            let w = world_with(&obs, &[]);
            let s = State::new(px, py, 0.0, 0.0);
            let mut free = (-1.0..=6.0).contains(&px) && (-1.0..=1.0).contains(&py);
            for o in &obs {
                let d = ((px - o[0]).powi(2) + (py - o[1]).powi(2)).sqrt() - o[2];
                free &= d >= 0.3;
            }
            proptest::prop_assert_eq!(in_true_free_set(&s, &w), free);
        }
    }
}
