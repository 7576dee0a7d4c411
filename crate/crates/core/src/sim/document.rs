//! `plan.json`: the on-disk form of a plan.

use super::SimError;
use crate::dynamics::{Control, State};
use crate::lqr::Sample;
use crate::planner::{PlanResult, Tree};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    /// `[x, y, theta, v]` per waypoint.
    pub waypoints: Vec<[f64; 4]>,
    /// `[x, y, theta, v, t]` per reference sample.
    pub path: Vec<[f64; 5]>,
    pub cost: f64,
    pub iterations: usize,
    pub success: bool,
    /// `[parent, child]` node indices.
    pub tree_edges: Vec<[usize; 2]>,
}

impl From<&PlanResult> for PlanDocument {
    fn from(plan: &PlanResult) -> Self {
        Self {
            waypoints: plan.waypoints.iter().map(State::to_array).collect(),
            path: plan
                .path
                .iter()
                .map(|s| {
                    let [x, y, theta, v] = s.state.to_array();
                    [x, y, theta, v, s.t]
                })
                .collect(),
            cost: plan.cost,
            iterations: plan.iterations_used,
            success: plan.success,
            tree_edges: plan.tree.edges().into_iter().map(|(p, c)| [p, c]).collect(),
        }
    }
}

impl PlanDocument {
    /// Back to a plan good enough for tracking. Tree and controls are not
    /// stored, so they come back empty and zero.
    pub fn into_plan(self) -> PlanResult {
        let state = |[x, y, theta, v]: [f64; 4]| State::new(x, y, theta, v);
        let root = self
            .waypoints
            .first()
            .map_or(State::new(0.0, 0.0, 0.0, 0.0), |&w| state(w));
        PlanResult {
            waypoints: self.waypoints.into_iter().map(state).collect(),
            path: self
                .path
                .into_iter()
                .map(|[x, y, theta, v, t]| Sample {
                    state: State::new(x, y, theta, v),
                    control: Control::ZERO,
                    t,
                })
                .collect(),
            cost: self.cost,
            iterations_used: self.iterations,
            success: self.success,
            tree: Tree::new(root),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan document serializes") + "\n"
    }
}

pub fn write_plan(plan: &PlanResult, path: &Path) -> Result<(), SimError> {
    std::fs::write(path, PlanDocument::from(plan).to_json())?;
    Ok(())
}

pub fn read_plan(path: &Path) -> Result<PlanResult, SimError> {
    let doc: PlanDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(doc.into_plan())
}
