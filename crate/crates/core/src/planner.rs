//! Visibility-aware RRT*.
//!
//! Canonical RRT* where every edge is an [`Steer`] rollout certified against
//! the collision HOCBFs and (unless ablated) the visibility constraint.
//! Costs are arc lengths of the executed rollouts.

use crate::dynamics::{wrap_angle, State, Vec2};
use crate::lqr::{Sample, Steer, SteerError, TrajectorySegment};
use crate::safety::SensorSpec;
use crate::world::WorldModel;
use crate::BarrierError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid planner parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub max_iter: usize,
    /// Samples farther than this from their nearest node are pulled in (m).
    pub step_len: f64,
    pub neighbor_radius: f64,
    pub goal_bias: f64,
    pub seed: u64,
    /// Keep truncated steering prefixes as nodes at their endpoints.
    pub keep_truncated: bool,
    /// Rewiring must arrive at the node's heading within this angle (rad).
    pub rewire_heading_tol: f64,
    /// Rewiring must arrive at the node's speed within this bound (m/s).
    pub rewire_speed_tol: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            step_len: 1.0,
            neighbor_radius: 2.0,
            goal_bias: 0.05,
            seed: 0,
            keep_truncated: true,
            rewire_heading_tol: std::f64::consts::FRAC_PI_4,
            rewire_speed_tol: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub state: State,
    pub parent: Option<usize>,
    /// Arc length from the root (m).
    pub cost: f64,
    /// Rollout from the parent; empty for the root.
    pub segment: TrajectorySegment,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new(root: State) -> Self {
        Self {
            nodes: vec![Node {
                state: root,
                parent: None,
                cost: 0.0,
                segment: TrajectorySegment::default(),
            }],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add(&mut self, parent: usize, segment: TrajectorySegment) -> usize {
        let state = segment.end_state().expect("non-empty segment");
        let cost = self.nodes[parent].cost + segment.arc_length();
        let id = self.nodes.len();
        self.nodes.push(Node {
            state,
            parent: Some(parent),
            cost,
            segment,
        });
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    /// Nearest node by position; lowest index on ties.
    pub fn nearest(&self, p: Vec2) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.state.position() - p).norm_squared();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn near(&self, p: Vec2, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        (0..self.nodes.len())
            .filter(|&i| (self.nodes[i].state.position() - p).norm_squared() <= r2)
            .collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| (p, i)))
            .collect()
    }

    /// Moves `node` under `parent` and shifts the whole subtree's costs.
    pub fn rewire(&mut self, node: usize, parent: usize, segment: TrajectorySegment) {
        if let Some(old) = self.nodes[node].parent {
            self.children[old].retain(|&c| c != node);
        }
        self.children[parent].push(node);
        let cost = self.nodes[parent].cost + segment.arc_length();
        let delta = cost - self.nodes[node].cost;
        let n = &mut self.nodes[node];
        n.parent = Some(parent);
        n.segment = segment;
        n.cost = cost;
        let mut stack = self.children[node].clone();
        while let Some(c) = stack.pop() {
            self.nodes[c].cost += delta;
            stack.extend_from_slice(&self.children[c]);
        }
    }

    /// Root-to-node index chain.
    pub fn lineage(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![node];
        while let Some(p) = self.nodes[node].parent {
            out.push(p);
            node = p;
        }
        out.reverse();
        out
    }

    /// Largest deviation between a stored cost and the cost recomputed from
    /// segment arc lengths along the parent chain.
    pub fn cost_consistency_error(&self) -> f64 {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let recomputed: f64 = self
                    .lineage(i)
                    .iter()
                    .map(|&j| self.nodes[j].segment.arc_length())
                    .sum();
                (recomputed - n.cost).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanResult {
    pub waypoints: Vec<State>,
    pub path: Vec<Sample>,
    pub cost: f64,
    pub iterations_used: usize,
    pub success: bool,
    pub tree: Tree,
}

impl PlanResult {
    /// Segments along the extracted path, in order.
    pub fn segments(&self) -> Vec<&TrajectorySegment> {
        self.path_nodes()
            .iter()
            .skip(1)
            .map(|&i| &self.tree.nodes[i].segment)
            .collect()
    }

    fn path_nodes(&self) -> Vec<usize> {
        if !self.success {
            return Vec::new();
        }
        // Waypoints are node states; recover indices by walking the goal node's lineage.
        let last = self
            .waypoints
            .last()
            .expect("successful plan has waypoints");
        let goal_node = self
            .tree
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.state == *last && (n.cost - self.cost).abs() < 1e-12)
            .map(|(i, _)| i)
            .next()
            .expect("goal node in tree");
        self.tree.lineage(goal_node)
    }
}

/// Walks back from the cheapest node within `tolerance` of `goal` (lowest
/// index on ties) and concatenates the segments into the reference path.
pub fn extract_path(tree: &Tree, goal: Vec2, tolerance: f64) -> PlanResult {
    let best = tree
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| (n.state.position() - goal).norm() <= tolerance)
        .fold(None::<(usize, f64)>, |best, (i, n)| match best {
            Some((_, c)) if c <= n.cost => best,
            _ => Some((i, n.cost)),
        });
    let Some((goal_node, cost)) = best else {
        return PlanResult {
            tree: tree.clone(),
            ..PlanResult::default()
        };
    };
    let chain = tree.lineage(goal_node);
    let waypoints = chain.iter().map(|&i| tree.nodes[i].state).collect();
    let root = tree.nodes[chain[0]].state;
    let mut path = vec![Sample {
        state: root,
        control: crate::dynamics::Control::ZERO,
        t: 0.0,
    }];
    for &i in &chain[1..] {
        let seg = &tree.nodes[i].segment;
        let t0 = path.last().map_or(0.0, |s| s.t);
        if let Some(first) = path.last_mut() {
            first.control = seg.samples[0].control;
        }
        path.extend(
            seg.samples
                .iter()
                .skip(1)
                .map(|s| Sample { t: t0 + s.t, ..*s }),
        );
    }
    PlanResult {
        waypoints,
        path,
        cost,
        iterations_used: 0,
        success: true,
        tree: tree.clone(),
    }
}

/// Incremental planner; [`plan`] runs it to completion.
pub struct Planner<'a> {
    world: &'a WorldModel,
    sensor: SensorSpec,
    params: PlannerParams,
    steer: &'a Steer,
    rng: ChaCha8Rng,
    tree: Tree,
    iterations: usize,
}

impl<'a> Planner<'a> {
    pub fn new(
        world: &'a WorldModel,
        sensor: SensorSpec,
        params: PlannerParams,
        steer: &'a Steer,
    ) -> Result<Self, PlanError> {
        if params.max_iter == 0 {
            return Err(PlanError::Params("max_iter must be >= 1".into()));
        }
        if !(params.step_len > 0.0 && params.neighbor_radius >= 0.0) {
            return Err(PlanError::Params(
                "step_len and neighbor_radius must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&params.goal_bias) {
            return Err(PlanError::Params("goal_bias must lie in [0, 1]".into()));
        }
        Ok(Self {
            world,
            sensor,
            params,
            steer,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            tree: Tree::new(world.start),
            iterations: 0,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn sample(&mut self) -> Vec2 {
        if self.rng.random::<f64>() < self.params.goal_bias {
            return self.world.goal;
        }
        let b = &self.world.bounds;
        Vec2::new(
            self.rng.random_range(b.min.x..=b.max.x),
            self.rng.random_range(b.min.y..=b.max.y),
        )
    }

    fn steer(&self, from: &State, to: Vec2) -> Result<Option<TrajectorySegment>, PlanError> {
        match self.steer.steer(from, to, self.world, self.sensor) {
            Ok(seg) => Ok(Some(seg)),
            Err(SteerError::Empty(_)) => Ok(None),
            Err(SteerError::Barrier(e)) => Err(e.into()),
        }
    }

    /// Arc over which a visibility value can depend on the path ahead: the
    /// longest look-ahead plus one sample step for the interpolated point.
    fn junction_window(&self) -> f64 {
        let limits = &self.steer.limits;
        self.steer
            .visibility_constraint(self.sensor)
            .lookahead(limits.v_max)
            + limits.v_max * self.steer.config.dt
            + 1e-9
    }

    /// Whether the path into `parent`, continued by `seg` and then by each
    /// branch of `subtree` (when rewiring), keeps `h_vis ≥ 0` at every sample
    /// whose look-ahead can reach past the junction.
    fn junction_visible(
        &self,
        parent: usize,
        seg: &TrajectorySegment,
        subtree: Option<usize>,
    ) -> bool {
        if !self.steer.config.visibility {
            return true;
        }
        let window = self.junction_window();
        let mut context = path_tail(&self.tree, parent, window);
        let checked_to = context.len() + if subtree.is_some() { seg.len() - 1 } else { 0 };
        context.extend_from_slice(&seg.samples[1..]);
        let branches = match subtree {
            Some(node) => branches(&self.tree, node, window),
            None => vec![Vec::new()],
        };
        let vis = self.steer.visibility_constraint(self.sensor);
        branches.iter().all(|branch| {
            let mut full = context.clone();
            full.extend_from_slice(branch);
            (0..checked_to).all(|i| vis.value(&full[i..]) >= 0.0)
        })
    }

    fn reaches(&self, seg: &TrajectorySegment, to: Vec2) -> bool {
        !seg.truncated
            && seg
                .end_state()
                .is_some_and(|s| (s.position() - to).norm() <= self.steer.config.tolerance)
    }

    /// One RRT* iteration. Returns the new node, if any.
    pub fn iterate(&mut self) -> Result<Option<usize>, PlanError> {
        self.iterations += 1;
        let sample = self.sample();
        let nearest = self.tree.nearest(sample);
        let from = self.tree.nodes[nearest].state;
        let offset = sample - from.position();
        let target = if offset.norm() > self.params.step_len {
            from.position() + offset * (self.params.step_len / offset.norm())
        } else {
            sample
        };
        let Some(seg) = self.steer(&from, target)? else {
            return Ok(None);
        };
        if seg.truncated && !self.params.keep_truncated {
            return Ok(None);
        }
        if seg.len() < 2 {
            return Ok(None);
        }
        let mut seg = seg;
        seg.truncated = false;
        let new_pos = seg.end_state().unwrap().position();
        let tol = self.steer.config.tolerance;
        let radius = self.params.neighbor_radius;

        // Choose parent.
        let mut best = self.junction_visible(nearest, &seg, None).then(|| {
            (
                nearest,
                self.tree.nodes[nearest].cost + seg.arc_length(),
                seg,
            )
        });
        let mut neighbors: Vec<(f64, usize)> = self
            .tree
            .near(new_pos, radius)
            .into_iter()
            .filter(|&i| i != nearest)
            .map(|i| {
                let n = &self.tree.nodes[i];
                (n.cost + (n.state.position() - new_pos).norm() - tol, i)
            })
            .collect();
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(bound, i) in &neighbors {
            let best_cost = best.as_ref().map_or(f64::INFINITY, |b| b.1);
            if bound >= best_cost {
                break;
            }
            let state = self.tree.nodes[i].state;
            if let Some(cand) = self.steer(&state, new_pos)? {
                let cost = self.tree.nodes[i].cost + cand.arc_length();
                if self.reaches(&cand, new_pos)
                    && cand.len() >= 2
                    && cost < best_cost
                    && self.junction_visible(i, &cand, None)
                {
                    best = Some((i, cost, cand));
                }
            }
        }
        let Some((best_parent, _, best_seg)) = best else {
            return Ok(None);
        };
        let new = self.tree.add(best_parent, best_seg);
        let new_state = self.tree.nodes[new].state;

        // Rewire.
        let mut rewire: Vec<(f64, usize)> = self
            .tree
            .near(new_state.position(), radius)
            .into_iter()
            .filter(|&i| i != new && i != best_parent)
            .map(|i| (self.tree.nodes[i].cost, i))
            .collect();
        rewire.sort_by_key(|r| r.1);
        for (_, i) in rewire {
            let node = &self.tree.nodes[i];
            let target = node.state;
            let lower =
                self.tree.nodes[new].cost + (target.position() - new_state.position()).norm() - tol;
            if lower >= node.cost {
                continue;
            }
            let Some(cand) = self.steer(&new_state, target.position())? else {
                continue;
            };
            let end = match cand.end_state() {
                Some(e) if self.reaches(&cand, target.position()) && cand.len() >= 2 => e,
                _ => continue,
            };
            if wrap_angle(end.theta - target.theta).abs() > self.params.rewire_heading_tol
                || (end.v - target.v).abs() > self.params.rewire_speed_tol
            {
                continue;
            }
            let cost = self.tree.nodes[new].cost + cand.arc_length();
            if cost < self.tree.nodes[i].cost - 1e-12 && self.junction_visible(new, &cand, Some(i))
            {
                self.tree.rewire(i, new, cand);
            }
        }
        Ok(Some(new))
    }

    pub fn finish(self) -> PlanResult {
        let mut result = extract_path(&self.tree, self.world.goal, self.world.goal_tolerance);
        result.iterations_used = self.iterations;
        result
    }
}

/// The extracted path ending at `node`, cut back to at least `window` of arc
/// (or to the root).
fn path_tail(tree: &Tree, node: usize, window: f64) -> Vec<Sample> {
    let mut chain = Vec::new();
    let mut arc = 0.0;
    let mut n = node;
    while arc < window {
        let Some(parent) = tree.nodes[n].parent else {
            break;
        };
        chain.push(n);
        arc += tree.nodes[n].segment.arc_length();
        n = parent;
    }
    // Junction samples come from the incoming segment, as in `extract_path`.
    let head = match tree.nodes[n].parent {
        Some(_) => *tree.nodes[n]
            .segment
            .samples
            .last()
            .expect("non-empty segment"),
        None => Sample {
            state: tree.nodes[n].state,
            control: crate::dynamics::Control::ZERO,
            t: 0.0,
        },
    };
    let mut out = vec![head];
    for &i in chain.iter().rev() {
        out.extend_from_slice(&tree.nodes[i].segment.samples[1..]);
    }
    out
}

/// Every continuation below `node` up to `window` of arc, as samples after
/// the node itself. A leaf gives one empty branch.
fn branches(tree: &Tree, node: usize, window: f64) -> Vec<Vec<Sample>> {
    let mut out = Vec::new();
    let mut stack = vec![(node, Vec::<Sample>::new(), 0.0)];
    while let Some((n, prefix, arc)) = stack.pop() {
        let children = &tree.children[n];
        if children.is_empty() || arc >= window {
            out.push(prefix);
            continue;
        }
        for &c in children {
            let seg = &tree.nodes[c].segment;
            let mut next = prefix.clone();
            next.extend_from_slice(&seg.samples[1..]);
            stack.push((c, next, arc + seg.arc_length()));
        }
    }
    out
}

/// Runs `params.max_iter` RRT* iterations and extracts the best goal path.
/// `world` must be the planner's view (hidden obstacles stripped).
pub fn plan(
    world: &WorldModel,
    sensor: SensorSpec,
    params: PlannerParams,
    steer: &Steer,
) -> Result<PlanResult, PlanError> {
    let mut planner = Planner::new(world, sensor, params, steer)?;
    for _ in 0..params.max_iter {
        planner.iterate()?;
    }
    Ok(planner.finish())
}
