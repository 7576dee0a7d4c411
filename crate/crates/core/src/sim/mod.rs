//! Closed-loop experiments: plan on known obstacles, then track the plan
//! under limited sensing while hidden obstacles are discovered.

mod document;
mod sensing;
pub mod suite;
pub mod svg;

pub use document::{read_plan, write_plan, PlanDocument};
pub use sensing::{disk_sector_contact, sense, Detection, LocalFreeSet, GRID_THRESHOLD};
pub use svg::render_svg;

use crate::control::{
    cbf_qp_track, gatekeeper_commit, nominal_control, CommitDecision, GatekeeperParams, Region,
    TrackerGains, WaypointFollower,
};
use crate::dynamics::{self, Control, Limits, State, Vec2};
use crate::lqr::{LqrError, Sample, Steer, SteerConfig, TrajectorySegment};
use crate::planner::{plan, PlanError, PlanResult, PlannerParams};
use crate::safety::SensorSpec;
use crate::world::{clearance, in_true_free_set, Obstacle, WorldModel};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Lqr(#[from] LqrError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    CbfQp,
    Gatekeeper,
}

/// Planner variant: full visibility-aware planner or the ablation without
/// the visibility constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Ours,
    NoVisibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedGoal,
    QpInfeasible,
    Collision,
    ReplanExhausted,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub outcome: Outcome,
    pub path_length: f64,
    pub sim_time: f64,
    /// Smallest robot-surface to obstacle-surface gap over known and hidden
    /// obstacles (m).
    pub min_clearance: f64,
    pub detections: Vec<Detection>,
    pub replans: usize,
    pub backup_activations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    pub planner: PlannerParams,
    pub steer: SteerConfig,
    pub limits: Limits,
    pub tracker: TrackerGains,
    pub gatekeeper: GatekeeperParams,
    pub replan_budget: usize,
    /// Simulated seconds.
    pub timeout: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            planner: PlannerParams::default(),
            steer: SteerConfig::default(),
            limits: Limits::default(),
            tracker: TrackerGains::default(),
            gatekeeper: GatekeeperParams::default(),
            replan_budget: 5,
            timeout: 120.0,
        }
    }
}

impl ExperimentParams {
    pub fn steer_for(&self, variant: Variant) -> Result<Steer, LqrError> {
        let config = SteerConfig {
            visibility: variant == Variant::Ours,
            ..self.steer
        };
        Steer::new(config, self.limits)
    }
}

/// Everything a run produced, for rendering and invariant checks.
#[derive(Debug, Clone)]
pub struct Run {
    pub metrics: RunMetrics,
    /// Initial plan followed by every replan.
    pub plans: Vec<PlanResult>,
    /// Robot state at every tick.
    pub trajectory: Vec<State>,
    pub free_set: LocalFreeSet,
    /// Ticks whose robot position was outside the `B_t` accumulated so far.
    pub free_set_exits: usize,
}

pub fn run_experiment(
    world: &WorldModel,
    sensor: SensorSpec,
    params: &ExperimentParams,
    controller: ControllerKind,
    variant: Variant,
) -> Result<RunMetrics, SimError> {
    Ok(run_experiment_traced(world, sensor, params, controller, variant)?.metrics)
}

/// Initial plan on known obstacles only.
pub fn initial_plan(
    world: &WorldModel,
    sensor: SensorSpec,
    params: &ExperimentParams,
    variant: Variant,
) -> Result<PlanResult, SimError> {
    let steer = params.steer_for(variant)?;
    Ok(plan_from(
        world,
        world.start,
        &[],
        sensor,
        &params.planner,
        &steer,
    )?)
}

fn plan_from(
    world: &WorldModel,
    start: State,
    extra: &[Obstacle],
    sensor: SensorSpec,
    params: &PlannerParams,
    steer: &Steer,
) -> Result<PlanResult, PlanError> {
    // The planner only ever sees known obstacles plus detections.
    let mut view = world.without_hidden();
    view.start = start;
    view.known_obstacles.extend_from_slice(extra);
    plan(&view, sensor, *params, steer)
}

/// Gatekeeper region: in bounds, clear of known and detected obstacles, and
/// inside the sensed free set.
struct FreeRegion<'a> {
    world: &'a WorldModel,
    obstacles: &'a [Obstacle],
    bt: &'a LocalFreeSet,
    inflation: f64,
    stop_margin: f64,
}

impl Region for FreeRegion<'_> {
    fn contains(&self, s: &State) -> bool {
        let p = s.position();
        self.world.bounds.contains(p)
            && clearance(p, self.obstacles) >= self.inflation
            && self.bt.contains(p)
    }

    fn can_stop(&self, s: &State) -> bool {
        let found = &self.obstacles[self.world.known_obstacles.len()..];
        self.contains(s) && clearance(s.position(), found) >= self.inflation + self.stop_margin
    }
}

fn follower_for(plan: &PlanResult, start: &State, gains: &TrackerGains) -> WaypointFollower {
    let mut waypoints: Vec<Vec2> = plan.waypoints.iter().map(State::position).collect();
    if waypoints.is_empty() {
        waypoints.push(start.position());
    }
    WaypointFollower::new(waypoints, gains.switch_radius)
}

/// Open-loop rollout of the nominal tracker used as the gatekeeper's candidate.
fn nominal_rollout(
    s: &State,
    follower: &WaypointFollower,
    params: &ExperimentParams,
) -> TrajectorySegment {
    let mut follower = follower.clone();
    let dt = params.gatekeeper.dt;
    let mut state = *s;
    let mut samples = Vec::with_capacity(params.gatekeeper.horizon + 1);
    for k in 0..=params.gatekeeper.horizon {
        let (wp, last) = follower.target(state.position());
        let u = if k == params.gatekeeper.horizon {
            Control::ZERO
        } else {
            params
                .limits
                .clamp(nominal_control(&state, wp, last, &params.tracker))
                .0
        };
        samples.push(Sample {
            state,
            control: u,
            t: k as f64 * dt,
        });
        state = dynamics::step(&state, u, dt, &params.limits).state;
    }
    TrajectorySegment {
        samples,
        truncated: false,
        violation: None,
    }
}

struct Commitment {
    samples: Vec<Sample>,
    prefix_len: usize,
    cursor: usize,
}

pub fn run_experiment_traced(
    world: &WorldModel,
    sensor: SensorSpec,
    params: &ExperimentParams,
    controller: ControllerKind,
    variant: Variant,
) -> Result<Run, SimError> {
    let initial = initial_plan(world, sensor, params, variant)?;
    simulate(world, sensor, params, controller, variant, initial)
}

/// Closed loop from `world.start` tracking `initial`; replans (gatekeeper
/// only) use the same planner variant.
pub fn simulate(
    world: &WorldModel,
    sensor: SensorSpec,
    params: &ExperimentParams,
    controller: ControllerKind,
    variant: Variant,
    initial: PlanResult,
) -> Result<Run, SimError> {
    let steer = params.steer_for(variant)?;
    let dt = params.steer.dt;
    let inflation = world.inflation();
    let mut plans = vec![initial];
    let mut follower = follower_for(&plans[0], &world.start, &params.tracker);

    let mut s = world.start;
    let mut t = 0.0;
    let mut bt = LocalFreeSet::new();
    let mut detected = vec![false; world.hidden_obstacles.len()];
    let mut detections = Vec::new();
    let mut trajectory = Vec::new();
    let mut free_set_exits = 0;
    let mut path_length = 0.0;
    let mut min_clearance = f64::INFINITY;
    let mut replans = 0;
    let mut backup_activations = 0;
    let mut braking = false;
    let mut commitment: Option<Commitment> = None;

    let outcome = if !plans[0].success {
        Outcome::ReplanExhausted
    } else {
        loop {
            detections.extend(sense(
                &s,
                &world.hidden_obstacles,
                sensor,
                &mut bt,
                &mut detected,
                t,
            ));
            trajectory.push(s);
            if !bt.contains(s.position()) {
                free_set_exits += 1;
            }
            let all = world.known_obstacles.iter().chain(&world.hidden_obstacles);
            min_clearance = min_clearance.min(clearance(s.position(), all) - world.robot_radius);
            if !in_true_free_set(&s, world) {
                break Outcome::Collision;
            }
            if world.goal_reached(s.position()) {
                break Outcome::ReachedGoal;
            }
            if t >= params.timeout {
                break Outcome::Timeout;
            }
            let obstacles: Vec<Obstacle> = world
                .known_obstacles
                .iter()
                .copied()
                .chain(
                    world
                        .hidden_obstacles
                        .iter()
                        .zip(&detected)
                        .filter(|(_, &d)| d)
                        .map(|(o, _)| *o),
                )
                .collect();

            let u = match controller {
                ControllerKind::CbfQp => {
                    let (wp, last) = follower.target(s.position());
                    match cbf_qp_track(
                        &s,
                        wp,
                        last,
                        &obstacles,
                        inflation,
                        &params.tracker,
                        &params.limits,
                    ) {
                        Ok(u) => u,
                        Err(_) => break Outcome::QpInfeasible,
                    }
                }
                ControllerKind::Gatekeeper => {
                    let region = FreeRegion {
                        world,
                        obstacles: &obstacles,
                        bt: &bt,
                        inflation,
                        stop_margin: params.gatekeeper.clearance_margin,
                    };
                    follower.target(s.position());
                    let nominal = nominal_rollout(&s, &follower, params);
                    let decision: CommitDecision =
                        gatekeeper_commit(&nominal, &region, &params.gatekeeper, &params.limits);
                    if !decision.committed.is_empty() {
                        commitment = Some(Commitment {
                            samples: decision.committed.samples.clone(),
                            prefix_len: decision.prefix_len,
                            cursor: 0,
                        });
                    }
                    let stuck = decision.replan_requested && s.v < 1e-3;
                    if stuck {
                        replans += 1;
                        if replans > params.replan_budget {
                            break Outcome::ReplanExhausted;
                        }
                        let extra: Vec<Obstacle> =
                            obstacles[world.known_obstacles.len()..].to_vec();
                        // A fresh seed per attempt, so a repeat from the same state differs.
                        let planner = PlannerParams {
                            seed: params.planner.seed.wrapping_add(replans as u64),
                            ..params.planner
                        };
                        let next = plan_from(world, s, &extra, sensor, &planner, &steer)?;
                        if next.success {
                            follower = follower_for(&next, &s, &params.tracker);
                        }
                        plans.push(next);
                        commitment = None;
                    }
                    let (u, on_backup) = match commitment.as_mut() {
                        Some(c) if c.cursor < c.samples.len() => {
                            let on_backup =
                                c.cursor + 1 >= c.prefix_len && c.prefix_len < c.samples.len();
                            let u = c.samples[c.cursor].control;
                            c.cursor += 1;
                            (u, on_backup)
                        }
                        _ => (Control::ZERO, false),
                    };
                    let on_backup = on_backup && s.v > 1e-6;
                    if on_backup && !braking {
                        backup_activations += 1;
                    }
                    braking = on_backup;
                    u
                }
            };
            let next = dynamics::step(&s, u, dt, &params.limits).state;
            path_length += (next.position() - s.position()).norm();
            s = next;
            t += dt;
        }
    };

    Ok(Run {
        metrics: RunMetrics {
            outcome,
            path_length,
            sim_time: t,
            min_clearance,
            detections,
            replans,
            backup_activations,
        },
        plans,
        trajectory,
        free_set: bt,
        free_set_exits,
    })
}

pub fn write_metrics(metrics: &RunMetrics, path: &Path) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(metrics)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<RunMetrics, SimError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
