//! Commitment filter: execute only nominal prefixes that can still be
//! followed by a braking stop inside the known free region.

use crate::dynamics::{self, Control, Limits, State};
use crate::lqr::{Sample, TrajectorySegment};
use serde::{Deserialize, Serialize};

/// Region the committed trajectory must stay in.
pub trait Region {
    fn contains(&self, s: &State) -> bool;

    /// Whether the robot may come to rest at `s`; the end of every braking
    /// backup must satisfy this.
    fn can_stop(&self, s: &State) -> bool {
        self.contains(s)
    }
}

impl<F: Fn(&State) -> bool> Region for F {
    fn contains(&self, s: &State) -> bool {
        self(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatekeeperParams {
    /// Deceleration of the braking backup (m/s², > 0).
    pub backup_decel: f64,
    /// Nominal look-ahead in ticks.
    pub horizon: usize,
    /// Committed prefixes shorter than this (m) without turning count as stuck.
    pub progress_threshold: f64,
    pub dt: f64,
    /// Extra clearance (m) from detected obstacles, beyond the inflated
    /// radius, required where the robot comes to rest. Leaves room for the
    /// replanner's first steering segment.
    pub clearance_margin: f64,
}

impl Default for GatekeeperParams {
    fn default() -> Self {
        Self {
            backup_decel: 1.0,
            horizon: 60,
            progress_threshold: 0.05,
            dt: 0.05,
            clearance_margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommitDecision {
    /// Nominal prefix followed, when cut short, by the braking suffix.
    pub committed: TrajectorySegment,
    /// Samples of `committed` taken from the nominal.
    pub prefix_len: usize,
    pub used_backup: bool,
    pub replan_requested: bool,
}

impl CommitDecision {
    /// Whether the first committed input is already the braking backup.
    pub fn braking_now(&self) -> bool {
        self.used_backup && self.prefix_len <= 1
    }
}

/// Straight-line stop at `decel`; the last sample has `v = 0`. Inputs are
/// clamped to `limits`, so the achieved deceleration is at most `−a_min`.
pub fn braking_trajectory(from: &State, decel: f64, dt: f64, limits: &Limits) -> Vec<Sample> {
    assert!(decel > 0.0, "backup deceleration must be positive");
    let u = limits.clamp(Control::new(-decel, 0.0)).0;
    let mut out = Vec::new();
    let mut s = *from;
    let mut t = 0.0;
    while s.v > 0.0 {
        out.push(Sample {
            state: s,
            control: u,
            t,
        });
        s = dynamics::step(&s, u, dt, limits).state;
        t += dt;
        if out.len() > 100_000 {
            break;
        }
    }
    out.push(Sample {
        state: State { v: 0.0, ..s },
        control: Control::ZERO,
        t,
    });
    out
}

/// Longest certified prefix of `nominal`, with a braking suffix when the
/// prefix is not the whole nominal.
///
/// A prefix ending at sample `k` is certified when samples `0..=k` lie in
/// `region` and the braking trajectory from sample `k` does too.
pub fn gatekeeper_commit(
    nominal: &TrajectorySegment,
    region: &impl Region,
    params: &GatekeeperParams,
    limits: &Limits,
) -> CommitDecision {
    assert!(
        params.backup_decel > 0.0,
        "backup deceleration must be positive"
    );
    let samples = &nominal.samples;
    let mut best: Option<(usize, Vec<Sample>)> = None;
    for (k, sample) in samples.iter().enumerate() {
        if !region.contains(&sample.state) {
            break;
        }
        let brake = braking_trajectory(&sample.state, params.backup_decel, params.dt, limits);
        let rest = &brake.last().expect("braking trajectory is non-empty").state;
        if brake.iter().all(|b| region.contains(&b.state)) && region.can_stop(rest) {
            best = Some((k, brake));
        }
    }
    let Some((k, brake)) = best else {
        return CommitDecision {
            replan_requested: true,
            ..CommitDecision::default()
        };
    };
    let whole = k + 1 == samples.len();
    let mut committed: Vec<Sample> = samples[..=k].to_vec();
    if !whole {
        let t0 = committed[k].t;
        committed[k].control = brake[0].control;
        committed.extend(brake.iter().skip(1).map(|b| Sample { t: t0 + b.t, ..*b }));
    }
    let prefix = &samples[..=k];
    let advance = crate::safety::arc_length(prefix);
    let turn = prefix
        .windows(2)
        .map(|w| dynamics::wrap_angle(w[1].state.theta - w[0].state.theta).abs())
        .sum::<f64>();
    let stuck = !whole && advance < params.progress_threshold && turn < 1e-3;
    CommitDecision {
        committed: TrajectorySegment {
            samples: committed,
            truncated: !whole,
            violation: None,
        },
        prefix_len: k + 1,
        used_backup: !whole,
        replan_requested: stuck,
    }
}
