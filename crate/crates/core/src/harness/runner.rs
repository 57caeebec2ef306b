//! Seeded evaluation episodes and their traces.

use super::metrics::{summarize, MetricsSummary};
use super::scenario::ScenarioConfig;
use crate::allocation::{AllocStatus, SlotAllocation};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mobility::Mode;
use crate::rl::{act_online, baseline_action, BaselineKind, PolicyParameters, SlotOutcome, World};

/// Who steers the UAV.
#[derive(Clone, Copy, Debug)]
pub enum PolicyChoice<'a> {
    /// Deterministic actor mean.
    Trained(&'a PolicyParameters),
    Baseline(BaselineKind),
}

impl PolicyChoice<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyChoice::Trained(_) => "trained",
            PolicyChoice::Baseline(kind) => kind.as_str(),
        }
    }
}

/// What an infeasible slot does to an evaluation episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OnInfeasible {
    /// Record the slot and stop, as in training rollouts.
    #[default]
    Terminate,
    /// Record the slot (with its fallback allocation) and keep going.
    Continue,
    /// Return `Error::Infeasible`.
    Fail,
}

/// Rounds to 12 significant digits, the precision of every trace file.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub position: Point2,
    pub mode: Mode,
    pub los: bool,
    pub bandwidth: f64,
    pub power: f64,
    pub slack: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    /// 1-based slot index.
    pub slot: usize,
    pub uav: Point2,
    pub users: Vec<UserRecord>,
    pub sum_rate: f64,
    pub reward: f64,
    pub status: AllocStatus,
}

impl SlotRecord {
    pub fn from_outcome(slot: usize, o: &SlotOutcome) -> Self {
        let q = |p: Point2| Point2::new(quantize(p.x), quantize(p.y));
        let a = &o.allocation;
        let users = o
            .users
            .iter()
            .zip(&o.links)
            .enumerate()
            .map(|(k, (u, l))| UserRecord {
                position: q(u.position),
                mode: u.mode,
                los: l.is_los,
                bandwidth: quantize(a.bandwidth[k]),
                power: quantize(a.power[k]),
                slack: quantize(a.slack[k]),
                rate: quantize(a.rate[k]),
            })
            .collect();
        Self {
            slot,
            uav: q(o.uav),
            users,
            sum_rate: quantize(a.sum_rate()),
            reward: quantize(o.reward),
            status: a.status,
        }
    }

    /// The allocation as recorded (rates included).
    pub fn allocation(&self) -> SlotAllocation {
        SlotAllocation {
            bandwidth: self.users.iter().map(|u| u.bandwidth).collect(),
            power: self.users.iter().map(|u| u.power).collect(),
            slack: self.users.iter().map(|u| u.slack).collect(),
            rate: self.users.iter().map(|u| u.rate).collect(),
            status: self.status,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub num_users: usize,
    pub rows: Vec<SlotRecord>,
}

/// Runs one evaluation episode of `cfg` with episode seed `seed`.
pub fn run_episode(
    cfg: &ScenarioConfig,
    policy: PolicyChoice,
    seed: u64,
    on_infeasible: OnInfeasible,
) -> Result<(EpisodeTrace, MetricsSummary)> {
    let mut world = World::new(cfg, seed, 0)?;
    let (v_max, delta) = (cfg.uav.v_max, cfg.time.slot_duration);
    let mut rows = Vec::with_capacity(cfg.time.horizon);
    for n in 1..=cfg.time.horizon {
        let action = match policy {
            PolicyChoice::Trained(p) => act_online(p, &world.state(), v_max, delta),
            PolicyChoice::Baseline(kind) => baseline_action(kind, world.uav, &world.user_positions(), v_max, delta),
        };
        let outcome = world.step(action)?;
        rows.push(SlotRecord::from_outcome(n, &outcome));
        if outcome.terminated {
            match on_infeasible {
                OnInfeasible::Terminate => break,
                OnInfeasible::Continue => {}
                OnInfeasible::Fail => return Err(Error::Infeasible { slot: n }),
            }
        }
    }
    let trace = EpisodeTrace {
        num_users: cfg.num_users(),
        rows,
    };
    let summary = summarize(&trace, &cfg.allocation);
    Ok((trace, summary))
}
