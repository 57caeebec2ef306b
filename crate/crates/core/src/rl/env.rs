//! The trajectory-control MDP: state encoding, action clipping, reward, the
//! simulated world and episode rollouts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::PolicyParameters;
use crate::allocation::{allocate_slot, dual_ascent_with, AllocParams, AllocStatus, SlotAllocation};
use crate::channel::{link_budget, LinkBudget};
use crate::error::{Error, Result};
use crate::geometry::{reflect_into_bounds, Point2, UrbanMap};
use crate::harness::scenario::{AllocatorKind, ScenarioConfig};
use crate::mobility::{MobilityState, UserState, MAX_RESAMPLES};
use crate::rng::{stream_rng, SimRng, Stream};

/// Reward coefficients. Rates enter the reward in Mbit/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    /// Offset inside the log utility, Mbit/s.
    pub eps: f64,
    /// QoS shortfall weight, per Mbit/s.
    pub lambda_qos: f64,
    /// Fronthaul excess weight, per Mbit/s.
    pub eta_fronthaul: f64,
    /// Movement weight, per m^2.
    pub mu_action: f64,
    /// Reward of an infeasible slot is `-infeasible_penalty`. When unset it
    /// is `1e3 * K * max(1, |ln(eps + R_min)|)`, about a thousand slots'
    /// worth of bare QoS utility.
    pub infeasible_penalty: Option<f64>,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            eps: 1.0,
            lambda_qos: 1.0,
            eta_fronthaul: 1.0,
            mu_action: 1e-3,
            infeasible_penalty: None,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("reward.eps", self.eps),
            ("reward.lambda_qos", self.lambda_qos),
            ("reward.eta_fronthaul", self.eta_fronthaul),
            ("reward.mu_action", self.mu_action),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(p) = self.infeasible_penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::config("reward.infeasible_penalty", format!("must be positive, got {p}")));
            }
        }
        Ok(())
    }

    pub fn penalty(&self, k: usize, params: &AllocParams) -> f64 {
        self.infeasible_penalty
            .unwrap_or_else(|| 1e3 * k.max(1) as f64 * (self.eps + params.r_min / 1e6).ln().abs().max(1.0))
    }
}

/// UAV and user positions scaled by the map bounds, UAV first.
pub fn build_state(uav: Point2, users: &[Point2], x_max: f64, y_max: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(2 + 2 * users.len());
    for p in std::iter::once(&uav).chain(users) {
        s.push((p.x / x_max).clamp(0.0, 1.0));
        s.push((p.y / y_max).clamp(0.0, 1.0));
    }
    s
}

/// Inverse of [`build_state`]: UAV position and user positions.
pub fn denormalize_state(state: &[f64], x_max: f64, y_max: f64) -> (Point2, Vec<Point2>) {
    let pts: Vec<Point2> = state
        .chunks_exact(2)
        .map(|c| Point2::new(c[0] * x_max, c[1] * y_max))
        .collect();
    (pts[0], pts[1..].to_vec())
}

/// Radial projection onto the disc of radius `v_max * delta`.
pub fn clip_action(raw: Point2, v_max: f64, delta: f64) -> Point2 {
    let cap = v_max * delta;
    let n = raw.norm();
    if n > cap {
        raw * (cap / n)
    } else {
        raw
    }
}

/// Per-slot reward: log utility minus QoS, fronthaul and movement penalties.
/// The QoS threshold is `R_min + s_k`.
pub fn compute_reward(rates: &[f64], slacks: &[f64], action: Point2, w: &RewardWeights, params: &AllocParams) -> f64 {
    const MBPS: f64 = 1e6;
    let r_min = params.r_min / MBPS;
    let mut utility = 0.0;
    let mut shortfall = 0.0;
    for (&r, &s) in rates.iter().zip(slacks) {
        let r = r / MBPS;
        utility += (w.eps + r).ln();
        shortfall += (r_min + s / MBPS - r).max(0.0);
    }
    let excess = (rates.iter().sum::<f64>() - params.c_fronthaul).max(0.0) / MBPS;
    utility - w.lambda_qos * shortfall - w.eta_fronthaul * excess - w.mu_action * action.norm_squared()
}

/// Deterministic action: the clipped actor mean, in metres.
pub fn act_online(policy: &PolicyParameters, state: &[f64], v_max: f64, delta: f64) -> Point2 {
    clip_action(policy.to_displacement(policy.mean(state)), v_max, delta)
}

/// Single-UAV K-means, i.e. the user centroid, pushed out of any building
/// that contains it.
pub fn kmeans_init(users: &[Point2], map: &UrbanMap) -> Point2 {
    let n = users.len().max(1) as f64;
    let sum = users.iter().fold(Point2::ORIGIN, |acc, &p| acc + p);
    let c = Point2::new(sum.x / n, sum.y / n);
    match map.building_at(c) {
        Some(i) => {
            let out = map.buildings[i].push_outside(c, 1e-6);
            // A push can land in a neighbour or outside the map; fold back.
            let out = reflect_into_bounds(out, map);
            if map.building_at(out).is_some() {
                c
            } else {
                out
            }
        }
        None => c,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Hover at the initial centroid.
    StationaryCentroid,
    /// Fly toward the current user centroid at up to `v_max`.
    FollowCentroid,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::StationaryCentroid => "stationary-centroid",
            BaselineKind::FollowCentroid => "follow-centroid",
        }
    }
}

pub fn baseline_action(kind: BaselineKind, uav: Point2, users: &[Point2], v_max: f64, delta: f64) -> Point2 {
    match kind {
        BaselineKind::StationaryCentroid => Point2::ORIGIN,
        BaselineKind::FollowCentroid => {
            let n = users.len().max(1) as f64;
            let sum = users.iter().fold(Point2::ORIGIN, |acc, &p| acc + p);
            let target = Point2::new(sum.x / n, sum.y / n);
            clip_action(target - uav, v_max, delta)
        }
    }
}

/// Everything that happened in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotOutcome {
    /// Executed displacement (after clipping, reflection and obstacle rules).
    pub displacement: Point2,
    /// Displacement the reward charges for (after clipping).
    pub action: Point2,
    pub uav: Point2,
    pub users: Vec<UserState>,
    pub links: Vec<LinkBudget>,
    pub allocation: SlotAllocation,
    pub reward: f64,
    pub terminated: bool,
}

/// One episode's world: map, users, UAV and the seeded random streams.
pub struct World<'a> {
    pub cfg: &'a ScenarioConfig,
    pub map: UrbanMap,
    pub mobility: MobilityState,
    pub uav: Point2,
    pub slot: usize,
    pub allocator: AllocatorKind,
    mobility_rng: SimRng,
    fading_rng: SimRng,
}

impl<'a> World<'a> {
    /// Fresh world: random users from the placement stream, UAV at their
    /// K-means centroid. All streams derive from `(seed, episode)`.
    pub fn new(cfg: &'a ScenarioConfig, seed: u64, episode: u64) -> Result<Self> {
        let map = cfg.urban_map()?;
        let mut placement = stream_rng(seed, Stream::Placement, episode);
        let mobility = MobilityState::random(
            &cfg.users.group_sizes,
            cfg.users.individuals,
            &cfg.mobility_config(),
            &map,
            &mut placement,
        )?;
        let uav = kmeans_init(&mobility.positions(), &map);
        Ok(Self {
            cfg,
            map,
            mobility,
            uav,
            slot: 0,
            allocator: cfg.allocator,
            mobility_rng: stream_rng(seed, Stream::Mobility, episode),
            fading_rng: stream_rng(seed, Stream::Fading, episode),
        })
    }

    pub fn user_positions(&self) -> Vec<Point2> {
        self.mobility.positions()
    }

    pub fn state(&self) -> Vec<f64> {
        build_state(self.uav, &self.user_positions(), self.map.x_max, self.map.y_max)
    }

    /// Moves the UAV by `d`, reflecting at the boundary. Buildings at least
    /// as tall as the flight altitude block the move; a blocked move is
    /// halved up to [`MAX_RESAMPLES`] times, then abandoned.
    fn move_uav(&mut self, d: Point2) -> Point2 {
        let altitude = self.cfg.uav.altitude;
        let blocked = |from: Point2, to: Point2| {
            self.map.buildings.iter().any(|b| {
                b.height >= altitude
                    && (b.contains(to)
                        || crate::geometry::segment_footprint_overlap(from, to, b).is_some())
            })
        };
        let mut step = d;
        for _ in 0..=MAX_RESAMPLES {
            let to = reflect_into_bounds(self.uav + step, &self.map);
            if !blocked(self.uav, to) {
                let moved = to - self.uav;
                self.uav = to;
                return moved;
            }
            step = step * 0.5;
        }
        Point2::ORIGIN
    }

    pub fn allocate(&self, a: &[f64]) -> Result<SlotAllocation> {
        match self.allocator {
            AllocatorKind::Heuristic => allocate_slot(a, &self.cfg.allocation),
            AllocatorKind::DualAscent => dual_ascent_with(a, &self.cfg.allocation, &self.cfg.dual_ascent),
        }
    }

    /// Applies a displacement (clipped to the speed limit), steps the users,
    /// samples the channels, allocates and scores the slot.
    pub fn step(&mut self, raw: Point2) -> Result<SlotOutcome> {
        let cfg = self.cfg;
        let action = clip_action(raw, cfg.uav.v_max, cfg.time.slot_duration);
        let displacement = self.move_uav(action);
        self.mobility.step(&cfg.mobility_config(), &self.map, &mut self.mobility_rng);
        let links: Vec<LinkBudget> = self
            .mobility
            .users
            .iter()
            .map(|u| {
                link_budget(self.uav, cfg.uav.altitude, u.position, &self.map, &cfg.channel, &mut self.fading_rng)
            })
            .collect();
        let a: Vec<f64> = links.iter().map(|l| l.snr_coeff).collect();
        let allocation = self.allocate(&a)?;
        let terminated = allocation.status == AllocStatus::Infeasible;
        let reward = if terminated {
            -cfg.reward.penalty(a.len(), &cfg.allocation)
        } else {
            compute_reward(&allocation.rate, &allocation.slack, action, &cfg.reward, &cfg.allocation)
        };
        self.slot += 1;
        Ok(SlotOutcome {
            displacement,
            action,
            uav: self.uav,
            users: self.mobility.users.clone(),
            links,
            allocation,
            reward,
            terminated,
        })
    }
}

/// One stored transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Network-space action sample before clipping.
    pub raw_action: [f64; 2],
    pub log_prob: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only when the rollout was cut by an infeasible slot.
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub outcomes: Vec<SlotOutcome>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// Samples actions from the policy for up to `horizon` slots, stopping at the
/// first infeasible slot.
pub fn rollout_episode<R: Rng + ?Sized>(
    policy: &PolicyParameters,
    world: &mut World,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut transitions = Vec::with_capacity(horizon);
    let mut outcomes = Vec::with_capacity(horizon);
    let mut state = world.state();
    for _ in 0..horizon {
        let sample = policy.sample(&state, rng);
        let outcome = world.step(policy.to_displacement(sample.raw))?;
        let next_state = world.state();
        let done = outcome.terminated;
        transitions.push(Transition {
            state,
            raw_action: sample.raw,
            log_prob: sample.log_prob,
            reward: outcome.reward,
            next_state: next_state.clone(),
            done,
        });
        outcomes.push(outcome);
        state = next_state;
        if done {
            break;
        }
    }
    Ok(Trajectory { transitions, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Building;
    use approx::assert_relative_eq;

    #[test]
    fn state_examples() {
        let users = vec![Point2::new(300.0, 300.0); 3];
        let s = build_state(Point2::new(150.0, 150.0), &users, 300.0, 300.0);
        assert_eq!(s, vec![0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let s = build_state(Point2::ORIGIN, &users, 300.0, 300.0);
        assert_eq!(&s[..2], &[0.0, 0.0]);
        let uav = Point2::new(12.345, 299.9);
        let users = vec![Point2::new(1.0 / 3.0, 77.7), Point2::new(250.0, 0.1)];
        let (u2, w2) = denormalize_state(&build_state(uav, &users, 300.0, 300.0), 300.0, 300.0);
        assert!((u2 - uav).norm() < 1e-12);
        for (a, b) in w2.iter().zip(&users) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_action(Point2::new(30.0, 0.0), 16.0, 1.0), Point2::new(16.0, 0.0));
        assert_eq!(clip_action(Point2::new(3.0, 4.0), 16.0, 1.0), Point2::new(3.0, 4.0));
        assert_eq!(clip_action(Point2::ORIGIN, 16.0, 1.0), Point2::ORIGIN);
    }

    #[test]
    fn reward_examples() {
        let params = AllocParams::preset();
        let w = RewardWeights::default();
        // R = R_min + s exactly: no penalty.
        let r = compute_reward(&[1.05e6], &[0.05e6], Point2::ORIGIN, &w, &params);
        assert_relative_eq!(r, (1.0 + 1.05f64).ln(), max_relative = 1e-15);
        let r = compute_reward(&[0.0], &[0.0], Point2::ORIGIN, &w, &params);
        assert_relative_eq!(r, (1.0f64).ln() - 1.0, max_relative = 1e-15);
        let r = compute_reward(&[2e6], &[0.0], Point2::new(3.0, 4.0), &w, &params);
        assert_relative_eq!(r, 3f64.ln() - 25e-3, max_relative = 1e-15);
    }

    #[test]
    fn kmeans_examples() {
        let map = UrbanMap::empty(300.0, 300.0).unwrap();
        assert_eq!(kmeans_init(&[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], &map), Point2::new(5.0, 0.0));
        assert_eq!(kmeans_init(&[Point2::new(7.0, 9.0)], &map), Point2::new(7.0, 9.0));
        let map = UrbanMap::new(300.0, 300.0, vec![Building::new(0.0, 20.0, 0.0, 40.0, 30.0).unwrap()]).unwrap();
        let c = kmeans_init(&[Point2::new(0.0, 10.0), Point2::new(30.0, 10.0)], &map);
        // Centroid (15, 10) is 5 m from the east edge.
        assert_relative_eq!(c.x, 20.0, epsilon = 1e-5);
        assert_eq!(c.y, 10.0);
        assert!(map.building_at(c).is_none());
    }

    #[test]
    fn baseline_examples() {
        let users = [Point2::new(10.0, 10.0), Point2::new(30.0, 10.0)];
        assert_eq!(baseline_action(BaselineKind::FollowCentroid, Point2::new(20.0, 10.0), &users, 16.0, 1.0), Point2::ORIGIN);
        let a = baseline_action(BaselineKind::FollowCentroid, Point2::new(200.0, 200.0), &users, 16.0, 1.0);
        assert_relative_eq!(a.norm(), 16.0, max_relative = 1e-12);
        assert_eq!(baseline_action(BaselineKind::StationaryCentroid, Point2::new(200.0, 200.0), &users, 16.0, 1.0), Point2::ORIGIN);
    }
}
