//! Hybrid ground-user mobility: reference-point group mobility for group
//! members, random walk for individuals, and probabilistic join/leave
//! transitions between the two.
//!
//! Every candidate position is reflected into the map and then rejected if it
//! lands in a building or if the straight move to it crosses one. A rejected
//! move is retried with a fresh direction and half the step length, at most
//! [`MAX_RESAMPLES`] times; after that the walker stays where it was (group
//! members fall back onto their reference point).

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_any_building, reflect_into_bounds, Point2, UrbanMap};

pub const MAX_RESAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityConfig {
    /// Speed cap for individual users and reference points, m/s.
    pub v_user_max: f64,
    /// Maximum deviation of a group member from its reference point, m.
    pub r_dev_max: f64,
    /// Attachment / detachment radius, m.
    pub d_g: f64,
    pub p_join: f64,
    pub p_leave: f64,
    /// Slot duration, s. Taken from the scenario's time settings.
    #[serde(skip, default = "default_slot_duration")]
    pub slot_duration: f64,
}

fn default_slot_duration() -> f64 {
    1.0
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            v_user_max: 2.0,
            r_dev_max: 2.0,
            d_g: 20.0,
            p_join: 0.5,
            p_leave: 0.5,
            slot_duration: 1.0,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mobility.v_user_max", self.v_user_max),
            ("mobility.r_dev_max", self.r_dev_max),
            ("mobility.d_g", self.d_g),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, p) in [("mobility.p_join", self.p_join), ("mobility.p_leave", self.p_leave)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(name, format!("must be a probability, got {p}")));
            }
        }
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            return Err(Error::config(
                "mobility.slot_duration",
                format!("must be positive, got {}", self.slot_duration),
            ));
        }
        Ok(())
    }

    /// Longest step a walker may take in one slot.
    pub fn max_step(&self) -> f64 {
        self.v_user_max * self.slot_duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Individual,
    /// Member of the group with this index.
    Member(usize),
}

impl Mode {
    pub fn group(self) -> Option<usize> {
        match self {
            Mode::Individual => None,
            Mode::Member(g) => Some(g),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub id: usize,
    pub rp: Point2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: usize,
    pub position: Point2,
    pub mode: Mode,
}

/// One polar draw: step (or deviation) length and direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarStep {
    pub length: f64,
    pub angle: f64,
}

impl PolarStep {
    pub fn new(length: f64, angle: f64) -> Self {
        Self { length, angle }
    }

    /// Length uniform on `[0, cap]`, direction uniform on `[0, 2pi)`.
    pub fn sample<R: Rng + ?Sized>(cap: f64, rng: &mut R) -> Self {
        let length = rng.random::<f64>() * cap;
        let angle = rng.random::<f64>() * TAU;
        Self { length, angle }
    }
}

fn admissible(from: Point2, to: Point2, map: &UrbanMap) -> bool {
    !point_in_any_building(to, map) && !map.segment_hits_building(from, to)
}

/// Moves away from `anchor` by `step`, with reflection and rejection.
/// `None` when every attempt was rejected.
fn place_from<R: Rng + ?Sized>(
    anchor: Point2,
    first: PolarStep,
    map: &UrbanMap,
    rng: &mut R,
) -> Option<Point2> {
    let mut step = first;
    for attempt in 0..=MAX_RESAMPLES {
        if attempt > 0 {
            step = PolarStep::new(0.5 * step.length, rng.random::<f64>() * TAU);
        }
        let candidate = reflect_into_bounds(anchor + Point2::polar(step.length, step.angle), map);
        if admissible(anchor, candidate, map) {
            return Some(candidate);
        }
    }
    None
}

/// Advances a reference point with a given draw.
pub fn step_reference_point_with<R: Rng + ?Sized>(
    g: &GroupState,
    step: PolarStep,
    map: &UrbanMap,
    rng: &mut R,
) -> GroupState {
    let rp = place_from(g.rp, step, map, rng).unwrap_or(g.rp);
    GroupState { id: g.id, rp }
}

pub fn step_reference_point<R: Rng + ?Sized>(
    g: &GroupState,
    cfg: &MobilityConfig,
    map: &UrbanMap,
    rng: &mut R,
) -> GroupState {
    let step = PolarStep::sample(cfg.max_step(), rng);
    step_reference_point_with(g, step, map, rng)
}

/// Re-places a member around its (already advanced) reference point.
pub fn step_group_member_with<R: Rng + ?Sized>(
    u: &UserState,
    g: &GroupState,
    deviation: PolarStep,
    map: &UrbanMap,
    rng: &mut R,
) -> UserState {
    debug_assert_eq!(u.mode, Mode::Member(g.id));
    let position = place_from(g.rp, deviation, map, rng).unwrap_or(g.rp);
    UserState {
        id: u.id,
        position,
        mode: u.mode,
    }
}

pub fn step_group_member<R: Rng + ?Sized>(
    u: &UserState,
    g: &GroupState,
    cfg: &MobilityConfig,
    map: &UrbanMap,
    rng: &mut R,
) -> UserState {
    let deviation = PolarStep::sample(cfg.r_dev_max, rng);
    step_group_member_with(u, g, deviation, map, rng)
}

pub fn step_individual_with<R: Rng + ?Sized>(
    u: &UserState,
    step: PolarStep,
    map: &UrbanMap,
    rng: &mut R,
) -> UserState {
    debug_assert_eq!(u.mode, Mode::Individual);
    let position = place_from(u.position, step, map, rng).unwrap_or(u.position);
    UserState {
        id: u.id,
        position,
        mode: u.mode,
    }
}

pub fn step_individual<R: Rng + ?Sized>(
    u: &UserState,
    cfg: &MobilityConfig,
    map: &UrbanMap,
    rng: &mut R,
) -> UserState {
    let step = PolarStep::sample(cfg.max_step(), rng);
    step_individual_with(u, step, map, rng)
}

/// Groups whose reference point is within `d_g` (closed ball) of the user.
pub fn candidate_groups(u: &UserState, groups: &[GroupState], cfg: &MobilityConfig) -> Vec<usize> {
    groups
        .iter()
        .filter(|g| u.position.distance(g.rp) <= cfg.d_g)
        .map(|g| g.id)
        .collect()
}

/// Join/leave transitions, evaluated once per slot on slot-start positions.
pub fn apply_mode_transitions<R: Rng + ?Sized>(
    users: &mut [UserState],
    groups: &[GroupState],
    cfg: &MobilityConfig,
    rng: &mut R,
) {
    for u in users.iter_mut() {
        match u.mode {
            Mode::Individual => {
                let candidates = candidate_groups(u, groups, cfg);
                if candidates.is_empty() || !rng.random_bool(cfg.p_join) {
                    continue;
                }
                // Nearest RP, ties to the lowest id (candidates are ascending).
                let mut best = candidates[0];
                let mut best_d = u.position.distance(groups[best].rp);
                for &g in &candidates[1..] {
                    let d = u.position.distance(groups[g].rp);
                    if d < best_d {
                        best = g;
                        best_d = d;
                    }
                }
                u.mode = Mode::Member(best);
            }
            Mode::Member(g) => {
                if u.position.distance(groups[g].rp) > cfg.d_g && rng.random_bool(cfg.p_leave) {
                    u.mode = Mode::Individual;
                }
            }
        }
    }
}

/// All users and reference points of one world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityState {
    pub users: Vec<UserState>,
    pub groups: Vec<GroupState>,
}

/// Uniform point in the map outside every footprint.
pub fn sample_free_point<R: Rng + ?Sized>(map: &UrbanMap, rng: &mut R) -> Result<Point2> {
    for _ in 0..100_000 {
        let p = Point2::new(rng.random::<f64>() * map.x_max, rng.random::<f64>() * map.y_max);
        if !point_in_any_building(p, map) {
            return Ok(p);
        }
    }
    Err(Error::InvalidMap("no free ground found for user placement".into()))
}

impl MobilityState {
    /// Random initial placement: reference points and individuals uniform on
    /// free ground, members scattered around their reference point.
    pub fn random<R: Rng + ?Sized>(
        group_sizes: &[usize],
        individuals: usize,
        cfg: &MobilityConfig,
        map: &UrbanMap,
        rng: &mut R,
    ) -> Result<Self> {
        let mut groups = Vec::with_capacity(group_sizes.len());
        for id in 0..group_sizes.len() {
            groups.push(GroupState {
                id,
                rp: sample_free_point(map, rng)?,
            });
        }
        let mut users = Vec::new();
        for (g, &size) in group_sizes.iter().enumerate() {
            for _ in 0..size {
                let proto = UserState {
                    id: users.len(),
                    position: groups[g].rp,
                    mode: Mode::Member(g),
                };
                users.push(step_group_member(&proto, &groups[g], cfg, map, rng));
            }
        }
        for _ in 0..individuals {
            users.push(UserState {
                id: users.len(),
                position: sample_free_point(map, rng)?,
                mode: Mode::Individual,
            });
        }
        Ok(Self { users, groups })
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.users.iter().map(|u| u.position).collect()
    }

    /// One slot: transitions, reference points, members, then individuals.
    pub fn step<R: Rng + ?Sized>(&mut self, cfg: &MobilityConfig, map: &UrbanMap, rng: &mut R) {
        apply_mode_transitions(&mut self.users, &self.groups, cfg, rng);
        for g in self.groups.iter_mut() {
            *g = step_reference_point(g, cfg, map, rng);
        }
        for u in self.users.iter_mut() {
            if let Mode::Member(g) = u.mode {
                *u = step_group_member(u, &self.groups[g], cfg, map, rng);
            }
        }
        for u in self.users.iter_mut() {
            if u.mode == Mode::Individual {
                *u = step_individual(u, cfg, map, rng);
            }
        }
    }

    /// Bounds, obstacle and deviation-radius invariants after a step.
    pub fn check_invariants(&self, cfg: &MobilityConfig, map: &UrbanMap) -> std::result::Result<(), String> {
        for g in &self.groups {
            if !map.in_bounds(g.rp) {
                return Err(format!("group {} RP out of bounds at {:?}", g.id, g.rp));
            }
            if point_in_any_building(g.rp, map) {
                return Err(format!("group {} RP inside a building at {:?}", g.id, g.rp));
            }
        }
        for u in &self.users {
            if !map.in_bounds(u.position) {
                return Err(format!("user {} out of bounds at {:?}", u.id, u.position));
            }
            if point_in_any_building(u.position, map) {
                return Err(format!("user {} inside a building at {:?}", u.id, u.position));
            }
            if let Mode::Member(g) = u.mode {
                let Some(group) = self.groups.get(g) else {
                    return Err(format!("user {} references missing group {g}", u.id));
                };
                let d = u.position.distance(group.rp);
                if d > cfg.r_dev_max * (1.0 + 1e-12) + 1e-12 {
                    return Err(format!("user {} is {d} m from its RP", u.id));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Building;
    use crate::rng::SimRng;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rng() -> SimRng {
        SimRng::seed_from_u64(11)
    }

    fn open() -> UrbanMap {
        UrbanMap::empty(300.0, 300.0).unwrap()
    }

    #[test]
    fn reference_point_forced_steps() {
        let map = open();
        let g = GroupState { id: 0, rp: Point2::new(10.0, 10.0) };
        let moved = step_reference_point_with(&g, PolarStep::new(5.0, 0.0), &map, &mut rng());
        assert_relative_eq!(moved.rp.x, 15.0, epsilon = 1e-12);
        assert_relative_eq!(moved.rp.y, 10.0, epsilon = 1e-12);
        let still = step_reference_point_with(&g, PolarStep::new(0.0, 1.3), &map, &mut rng());
        assert_eq!(still.rp, g.rp);
    }

    #[test]
    fn reference_point_reflects_at_boundary() {
        let map = open();
        let g = GroupState { id: 0, rp: Point2::new(1.0, 50.0) };
        let moved = step_reference_point_with(&g, PolarStep::new(3.0, PI), &map, &mut rng());
        let expected = reflect_into_bounds(Point2::new(1.0 - 3.0, 50.0 + 3.0 * PI.sin()), &map);
        assert_relative_eq!(moved.rp.x, expected.x, epsilon = 1e-12);
        assert_relative_eq!(moved.rp.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(moved.rp.y, expected.y, epsilon = 1e-12);
    }

    #[test]
    fn blocked_step_is_resampled_or_stays() {
        // A wall of buildings right of the RP: stepping right must be rejected.
        let wall = Building::new(11.0, 20.0, 0.0, 300.0, 10.0).unwrap();
        let map = UrbanMap::new(300.0, 300.0, vec![wall]).unwrap();
        let g = GroupState { id: 0, rp: Point2::new(10.0, 150.0) };
        let mut r = rng();
        for _ in 0..200 {
            let moved = step_reference_point_with(&g, PolarStep::new(5.0, 0.0), &map, &mut r);
            assert!(!point_in_any_building(moved.rp, &map));
            assert!(moved.rp.x <= 11.0);
            assert!(moved.rp.distance(g.rp) <= 2.5 + 1e-12);
        }
    }

    #[test]
    fn member_forced_deviation() {
        let map = open();
        let g = GroupState { id: 0, rp: Point2::new(100.0, 100.0) };
        let u = UserState { id: 0, position: Point2::new(0.0, 0.0), mode: Mode::Member(0) };
        let at_rp = step_group_member_with(&u, &g, PolarStep::new(0.0, 2.0), &map, &mut rng());
        assert_eq!(at_rp.position, g.rp);
        let up = step_group_member_with(&u, &g, PolarStep::new(2.0, FRAC_PI_2), &map, &mut rng());
        assert_relative_eq!(up.position.x, 100.0, epsilon = 1e-12);
        assert_relative_eq!(up.position.y, 102.0, epsilon = 1e-12);
    }

    #[test]
    fn member_deviation_bound_monte_carlo() {
        let map = open();
        let cfg = MobilityConfig::default();
        let g = GroupState { id: 0, rp: Point2::new(1.0, 299.5) };
        let u = UserState { id: 0, position: g.rp, mode: Mode::Member(0) };
        let mut r = rng();
        let mut max_d: f64 = 0.0;
        for _ in 0..10_000 {
            let s = step_group_member(&u, &g, &cfg, &map, &mut r);
            max_d = max_d.max(s.position.distance(g.rp));
        }
        assert!(max_d <= cfg.r_dev_max + 1e-12, "max deviation {max_d}");
    }

    #[test]
    fn individual_forced_steps() {
        let map = open();
        let u = UserState { id: 0, position: Point2::new(0.0, 0.0), mode: Mode::Individual };
        let s = step_individual_with(&u, PolarStep::new(2.0, FRAC_PI_2), &map, &mut rng());
        assert_relative_eq!(s.position.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.position.y, 2.0, epsilon = 1e-12);
        let z = step_individual_with(&u, PolarStep::new(0.0, 0.7), &map, &mut rng());
        assert_eq!(z.position, u.position);
    }

    #[test]
    fn individual_stays_in_bounds() {
        let map = open();
        let cfg = MobilityConfig { v_user_max: 20.0, ..Default::default() };
        let mut u = UserState { id: 0, position: Point2::new(3.0, 297.0), mode: Mode::Individual };
        let mut r = rng();
        for _ in 0..10_000 {
            u = step_individual(&u, &cfg, &map, &mut r);
            assert!(map.in_bounds(u.position));
        }
    }

    #[test]
    fn candidate_set() {
        let cfg = MobilityConfig { d_g: 20.0, ..Default::default() };
        let groups = [
            GroupState { id: 0, rp: Point2::new(5.0, 0.0) },
            GroupState { id: 1, rp: Point2::new(100.0, 0.0) },
        ];
        let u = UserState { id: 0, position: Point2::ORIGIN, mode: Mode::Individual };
        assert_eq!(candidate_groups(&u, &groups, &cfg), vec![0]);
        let far = UserState { position: Point2::new(50.0, 200.0), ..u };
        assert!(candidate_groups(&far, &groups, &cfg).is_empty());
        let tie = [
            GroupState { id: 0, rp: Point2::new(-20.0, 0.0) },
            GroupState { id: 1, rp: Point2::new(20.0, 0.0) },
        ];
        assert_eq!(candidate_groups(&u, &tie, &cfg), vec![0, 1]);
    }

    #[test]
    fn join_and_leave_rules() {
        let groups = [
            GroupState { id: 0, rp: Point2::new(-20.0, 0.0) },
            GroupState { id: 1, rp: Point2::new(20.0, 0.0) },
        ];
        let mut r = rng();
        let certain = MobilityConfig { p_join: 1.0, p_leave: 1.0, ..Default::default() };
        let mut users = vec![UserState { id: 0, position: Point2::ORIGIN, mode: Mode::Individual }];
        apply_mode_transitions(&mut users, &groups, &certain, &mut r);
        // Equidistant: lowest id wins.
        assert_eq!(users[0].mode, Mode::Member(0));

        let never = MobilityConfig { p_join: 0.0, p_leave: 0.0, ..Default::default() };
        let mut users = vec![UserState { id: 0, position: Point2::ORIGIN, mode: Mode::Individual }];
        for _ in 0..100 {
            apply_mode_transitions(&mut users, &groups, &never, &mut r);
        }
        assert_eq!(users[0].mode, Mode::Individual);

        let mut users = vec![UserState {
            id: 0,
            position: Point2::new(-20.0 + 21.0, 0.0),
            mode: Mode::Member(0),
        }];
        apply_mode_transitions(&mut users, &groups, &certain, &mut r);
        assert_eq!(users[0].mode, Mode::Individual);
    }

    #[test]
    fn frozen_world_is_fixpoint() {
        let map = open();
        let cfg = MobilityConfig {
            v_user_max: 0.0,
            r_dev_max: 0.0,
            p_join: 0.0,
            p_leave: 0.0,
            ..Default::default()
        };
        let mut r = rng();
        let mut state = MobilityState::random(&[3, 2], 4, &cfg, &map, &mut r).unwrap();
        let before = state.clone();
        for _ in 0..10 {
            state.step(&cfg, &map, &mut r);
        }
        assert_eq!(state, before);
    }

    #[test]
    fn mode_transitions_conserve_users() {
        let map = open();
        let cfg = MobilityConfig { r_dev_max: 30.0, p_join: 0.7, p_leave: 0.7, ..Default::default() };
        let mut r = rng();
        let mut state = MobilityState::random(&[4, 4], 6, &cfg, &map, &mut r).unwrap();
        for _ in 0..120 {
            state.step(&cfg, &map, &mut r);
            assert_eq!(state.users.len(), 14);
            for (i, u) in state.users.iter().enumerate() {
                assert_eq!(u.id, i);
            }
            state.check_invariants(&cfg, &map).unwrap();
        }
    }

    #[test]
    fn config_validation() {
        assert!(MobilityConfig::default().validate().is_ok());
        assert!(MobilityConfig { p_join: 1.5, ..Default::default() }.validate().is_err());
        assert!(MobilityConfig { slot_duration: 0.0, ..Default::default() }.validate().is_err());
        assert!(MobilityConfig { d_g: -1.0, ..Default::default() }.validate().is_err());
    }
}
