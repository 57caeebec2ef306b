//! Browser front end for the simulator.
//!
//! One [`Demo`] holds a running episode of the built-in scenario. The page
//! steps it, draws the map, users and UAV, shades a line-of-sight map and
//! compares the two allocators on the current slot.

use uavqos::allocation::{allocate_slot, dual_ascent_with, AllocStatus};
use uavqos::geometry::{classify_link, Point2};
use uavqos::harness::ScenarioConfig;
use uavqos::rl::{baseline_action, BaselineKind, SlotOutcome, World};
use wasm_bindgen::prelude::*;

fn status_code(s: AllocStatus) -> f64 {
    match s {
        AllocStatus::Feasible => 0.0,
        AllocStatus::Relaxed => 1.0,
        AllocStatus::Infeasible => 2.0,
    }
}

#[wasm_bindgen]
pub struct Demo {
    // Leaked so the world can borrow it; one small scenario per reset.
    cfg: &'static ScenarioConfig,
    world: World<'static>,
    policy: BaselineKind,
    last: Option<SlotOutcome>,
}

#[wasm_bindgen]
impl Demo {
    /// Fresh episode. `follow` selects the follow-centroid baseline,
    /// otherwise the UAV hovers at the initial centroid.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, altitude: f64, v_max: f64, c_fronthaul_mbps: f64, follow: bool) -> Result<Demo, JsError> {
        let mut cfg = ScenarioConfig::preset("paper-s4").map_err(|e| JsError::new(&e.to_string()))?;
        cfg.uav.altitude = altitude;
        cfg.uav.v_max = v_max;
        cfg.allocation.c_fronthaul = c_fronthaul_mbps * 1e6;
        cfg.validate().map_err(|e| JsError::new(&e.to_string()))?;
        let cfg: &'static ScenarioConfig = Box::leak(Box::new(cfg));
        let world = World::new(cfg, seed, 0).map_err(|e| JsError::new(&e.to_string()))?;
        let policy = if follow { BaselineKind::FollowCentroid } else { BaselineKind::StationaryCentroid };
        Ok(Demo { cfg, world, policy, last: None })
    }

    pub fn width(&self) -> f64 {
        self.world.map.x_max
    }

    pub fn height(&self) -> f64 {
        self.world.map.y_max
    }

    pub fn horizon(&self) -> usize {
        self.cfg.time.horizon
    }

    pub fn slot(&self) -> usize {
        self.world.slot
    }

    /// `[x_lo, x_hi, y_lo, y_hi, height]` per building.
    pub fn buildings(&self) -> Vec<f64> {
        self.world
            .map
            .buildings
            .iter()
            .flat_map(|b| [b.x_lo, b.x_hi, b.y_lo, b.y_hi, b.height])
            .collect()
    }

    /// Advances one slot; false once the horizon is reached or the slot
    /// was infeasible.
    pub fn step(&mut self) -> Result<bool, JsError> {
        if self.done() {
            return Ok(false);
        }
        let w = &self.world;
        let action = baseline_action(
            self.policy,
            w.uav,
            &w.user_positions(),
            self.cfg.uav.v_max,
            self.cfg.time.slot_duration,
        );
        let outcome = self.world.step(action).map_err(|e| JsError::new(&e.to_string()))?;
        self.last = Some(outcome);
        Ok(!self.done())
    }

    pub fn done(&self) -> bool {
        self.world.slot >= self.cfg.time.horizon || self.last.as_ref().is_some_and(|o| o.terminated)
    }

    pub fn uav(&self) -> Vec<f64> {
        vec![self.world.uav.x, self.world.uav.y]
    }

    /// `[x, y, los, group]` per user; `los` is -1 before the first slot and
    /// `group` is -1 for individuals.
    pub fn users(&self) -> Vec<f64> {
        let los = self.last.as_ref().map(|o| &o.links);
        self.world
            .mobility
            .users
            .iter()
            .enumerate()
            .flat_map(|(k, u)| {
                let l = los.map_or(-1.0, |l| f64::from(u8::from(l[k].is_los)));
                let g = u.mode.group().map_or(-1.0, |g| g as f64);
                [u.position.x, u.position.y, l, g]
            })
            .collect()
    }

    /// Per-user rates of the last slot, bit/s.
    pub fn rates(&self) -> Vec<f64> {
        self.last.as_ref().map_or_else(Vec::new, |o| o.allocation.rate.clone())
    }

    pub fn sum_rate(&self) -> f64 {
        self.last.as_ref().map_or(0.0, |o| o.allocation.sum_rate())
    }

    pub fn status(&self) -> String {
        self.last.as_ref().map_or("none", |o| o.allocation.status.as_str()).to_string()
    }

    /// Heuristic and dual-ascent allocations of the last slot's channels:
    /// `K` heuristic rates, `K` dual rates, then both sum rates and both
    /// status codes (0 feasible, 1 relaxed, 2 infeasible).
    pub fn compare_allocators(&self) -> Result<Vec<f64>, JsError> {
        let Some(o) = &self.last else {
            return Ok(Vec::new());
        };
        let a: Vec<f64> = o.links.iter().map(|l| l.snr_coeff).collect();
        let p = &self.cfg.allocation;
        let h = allocate_slot(&a, p).map_err(|e| JsError::new(&e.to_string()))?;
        let d = dual_ascent_with(&a, p, &self.cfg.dual_ascent).map_err(|e| JsError::new(&e.to_string()))?;
        let mut out = h.rate.clone();
        out.extend_from_slice(&d.rate);
        out.extend([h.sum_rate(), d.sum_rate(), status_code(h.status), status_code(d.status)]);
        Ok(out)
    }

    /// `n x n` grid, row-major from the bottom-left cell: for `user >= 0`
    /// whether that user sees a UAV at the cell centre (0 or 1), otherwise
    /// the fraction of users that do.
    pub fn los_map(&self, user: i32, n: usize) -> Vec<f64> {
        let map = &self.world.map;
        let users = self.world.user_positions();
        let targets: Vec<Point2> = match usize::try_from(user) {
            Ok(k) if k < users.len() => vec![users[k]],
            _ => users,
        };
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let q = Point2::new(
                    (i as f64 + 0.5) * map.x_max / n as f64,
                    (j as f64 + 0.5) * map.y_max / n as f64,
                );
                let seen = targets
                    .iter()
                    .filter(|&&u| classify_link(q, self.cfg.uav.altitude, u, map).is_los)
                    .count();
                out.push(seen as f64 / targets.len().max(1) as f64);
            }
        }
        out
    }
}
