//! Per-slot bandwidth and power allocation.
//!
//! Given the SNR coefficients `a_k` of one slot, split the bandwidth budget
//! `B_max` and the power budget `P_max` across users to maximize the sum rate
//! subject to a per-user minimum rate `R_min` (relaxable by a bounded slack
//! `s_k <= s_cap`) and the fronthaul cap `sum R_k <= C_f`.
//!
//! - [`allocate_slot`]: the QoS-aware heuristic (bandwidth shifting toward
//!   the most power-hungry user, slack relaxation, residual water-filling).
//! - [`dual_ascent_baseline`]: Lagrangian dual ascent with zero slack.
//! - [`concave_oracle`]: small-instance global optimum, used as a reference.

mod dual;
mod heuristic;
mod oracle;
mod waterfill;

pub use dual::{dual_ascent_baseline, dual_ascent_with, DualAscentConfig, PrimalRecovery};
pub use heuristic::{allocate_slot, min_power, priority_metric, rebalance_bandwidth};
pub use oracle::concave_oracle;
pub use waterfill::waterfill_residual;

use serde::{Deserialize, Serialize};

use crate::channel::achievable_rate;
use crate::error::{Error, Result};

/// How the heuristic initializes the bandwidth split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthInit {
    /// `B_max / K` each.
    #[default]
    Equal,
    /// Inverse-priority weights, `b_k ~ 1 / chi_k`.
    Rebalanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocParams {
    /// Total bandwidth, Hz.
    pub b_total: f64,
    /// Total transmit power, W.
    pub p_total: f64,
    /// Minimum per-user rate, bit/s.
    pub r_min: f64,
    /// Fronthaul capacity, bit/s.
    pub c_fronthaul: f64,
    /// Bandwidth shift per iteration; `B_max / (10 K)` when unset.
    #[serde(default)]
    pub delta_b: Option<f64>,
    /// Slack increment; `R_min / 100` when unset.
    #[serde(default)]
    pub delta_s: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Slack upper bound; `R_min / 10` when unset.
    #[serde(default)]
    pub s_cap: Option<f64>,
    #[serde(default)]
    pub init: BandwidthInit,
}

fn default_max_iters() -> usize {
    50
}

impl AllocParams {
    pub fn new(b_total: f64, p_total: f64, r_min: f64, c_fronthaul: f64) -> Self {
        Self {
            b_total,
            p_total,
            r_min,
            c_fronthaul,
            delta_b: None,
            delta_s: None,
            max_iters: default_max_iters(),
            s_cap: None,
            init: BandwidthInit::Equal,
        }
    }

    /// 20 MHz, 2 W, 1 Mbit/s, 500 Mbit/s.
    pub fn preset() -> Self {
        Self::new(20e6, 2.0, 1e6, 500e6)
    }

    pub fn bandwidth_step(&self, k: usize) -> f64 {
        self.delta_b.unwrap_or(self.b_total / (10.0 * k.max(1) as f64))
    }

    pub fn slack_step(&self) -> f64 {
        self.delta_s.unwrap_or(self.r_min / 100.0)
    }

    pub fn slack_cap(&self) -> f64 {
        self.s_cap.unwrap_or(self.r_min / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("allocation.b_total", self.b_total),
            ("allocation.p_total", self.p_total),
            ("allocation.r_min", self.r_min),
            ("allocation.c_fronthaul", self.c_fronthaul),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("allocation.delta_b", self.delta_b),
            ("allocation.delta_s", self.delta_s),
            ("allocation.s_cap", self.s_cap),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(name, format!("must be positive, got {v}")));
                }
            }
        }
        if self.max_iters == 0 {
            return Err(Error::config("allocation.max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocStatus {
    /// Every user meets `R_min` with zero slack.
    Feasible,
    /// Some slack is in use, all within the cap.
    Relaxed,
    /// The QoS targets cannot be met even with every slack at its cap.
    Infeasible,
}

impl AllocStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocStatus::Feasible => "feasible",
            AllocStatus::Relaxed => "relaxed",
            AllocStatus::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "feasible" => Some(AllocStatus::Feasible),
            "relaxed" => Some(AllocStatus::Relaxed),
            "infeasible" => Some(AllocStatus::Infeasible),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotAllocation {
    pub bandwidth: Vec<f64>,
    pub power: Vec<f64>,
    pub slack: Vec<f64>,
    pub rate: Vec<f64>,
    pub status: AllocStatus,
}

impl SlotAllocation {
    pub fn empty() -> Self {
        Self {
            bandwidth: Vec::new(),
            power: Vec::new(),
            slack: Vec::new(),
            rate: Vec::new(),
            status: AllocStatus::Feasible,
        }
    }

    /// Fills in the rates from bandwidth, power and the SNR coefficients.
    pub(crate) fn from_parts(
        bandwidth: Vec<f64>,
        power: Vec<f64>,
        slack: Vec<f64>,
        a: &[f64],
        status: AllocStatus,
    ) -> Self {
        let rate = bandwidth
            .iter()
            .zip(&power)
            .zip(a)
            .map(|((&b, &p), &a)| achievable_rate(b, p, a))
            .collect();
        Self {
            bandwidth,
            power,
            slack,
            rate,
            status,
        }
    }

    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    pub fn sum_rate(&self) -> f64 {
        self.rate.iter().sum()
    }

    pub fn sum_bandwidth(&self) -> f64 {
        self.bandwidth.iter().sum()
    }

    pub fn sum_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Budget safety and QoS contract at the standard tolerances.
    pub fn check_invariants(&self, params: &AllocParams) -> std::result::Result<(), String> {
        let sb = self.sum_bandwidth();
        if sb > params.b_total * (1.0 + 1e-9) {
            return Err(format!("bandwidth {sb} exceeds {}", params.b_total));
        }
        let sp = self.sum_power();
        if sp > params.p_total * (1.0 + 1e-9) {
            return Err(format!("power {sp} exceeds {}", params.p_total));
        }
        let sr = self.sum_rate();
        if sr > params.c_fronthaul * (1.0 + 1e-6) {
            return Err(format!("sum rate {sr} exceeds fronthaul {}", params.c_fronthaul));
        }
        let cap = params.slack_cap();
        for (k, &s) in self.slack.iter().enumerate() {
            if !(0.0..=cap * (1.0 + 1e-12)).contains(&s) {
                return Err(format!("user {k} slack {s} outside [0, {cap}]"));
            }
        }
        if self.bandwidth.iter().chain(&self.power).any(|&v| !(v >= 0.0)) {
            return Err("negative or NaN bandwidth/power".into());
        }
        match self.status {
            AllocStatus::Infeasible => {}
            AllocStatus::Feasible | AllocStatus::Relaxed => {
                for (k, (&r, &s)) in self.rate.iter().zip(&self.slack).enumerate() {
                    if r < params.r_min - s - 1e-6 * params.r_min {
                        return Err(format!(
                            "user {k} rate {r} below target {} ({:?})",
                            params.r_min - s,
                            self.status
                        ));
                    }
                }
                if self.status == AllocStatus::Feasible && self.slack.iter().any(|&s| s > 0.0) {
                    return Err("status feasible with nonzero slack".into());
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_inputs(a: &[f64], params: &AllocParams) -> Result<()> {
    params.validate()?;
    if let Some((k, v)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidAllocInput(format!(
            "SNR coefficient of user {k} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Largest common power scale in `[0, 1]` keeping `sum R <= C_f`.
pub(crate) fn throttle_to_fronthaul(b: &[f64], p: &mut [f64], a: &[f64], c_f: f64) {
    let total = |theta: f64| -> f64 {
        b.iter()
            .zip(p.iter())
            .zip(a)
            .map(|((&b, &p), &a)| achievable_rate(b, theta * p, a))
            .sum()
    };
    if total(1.0) <= c_f {
        return;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) <= c_f {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    for v in p.iter_mut() {
        *v *= lo;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_defaults() {
        let p = AllocParams::preset();
        assert_eq!(p.bandwidth_step(22), 20e6 / 220.0);
        assert_eq!(p.slack_step(), 1e4);
        assert_eq!(p.slack_cap(), 1e5);
        assert!(p.validate().is_ok());
        assert!(AllocParams { max_iters: 0, ..p.clone() }.validate().is_err());
        assert!(AllocParams { p_total: -1.0, ..p }.validate().is_err());
    }

    #[test]
    fn status_names_roundtrip() {
        for s in [AllocStatus::Feasible, AllocStatus::Relaxed, AllocStatus::Infeasible] {
            assert_eq!(AllocStatus::parse(s.as_str()), Some(s));
        }
    }
}
