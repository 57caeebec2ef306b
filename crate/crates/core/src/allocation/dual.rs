//! Lagrangian dual ascent with zero slack.
//!
//! Works in scaled units: `x_k = b_k / B_max`, `y_k = p_k / P_max` and rates
//! in bit/s/Hz of the total band, so that one step size fits every budget.
//! The Lagrangian separates per user. With weight `w_k = 1 - l_f + nu_k`,
//! user `k` maximizes `w_k r_k(x, y) - l_b x - l_p y`; for fixed `x` the best
//! `y` is `x theta_k` (capped at 1) with `theta_k = [w_k / (l_p ln 2) - 1/c_k]^+`,
//! and the remaining search over `x` is one-dimensional and concave.
//!
//! Because the per-user objective is linear in `x` until the power cap
//! binds, raw iterates jump between corners. The primal is recovered from
//! both the raw iterates and their running average, each projected onto the
//! budget simplexes, and the best QoS- and fronthaul-feasible one is kept.
//! [`PrimalRecovery::PowerRepair`] adds a third candidate that keeps the
//! averaged bandwidth split and recomputes powers.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{check_inputs, throttle_to_fronthaul, AllocParams, AllocStatus, SlotAllocation};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualAscentConfig {
    pub iterations: usize,
    /// Step-size constant `c` in `c / sqrt(t)`.
    pub step: f64,
    /// Golden-section iterations for the bandwidth search.
    pub line_search_iters: usize,
    #[serde(default)]
    pub recovery: PrimalRecovery,
}

impl DualAscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("dual_ascent.iterations", "must be at least 1"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config("dual_ascent.step", format!("must be positive, got {}", self.step)));
        }
        if self.line_search_iters == 0 {
            return Err(Error::config("dual_ascent.line_search_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// How a primal allocation is read off the dual iterates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimalRecovery {
    /// Raw and averaged iterates, each scaled onto the budget simplexes.
    #[default]
    Projection,
    /// Also the averaged bandwidth split with powers lifted to the QoS
    /// floors.
    PowerRepair,
}

impl Default for DualAscentConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            step: 0.5,
            line_search_iters: 60,
            recovery: PrimalRecovery::Projection,
        }
    }
}

struct Scaled {
    /// `a_k P_max / B_max`.
    c: Vec<f64>,
    r_min: f64,
    c_f: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Multipliers {
    band: f64,
    power: f64,
    fronthaul: f64,
}

fn rate(x: f64, y: f64, c: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (c * y / x).ln_1p() / LN_2
    }
}

/// Per-user maximizer of `w r(x, y) - l_b x - l_p y` over `[0, 1]^2`.
fn best_response(w: f64, c: f64, m: &Multipliers, iters: usize) -> (f64, f64) {
    if w <= 0.0 {
        return (0.0, 0.0);
    }
    // Power per unit bandwidth at the unconstrained optimum.
    let theta = if m.power > 0.0 {
        (w / (m.power * LN_2) - 1.0 / c).max(0.0)
    } else {
        f64::INFINITY
    };
    let y_of = |x: f64| (x * theta).min(1.0);
    let value = |x: f64| {
        let y = y_of(x);
        w * rate(x, y, c) - m.power * y - m.band * x
    };
    // Linear on [0, knee], concave beyond it.
    let knee = if theta > 0.0 { (1.0 / theta).min(1.0) } else { 1.0 };
    if value(knee) <= 0.0 && knee >= 1.0 {
        return (0.0, 0.0);
    }
    let (mut lo, mut hi) = (knee, 1.0);
    let mut best_x = knee;
    if hi > lo {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (value(x1), value(x2));
        for _ in 0..iters {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = value(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = value(x1);
            }
        }
        let mid = 0.5 * (lo + hi);
        for x in [knee, mid, 1.0] {
            if value(x) > value(best_x) {
                best_x = x;
            }
        }
    }
    if value(best_x) <= 0.0 {
        (0.0, 0.0)
    } else {
        (best_x, y_of(best_x))
    }
}

fn project_budget(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 1.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        v.to_vec()
    }
}

/// Keeps the bandwidth split and lifts every user to the power its QoS
/// row needs, funding the lift from the other users' surplus power.
fn repair_power(x: &[f64], y: &[f64], prob: &Scaled) -> Option<Vec<f64>> {
    let floor: Vec<f64> = x
        .iter()
        .zip(&prob.c)
        .map(|(&x, &c)| if x > 0.0 { x / c * ((prob.r_min / x * LN_2).exp() - 1.0) } else { f64::INFINITY })
        .collect();
    let need: f64 = floor.iter().sum();
    if !(need <= 1.0) {
        return None;
    }
    let surplus: Vec<f64> = y.iter().zip(&floor).map(|(y, f)| (y - f).max(0.0)).collect();
    let total: f64 = surplus.iter().sum();
    let scale = if total > 0.0 { ((1.0 - need) / total).min(1.0) } else { 0.0 };
    Some(floor.iter().zip(&surplus).map(|(f, s)| f + s * scale).collect())
}

/// Sum rate of a projected point if it meets every QoS row and the fronthaul.
fn feasible_value(x: &[f64], y: &[f64], prob: &Scaled) -> Option<f64> {
    let mut total = 0.0;
    for k in 0..x.len() {
        let r = rate(x[k], y[k], prob.c[k]);
        if r < prob.r_min * (1.0 - 1e-6) {
            return None;
        }
        total += r;
    }
    (total <= prob.c_f * (1.0 + 1e-6)).then_some(total)
}

/// Dual-ascent baseline with default settings.
pub fn dual_ascent_baseline(a: &[f64], params: &AllocParams) -> Result<SlotAllocation> {
    dual_ascent_with(a, params, &DualAscentConfig::default())
}

/// Dual ascent on the budget, fronthaul and per-user QoS multipliers.
pub fn dual_ascent_with(a: &[f64], params: &AllocParams, cfg: &DualAscentConfig) -> Result<SlotAllocation> {
    check_inputs(a, params)?;
    let k = a.len();
    if k == 0 {
        return Ok(SlotAllocation::empty());
    }
    let prob = Scaled {
        c: a.iter().map(|a| a * params.p_total / params.b_total).collect(),
        r_min: params.r_min / params.b_total,
        c_f: params.c_fronthaul / params.b_total,
    };
    let mut m = Multipliers::default();
    let mut nu = vec![0.0; k];
    let mut x = vec![0.0; k];
    let mut y = vec![0.0; k];
    let mut avg_x = vec![0.0; k];
    let mut avg_y = vec![0.0; k];
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;

    for t in 1..=cfg.iterations {
        for i in 0..k {
            let w = 1.0 - m.fronthaul + nu[i];
            (x[i], y[i]) = best_response(w, prob.c[i], &m, cfg.line_search_iters);
        }
        let inv_t = 1.0 / t as f64;
        for i in 0..k {
            avg_x[i] += (x[i] - avg_x[i]) * inv_t;
            avg_y[i] += (y[i] - avg_y[i]) * inv_t;
        }
        for (cx, cy) in [(&x, &y), (&avg_x, &avg_y)] {
            let px = project_budget(cx);
            let py = project_budget(cy);
            if let Some(v) = feasible_value(&px, &py, &prob) {
                if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                    best = Some((v, px, py));
                }
            }
        }
        if cfg.recovery == PrimalRecovery::PowerRepair {
            let px = project_budget(&avg_x);
            if let Some(py) = repair_power(&px, &avg_y, &prob) {
                if let Some(v) = feasible_value(&px, &py, &prob) {
                    if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                        best = Some((v, px, py));
                    }
                }
            }
        }

        let step = cfg.step / (t as f64).sqrt();
        let rates: Vec<f64> = (0..k).map(|i| rate(x[i], y[i], prob.c[i])).collect();
        m.band = (m.band + step * (x.iter().sum::<f64>() - 1.0)).max(0.0);
        m.power = (m.power + step * (y.iter().sum::<f64>() - 1.0)).max(0.0);
        m.fronthaul = (m.fronthaul + step * (rates.iter().sum::<f64>() - prob.c_f)).max(0.0);
        for i in 0..k {
            nu[i] = (nu[i] + step * (prob.r_min - rates[i])).max(0.0);
        }
    }

    let slack = vec![0.0; k];
    let (px, py, status) = match best {
        Some((_, px, py)) => (px, py, AllocStatus::Feasible),
        None => (project_budget(&avg_x), project_budget(&avg_y), AllocStatus::Infeasible),
    };
    let b: Vec<f64> = px.iter().map(|x| (x * params.b_total).min(params.b_total)).collect();
    let mut p: Vec<f64> = py.iter().map(|y| (y * params.p_total).min(params.p_total)).collect();
    throttle_to_fronthaul(&b, &mut p, a, params.c_fronthaul);
    Ok(SlotAllocation::from_parts(b, p, slack, a, status))
}
