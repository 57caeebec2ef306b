use std::f64::consts::LN_2;

use super::{check_inputs, throttle_to_fronthaul, waterfill_residual, AllocParams, AllocStatus, BandwidthInit, SlotAllocation};
use crate::error::Result;

/// `(2^(r/b) - 1) b` without cancellation for small `r/b`.
fn power_numerator(b: f64, r_target: f64) -> f64 {
    if r_target <= 0.0 {
        return 0.0;
    }
    if b <= 0.0 {
        return f64::INFINITY;
    }
    (r_target * LN_2 / b).exp_m1() * b
}

/// Minimum power reaching `r_target` on bandwidth `b`.
///
/// `None` when `b = 0` and `r_target > 0`: no finite power suffices.
pub fn min_power(b: f64, r_target: f64, a: f64) -> Option<f64> {
    let p = power_numerator(b, r_target) / a;
    p.is_finite().then_some(p)
}

fn min_power_raw(b: f64, r_target: f64, a: f64) -> f64 {
    power_numerator(b, r_target) / a
}

/// `chi = a / (2^(r/b) - 1)`. Small values mark users that need a lot of
/// power for their target. Zero target gives `+inf` (lowest priority).
pub fn priority_metric(b: f64, r_target: f64, a: f64) -> f64 {
    if r_target <= 0.0 {
        return f64::INFINITY;
    }
    if b <= 0.0 {
        return 0.0;
    }
    a / (r_target * LN_2 / b).exp_m1()
}

/// Bandwidth proportional to `1 / chi_k`; the last user takes the rounding
/// residue so the split sums to `b_total`. Falls back to an equal split when
/// every weight is zero.
pub fn rebalance_bandwidth(chis: &[f64], b_total: f64) -> Vec<f64> {
    let k = chis.len();
    if k == 0 {
        return Vec::new();
    }
    let weights: Vec<f64> = chis
        .iter()
        .map(|&c| if c.is_infinite() { 0.0 } else { 1.0 / c })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut b: Vec<f64> = if total > 0.0 && total.is_finite() {
        weights.iter().map(|w| b_total * w / total).collect()
    } else {
        vec![b_total / k as f64; k]
    };
    let head: f64 = b[..k - 1].iter().sum();
    b[k - 1] = (b_total - head).max(0.0);
    b
}

fn argmin_by<F: Fn(usize) -> bool>(values: &[f64], eligible: F) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !eligible(i) {
            continue;
        }
        match best {
            Some(j) if values[j] <= v => {}
            _ => best = Some(i),
        }
    }
    best
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Workspace<'a> {
    a: &'a [f64],
    r_min: f64,
    cap: f64,
    b: Vec<f64>,
    s: Vec<f64>,
}

impl Workspace<'_> {
    fn target(&self, k: usize) -> f64 {
        self.r_min - self.s[k]
    }

    fn targets_total(&self) -> f64 {
        (0..self.a.len()).map(|k| self.target(k)).sum()
    }

    fn chis(&self) -> Vec<f64> {
        (0..self.a.len())
            .map(|k| priority_metric(self.b[k], self.target(k), self.a[k]))
            .collect()
    }

    fn min_powers(&self) -> Vec<f64> {
        (0..self.a.len())
            .map(|k| min_power_raw(self.b[k], self.target(k), self.a[k]))
            .collect()
    }

    /// Raises the slack of the neediest user still below the cap.
    /// False once every slack is capped.
    fn relax_neediest(&mut self, step: f64) -> bool {
        let chis = self.chis();
        let cap = self.cap;
        let s = &self.s;
        match argmin_by(&chis, |k| s[k] < cap) {
            Some(k) => {
                self.s[k] = (self.s[k] + step).min(cap);
                true
            }
            None => false,
        }
    }
}

/// QoS-aware heuristic bandwidth/power allocation for one slot.
///
/// 1. Equal bandwidth split, zero slack.
/// 2. Up to `max_iters` rounds: relax slack on the neediest user while the
///    summed rate targets exceed `C_f`; stop if the minimum powers fit in
///    `P_max`, otherwise move `delta_b` of bandwidth from the max-`chi` user
///    to the min-`chi` user and renormalize.
/// 3. Relax slack on the neediest user until the minimum powers fit.
/// 4. Water-fill the residual power under the fronthaul cap.
///
/// Slack never exceeds the cap; if the targets cannot be met with every
/// slack at its cap the result is marked infeasible and the powers are
/// scaled down to respect both budgets. Ties go to the lowest user index.
pub fn allocate_slot(a: &[f64], params: &AllocParams) -> Result<SlotAllocation> {
    check_inputs(a, params)?;
    let k = a.len();
    if k == 0 {
        return Ok(SlotAllocation::empty());
    }
    let b_total = params.b_total;
    let p_total = params.p_total;
    let c_f = params.c_fronthaul;
    let db = params.bandwidth_step(k);
    let ds = params.slack_step();

    let equal = b_total / k as f64;
    let b = match params.init {
        BandwidthInit::Equal => vec![equal; k],
        BandwidthInit::Rebalanced => {
            let chis: Vec<f64> = a.iter().map(|&a| priority_metric(equal, params.r_min, a)).collect();
            rebalance_bandwidth(&chis, b_total)
        }
    };
    let mut ws = Workspace {
        a,
        r_min: params.r_min,
        cap: params.slack_cap(),
        b,
        s: vec![0.0; k],
    };
    let mut exhausted = false;

    for _ in 0..params.max_iters {
        while ws.targets_total() > c_f {
            if !ws.relax_neediest(ds) {
                exhausted = true;
                break;
            }
        }
        if exhausted {
            break;
        }
        let p_min: f64 = ws.min_powers().iter().sum();
        if p_min <= p_total {
            break;
        }
        let chis = ws.chis();
        let k1 = argmin_by(&chis, |_| true).expect("k >= 1");
        let k2 = argmax(&chis);
        if k1 == k2 {
            break;
        }
        ws.b[k1] += db;
        ws.b[k2] = (ws.b[k2] - db).max(0.0);
        let total: f64 = ws.b.iter().sum();
        for v in ws.b.iter_mut() {
            *v *= b_total / total;
        }
    }

    while !exhausted && ws.min_powers().iter().sum::<f64>() > p_total {
        if !ws.relax_neediest(ds) {
            exhausted = true;
        }
    }

    let Workspace { b, s, .. } = ws;
    let target = |k: usize| params.r_min - s[k];
    let mut p: Vec<f64> = (0..k).map(|i| min_power_raw(b[i], target(i), a[i])).collect();

    if exhausted {
        // Best effort inside both budgets: hopeless users get no power, the
        // rest are scaled together.
        for v in p.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        if total > p_total {
            for v in p.iter_mut() {
                *v *= p_total / total;
            }
        }
        throttle_to_fronthaul(&b, &mut p, a, c_f);
        return Ok(SlotAllocation::from_parts(b, p, s, a, AllocStatus::Infeasible));
    }

    let used: f64 = p.iter().sum();
    let p_rem = p_total - used;
    if p_rem > 0.0 {
        let extra = waterfill_residual(&b, a, &p, p_rem, c_f);
        for (v, e) in p.iter_mut().zip(extra) {
            *v += e;
        }
    }
    let status = if s.iter().any(|&v| v > 0.0) {
        AllocStatus::Relaxed
    } else {
        AllocStatus::Feasible
    };
    Ok(SlotAllocation::from_parts(b, p, s, a, status))
}
