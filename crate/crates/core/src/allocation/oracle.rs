//! Global optimum of the per-slot allocation problem for small `K`, with the
//! slacks frozen.
//!
//! The sum rate is jointly concave in `(b, p)`, so the value of the best power
//! split for a fixed bandwidth split, `V(b)`, is concave in `b`. The inner
//! problem is solved exactly from its KKT conditions: every user sits at
//! `p_k = max(p_min_k(b_k), b_k (mu - 1 / a_k))` for a common level `mu`, and
//! the level is lowered if the fronthaul cap binds. The outer problem is
//! projected gradient ascent on the bandwidth simplex with Armijo
//! backtracking, started from the split that minimizes the summed QoS powers
//! (found from its own KKT conditions). If even that split needs more than
//! `P_max`, the QoS set is empty.
//!
//! Everything here is written independently of the heuristic allocator so
//! it can serve as a reference for it.

use std::f64::consts::LN_2;

use super::{check_inputs, AllocParams, AllocStatus, SlotAllocation};
use crate::error::{Error, Result};

const MAX_OUTER: usize = 20_000;
const STATIONARITY: f64 = 1e-8;

fn rate(b: f64, p: f64, a: f64) -> f64 {
    if b <= 0.0 {
        0.0
    } else {
        b * (a * p / b).ln_1p() / LN_2
    }
}

fn floor_power(b: f64, t: f64, a: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if b <= 0.0 {
        f64::INFINITY
    } else {
        (t * LN_2 / b).exp_m1() * b / a
    }
}

/// d p_min / d b, negative and increasing toward 0.
fn floor_power_slope(b: f64, t: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if b <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let x = t * LN_2 / b;
    // e^x (1 - x) - 1, computed as expm1(x) - x e^x
    (x.exp_m1() - x * x.exp()) / a
}

struct Problem<'a> {
    a: &'a [f64],
    targets: Vec<f64>,
    b_total: f64,
    p_total: f64,
    c_f: f64,
}

struct Inner {
    value: f64,
    power: Vec<f64>,
    /// Marginal value of power; `None` when the fronthaul cap binds.
    nu: Option<f64>,
}

impl Problem<'_> {
    fn k(&self) -> usize {
        self.a.len()
    }

    fn powers_at(&self, b: &[f64], mu: f64, out: &mut [f64]) {
        for i in 0..self.k() {
            let floor = floor_power(b[i], self.targets[i], self.a[i]);
            let fill = if b[i] > 0.0 { b[i] * (mu - 1.0 / self.a[i]) } else { 0.0 };
            out[i] = floor.max(fill);
        }
    }

    fn total_rate(&self, b: &[f64], p: &[f64]) -> f64 {
        (0..self.k()).map(|i| rate(b[i], p[i], self.a[i])).sum()
    }

    /// Optimal powers for a fixed bandwidth split, or `None` when the QoS
    /// floors alone exceed the power budget.
    fn inner(&self, b: &[f64]) -> Option<Inner> {
        let k = self.k();
        let floors: f64 = (0..k).map(|i| floor_power(b[i], self.targets[i], self.a[i])).sum();
        if !(floors <= self.p_total) {
            return None;
        }
        let mut p = vec![0.0; k];
        let spent = |mu: f64, p: &mut [f64]| -> f64 {
            self.powers_at(b, mu, p);
            p.iter().sum()
        };
        let mut lo = 0.0;
        let mut hi = 1.0 / self.a.iter().copied().fold(f64::INFINITY, f64::min);
        while spent(hi, &mut p) < self.p_total {
            hi *= 2.0;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if spent(mid, &mut p) <= self.p_total {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mut mu = lo;
        self.powers_at(b, mu, &mut p);
        let mut value = self.total_rate(b, &p);
        let mut nu = Some(1.0 / (mu * LN_2));
        if value > self.c_f {
            let mut lo = 0.0;
            let mut hi = mu;
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                self.powers_at(b, mid, &mut p);
                if self.total_rate(b, &p) <= self.c_f {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            mu = lo;
            self.powers_at(b, mu, &mut p);
            value = self.total_rate(b, &p);
            nu = None;
        }
        Some(Inner { value, power: p, nu })
    }

    /// Gradient of `V` with respect to the bandwidths (envelope theorem).
    fn gradient(&self, b: &[f64], inner: &Inner) -> Vec<f64> {
        let nu = inner.nu.unwrap_or(0.0);
        (0..self.k())
            .map(|i| {
                let (bi, pi, ai) = (b[i], inner.power[i], self.a[i]);
                if bi <= 0.0 {
                    // One-sided derivative at zero bandwidth.
                    return if self.targets[i] > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
                }
                let snr = ai * pi / bi;
                let d_rate_d_b = snr.ln_1p() / LN_2 - snr / ((1.0 + snr) * LN_2);
                let d_rate_d_p = bi / ((bi / ai + pi) * LN_2);
                let floor = floor_power(bi, self.targets[i], ai);
                let on_floor = self.targets[i] > 0.0 && pi <= floor * (1.0 + 1e-12);
                let gamma = if on_floor { (nu - d_rate_d_p).max(0.0) } else { 0.0 };
                d_rate_d_b - gamma * floor_power_slope(bi, self.targets[i], ai)
            })
            .collect()
    }

    /// Bandwidth split minimizing the summed QoS powers.
    fn min_power_split(&self) -> Vec<f64> {
        let k = self.k();
        let needy: Vec<usize> = (0..k).filter(|&i| self.targets[i] > 0.0).collect();
        if needy.is_empty() {
            return vec![self.b_total / k as f64; k];
        }
        // For a common slope s < 0, each needy user takes the b with
        // p_min'(b) = s; the total grows as s -> 0.
        let b_for_slope = |i: usize, s: f64| -> f64 {
            let (t, a) = (self.targets[i], self.a[i]);
            let mut lo = 0.0;
            let mut hi = t;
            while floor_power_slope(hi, t, a) < s {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if floor_power_slope(mid, t, a) < s {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            hi
        };
        let total = |s: f64| -> f64 { needy.iter().map(|&i| b_for_slope(i, s)).sum() };
        let mut lo = -1.0;
        while total(lo) > self.b_total {
            lo *= 2.0;
        }
        let mut hi = lo / 2.0;
        while total(hi) < self.b_total && hi > -1e-300 {
            hi /= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) <= self.b_total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut b = vec![0.0; k];
        for &i in &needy {
            b[i] = b_for_slope(i, lo);
        }
        let used: f64 = b.iter().sum();
        let spare = (self.b_total - used).max(0.0);
        // Leftover (bisection residue, or everything if the slope search
        // saturated) is spread over the needy users.
        for &i in &needy {
            b[i] += spare / needy.len() as f64;
        }
        b
    }
}

/// Euclidean projection onto `{x >= 0, sum x = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - total) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Maximizes the sum rate over bandwidth and power with the slacks fixed.
///
/// Intended for `K <= 4`. The returned status is `Infeasible` (with zero
/// power) when no allocation meets the relaxed QoS targets.
pub fn concave_oracle(a: &[f64], params: &AllocParams, s_fixed: &[f64]) -> Result<SlotAllocation> {
    check_inputs(a, params)?;
    let k = a.len();
    if s_fixed.len() != k {
        return Err(Error::InvalidAllocInput(format!(
            "slack vector has {} entries for {k} users",
            s_fixed.len()
        )));
    }
    if k == 0 {
        return Ok(SlotAllocation::empty());
    }
    let problem = Problem {
        a,
        targets: s_fixed.iter().map(|s| (params.r_min - s).max(0.0)).collect(),
        b_total: params.b_total,
        p_total: params.p_total,
        c_f: params.c_fronthaul,
    };
    let slack = s_fixed.to_vec();
    let status = if slack.iter().any(|&s| s > 0.0) {
        AllocStatus::Relaxed
    } else {
        AllocStatus::Feasible
    };
    let infeasible = |b: Vec<f64>| {
        SlotAllocation::from_parts(b, vec![0.0; k], slack.clone(), a, AllocStatus::Infeasible)
    };

    if problem.targets.iter().sum::<f64>() > problem.c_f {
        return Ok(infeasible(vec![params.b_total / k as f64; k]));
    }
    let mut b = problem.min_power_split();
    let Some(mut cur) = problem.inner(&b) else {
        return Ok(infeasible(b));
    };

    // Work in units of the total bandwidth so the step size is scale-free.
    let scale = params.b_total;
    let mut step: f64 = 1.0;
    for _ in 0..MAX_OUTER {
        if cur.nu.is_none() {
            // Fronthaul cap reached: nothing can do better.
            break;
        }
        let grad = problem.gradient(&b, &cur);
        let x: Vec<f64> = b.iter().map(|v| v / scale).collect();
        // Stationarity measure: gradient mapping with unit step.
        let g_scaled: Vec<f64> = grad.iter().map(|g| g.clamp(-1e12, 1e12) / scale).collect();
        let probe = project_simplex(
            &x.iter().zip(&g_scaled).map(|(x, g)| x + g * scale).collect::<Vec<_>>(),
            1.0,
        );
        let gap: f64 = probe.iter().zip(&x).map(|(p, x)| (p - x).abs()).fold(0.0, f64::max);
        if gap <= STATIONARITY {
            break;
        }
        let mut accepted = false;
        step = (step * 2.0).min(1.0);
        while step > 1e-18 {
            let trial_x = project_simplex(
                &x.iter().zip(&g_scaled).map(|(x, g)| x + step * g * scale).collect::<Vec<_>>(),
                1.0,
            );
            let trial_b: Vec<f64> = trial_x.iter().map(|v| v * scale).collect();
            if let Some(next) = problem.inner(&trial_b) {
                let predicted: f64 = grad
                    .iter()
                    .zip(trial_b.iter().zip(&b))
                    .map(|(g, (nb, ob))| g.clamp(-1e12, 1e12) * (nb - ob))
                    .sum();
                if next.value >= cur.value + 1e-4 * predicted && next.value >= cur.value {
                    b = trial_b;
                    cur = next;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(SlotAllocation::from_parts(b, cur.power, slack, a, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_user_takes_everything() {
        let params = AllocParams::preset();
        let out = concave_oracle(&[3e9], &params, &[0.0]).unwrap();
        assert_relative_eq!(out.bandwidth[0], params.b_total, max_relative = 1e-12);
        assert_relative_eq!(out.power[0], params.p_total, max_relative = 1e-9);
    }

    #[test]
    fn symmetric_instance_symmetric_optimum() {
        let params = AllocParams::preset();
        let out = concave_oracle(&[2e9, 2e9, 2e9], &params, &[0.0; 3]).unwrap();
        for k in 1..3 {
            assert_relative_eq!(out.bandwidth[k], out.bandwidth[0], max_relative = 1e-9);
            assert_relative_eq!(out.power[k], out.power[0], max_relative = 1e-9);
        }
    }

    #[test]
    fn beats_a_bandwidth_grid() {
        // The inner problem is exact, so scanning the bandwidth split of a
        // two-user instance bounds the optimum from below.
        let params = AllocParams { c_fronthaul: 1e12, ..AllocParams::preset() };
        let a = [5e8, 3e9];
        let out = concave_oracle(&a, &params, &[0.0, 0.0]).unwrap();
        let problem = Problem {
            a: &a,
            targets: vec![params.r_min; 2],
            b_total: params.b_total,
            p_total: params.p_total,
            c_f: params.c_fronthaul,
        };
        let mut grid_best = 0.0_f64;
        for i in 1..10_000 {
            let b0 = params.b_total * i as f64 / 10_000.0;
            if let Some(v) = problem.inner(&[b0, params.b_total - b0]) {
                grid_best = grid_best.max(v.value);
            }
        }
        assert!(out.sum_rate() >= grid_best * (1.0 - 1e-12), "{} < {grid_best}", out.sum_rate());
        assert!(out.sum_rate() <= grid_best * (1.0 + 1e-6));
    }

    #[test]
    fn empty_qos_set_detected() {
        // R_min ln2 / a is about 0.69 W per user even with the whole band.
        let params = AllocParams { p_total: 1.0, ..AllocParams::preset() };
        let out = concave_oracle(&[1e6, 1e6], &params, &[0.0, 0.0]).unwrap();
        assert_eq!(out.status, AllocStatus::Infeasible);
        let ok = concave_oracle(&[1e6, 1e6], &AllocParams { p_total: 1.5, ..params }, &[0.0, 0.0]).unwrap();
        assert_eq!(ok.status, AllocStatus::Feasible);
    }

    #[test]
    fn fronthaul_cap_is_the_value() {
        let params = AllocParams { c_fronthaul: 50e6, ..AllocParams::preset() };
        let out = concave_oracle(&[1e10, 2e10], &params, &[0.0, 0.0]).unwrap();
        assert!(out.sum_rate() <= 50e6);
        assert_relative_eq!(out.sum_rate(), 50e6, max_relative = 1e-9);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5], 1.0);
        for v in &p {
            assert_relative_eq!(*v, 1.0 / 3.0, max_relative = 1e-15);
        }
        assert_eq!(project_simplex(&[2.0, -1.0], 1.0), vec![1.0, 0.0]);
    }
}
