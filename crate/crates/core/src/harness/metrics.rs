//! Episode summaries computed purely from a trace.

use super::runner::EpisodeTrace;
use crate::allocation::AllocParams;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSummary {
    /// Mean per-slot sum rate, bit/s.
    pub mean_sum_rate: f64,
    /// Jain index of the time-averaged per-user rates.
    pub jain_index: f64,
    /// Slots in which some user fell below `R_min`.
    pub qos_violation_fraction: f64,
    /// LoS user-slots over all user-slots.
    pub los_fraction: f64,
    /// Slots whose sum rate reached the fronthaul cap.
    pub fronthaul_binding_fraction: f64,
    /// Slots whose allocation was infeasible.
    pub infeasible_slots: usize,
    pub episode_length: usize,
    pub total_reward: f64,
}

/// `(sum x)^2 / (K sum x^2)`; 1 for an all-zero vector.
pub fn jain_index(xs: &[f64]) -> f64 {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        1.0
    } else {
        (sum * sum / (xs.len() as f64 * sq)).min(1.0)
    }
}

pub fn summarize(trace: &EpisodeTrace, params: &AllocParams) -> MetricsSummary {
    let n = trace.rows.len();
    let k = trace.num_users;
    if n == 0 {
        return MetricsSummary {
            mean_sum_rate: 0.0,
            jain_index: 1.0,
            qos_violation_fraction: 0.0,
            los_fraction: 0.0,
            fronthaul_binding_fraction: 0.0,
            infeasible_slots: 0,
            episode_length: 0,
            total_reward: 0.0,
        };
    }
    let nf = n as f64;
    let mut per_user = vec![0.0; k];
    let mut sum_rate = 0.0;
    let mut violations = 0usize;
    let mut los = 0usize;
    let mut binding = 0usize;
    let mut infeasible = 0usize;
    let mut reward = 0.0;
    for row in &trace.rows {
        sum_rate += row.sum_rate;
        reward += row.reward;
        if row.users.iter().any(|u| u.rate < params.r_min * (1.0 - 1e-6)) {
            violations += 1;
        }
        if row.sum_rate >= params.c_fronthaul * (1.0 - 1e-6) {
            binding += 1;
        }
        if row.status == crate::allocation::AllocStatus::Infeasible {
            infeasible += 1;
        }
        for (acc, u) in per_user.iter_mut().zip(&row.users) {
            *acc += u.rate;
            los += usize::from(u.los);
        }
    }
    for r in per_user.iter_mut() {
        *r /= nf;
    }
    MetricsSummary {
        mean_sum_rate: sum_rate / nf,
        jain_index: jain_index(&per_user),
        qos_violation_fraction: violations as f64 / nf,
        los_fraction: if k == 0 { 0.0 } else { los as f64 / (nf * k as f64) },
        fronthaul_binding_fraction: binding as f64 / nf,
        infeasible_slots: infeasible,
        episode_length: n,
        total_reward: reward,
    }
}
