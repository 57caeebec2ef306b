//! Proximal policy optimization: GAE advantages, the clipped surrogate with
//! value and entropy terms, minibatch Adam updates and the training loop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::env::{rollout_episode, Trajectory, World};
use super::mlp::MlpCache;
use super::policy::{gaussian_entropy, gaussian_log_prob, NetLayout, PolicyParameters};
use crate::error::{Error, Result};
use crate::harness::scenario::ScenarioConfig;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
    pub clip: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub max_grad_norm: f64,
    pub episodes_per_update: usize,
    /// Training iterations `M`.
    pub iterations: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda_gae: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            epochs: 10,
            minibatch_size: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            episodes_per_update: 4,
            iterations: 300,
            hidden: vec![128, 128],
            init_log_std: -1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ppo.gamma", self.gamma), ("ppo.lambda_gae", self.lambda_gae)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(name, format!("must be in (0, 1], got {v}")));
            }
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("ppo.clip", format!("must be in (0, 1), got {}", self.clip)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("ppo.learning_rate", "must be positive"));
        }
        for (name, v) in [
            ("ppo.entropy_coef", self.entropy_coef),
            ("ppo.value_coef", self.value_coef),
            ("ppo.max_grad_norm", self.max_grad_norm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("ppo.epochs", self.epochs),
            ("ppo.minibatch_size", self.minibatch_size),
            ("ppo.episodes_per_update", self.episodes_per_update),
            ("ppo.iterations", self.iterations),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("ppo.hidden", "needs at least one nonzero layer width"));
        }
        Ok(())
    }
}

/// A transition ready for the PPO loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub raw_action: [f64; 2],
    pub old_log_prob: f64,
    /// Normalized advantage.
    pub advantage: f64,
    /// Return target in the critic's normalized units.
    pub value_target: f64,
}

/// GAE over one trajectory. `values[t]` estimates `state[t]`; the final
/// bootstrap uses `last_value` unless the episode ended in a terminal slot.
/// Returns `(advantages, returns)`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let nonterminal = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * nonterminal - values[t];
        running = delta + gamma * lambda * nonterminal * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Turns trajectories into samples: critic values, GAE, return-statistics
/// update and advantage normalization.
pub fn prepare_samples(policy: &mut PolicyParameters, trajectories: &[Trajectory], cfg: &PpoConfig) -> Vec<Sample> {
    let mut raw = Vec::new();
    let mut all_returns = Vec::new();
    for traj in trajectories {
        let tr = &traj.transitions;
        if tr.is_empty() {
            continue;
        }
        let values: Vec<f64> = tr.iter().map(|t| policy.value(&t.state)).collect();
        let last = tr.last().expect("nonempty");
        let last_value = if last.done { 0.0 } else { policy.value(&last.next_state) };
        let rewards: Vec<f64> = tr.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = tr.iter().map(|t| t.done).collect();
        let (adv, ret) = gae(&rewards, &values, &dones, last_value, cfg.gamma, cfg.lambda_gae);
        for (t, (a, g)) in tr.iter().zip(adv.into_iter().zip(ret.iter().copied())) {
            raw.push((t, a, g));
        }
        all_returns.extend(ret);
    }
    policy.returns.update(&all_returns);
    let n = raw.len().max(1) as f64;
    let mean = raw.iter().map(|r| r.1).sum::<f64>() / n;
    let var = raw.iter().map(|r| (r.1 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    raw.into_iter()
        .map(|(t, a, g)| Sample {
            state: t.state.clone(),
            raw_action: t.raw_action,
            old_log_prob: t.log_prob,
            advantage: (a - mean) / std,
            value_target: policy.returns.normalize(g),
        })
        .collect()
}

/// Minibatch loss and its gradient with respect to `theta`.
///
/// `L = mean(-min(r A, clip(r) A) + c_v (v - target)^2) - c_e H`.
pub fn loss_and_grad(layout: &NetLayout, theta: &[f64], batch: &[Sample], cfg: &PpoConfig) -> (f64, Vec<f64>) {
    let actor = layout.actor();
    let critic = layout.critic();
    let a_len = layout.actor_len();
    let (actor_p, rest) = theta.split_at(a_len);
    let (log_std, critic_p) = rest.split_at(2);
    let mut grad = vec![0.0; theta.len()];
    let (g_actor, g_rest) = grad.split_at_mut(a_len);
    let (g_log_std, g_critic) = g_rest.split_at_mut(2);

    let n = batch.len().max(1) as f64;
    let mut loss = 0.0;
    let mut cache = MlpCache::default();
    for s in batch {
        actor.forward(actor_p, &s.state, &mut cache);
        let mean = [cache.output()[0], cache.output()[1]];
        let log_prob = gaussian_log_prob(&s.raw_action, &mean, log_std);
        let ratio = (log_prob - s.old_log_prob).exp();
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a;
        loss -= unclipped.min(clipped) / n;
        // d(-min)/d log_prob; zero when the clipped branch is active and flat.
        let active = unclipped <= clipped || (ratio >= 1.0 - cfg.clip && ratio <= 1.0 + cfg.clip);
        let d_logp = if active { -a * ratio / n } else { 0.0 };
        if d_logp != 0.0 {
            let mut g_mean = [0.0; 2];
            for i in 0..2 {
                let inv_var = (-2.0 * log_std[i]).exp();
                let diff = s.raw_action[i] - mean[i];
                g_mean[i] = d_logp * diff * inv_var;
                g_log_std[i] += d_logp * (diff * diff * inv_var - 1.0);
            }
            actor.backward(actor_p, &cache, &g_mean, g_actor);
        }

        critic.forward(critic_p, &s.state, &mut cache);
        let err = cache.output()[0] - s.value_target;
        loss += cfg.value_coef * err * err / n;
        critic.backward(critic_p, &cache, &[2.0 * cfg.value_coef * err / n], g_critic);
    }
    loss -= cfg.entropy_coef * gaussian_entropy(log_std);
    for g in g_log_std.iter_mut() {
        *g -= cfg.entropy_coef;
    }
    (loss, grad)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub mean_loss: f64,
    pub minibatches: usize,
}

/// `epochs` passes of shuffled minibatch Adam steps. On a non-finite loss
/// the parameters are restored and `Error::Training` is returned.
pub fn ppo_update(
    policy: &mut PolicyParameters,
    samples: &[Sample],
    cfg: &PpoConfig,
    lr: f64,
    shuffle_seed: u64,
) -> Result<UpdateStats> {
    if samples.is_empty() {
        return Err(Error::Training("empty buffer".into()));
    }
    let backup = (policy.theta.clone(), policy.adam.clone());
    let mut rng = stream_rng(shuffle_seed, Stream::Shuffle, policy.updates);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut stats = UpdateStats::default();
    let mut batch = Vec::with_capacity(cfg.minibatch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i].clone()));
            let (loss, mut grad) = loss_and_grad(&policy.layout, &policy.theta, &batch, cfg);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                (policy.theta, policy.adam) = backup;
                return Err(Error::Training(format!("non-finite loss {loss}")));
            }
            if cfg.max_grad_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cfg.max_grad_norm {
                    let s = cfg.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            policy.adam.apply(&mut policy.theta, &grad, lr);
            stats.mean_loss += loss;
            stats.minibatches += 1;
        }
    }
    stats.mean_loss /= stats.minibatches as f64;
    policy.updates += 1;
    Ok(stats)
}

/// Per-iteration training record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    /// Mean total episode reward per iteration.
    pub curve: Vec<f64>,
    /// Mean episode length per iteration.
    pub lengths: Vec<f64>,
    /// Aborted updates and learning-rate changes.
    pub events: Vec<String>,
}

/// Fresh policy for a scenario.
pub fn init_policy(scenario: &ScenarioConfig, seed: u64) -> PolicyParameters {
    let cfg = &scenario.ppo;
    let layout = NetLayout::new(2 + 2 * scenario.num_users(), cfg.hidden.clone());
    let mut rng = stream_rng(seed, Stream::Init, 0);
    PolicyParameters::new(
        layout,
        scenario.uav.v_max * scenario.time.slot_duration,
        cfg.init_log_std,
        &mut rng,
    )
}

fn collect(
    scenario: &ScenarioConfig,
    policy: &PolicyParameters,
    seed: u64,
    episodes: std::ops::Range<u64>,
) -> Result<Vec<Trajectory>> {
    let run = |e: u64| -> Result<Trajectory> {
        let mut world = World::new(scenario, seed, e)?;
        let mut rng = stream_rng(seed, Stream::Policy, e);
        rollout_episode(policy, &mut world, scenario.time.horizon, &mut rng)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        episodes.collect::<Vec<_>>().into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        episodes.map(run).collect()
    }
}

/// Runs `scenario.ppo.iterations` PPO iterations from a fresh policy.
pub fn train(scenario: &ScenarioConfig, seed: u64) -> Result<(PolicyParameters, TrainingReport)> {
    train_with(scenario, seed, |_, _| {})
}

/// As [`train`], calling `progress(iteration, mean_reward)` after each one.
pub fn train_with(
    scenario: &ScenarioConfig,
    seed: u64,
    mut progress: impl FnMut(usize, f64),
) -> Result<(PolicyParameters, TrainingReport)> {
    let cfg = &scenario.ppo;
    cfg.validate()?;
    let mut policy = init_policy(scenario, seed);
    let mut report = TrainingReport::default();
    let mut lr = cfg.learning_rate;
    let mut failures = 0;
    let per = cfg.episodes_per_update as u64;
    for m in 0..cfg.iterations {
        let first = m as u64 * per;
        let trajectories = collect(scenario, &policy, seed, first..first + per)?;
        let mean_reward = trajectories.iter().map(Trajectory::total_reward).sum::<f64>() / per as f64;
        let mean_len = trajectories.iter().map(|t| t.transitions.len() as f64).sum::<f64>() / per as f64;
        report.curve.push(mean_reward);
        report.lengths.push(mean_len);
        let samples = prepare_samples(&mut policy, &trajectories, cfg);
        match ppo_update(&mut policy, &samples, cfg, lr, seed) {
            Ok(_) => failures = 0,
            Err(e) => {
                failures += 1;
                lr *= 0.5;
                report.events.push(format!("iteration {m}: {e}; learning rate now {lr}"));
                if failures >= 3 {
                    return Err(Error::Training(format!("three consecutive aborted updates at iteration {m}")));
                }
            }
        }
        progress(m, mean_reward);
    }
    Ok((policy, report))
}
