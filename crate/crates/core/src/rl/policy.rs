//! Gaussian actor and scalar critic sharing one flat parameter vector, plus
//! the Adam state that travels with them.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::{Mlp, MlpCache};
use crate::geometry::Point2;

/// Shapes of the actor and critic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetLayout {
    pub state_dim: usize,
    pub hidden: Vec<usize>,
}

impl NetLayout {
    pub fn new(state_dim: usize, hidden: Vec<usize>) -> Self {
        Self { state_dim, hidden }
    }

    pub fn actor(&self) -> Mlp {
        Mlp::new(self.sizes(2))
    }

    pub fn critic(&self) -> Mlp {
        Mlp::new(self.sizes(1))
    }

    fn sizes(&self, out: usize) -> Vec<usize> {
        let mut s = vec![self.state_dim];
        s.extend(&self.hidden);
        s.push(out);
        s
    }

    pub fn actor_len(&self) -> usize {
        self.actor().num_params()
    }

    /// Actor weights, two log-stddevs, critic weights.
    pub fn total_len(&self) -> usize {
        self.actor_len() + 2 + self.critic().num_params()
    }
}

/// Running mean and variance (Welford) of observed returns; the critic
/// predicts returns in these normalized units.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnStats {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Default for ReturnStats {
    fn default() -> Self {
        Self { count: 0.0, mean: 0.0, m2: 0.0 }
    }
}

impl ReturnStats {
    pub fn update(&mut self, xs: &[f64]) {
        for &x in xs {
            self.count += 1.0;
            let d = x - self.mean;
            self.mean += d / self.count;
            self.m2 += d * (x - self.mean);
        }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt().max(1e-6)
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std()
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        self.mean + z * self.std()
    }
}

/// Adam moments for the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let c1 = 1.0 - B1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - B2.powi(self.step.min(i32::MAX as u64) as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + EPS);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParameters {
    pub layout: NetLayout,
    /// Actions are `action_scale * u` for the network-space sample `u`.
    pub action_scale: f64,
    pub theta: Vec<f64>,
    pub adam: AdamState,
    pub returns: ReturnStats,
    /// Completed PPO updates.
    pub updates: u64,
}

/// Log-density of `u` under a diagonal Gaussian.
pub fn gaussian_log_prob(u: &[f64; 2], mean: &[f64], log_std: &[f64]) -> f64 {
    (0..2)
        .map(|i| {
            let z = (u[i] - mean[i]) * (-log_std[i]).exp();
            -0.5 * z * z - log_std[i] - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum()
}

/// Sampled action with what PPO needs to score it later.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionSample {
    /// Network-space sample before clipping.
    pub raw: [f64; 2],
    pub log_prob: f64,
}

impl PolicyParameters {
    pub fn new<R: Rng + ?Sized>(layout: NetLayout, action_scale: f64, init_log_std: f64, rng: &mut R) -> Self {
        let mut theta = layout.actor().init(0.01, rng);
        theta.extend([init_log_std; 2]);
        theta.extend(layout.critic().init(1.0, rng));
        let n = theta.len();
        Self {
            layout,
            action_scale,
            theta,
            adam: AdamState::new(n),
            returns: ReturnStats::default(),
            updates: 0,
        }
    }

    pub fn actor_params(&self) -> &[f64] {
        &self.theta[..self.layout.actor_len()]
    }

    pub fn log_std(&self) -> &[f64] {
        let a = self.layout.actor_len();
        &self.theta[a..a + 2]
    }

    pub fn critic_params(&self) -> &[f64] {
        &self.theta[self.layout.actor_len() + 2..]
    }

    /// Actor mean in network space.
    pub fn mean(&self, state: &[f64]) -> [f64; 2] {
        let mut cache = MlpCache::default();
        self.layout.actor().forward(self.actor_params(), state, &mut cache);
        let o = cache.output();
        [o[0], o[1]]
    }

    /// Critic estimate in return units.
    pub fn value(&self, state: &[f64]) -> f64 {
        let mut cache = MlpCache::default();
        self.layout.critic().forward(self.critic_params(), state, &mut cache);
        self.returns.denormalize(cache.output()[0])
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> ActionSample {
        let mean = self.mean(state);
        let log_std = self.log_std();
        let mut raw = [0.0; 2];
        for i in 0..2 {
            let z: f64 = StandardNormal.sample(rng);
            raw[i] = mean[i] + log_std[i].exp() * z;
        }
        ActionSample { raw, log_prob: gaussian_log_prob(&raw, &mean, log_std) }
    }

    /// Displacement in metres for a network-space action (before clipping).
    pub fn to_displacement(&self, raw: [f64; 2]) -> Point2 {
        Point2::new(raw[0] * self.action_scale, raw[1] * self.action_scale)
    }
}
