//! Trajectory control as an MDP, solved with PPO.
//!
//! The state is the normalized UAV and user positions, the action a
//! horizontal displacement bounded by `v_max * delta`, and the reward a
//! proportional-fair log utility with QoS, fronthaul and movement penalties.
//! An infeasible slot ends the rollout with a large negative reward.

pub mod checkpoint;
pub mod env;
pub mod mlp;
pub mod policy;
pub mod ppo;

pub use env::{
    act_online, baseline_action, build_state, clip_action, compute_reward, denormalize_state, kmeans_init,
    rollout_episode, BaselineKind, RewardWeights, SlotOutcome, Trajectory, Transition, World,
};
pub use policy::{NetLayout, PolicyParameters};
pub use ppo::{gae, init_policy, loss_and_grad, ppo_update, prepare_samples, train, train_with, PpoConfig, Sample, TrainingReport};
