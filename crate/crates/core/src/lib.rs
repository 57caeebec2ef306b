//! Online trajectory planning for a UAV base station serving mobile ground
//! users over a capacity-limited fronthaul.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: urban map of box buildings and LoS classification.
//! - [`mobility`]: group (reference point) and individual random-walk users.
//! - [`channel`]: path loss, fading and achievable rate.
//! - [`allocation`]: per-slot bandwidth/power allocation with QoS slack.
//! - [`rl`]: PPO actor-critic that steers the UAV.
//! - [`harness`]: scenarios, episode runner, metrics, sweeps and export.

pub mod allocation;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mobility;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
