//! Scenario files: a versioned TOML schema covering the map, users,
//! mobility, channel, allocation, UAV, timing, reward and PPO settings.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{AllocParams, DualAscentConfig};
use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::geometry::{Building, UrbanMap};
use crate::mobility::MobilityConfig;
use crate::rl::{PpoConfig, RewardWeights};
use crate::rng::{stream_rng, Stream};

pub const SCHEMA_VERSION: u32 = 1;

/// Built-in presets: name and TOML source.
pub const PRESETS: &[(&str, &str)] = &[
    ("paper-s4", include_str!("../../presets/paper-s4.toml")),
    ("paper-s4-k20", include_str!("../../presets/paper-s4-k20.toml")),
];

/// Seed of the map shipped with the presets.
pub const DEFAULT_MAP_SEED: u64 = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocatorKind {
    #[default]
    Heuristic,
    DualAscent,
}

impl AllocatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorKind::Heuristic => "heuristic",
            AllocatorKind::DualAscent => "dual-ascent",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersConfig {
    /// Initial members per group; one reference point per entry.
    pub group_sizes: Vec<usize>,
    pub individuals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    /// Flight altitude `H`, m.
    pub altitude: f64,
    /// Horizontal speed cap, m/s.
    pub v_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Slot duration `delta`, s.
    pub slot_duration: f64,
    /// Slots per episode `N`.
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    /// Master seed.
    pub seed: u64,
    pub map: UrbanMap,
    pub users: UsersConfig,
    pub mobility: MobilityConfig,
    pub channel: ChannelConfig,
    pub allocation: AllocParams,
    #[serde(default)]
    pub allocator: AllocatorKind,
    /// Settings of the dual-ascent allocator.
    #[serde(default)]
    pub dual_ascent: DualAscentConfig,
    pub uav: UavConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub reward: RewardWeights,
    #[serde(default)]
    pub ppo: PpoConfig,
}

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.users.group_sizes.iter().sum::<usize>() + self.users.individuals
    }

    pub fn urban_map(&self) -> Result<UrbanMap> {
        self.map.validate()?;
        Ok(self.map.clone())
    }

    /// Mobility settings with the scenario's slot duration.
    pub fn mobility_config(&self) -> MobilityConfig {
        MobilityConfig {
            slot_duration: self.time.slot_duration,
            ..self.mobility.clone()
        }
    }

    /// Hard validation; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        self.map.validate().map_err(|e| Error::config("map", e.to_string()))?;
        if self.num_users() == 0 {
            return Err(Error::config("users", "need at least one user"));
        }
        if self.users.group_sizes.contains(&0) {
            return Err(Error::config("users.group_sizes", "groups must start with at least one member"));
        }
        if !(self.uav.altitude > 0.0 && self.uav.altitude.is_finite()) {
            return Err(Error::config("uav.altitude", format!("must be positive, got {}", self.uav.altitude)));
        }
        if !(self.uav.v_max >= 0.0 && self.uav.v_max.is_finite()) {
            return Err(Error::config("uav.v_max", format!("must be >= 0, got {}", self.uav.v_max)));
        }
        if !(self.time.slot_duration > 0.0 && self.time.slot_duration.is_finite()) {
            return Err(Error::config("time.slot_duration", "must be positive"));
        }
        if self.time.horizon == 0 {
            return Err(Error::config("time.horizon", "must be at least 1"));
        }
        self.mobility_config().validate()?;
        let warnings = self.channel.validate()?;
        self.allocation.validate()?;
        self.dual_ascent.validate()?;
        self.reward.validate()?;
        self.ppo.validate()?;
        Ok(warnings)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }

    /// Parses and validates a scenario, discarding warnings.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let src = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                Error::config("preset", format!("unknown preset `{name}` (available: {})", names.join(", ")))
            })?;
        Self::from_toml_str(src)
    }

    /// Same scenario with `k` users: up to the preset's groups of 4, then
    /// individuals.
    pub fn with_users(&self, k: usize) -> Self {
        let mut group_sizes = Vec::new();
        let mut left = k;
        for &g in &self.users.group_sizes {
            if left < g {
                break;
            }
            group_sizes.push(g);
            left -= g;
        }
        Self {
            users: UsersConfig { group_sizes, individuals: left },
            ..self.clone()
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let src = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&src)
}

/// 12 buildings on a jittered 4 x 3 grid, footprints 20-45 m per side,
/// heights uniform in [20, 60] m, coordinates rounded to 0.1 m. Each
/// footprint stays inside its own grid cell, so none overlap.
pub fn generate_map(seed: u64, x_max: f64, y_max: f64) -> Result<UrbanMap> {
    const COLS: usize = 4;
    const ROWS: usize = 3;
    let mut rng = stream_rng(seed, Stream::Map, 0);
    let round = |v: f64| (v * 10.0).round() / 10.0;
    let (cw, ch) = (x_max / COLS as f64, y_max / ROWS as f64);
    let mut buildings = Vec::with_capacity(COLS * ROWS);
    for r in 0..ROWS {
        for c in 0..COLS {
            let w = rng.random_range(20.0..45.0f64).min(cw - 4.0);
            let d = rng.random_range(20.0..45.0f64).min(ch - 4.0);
            let x_lo = round(c as f64 * cw + 2.0 + rng.random::<f64>() * (cw - w - 4.0));
            let y_lo = round(r as f64 * ch + 2.0 + rng.random::<f64>() * (ch - d - 4.0));
            let height = round(rng.random_range(20.0..=60.0f64));
            buildings.push(Building::new(x_lo, round(x_lo + w), y_lo, round(y_lo + d), height)?);
        }
    }
    UrbanMap::new(x_max, y_max, buildings)
}
