//! Air-to-ground link budget: 3-D distance, LoS/NLoS power-law path loss,
//! Rician (LoS) or Rayleigh (NLoS) small-scale fading, and the Shannon rate.

use std::f64::consts::{LN_2, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{classify_link, Point2, UrbanMap};

/// Which fading value the allocator plans with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    /// The current slot's sampled `|g|^2`.
    #[default]
    Instantaneous,
    /// The fading mean, `E[|g|^2] = 1`.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Linear power gain at the 1 m reference distance.
    pub beta0: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// Linear Rician K-factor.
    pub kappa: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    #[serde(default)]
    pub fading_mode: FadingMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            beta0: db_to_linear(-50.0),
            alpha_los: 2.2,
            alpha_nlos: 3.5,
            kappa: 10.0,
            noise_psd: dbm_to_watts(-170.0),
            fading_mode: FadingMode::Instantaneous,
        }
    }
}

impl ChannelConfig {
    /// Hard errors for unusable values; returns soft warnings for unusual ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::config("channel.beta0", "must be positive"));
        }
        if !(self.noise_psd > 0.0 && self.noise_psd.is_finite()) {
            return Err(Error::config("channel.noise_psd", "must be positive"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("channel.kappa", "must be >= 0"));
        }
        for (name, a) in [("channel.alpha_los", self.alpha_los), ("channel.alpha_nlos", self.alpha_nlos)] {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        let mut warnings = Vec::new();
        if !(self.alpha_nlos >= self.alpha_los && self.alpha_los >= 2.0) {
            warnings.push(format!(
                "unusual path-loss exponents: alpha_los={} alpha_nlos={}",
                self.alpha_los, self.alpha_nlos
            ));
        }
        Ok(warnings)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// 3-D distance between a UAV at altitude `altitude` above `q` and a ground user at `w`.
pub fn link_distance(q: Point2, w: Point2, altitude: f64) -> f64 {
    ((q - w).norm_squared() + altitude * altitude).sqrt()
}

/// `beta0 * d^-alpha` with the LoS or NLoS exponent.
pub fn large_scale_gain(distance: f64, is_los: bool, cfg: &ChannelConfig) -> f64 {
    let alpha = if is_los { cfg.alpha_los } else { cfg.alpha_nlos };
    cfg.beta0 * distance.powf(-alpha)
}

/// Draws `|g|^2` for one link: Rician with K-factor `kappa` under LoS,
/// Rayleigh otherwise. Both branches have unit mean.
pub fn sample_fading_power<R: Rng + ?Sized>(is_los: bool, cfg: &ChannelConfig, rng: &mut R) -> f64 {
    // Scattered part: CN(0, sigma2), i.e. each quadrature N(0, sigma2 / 2).
    let (mean_re, mean_im, sigma2) = if is_los {
        let k = cfg.kappa;
        let phase = rng.random::<f64>() * TAU;
        let amp = (k / (k + 1.0)).sqrt();
        (amp * phase.cos(), amp * phase.sin(), 1.0 / (k + 1.0))
    } else {
        (0.0, 0.0, 1.0)
    };
    let scale = (0.5 * sigma2).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let g_re = mean_re + scale * re;
    let g_im = mean_im + scale * im;
    g_re * g_re + g_im * g_im
}

/// `b log2(1 + a p / b)`, with the continuity limit 0 at `b = 0`.
pub fn achievable_rate(bandwidth: f64, power: f64, snr_coeff: f64) -> f64 {
    if bandwidth <= 0.0 {
        return 0.0;
    }
    bandwidth * (snr_coeff * power / bandwidth).ln_1p() / LN_2
}

/// Per-user, per-slot link quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    pub distance: f64,
    pub is_los: bool,
    pub large_scale: f64,
    pub fading_power: f64,
    /// `a = beta |g|^2 / N0`, Hz/W. Uses the fading mean under [`FadingMode::Mean`].
    pub snr_coeff: f64,
}

/// Classifies the link, samples fading and assembles the budget.
pub fn link_budget<R: Rng + ?Sized>(
    uav: Point2,
    altitude: f64,
    user: Point2,
    map: &UrbanMap,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> LinkBudget {
    let is_los = classify_link(uav, altitude, user, map).is_los;
    let distance = link_distance(uav, user, altitude);
    let large_scale = large_scale_gain(distance, is_los, cfg);
    let fading_power = sample_fading_power(is_los, cfg, rng);
    let planning_gain = match cfg.fading_mode {
        FadingMode::Instantaneous => fading_power,
        FadingMode::Mean => 1.0,
    };
    // Clamp away exact zeros so the allocator always sees a positive channel.
    let snr_coeff = (large_scale * planning_gain / cfg.noise_psd).max(f64::MIN_POSITIVE);
    LinkBudget {
        distance,
        is_los,
        large_scale,
        fading_power,
        snr_coeff,
    }
}
