//! The physical scenario shared by every module.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::db_to_linear;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceKind {
    Embb,
    Urllc,
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceKind::Embb => "embb",
            ServiceKind::Urllc => "urllc",
        })
    }
}

/// Functional split mode: centralized (low-layer split, CoMP capable) or
/// distributed (high-layer split, single DU).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cm,
    Dm,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Cm, Mode::Dm];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cm => "cm",
            Mode::Dm => "dm",
        })
    }
}

/// Densities are per km², distances in meters, powers in dBm.
///
/// `fading_mean` is the parameter of the exponential power fading |h|²; the
/// coverage formulas use `Pr(h >= x) = exp(-fading_mean * x)`, so the default
/// of 1 is unit-mean Rayleigh fading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub du_density_per_km2: f64,
    pub user_density_per_km2: BTreeMap<ServiceKind, f64>,
    pub pathloss_exponent: f64,
    pub fading_mean: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub window_side_m: f64,
    pub max_comp_dus: usize,
    pub rng_seed: u64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        Self {
            du_density_per_km2: 20.0,
            user_density_per_km2: BTreeMap::from([
                (ServiceKind::Embb, 3000.0),
                (ServiceKind::Urllc, 5000.0),
            ]),
            pathloss_exponent: 4.0,
            fading_mean: 1.0,
            tx_power_dbm: 30.0,
            noise_dbm: -90.0,
            window_side_m: 1000.0,
            max_comp_dus: 2,
            rng_seed: 1,
        }
    }
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if !(self.pathloss_exponent > 2.0) || !self.pathloss_exponent.is_finite() {
            return bad(format!(
                "pathloss_exponent must be > 2, got {}",
                self.pathloss_exponent
            ));
        }
        if !(self.du_density_per_km2 > 0.0) || !self.du_density_per_km2.is_finite() {
            return bad(format!(
                "du_density_per_km2 must be > 0, got {}",
                self.du_density_per_km2
            ));
        }
        for (kind, d) in &self.user_density_per_km2 {
            if !(*d >= 0.0) || !d.is_finite() {
                return bad(format!("user density for {kind} must be >= 0, got {d}"));
            }
        }
        if !(self.fading_mean > 0.0) {
            return bad(format!("fading_mean must be > 0, got {}", self.fading_mean));
        }
        if !(self.window_side_m > 0.0) || !self.window_side_m.is_finite() {
            return bad(format!(
                "window_side_m must be > 0, got {}",
                self.window_side_m
            ));
        }
        if self.max_comp_dus < 1 {
            return bad("max_comp_dus must be >= 1".into());
        }
        if self.tx_power_dbm.is_nan() || self.noise_dbm.is_nan() {
            return bad("powers must not be NaN".into());
        }
        Ok(())
    }

    pub fn du_density_per_m2(&self) -> f64 {
        self.du_density_per_km2 * 1e-6
    }

    pub fn area_km2(&self) -> f64 {
        (self.window_side_m * 1e-3).powi(2)
    }

    /// Noise power normalized by transmit power (pathloss `r^-alpha`, r in meters).
    pub fn normalized_noise(&self) -> f64 {
        db_to_linear(self.noise_dbm - self.tx_power_dbm)
    }

    pub fn user_density(&self, kind: ServiceKind) -> f64 {
        self.user_density_per_km2.get(&kind).copied().unwrap_or(0.0)
    }
}
