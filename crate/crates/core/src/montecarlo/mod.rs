//! Simulation oracles: topology Monte Carlo, discrete-event queues and
//! figure-style sweeps built on the optimizer.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::{Error, Result};

pub mod des;
pub mod mc;
pub mod sweep;

pub use des::{des_queue, ClassSpec, DesReport, ServiceLaw};
pub use mc::{mc_coverage, mc_coverage_multi, mc_rate, mc_rate_multi, CoveragePoint, McCoverage};
pub use sweep::{sweep_outage, DesCheck, SweepAxis, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Topology draws, or independent replications for the DES.
    pub trials: usize,
    pub seed: u64,
    pub warmup_packets: u64,
    pub horizon_packets: u64,
    pub confidence: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 1,
            warmup_packets: 10_000,
            horizon_packets: 200_000,
            confidence: 0.95,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::NoSamples);
        }
        if self.horizon_packets == 0 {
            return Err(Error::InvalidArgument("horizon_packets must be > 0".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }

    /// Two-sided normal quantile for the configured confidence.
    pub fn z(&self) -> f64 {
        Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(0.5 + self.confidence / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub trials_used: u64,
}

impl McEstimate {
    pub fn proportion(hits: u64, n: u64, z: f64) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            half_width: z * (p * (1.0 - p) / n as f64).sqrt(),
            trials_used: n,
        }
    }

    /// From a sum and sum of squares with the normal approximation.
    pub fn from_moments(sum: f64, sum_sq: f64, n: u64, z: f64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            half_width: z * (var / nf).sqrt(),
            trials_used: n,
        }
    }

    /// From a few independent sample means, with a Student t quantile.
    pub fn from_means(means: &[f64], confidence: f64, trials_used: u64) -> Self {
        let k = means.len() as f64;
        let mean = means.iter().sum::<f64>() / k;
        let half_width = if means.len() > 1 {
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let t = StudentsT::new(0.0, 1.0, k - 1.0)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.5 + confidence / 2.0);
            t * (var / k).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            half_width,
            trials_used,
        }
    }

    pub fn contains_within(&self, value: f64, widths: f64) -> bool {
        (self.mean - value).abs() <= widths * self.half_width
    }
}
