//! Coverage and rate of the typical user by direct simulation.
//!
//! Each draw places a PPP of DUs on the torus window around the typical user,
//! gives every DU an exponential fading power, clusters the nearest DUs by PLD
//! and counts every other DU as interference. One draw serves every threshold
//! and every `gamma` passed in.

use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{McConfig, McEstimate};
use crate::geometry::{comp_cluster, draw_du_distances_sq};
use crate::model::{Mode, NetworkModel};
use crate::rng::{chunks, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub sinr_threshold_linear: f64,
    pub total: McEstimate,
    /// Joint `Pr(CM, SINR >= T)`.
    pub cm: McEstimate,
    /// Joint `Pr(DM, SINR >= T)`.
    pub dm: McEstimate,
    pub cm_covered: u64,
    pub dm_covered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCoverage {
    pub gamma_linear: f64,
    pub p_cm: McEstimate,
    pub cm_users: u64,
    pub dm_users: u64,
    pub points: Vec<CoveragePoint>,
}

#[derive(Debug, Clone)]
struct Tally {
    cm_users: u64,
    cm_covered: Vec<u64>,
    dm_covered: Vec<u64>,
    log_sum: f64,
    log_sq: f64,
}

impl Tally {
    fn new(n_t: usize) -> Self {
        Self {
            cm_users: 0,
            cm_covered: vec![0; n_t],
            dm_covered: vec![0; n_t],
            log_sum: 0.0,
            log_sq: 0.0,
        }
    }

    fn absorb(&mut self, other: &Tally) {
        self.cm_users += other.cm_users;
        for (a, b) in self.cm_covered.iter_mut().zip(&other.cm_covered) {
            *a += b;
        }
        for (a, b) in self.dm_covered.iter_mut().zip(&other.dm_covered) {
            *a += b;
        }
        self.log_sum += other.log_sum;
        self.log_sq += other.log_sq;
    }
}

fn check(model: &NetworkModel, gammas: &[f64], cfg: &McConfig) -> Result<()> {
    model.validate()?;
    cfg.validate()?;
    for &g in gammas {
        if !(g >= 1.0) {
            return Err(Error::InvalidThreshold(g));
        }
    }
    Ok(())
}

/// One pass over `cfg.trials` draws, tallied per `gamma`.
fn simulate(
    model: &NetworkModel,
    gammas: &[f64],
    t_grid: &[f64],
    cfg: &McConfig,
) -> Result<Vec<Tally>> {
    check(model, gammas, cfg)?;
    let alpha = model.pathloss_exponent;
    let half = alpha / 2.0;
    let noise = model.normalized_noise();
    let c_max = model.max_comp_dus;
    let fading =
        Exp::new(model.fading_mean).map_err(|e| Error::InvalidModel(format!("fading: {e}")))?;
    let per_chunk: Vec<Vec<Tally>> = chunks(cfg.trials)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = stream_rng(cfg.seed, stream);
            let mut tallies = vec![Tally::new(t_grid.len()); gammas.len()];
            let mut d2 = Vec::new();
            let mut order: Vec<usize> = Vec::new();
            let mut nearest = Vec::with_capacity(c_max);
            for _ in 0..len {
                draw_du_distances_sq(&mut rng, model, &mut d2);
                let power: Vec<f64> = d2
                    .iter()
                    .map(|&r2| fading.sample(&mut rng) * r2.powf(-half))
                    .collect();
                let total: f64 = power.iter().sum();
                order.clear();
                order.extend(0..d2.len());
                let k = c_max.min(d2.len());
                if k < d2.len() {
                    order.select_nth_unstable_by(k, |&a, &b| d2[a].total_cmp(&d2[b]));
                }
                order[..k].sort_by(|&a, &b| d2[a].total_cmp(&d2[b]));
                nearest.clear();
                nearest.extend(order[..k].iter().map(|&i| d2[i].sqrt()));
                for (g, tally) in gammas.iter().zip(tallies.iter_mut()) {
                    let set = comp_cluster(&nearest, *g, alpha, c_max).expect("sorted, non-empty");
                    let signal: f64 = set.du_indices.iter().map(|&j| power[order[j]]).sum();
                    let sinr = signal / ((total - signal).max(0.0) + noise);
                    let ln = sinr.ln_1p();
                    tally.log_sum += ln;
                    tally.log_sq += ln * ln;
                    let covered = match set.mode {
                        Mode::Cm => {
                            tally.cm_users += 1;
                            &mut tally.cm_covered
                        }
                        Mode::Dm => &mut tally.dm_covered,
                    };
                    for (c, &t) in covered.iter_mut().zip(t_grid) {
                        if sinr >= t {
                            *c += 1;
                        }
                    }
                }
            }
            tallies
        })
        .collect();
    let mut out = vec![Tally::new(t_grid.len()); gammas.len()];
    for chunk in &per_chunk {
        for (acc, t) in out.iter_mut().zip(chunk) {
            acc.absorb(t);
        }
    }
    Ok(out)
}

/// Coverage at every threshold of `t_grid` for several `gamma`, reusing draws.
pub fn mc_coverage_multi(
    model: &NetworkModel,
    gammas: &[f64],
    t_grid: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McCoverage>> {
    let n = cfg.trials as u64;
    let z = cfg.z();
    let tallies = simulate(model, gammas, t_grid, cfg)?;
    Ok(gammas
        .iter()
        .zip(tallies)
        .map(|(&g, t)| McCoverage {
            gamma_linear: g,
            p_cm: McEstimate::proportion(t.cm_users, n, z),
            cm_users: t.cm_users,
            dm_users: n - t.cm_users,
            points: t_grid
                .iter()
                .enumerate()
                .map(|(i, &th)| CoveragePoint {
                    sinr_threshold_linear: th,
                    total: McEstimate::proportion(t.cm_covered[i] + t.dm_covered[i], n, z),
                    cm: McEstimate::proportion(t.cm_covered[i], n, z),
                    dm: McEstimate::proportion(t.dm_covered[i], n, z),
                    cm_covered: t.cm_covered[i],
                    dm_covered: t.dm_covered[i],
                })
                .collect(),
        })
        .collect())
}

pub fn mc_coverage(
    model: &NetworkModel,
    gamma_linear: f64,
    t_grid: &[f64],
    cfg: &McConfig,
) -> Result<McCoverage> {
    Ok(mc_coverage_multi(model, &[gamma_linear], t_grid, cfg)?.remove(0))
}

/// Mean `ln(1 + SINR)` in nats for several `gamma`, reusing draws.
pub fn mc_rate_multi(
    model: &NetworkModel,
    gammas: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    let n = cfg.trials as u64;
    let z = cfg.z();
    Ok(simulate(model, gammas, &[], cfg)?
        .into_iter()
        .map(|t| McEstimate::from_moments(t.log_sum, t.log_sq, n, z))
        .collect())
}

pub fn mc_rate(model: &NetworkModel, gamma_linear: f64, cfg: &McConfig) -> Result<McEstimate> {
    Ok(mc_rate_multi(model, &[gamma_linear], cfg)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::db_to_linear;

    fn cfg(trials: usize) -> McConfig {
        McConfig {
            trials,
            seed: 7,
            ..McConfig::default()
        }
    }

    #[test]
    fn very_low_threshold_is_always_covered() {
        let m = NetworkModel::default();
        let c = mc_coverage(&m, 1.0, &[db_to_linear(-60.0)], &cfg(20_000)).unwrap();
        assert!(c.points[0].total.mean > 0.999);
    }

    #[test]
    fn unit_gamma_matches_nearest_du_closed_form() {
        let m = NetworkModel {
            window_side_m: 2000.0,
            ..NetworkModel::default()
        };
        let c = mc_coverage(&m, 1.0, &[1.0], &cfg(100_000)).unwrap();
        let exact = 1.0 / (1.0 + std::f64::consts::PI / 4.0);
        let p = c.points[0].total;
        assert!((p.mean - exact).abs() < 0.01, "{} vs {exact}", p.mean);
        assert_eq!(c.cm_users, 0);
    }

    #[test]
    fn larger_gamma_covers_more() {
        let m = NetworkModel::default();
        let grid: Vec<f64> = [-10.0, 0.0, 10.0, 20.0]
            .iter()
            .map(|&d| db_to_linear(d))
            .collect();
        let out = mc_coverage_multi(&m, &[1.0, 100.0], &grid, &cfg(50_000)).unwrap();
        for (a, b) in out[0].points.iter().zip(&out[1].points) {
            assert!(b.total.mean >= a.total.mean);
        }
        let r = mc_rate_multi(&m, &[1.0, 100.0], &cfg(50_000)).unwrap();
        assert!(r[1].mean > r[0].mean);
    }

    #[test]
    fn infinite_noise_gives_zero_rate() {
        let m = NetworkModel {
            tx_power_dbm: f64::NEG_INFINITY,
            ..NetworkModel::default()
        };
        let r = mc_rate(&m, 10.0, &cfg(1000)).unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn reproducible_and_validated() {
        let m = NetworkModel::default();
        let a = mc_rate(&m, 3.0, &cfg(5000)).unwrap();
        let b = mc_rate(&m, 3.0, &cfg(5000)).unwrap();
        assert_eq!(a, b);
        assert_eq!(mc_rate(&m, 3.0, &cfg(0)), Err(Error::NoSamples));
        assert_eq!(
            mc_rate(&m, 0.5, &cfg(10)),
            Err(Error::InvalidThreshold(0.5))
        );
    }

    #[test]
    fn modes_partition_coverage() {
        let m = NetworkModel::default();
        let c = mc_coverage(&m, 10.0, &[1.0], &cfg(20_000)).unwrap();
        let p = c.points[0];
        assert!((p.cm.mean + p.dm.mean - p.total.mean).abs() < 1e-12);
        assert_eq!(c.cm_users + c.dm_users, 20_000);
    }
}
