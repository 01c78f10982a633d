//! PPP topologies, PLD-based CoMP clustering and mode allocation ratios (MAR).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Mode, NetworkModel, ServiceKind};
use crate::rng::{chunks, stream_rng};
use crate::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub window_side_m: f64,
    pub du_points: Vec<Point>,
    pub user_points: BTreeMap<ServiceKind, Vec<Point>>,
}

/// What to do when a realization contains no DU at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyPolicy {
    #[default]
    Resample,
    Error,
}

/// DUs serving one user, nearest first. Indices refer to positions in the
/// ascending distance list handed to [`comp_cluster`] (0 = nearest DU).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingSet {
    pub du_indices: Vec<usize>,
    pub distances_m: Vec<f64>,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mar {
    pub p_cm: f64,
    pub p_dm: f64,
}

impl Mar {
    /// MAR with the given CM share.
    pub fn from_cm(p_cm: f64) -> Self {
        Self {
            p_cm,
            p_dm: 1.0 - p_cm,
        }
    }

    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Cm => self.p_cm,
            Mode::Dm => self.p_dm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarEstimate {
    pub p_cm: f64,
    pub p_dm: f64,
    /// 95% normal-approximation half-width (same for both fractions).
    pub half_width: f64,
    pub trials: usize,
}

/// Square window of side `side` with periodic boundaries.
pub fn torus_distance(a: Point, b: Point, side: f64) -> f64 {
    let wrap = |d: f64| {
        let d = d.abs() % side;
        d.min(side - d)
    };
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(0)
}

fn uniform_points<R: Rng + ?Sized>(rng: &mut R, n: usize, side: f64) -> Vec<Point> {
    (0..n)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect()
}

pub fn sample_topology_with<R: Rng + ?Sized>(
    rng: &mut R,
    model: &NetworkModel,
    policy: EmptyPolicy,
) -> Result<Topology> {
    model.validate()?;
    let side = model.window_side_m;
    let area = model.area_km2();
    let du_points = loop {
        let n = poisson_count(rng, model.du_density_per_km2 * area);
        if n > 0 {
            break uniform_points(rng, n, side);
        }
        if policy == EmptyPolicy::Error {
            return Err(Error::EmptyTopology);
        }
    };
    let user_points = model
        .user_density_per_km2
        .iter()
        .map(|(&kind, &density)| {
            let n = poisson_count(rng, density * area);
            (kind, uniform_points(rng, n, side))
        })
        .collect();
    Ok(Topology {
        window_side_m: side,
        du_points,
        user_points,
    })
}

/// One PPP realization of DUs and users, seeded from `model.rng_seed`.
pub fn sample_topology(model: &NetworkModel, policy: EmptyPolicy) -> Result<Topology> {
    let mut rng = stream_rng(model.rng_seed, 0);
    sample_topology_with(&mut rng, model, policy)
}

/// Squared distances from the window centre to a fresh set of PPP DUs. The
/// centre is the typical user; with the torus metric the whole window is the
/// square centred on it, so plain distances are the wrapped distances.
pub(crate) fn draw_du_distances_sq<R: Rng + ?Sized>(
    rng: &mut R,
    model: &NetworkModel,
    out: &mut Vec<f64>,
) {
    let side = model.window_side_m;
    let mean = model.du_density_per_km2 * model.area_km2();
    out.clear();
    loop {
        let n = poisson_count(rng, mean);
        if n == 0 {
            continue;
        }
        for _ in 0..n {
            let dx = (rng.random::<f64>() - 0.5) * side;
            let dy = (rng.random::<f64>() - 0.5) * side;
            out.push(dx * dx + dy * dy);
        }
        return;
    }
}

/// Ascending distances from `user` to every DU of `topology` (torus metric).
pub fn sorted_distances(topology: &Topology, user: Point) -> Vec<f64> {
    let mut d: Vec<f64> = topology
        .du_points
        .iter()
        .map(|&p| torus_distance(p, user, topology.window_side_m))
        .collect();
    d.sort_by(f64::total_cmp);
    d
}

/// PLD between the nearest DU and DU n: `(rn / r1)^alpha`.
pub fn pld_ratio(r1_m: f64, rn_m: f64, alpha: f64) -> Result<f64> {
    if !(r1_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nearest distance must be > 0, got {r1_m}"
        )));
    }
    if rn_m < r1_m {
        return Err(Error::OrderingViolation(format!(
            "r_n = {rn_m} < r_1 = {r1_m}"
        )));
    }
    Ok((rn_m / r1_m).powf(alpha))
}

/// PLD clustering: DU n (n < `max_comp_dus`) joins when `(r_n/r_1)^alpha <= gamma`.
pub fn comp_cluster(
    sorted_distances_m: &[f64],
    gamma_linear: f64,
    alpha: f64,
    max_comp_dus: usize,
) -> Result<ServingSet> {
    if sorted_distances_m.is_empty() {
        return Err(Error::EmptyTopology);
    }
    if !(gamma_linear >= 1.0) {
        return Err(Error::InvalidThreshold(gamma_linear));
    }
    if let Some(w) = sorted_distances_m.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::OrderingViolation(format!(
            "{} follows {}",
            w[1], w[0]
        )));
    }
    let r1 = sorted_distances_m[0];
    let mut du_indices = vec![0];
    for (n, &rn) in sorted_distances_m
        .iter()
        .enumerate()
        .take(max_comp_dus.max(1))
        .skip(1)
    {
        if pld_ratio(r1, rn, alpha)? <= gamma_linear {
            du_indices.push(n);
        } else {
            break;
        }
    }
    let distances_m = du_indices.iter().map(|&i| sorted_distances_m[i]).collect();
    let mode = if du_indices.len() >= 2 {
        Mode::Cm
    } else {
        Mode::Dm
    };
    Ok(ServingSet {
        du_indices,
        distances_m,
        mode,
    })
}

/// `exp(-pi L sum r_i^2) (2 pi L)^c prod r_i` for strictly ascending `r`
/// (density `du_density` per m²).
///
/// For c = 1 this is the nearest-neighbour pdf. For c >= 2 it is the product
/// form as written; the ordered joint pdf of the c nearest points is
/// [`ordered_distance_density`].
pub fn joint_distance_density(r_vec_m: &[f64], du_density: f64) -> Result<f64> {
    check_strictly_ascending(r_vec_m)?;
    let c = r_vec_m.len() as i32;
    let sum_sq: f64 = r_vec_m.iter().map(|r| r * r).sum();
    let prod: f64 = r_vec_m.iter().product();
    Ok((-PI * du_density * sum_sq).exp() * (2.0 * PI * du_density).powi(c) * prod)
}

/// Joint pdf of the c nearest PPP distances: `(2 pi L)^c prod r_i exp(-pi L r_c^2)`.
pub fn ordered_distance_density(r_vec_m: &[f64], du_density: f64) -> Result<f64> {
    check_strictly_ascending(r_vec_m)?;
    let c = r_vec_m.len() as i32;
    let last = *r_vec_m.last().expect("non-empty");
    let prod: f64 = r_vec_m.iter().product();
    Ok((2.0 * PI * du_density).powi(c) * prod * (-PI * du_density * last * last).exp())
}

fn check_strictly_ascending(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::InvalidArgument("empty distance vector".into()));
    }
    if !(r[0] > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distances must be positive, got {}",
            r[0]
        )));
    }
    if let Some(w) = r.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::OrderingViolation(format!(
            "{} does not exceed {}",
            w[1], w[0]
        )));
    }
    Ok(())
}

/// Closed-form MAR for at most two CoMP DUs: `p_dm = gamma^(-2/alpha)`.
///
/// Conditioned on `r1`, the second-nearest distance satisfies
/// `Pr(r2 > x | r1) = exp(-pi L (x^2 - r1^2))`; averaging over
/// `pi L r1^2 ~ Exp(1)` at `x = gamma^(1/alpha) r1` gives the result, which is
/// independent of the DU density.
pub fn mar_analytic(gamma_linear: f64, alpha: f64) -> Result<Mar> {
    if !(gamma_linear >= 1.0) {
        return Err(Error::InvalidThreshold(gamma_linear));
    }
    if !(alpha > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "pathloss exponent must be > 2, got {alpha}"
        )));
    }
    let p_dm = gamma_linear.powf(-2.0 / alpha);
    Ok(Mar {
        p_cm: 1.0 - p_dm,
        p_dm,
    })
}

/// Fraction of typical users served in CM over `trials` torus topologies.
pub fn mar_empirical(
    model: &NetworkModel,
    gamma_linear: f64,
    trials: usize,
) -> Result<MarEstimate> {
    model.validate()?;
    if trials == 0 {
        return Err(Error::NoSamples);
    }
    if !(gamma_linear >= 1.0) {
        return Err(Error::InvalidThreshold(gamma_linear));
    }
    let c_max = model.max_comp_dus;
    let alpha = model.pathloss_exponent;
    let cm_counts: Vec<usize> = chunks(trials)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = stream_rng(model.rng_seed, stream);
            let mut d2 = Vec::new();
            let mut cm = 0;
            for _ in 0..len {
                draw_du_distances_sq(&mut rng, model, &mut d2);
                let k = c_max.min(d2.len());
                if k < d2.len() {
                    d2.select_nth_unstable_by(k, f64::total_cmp);
                }
                let mut nearest: Vec<f64> = d2[..k.max(1)].iter().map(|x| x.sqrt()).collect();
                nearest.sort_by(f64::total_cmp);
                let set = comp_cluster(&nearest, gamma_linear, alpha, c_max)
                    .expect("non-empty sorted distances");
                if set.mode == Mode::Cm {
                    cm += 1;
                }
            }
            cm
        })
        .collect();
    let cm: usize = cm_counts.iter().sum();
    let n = trials as f64;
    let p_cm = cm as f64 / n;
    let p_dm = (trials - cm) as f64 / n;
    Ok(MarEstimate {
        p_cm,
        p_dm,
        half_width: 1.959_963_984_540_054 * (p_cm * p_dm / n).sqrt(),
        trials,
    })
}
