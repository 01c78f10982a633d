//! Single-server queue simulation with Poisson classes.
//!
//! PS keeps a virtual clock `v` that grows at rate `1 / n(t)`; a job needing
//! `x` seconds of dedicated service finishes when `v` reaches its tag
//! `v(arrival) + x`. FCFS uses the Lindley recursion on the merged stream.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{McConfig, McEstimate};
use crate::queueing::Discipline;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Batches used for the interval when only one replication runs.
const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceLaw {
    Deterministic,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub arrival_rate: f64,
    pub mean_service_s: f64,
    pub law: ServiceLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesReport {
    /// Mean sojourn per class, in input order.
    pub sojourn_s: Vec<McEstimate>,
    pub utilization: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    tag: f64,
    arrival: f64,
    class: usize,
    measured: bool,
}

impl PartialEq for Job {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag
    }
}
impl Eq for Job {}
impl PartialOrd for Job {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Job {
    fn cmp(&self, other: &Self) -> Ordering {
        self.tag.total_cmp(&other.tag)
    }
}

struct Source<'a> {
    classes: &'a [ClassSpec],
    inter: Exp<f64>,
    cumulative: Vec<f64>,
    exp_unit: Exp<f64>,
}

impl<'a> Source<'a> {
    fn new(classes: &'a [ClassSpec]) -> Self {
        let total: f64 = classes.iter().map(|c| c.arrival_rate).sum();
        let mut acc = 0.0;
        let cumulative = classes
            .iter()
            .map(|c| {
                acc += c.arrival_rate / total;
                acc
            })
            .collect();
        Self {
            classes,
            inter: Exp::new(total).expect("positive total rate"),
            cumulative,
            exp_unit: Exp::new(1.0).expect("unit rate"),
        }
    }

    fn gap(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.inter.sample(rng)
    }

    fn class(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.classes.len() - 1)
    }

    fn work(&self, class: usize, rng: &mut ChaCha8Rng) -> f64 {
        let c = &self.classes[class];
        match c.law {
            ServiceLaw::Deterministic => c.mean_service_s,
            ServiceLaw::Exponential => c.mean_service_s * self.exp_unit.sample(rng),
        }
    }
}

/// Sojourn samples of measured packets, in the order they were recorded.
type Samples = Vec<(usize, f64)>;

fn run_ps(src: &Source<'_>, rng: &mut ChaCha8Rng, warmup: u64, horizon: u64) -> Samples {
    let mut out = Vec::with_capacity(horizon as usize);
    let mut heap: BinaryHeap<Reverse<Job>> = BinaryHeap::new();
    let mut now = 0.0;
    let mut virtual_time = 0.0;
    let mut next_arrival = src.gap(rng);
    let mut seq: u64 = 0;
    let mut pending = horizon;
    while pending > 0 {
        let n = heap.len() as f64;
        let next_departure = heap
            .peek()
            .map_or(f64::INFINITY, |Reverse(j)| now + (j.tag - virtual_time) * n);
        if next_arrival < next_departure {
            if n > 0.0 {
                virtual_time += (next_arrival - now) / n;
            }
            now = next_arrival;
            let class = src.class(rng);
            let measured = seq >= warmup && seq < warmup + horizon;
            seq += 1;
            heap.push(Reverse(Job {
                tag: virtual_time + src.work(class, rng),
                arrival: now,
                class,
                measured,
            }));
            next_arrival = now + src.gap(rng);
        } else {
            let Reverse(job) = heap.pop().expect("departure implies a job");
            virtual_time = job.tag;
            now = next_departure;
            if job.measured {
                out.push((job.class, now - job.arrival));
                pending -= 1;
            }
        }
    }
    out
}

fn run_fcfs(src: &Source<'_>, rng: &mut ChaCha8Rng, warmup: u64, horizon: u64) -> Samples {
    let mut out = Vec::with_capacity(horizon as usize);
    let mut wait = 0.0;
    let mut prev_work = 0.0;
    for seq in 0..warmup + horizon {
        let gap = if seq == 0 { 0.0 } else { src.gap(rng) };
        wait = (wait + prev_work - gap).max(0.0);
        let class = src.class(rng);
        let work = src.work(class, rng);
        if seq >= warmup {
            out.push((class, wait + work));
        }
        prev_work = work;
    }
    out
}

fn class_means(samples: &[(usize, f64)], n_classes: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; n_classes];
    let mut count = vec![0u64; n_classes];
    for &(c, s) in samples {
        sum[c] += s;
        count[c] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
        .collect()
}

/// Per-class mean sojourn times with confidence intervals.
///
/// `cfg.trials` independent replications run in parallel, each measuring
/// `horizon_packets` packets after `warmup_packets`. The interval comes from
/// the spread of replication means, or from batch means of a single run.
pub fn des_queue(
    discipline: Discipline,
    classes: &[ClassSpec],
    cfg: &McConfig,
) -> Result<DesReport> {
    cfg.validate()?;
    if classes.is_empty() {
        return Err(Error::NoSamples);
    }
    for c in classes {
        if !(c.arrival_rate > 0.0) || !(c.mean_service_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "class rates and service times must be positive: {c:?}"
            )));
        }
    }
    let rho: f64 = classes
        .iter()
        .map(|c| c.arrival_rate * c.mean_service_s)
        .sum();
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let src = Source::new(classes);
    let runs: Vec<Samples> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(cfg.seed, r);
            match discipline {
                Discipline::Ps => run_ps(&src, &mut rng, cfg.warmup_packets, cfg.horizon_packets),
                Discipline::Fcfs => {
                    run_fcfs(&src, &mut rng, cfg.warmup_packets, cfg.horizon_packets)
                }
            }
        })
        .collect();
    let groups: Vec<&[(usize, f64)]> = if runs.len() > 1 {
        runs.iter().map(|r| r.as_slice()).collect()
    } else {
        let size = (runs[0].len() / BATCHES).max(1);
        runs[0].chunks(size).collect()
    };
    let per_group: Vec<Vec<Option<f64>>> = groups
        .iter()
        .map(|g| class_means(g, classes.len()))
        .collect();
    let total = cfg.trials as u64 * cfg.horizon_packets;
    let mut sojourn_s = Vec::with_capacity(classes.len());
    for k in 0..classes.len() {
        let means: Vec<f64> = per_group.iter().filter_map(|g| g[k]).collect();
        if means.is_empty() {
            return Err(Error::NoSamples);
        }
        sojourn_s.push(McEstimate::from_means(&means, cfg.confidence, total));
    }
    Ok(DesReport {
        sojourn_s,
        utilization: rho,
        replications: cfg.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: usize, horizon: u64) -> McConfig {
        McConfig {
            trials,
            seed: 11,
            warmup_packets: 5_000,
            horizon_packets: horizon,
            confidence: 0.95,
        }
    }

    fn mm1(lambda: f64) -> ClassSpec {
        ClassSpec {
            arrival_rate: lambda,
            mean_service_s: 1.0,
            law: ServiceLaw::Exponential,
        }
    }

    #[test]
    fn mm1_ps_half_load() {
        let r = des_queue(Discipline::Ps, &[mm1(0.5)], &cfg(4, 200_000)).unwrap();
        let s = r.sojourn_s[0];
        assert!((s.mean - 2.0).abs() < 0.04, "{s:?}");
    }

    #[test]
    fn fcfs_lindley_matches_pk() {
        // M/D/1: W = rho / (2 mu (1 - rho)) = 0.5, sojourn 1.5.
        let c = ClassSpec {
            arrival_rate: 0.5,
            mean_service_s: 1.0,
            law: ServiceLaw::Deterministic,
        };
        let r = des_queue(Discipline::Fcfs, &[c], &cfg(4, 200_000)).unwrap();
        assert!(
            (r.sojourn_s[0].mean - 1.5).abs() < 0.03,
            "{:?}",
            r.sojourn_s[0]
        );
    }

    #[test]
    fn light_load_sojourn_is_service_time() {
        let c = ClassSpec {
            arrival_rate: 1e-4,
            mean_service_s: 2.0,
            law: ServiceLaw::Deterministic,
        };
        for d in [Discipline::Ps, Discipline::Fcfs] {
            let r = des_queue(d, &[c], &cfg(2, 20_000)).unwrap();
            assert!((r.sojourn_s[0].mean - 2.0).abs() < 2e-3);
        }
    }

    #[test]
    fn small_packets_wait_behind_large_ones_under_fcfs() {
        let rate = 0.5 / 21.0;
        let small = ClassSpec {
            arrival_rate: rate,
            mean_service_s: 1.0,
            law: ServiceLaw::Deterministic,
        };
        let large = ClassSpec {
            mean_service_s: 20.0,
            ..small
        };
        let ps = des_queue(Discipline::Ps, &[small, large], &cfg(4, 100_000)).unwrap();
        let fcfs = des_queue(Discipline::Fcfs, &[small, large], &cfg(4, 100_000)).unwrap();
        assert!(
            (ps.sojourn_s[0].mean - 2.0).abs() < 0.1,
            "{:?}",
            ps.sojourn_s[0]
        );
        assert!(fcfs.sojourn_s[0].mean > 3.0 * ps.sojourn_s[0].mean);
    }

    #[test]
    fn unstable_and_invalid_inputs() {
        assert_eq!(
            des_queue(Discipline::Ps, &[mm1(1.0)], &cfg(1, 10)),
            Err(Error::Unstable { rho: 1.0 })
        );
        assert!(des_queue(Discipline::Ps, &[mm1(0.0)], &cfg(1, 10)).is_err());
        assert_eq!(
            des_queue(Discipline::Ps, &[], &cfg(1, 10)),
            Err(Error::NoSamples)
        );
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let a = des_queue(Discipline::Ps, &[mm1(0.7)], &cfg(3, 20_000)).unwrap();
        let b = des_queue(Discipline::Ps, &[mm1(0.7)], &cfg(3, 20_000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_replication_uses_batch_means() {
        let r = des_queue(Discipline::Ps, &[mm1(0.3)], &cfg(1, 100_000)).unwrap();
        assert!(r.sojourn_s[0].half_width > 0.0);
        assert!(r.sojourn_s[0].contains_within(1.0 / 0.7, 4.0));
    }
}
