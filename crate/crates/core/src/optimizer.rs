//! CFSMA: threshold selection over the operable and reliable sets.
//!
//! All searches run in MAR space, `p = p_cm in [0, p_max]` with
//! `p_max = 1 - gamma_max^(-2/alpha)`. Workloads are affine in each service's
//! `p_cm`, so operable intervals are solved exactly. URLLC reliability is
//! located on a coarse grid and its level-set endpoints refined by bisection.
//!
//! Selection is lexicographic: the largest feasible eMBB `p_cm` (the ergodic
//! rate is nondecreasing in `gamma_e`), then the largest URLLC `p_cm` that
//! keeps the point feasible.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Mar;
use crate::model::{Mode, NetworkModel, ServiceKind};
use crate::queueing::{
    queue_state, service_reliability, workload, Discipline, ModeProfiles, ServerSpec, ServiceClass,
    Workload,
};
use crate::radio::{
    conditional_coverage, coverage, ergodic_rate, CoverageQuery, ModeSelector, RateResult,
};
use crate::{Error, Result};

/// How the per-attempt success probability of a mode is read from coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessModel {
    /// `Pr(SINR >= T | mode)`.
    #[default]
    Conditional,
    /// `Pr(SINR >= T, mode)`.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub model: NetworkModel,
    pub services: Vec<ServiceClass>,
    pub modes: ModeProfiles,
    pub server: ServerSpec,
    pub discipline: Discipline,
    pub success: SuccessModel,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.modes.validate()?;
        self.server.validate()?;
        for s in &self.services {
            s.validate()?;
        }
        for kind in [ServiceKind::Embb, ServiceKind::Urllc] {
            let n = self.services.iter().filter(|s| s.name == kind).count();
            if n != 1 {
                return Err(Error::InvalidModel(format!(
                    "expected exactly one {kind} service, found {n}"
                )));
            }
        }
        if self.services.len() != 2 {
            return Err(Error::InvalidModel("expected exactly two services".into()));
        }
        Ok(())
    }

    pub fn service(&self, kind: ServiceKind) -> &ServiceClass {
        self.services
            .iter()
            .find(|s| s.name == kind)
            .expect("validated spec holds both services")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfsmaOptions {
    /// Endpoint resolution in `p_cm`.
    pub tol: f64,
    pub gamma_max_linear: f64,
    pub outer_points: usize,
    pub coarse_points: usize,
}

impl Default for CfsmaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            gamma_max_linear: 1e4,
            outer_points: 201,
            coarse_points: 33,
        }
    }
}

impl CfsmaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 0.1) {
            return Err(Error::InvalidArgument(format!(
                "tol must be in (0, 0.1), got {}",
                self.tol
            )));
        }
        if !(self.gamma_max_linear > 1.0) || !self.gamma_max_linear.is_finite() {
            return Err(Error::InvalidArgument(
                "gamma_max_linear must be finite and > 1".into(),
            ));
        }
        if self.outer_points < 2 || self.coarse_points < 2 {
            return Err(Error::InvalidArgument(
                "grids need at least two points".into(),
            ));
        }
        Ok(())
    }
}

/// Closed interval `[lo, hi]` in `p_cm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && p <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    pub operable: Option<Interval>,
    pub reliable: Option<Interval>,
    pub feasible: Option<Interval>,
}

impl FeasibleSet {
    pub fn is_empty(&self) -> bool {
        self.feasible.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CfsmaStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Operability,
    Reliability,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Operability => "operability",
            Constraint::Reliability => "reliability",
        })
    }
}

/// Selected thresholds. When `status` is `Infeasible` the allocation fields
/// hold the best-effort point that maximizes URLLC reliability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfsmaResult {
    pub status: CfsmaStatus,
    pub violated: Option<Constraint>,
    pub gamma_star: BTreeMap<ServiceKind, f64>,
    pub p_cm_star: BTreeMap<ServiceKind, f64>,
    pub achieved_rate: RateResult,
    pub urllc_reliability: f64,
    pub rho_cu: f64,
    pub rho_du: f64,
    /// Sets around the selected point: eMBB's at `p_cm_star[urllc]`, URLLC's at `p_cm_star[embb]`.
    pub sets: BTreeMap<ServiceKind, FeasibleSet>,
}

impl CfsmaResult {
    pub fn p_cm(&self, kind: ServiceKind) -> f64 {
        self.p_cm_star[&kind]
    }

    pub fn gamma(&self, kind: ServiceKind) -> f64 {
        self.gamma_star[&kind]
    }
}

/// Inverse of the two-DU MAR closed form: `gamma = (1 - p_cm)^(-alpha/2)`.
pub fn gamma_from_pcm(p_cm: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_cm) {
        return Err(Error::InvalidArgument(format!(
            "p_cm must be in [0, 1], got {p_cm}"
        )));
    }
    if p_cm == 1.0 {
        return Err(Error::InfiniteThreshold);
    }
    Ok((1.0 - p_cm).powf(-alpha / 2.0))
}

/// `{p in domain : a + b p < 1}` for every affine form `(a, b)`, with
/// constraint-derived bounds pulled inward by `tol`.
pub fn affine_operable_interval(
    forms: &[(f64, f64)],
    domain: Interval,
    tol: f64,
) -> Option<Interval> {
    let (mut lo, mut hi) = (domain.lo, domain.hi);
    for &(a, b) in forms {
        if b > 0.0 {
            hi = hi.min((1.0 - a) / b - tol);
        } else if b < 0.0 {
            lo = lo.max((1.0 - a) / b + tol);
        } else if a >= 1.0 {
            return None;
        }
    }
    Interval::new(lo, hi)
}

/// Envelope of `{p in domain : f(p) >= target}`: coarse grid, then bisection
/// of both endpoints to `tol / 10`. Returned endpoints always satisfy the target.
pub fn superlevel_interval<F>(
    mut f: F,
    domain: Interval,
    target: f64,
    tol: f64,
    coarse_points: usize,
) -> Result<Option<Interval>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if domain.lo == domain.hi {
        return Ok((f(domain.lo)? >= target).then_some(domain));
    }
    let n = coarse_points.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|i| domain.lo + (domain.hi - domain.lo) * i as f64 / (n - 1) as f64)
        .collect();
    let mut ok = Vec::with_capacity(n);
    for &x in &xs {
        ok.push(f(x)? >= target);
    }
    let (Some(first), Some(last)) = (ok.iter().position(|&b| b), ok.iter().rposition(|&b| b))
    else {
        return Ok(None);
    };
    let precision = tol / 10.0;
    let mut refine = |mut good: f64, mut bad: f64| -> Result<f64> {
        while (good - bad).abs() > precision {
            let mid = 0.5 * (good + bad);
            if f(mid)? >= target {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    };
    let lo = if first == 0 {
        xs[0]
    } else {
        refine(xs[first], xs[first - 1])?
    };
    let hi = if last == n - 1 {
        xs[n - 1]
    } else {
        refine(xs[last], xs[last + 1])?
    };
    Ok(Some(Interval { lo, hi }))
}

/// Per-mode success probabilities of one service at a PLD threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Success {
    pub cm: f64,
    pub dm: f64,
}

pub fn success_probabilities(
    model: &NetworkModel,
    service: &ServiceClass,
    gamma_linear: f64,
    kind: SuccessModel,
) -> Result<Success> {
    let t = service.sinr_threshold_linear;
    match kind {
        SuccessModel::Conditional => Ok(Success {
            cm: conditional_coverage(model, t, gamma_linear, Mode::Cm)?,
            dm: conditional_coverage(model, t, gamma_linear, Mode::Dm)?,
        }),
        SuccessModel::Joint => {
            let q = |mode_selector| CoverageQuery {
                sinr_threshold_linear: t,
                gamma_linear,
                model,
                mode_selector,
            };
            Ok(Success {
                cm: coverage(&q(ModeSelector::Cm))?,
                dm: coverage(&q(ModeSelector::Dm))?,
            })
        }
    }
}

/// Evaluation of one `(p_cm_e, p_cm_u)` allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub workload: Workload,
    pub operable: bool,
    /// Zero when a server saturates.
    pub urllc_reliability: f64,
    pub reliable: bool,
}

impl PointEval {
    pub fn feasible(&self) -> bool {
        self.operable && self.reliable
    }
}

/// The two-service allocation problem with cached URLLC success probabilities.
pub struct Problem<'a> {
    sys: &'a SystemSpec,
    opts: CfsmaOptions,
    p_max: f64,
    success_cache: RefCell<HashMap<u64, Success>>,
}

impl<'a> Problem<'a> {
    pub fn new(sys: &'a SystemSpec, opts: CfsmaOptions) -> Result<Self> {
        sys.validate()?;
        opts.validate()?;
        let p_max = 1.0
            - opts
                .gamma_max_linear
                .powf(-2.0 / sys.model.pathloss_exponent);
        Ok(Self {
            sys,
            opts,
            p_max,
            success_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn domain(&self) -> Interval {
        Interval {
            lo: 0.0,
            hi: self.p_max,
        }
    }

    fn present(&self, kind: ServiceKind) -> bool {
        self.sys.service(kind).user_count > 0
    }

    pub fn gamma(&self, p_cm: f64) -> Result<f64> {
        let g = gamma_from_pcm(p_cm, self.sys.model.pathloss_exponent)?;
        Ok(g.min(self.opts.gamma_max_linear))
    }

    fn mix(&self, p_e: f64, p_u: f64) -> Vec<Mar> {
        self.sys
            .services
            .iter()
            .map(|s| match s.name {
                ServiceKind::Embb => Mar::from_cm(p_e),
                ServiceKind::Urllc => Mar::from_cm(p_u),
            })
            .collect()
    }

    pub fn workload(&self, p_e: f64, p_u: f64) -> Result<Workload> {
        workload(
            &self.sys.services,
            &self.sys.modes,
            &self.mix(p_e, p_u),
            &self.sys.server,
        )
    }

    /// URLLC success probabilities at `p_cm_u`, memoized.
    pub fn urllc_success(&self, p_u: f64) -> Result<Success> {
        if let Some(s) = self.success_cache.borrow().get(&p_u.to_bits()) {
            return Ok(*s);
        }
        let s = success_probabilities(
            &self.sys.model,
            self.sys.service(ServiceKind::Urllc),
            self.gamma(p_u)?,
            self.sys.success,
        )?;
        self.success_cache.borrow_mut().insert(p_u.to_bits(), s);
        Ok(s)
    }

    /// Fills the success cache for many thresholds in parallel.
    pub fn prefetch(&self, p_us: &[f64]) -> Result<()> {
        let missing: Vec<f64> = {
            let cache = self.success_cache.borrow();
            p_us.iter()
                .copied()
                .filter(|p| !cache.contains_key(&p.to_bits()))
                .collect()
        };
        let sys = self.sys;
        let gammas = missing
            .iter()
            .map(|&p| self.gamma(p))
            .collect::<Result<Vec<_>>>()?;
        let computed: Vec<Result<Success>> = gammas
            .par_iter()
            .map(|&g| {
                success_probabilities(&sys.model, sys.service(ServiceKind::Urllc), g, sys.success)
            })
            .collect();
        let mut cache = self.success_cache.borrow_mut();
        for (p, s) in missing.into_iter().zip(computed) {
            cache.insert(p.to_bits(), s?);
        }
        Ok(())
    }

    pub fn evaluate(&self, p_e: f64, p_u: f64) -> Result<PointEval> {
        let success = self.urllc_success(p_u)?;
        self.evaluate_with(p_e, p_u, success)
    }

    pub fn evaluate_with(&self, p_e: f64, p_u: f64, success: Success) -> Result<PointEval> {
        let services = &self.sys.services;
        let mar = self.mix(p_e, p_u);
        let w = workload(services, &self.sys.modes, &mar, &self.sys.server)?;
        let urllc = self.sys.service(ServiceKind::Urllc);
        if !w.is_operable() {
            return Ok(PointEval {
                workload: w,
                operable: false,
                urllc_reliability: 0.0,
                reliable: !self.present(ServiceKind::Urllc),
            });
        }
        let state = queue_state(
            services,
            &self.sys.modes,
            &mar,
            &self.sys.server,
            self.sys.discipline,
        )?;
        let idx = services
            .iter()
            .position(|s| s.name == ServiceKind::Urllc)
            .expect("urllc present");
        let rel = service_reliability(
            urllc,
            &state,
            &mar[idx],
            success.cm,
            success.dm,
            &self.sys.server,
        );
        Ok(PointEval {
            workload: w,
            operable: true,
            urllc_reliability: rel,
            reliable: !self.present(ServiceKind::Urllc) || rel >= urllc.reliability_target,
        })
    }

    fn affine_forms(&self, free: ServiceKind, other_p: f64) -> Result<[(f64, f64); 2]> {
        let at = |p: f64| match free {
            ServiceKind::Embb => self.workload(p, other_p),
            ServiceKind::Urllc => self.workload(other_p, p),
        };
        // Workloads are affine in p, so two evaluations pin them down.
        let w0 = at(0.0)?;
        let w1 = at(1.0)?;
        Ok([
            (w0.rho_cu, w1.rho_cu - w0.rho_cu),
            (w0.rho_du, w1.rho_du - w0.rho_du),
        ])
    }

    /// Operable `p_cm` of `free` with the other service's `p_cm` held at `other_p`.
    pub fn operable_interval(&self, free: ServiceKind, other_p: f64) -> Result<Option<Interval>> {
        let forms = self.affine_forms(free, other_p)?;
        Ok(affine_operable_interval(
            &forms,
            self.domain(),
            self.opts.tol,
        ))
    }

    /// Points of `within` where URLLC meets its reliability target.
    pub fn reliable_interval(
        &self,
        free: ServiceKind,
        other_p: f64,
        within: Interval,
    ) -> Result<Option<Interval>> {
        let target = if self.present(ServiceKind::Urllc) {
            self.sys.service(ServiceKind::Urllc).reliability_target
        } else {
            0.0
        };
        let eval = |p: f64| -> Result<f64> {
            let e = match free {
                ServiceKind::Embb => self.evaluate(p, other_p)?,
                ServiceKind::Urllc => self.evaluate(other_p, p)?,
            };
            Ok(if self.present(ServiceKind::Urllc) {
                e.urllc_reliability
            } else {
                1.0
            })
        };
        superlevel_interval(eval, within, target, self.opts.tol, self.opts.coarse_points)
    }

    pub fn feasible_set(&self, free: ServiceKind, other_p: f64) -> Result<FeasibleSet> {
        let operable = self.operable_interval(free, other_p)?;
        let reliable = match operable {
            Some(o) => self.reliable_interval(free, other_p, o)?,
            None => None,
        };
        let feasible = match (operable, reliable) {
            (Some(o), Some(r)) => o.intersect(&r),
            _ => None,
        };
        Ok(FeasibleSet {
            operable,
            reliable,
            feasible,
        })
    }

    /// Highest URLLC reliability over the operable eMBB set, sampled on the
    /// coarse grid; ties go to the lower peak utilization.
    fn best_effort(&self, p_u: f64) -> Result<Option<Effort>> {
        let Some(o) = self.operable_interval(ServiceKind::Embb, p_u)? else {
            return Ok(None);
        };
        let n = self.opts.coarse_points;
        let mut best: Option<Effort> = None;
        for i in 0..n {
            let p_e = o.lo + (o.hi - o.lo) * i as f64 / (n - 1) as f64;
            let e = self.evaluate(p_e, p_u)?;
            let c = Effort {
                p_e,
                p_u,
                reliability: e.urllc_reliability,
                load: e.workload.max(),
            };
            if best.is_none_or(|b| c.beats(&b)) {
                best = Some(c);
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy)]
struct Effort {
    p_e: f64,
    p_u: f64,
    reliability: f64,
    load: f64,
}

impl Effort {
    fn beats(&self, other: &Effort) -> bool {
        self.reliability > other.reliability
            || (self.reliability == other.reliability && self.load < other.load)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    p_u: f64,
    p_e: f64,
}

/// Largest eMBB `p_cm` first, larger URLLC `p_cm` on ties.
fn better(a: &Candidate, b: &Candidate) -> bool {
    a.p_e > b.p_e || (a.p_e == b.p_e && a.p_u > b.p_u)
}

pub fn cfsma(sys: &SystemSpec, opts: CfsmaOptions) -> Result<CfsmaResult> {
    let pb = Problem::new(sys, opts)?;
    let p_max = pb.p_max();
    let n = opts.outer_points;
    let grid: Vec<f64> = (0..n).map(|i| p_max * i as f64 / (n - 1) as f64).collect();
    pb.prefetch(&grid)?;

    let top = |p_u: f64| -> Result<Option<Candidate>> {
        let set = pb.feasible_set(ServiceKind::Embb, p_u)?;
        Ok(set.feasible.map(|f| Candidate { p_u, p_e: f.hi }))
    };

    let mut best: Option<Candidate> = None;
    let mut any_operable = false;
    for &p_u in &grid {
        if pb.operable_interval(ServiceKind::Embb, p_u)?.is_some() {
            any_operable = true;
        }
        if let Some(c) = top(p_u)? {
            if best.is_none_or(|b| better(&c, &b)) {
                best = Some(c);
            }
        }
    }

    let Some(mut best) = best else {
        return infeasible(&pb, &grid, any_operable);
    };

    let mut step = grid[1] - grid[0];
    while step > opts.tol {
        step *= 0.5;
        for p_u in [best.p_u - step, best.p_u + step] {
            if !(0.0..=p_max).contains(&p_u) {
                continue;
            }
            if let Some(c) = top(p_u)? {
                if better(&c, &best) {
                    best = c;
                }
            }
        }
    }

    let p_e = best.p_e;
    let urllc_set = pb.feasible_set(ServiceKind::Urllc, p_e)?;
    let p_u = match urllc_set.feasible {
        Some(f) if f.hi >= best.p_u && pb.evaluate(p_e, f.hi)?.feasible() => f.hi,
        _ => best.p_u,
    };
    finish(&pb, p_e, p_u, None, urllc_set)
}

fn infeasible(pb: &Problem<'_>, grid: &[f64], any_operable: bool) -> Result<CfsmaResult> {
    let mut best: Option<Effort> = None;
    for &p_u in grid {
        if let Some(c) = pb.best_effort(p_u)? {
            if best.is_none_or(|b| c.beats(&b)) {
                best = Some(c);
            }
        }
    }
    let (p_e, p_u) = best.map_or((0.0, 0.0), |b| (b.p_e, b.p_u));
    let violated = if any_operable {
        Constraint::Reliability
    } else {
        Constraint::Operability
    };
    let urllc_set = pb.feasible_set(ServiceKind::Urllc, p_e)?;
    finish(pb, p_e, p_u, Some(violated), urllc_set)
}

fn finish(
    pb: &Problem<'_>,
    p_e: f64,
    p_u: f64,
    violated: Option<Constraint>,
    urllc_set: FeasibleSet,
) -> Result<CfsmaResult> {
    let eval = pb.evaluate(p_e, p_u)?;
    let violated = violated.or({
        if !eval.operable {
            Some(Constraint::Operability)
        } else if !eval.reliable {
            Some(Constraint::Reliability)
        } else {
            None
        }
    });
    let gamma_e = pb.gamma(p_e)?;
    let gamma_u = pb.gamma(p_u)?;
    let embb_set = pb.feasible_set(ServiceKind::Embb, p_u)?;
    Ok(CfsmaResult {
        status: if violated.is_none() {
            CfsmaStatus::Optimal
        } else {
            CfsmaStatus::Infeasible
        },
        violated,
        gamma_star: BTreeMap::from([(ServiceKind::Embb, gamma_e), (ServiceKind::Urllc, gamma_u)]),
        p_cm_star: BTreeMap::from([(ServiceKind::Embb, p_e), (ServiceKind::Urllc, p_u)]),
        achieved_rate: ergodic_rate(gamma_e, &pb.sys.model)?,
        urllc_reliability: eval.urllc_reliability,
        rho_cu: eval.workload.rho_cu,
        rho_du: eval.workload.rho_du,
        sets: BTreeMap::from([
            (ServiceKind::Embb, embb_set),
            (ServiceKind::Urllc, urllc_set),
        ]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mar_analytic;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn light_system() -> SystemSpec {
        SystemSpec {
            model: NetworkModel::default(),
            services: vec![
                ServiceClass {
                    user_count: 50,
                    ..ServiceClass::embb()
                },
                ServiceClass {
                    user_count: 200,
                    reliability_target: 0.999,
                    sinr_threshold_linear: 0.1,
                    ..ServiceClass::urllc()
                },
            ],
            modes: ModeProfiles::default(),
            server: ServerSpec::default(),
            discipline: Discipline::Ps,
            success: SuccessModel::Conditional,
        }
    }

    #[test]
    fn gamma_from_pcm_examples() {
        assert_eq!(gamma_from_pcm(0.0, 4.0).unwrap(), 1.0);
        assert_abs_diff_eq!(gamma_from_pcm(0.9, 4.0).unwrap(), 100.0, epsilon = 1e-9);
        assert_eq!(gamma_from_pcm(1.0, 4.0), Err(Error::InfiniteThreshold));
        for i in 1..10 {
            let x = i as f64 / 10.0;
            for alpha in [3.0, 4.0, 5.5] {
                let back = mar_analytic(gamma_from_pcm(x, alpha).unwrap(), alpha)
                    .unwrap()
                    .p_cm;
                assert!((back - x).abs() <= 1e-10 * x);
            }
        }
    }

    #[test]
    fn operable_interval_examples() {
        let unit = Interval { lo: 0.0, hi: 1.0 };
        assert_eq!(
            affine_operable_interval(&[(0.2, 0.5), (0.3, 0.1)], unit, 1e-3),
            Some(unit)
        );
        let i = affine_operable_interval(&[(0.8, 0.5), (0.3, 0.1)], unit, 1e-3).unwrap();
        assert_eq!(i.lo, 0.0);
        assert!(i.hi < 0.4 && i.hi > 0.4 - 2e-3);
        assert_eq!(affine_operable_interval(&[(1.0, 0.5)], unit, 1e-3), None);
        assert_eq!(affine_operable_interval(&[(1.2, 0.0)], unit, 1e-3), None);
        let i = affine_operable_interval(&[(1.5, -1.0)], unit, 1e-3).unwrap();
        assert!(i.lo > 0.5 && i.lo < 0.502 && i.hi == 1.0);
    }

    #[test]
    fn superlevel_examples() {
        let unit = Interval { lo: 0.0, hi: 1.0 };
        let f = |p: f64| Ok(1.0 - (p - 0.5) * (p - 0.5));
        assert_eq!(
            superlevel_interval(f, unit, 0.0, 1e-3, 33).unwrap(),
            Some(unit)
        );
        assert_eq!(
            superlevel_interval(f, unit, 1.0 + 1e-9, 1e-3, 33).unwrap(),
            None
        );
        let i = superlevel_interval(f, unit, 0.99, 1e-3, 33)
            .unwrap()
            .unwrap();
        assert!((i.lo - 0.4).abs() < 1e-3 && (i.hi - 0.6).abs() < 1e-3);
        assert!(f(i.lo).unwrap() >= 0.99 && f(i.hi).unwrap() >= 0.99);
    }

    #[test]
    fn slack_constraints_give_box_maximum() {
        let mut sys = light_system();
        sys.services[1].reliability_target = 1e-6;
        let opts = CfsmaOptions {
            gamma_max_linear: 1e3,
            outer_points: 11,
            ..CfsmaOptions::default()
        };
        let r = cfsma(&sys, opts).unwrap();
        assert_eq!(r.status, CfsmaStatus::Optimal);
        assert_abs_diff_eq!(r.gamma(ServiceKind::Embb), 1e3, epsilon = 1e-6);
        assert_abs_diff_eq!(r.gamma(ServiceKind::Urllc), 1e3, epsilon = 1e-6);
    }

    #[test]
    fn unreachable_budget_is_infeasible() {
        let mut sys = light_system();
        sys.services[1].tti_s = 0.9e-3;
        sys.modes.dm.control_overhead_s = 0.2e-3;
        sys.modes.cm.control_overhead_s = 0.2e-3;
        sys.services[1].reliability_target = 0.99999;
        let opts = CfsmaOptions {
            outer_points: 11,
            ..CfsmaOptions::default()
        };
        let r = cfsma(&sys, opts).unwrap();
        assert_eq!(r.status, CfsmaStatus::Infeasible);
        assert_eq!(r.violated, Some(Constraint::Reliability));
    }

    #[test]
    fn overload_reports_operability() {
        let mut sys = light_system();
        sys.services[0].user_count = 100_000;
        let opts = CfsmaOptions {
            outer_points: 5,
            ..CfsmaOptions::default()
        };
        let r = cfsma(&sys, opts).unwrap();
        assert_eq!(r.status, CfsmaStatus::Infeasible);
        assert_eq!(r.violated, Some(Constraint::Operability));
    }

    #[test]
    fn optimal_point_satisfies_constraints() {
        let mut sys = light_system();
        sys.services[0].user_count = 240;
        sys.services[1].reliability_target = 0.99999;
        let opts = CfsmaOptions {
            outer_points: 41,
            ..CfsmaOptions::default()
        };
        let r = cfsma(&sys, opts).unwrap();
        assert_eq!(r.status, CfsmaStatus::Optimal, "{r:?}");
        let pb = Problem::new(&sys, opts).unwrap();
        let e = pb
            .evaluate(r.p_cm(ServiceKind::Embb), r.p_cm(ServiceKind::Urllc))
            .unwrap();
        assert!(e.feasible());
        assert!(r.rho_cu < 1.0 && r.rho_du < 1.0);
        assert!(r.urllc_reliability >= 0.99999);
    }

    #[test]
    fn absent_urllc_leaves_only_operability() {
        let mut sys = light_system();
        sys.services[1].user_count = 0;
        sys.services[0].user_count = 300;
        let opts = CfsmaOptions {
            outer_points: 5,
            ..CfsmaOptions::default()
        };
        let r = cfsma(&sys, opts).unwrap();
        assert_eq!(r.status, CfsmaStatus::Optimal);
        let pb = Problem::new(&sys, opts).unwrap();
        let o = pb
            .operable_interval(ServiceKind::Embb, 0.0)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(r.p_cm(ServiceKind::Embb), o.hi, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_cm(ServiceKind::Urllc), pb.p_max(), epsilon = 1e-12);
    }

    #[test]
    fn spec_requires_both_services() {
        let mut sys = light_system();
        sys.services.pop();
        assert!(cfsma(&sys, CfsmaOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn superlevel_of_concave_parabola(c in 0.1f64..0.9, w in 0.05f64..0.3) {
            let f = |p: f64| Ok(1.0 - (p - c) * (p - c));
            let target = 1.0 - w * w;
            let unit = Interval { lo: 0.0, hi: 1.0 };
            let i = superlevel_interval(f, unit, target, 1e-3, 33).unwrap().unwrap();
            prop_assert!((i.lo - (c - w).max(0.0)).abs() < 1e-3);
            prop_assert!((i.hi - (c + w).min(1.0)).abs() < 1e-3);
        }
    }
}
