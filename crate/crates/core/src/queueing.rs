//! Server workloads, sojourn times, delay budget and per-service reliability.
//!
//! Processing of a packet is split between the CU and its DUs according to the
//! mode profile (`beta_cu + beta_du = 1`). Each server is a single queue:
//! processor sharing by default, or FCFS as the baseline discipline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Mar;
use crate::model::{Mode, ServiceKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceClass {
    pub name: ServiceKind,
    pub user_count: u64,
    pub arrival_rate_per_s: f64,
    pub cycles_per_packet: f64,
    pub tti_s: f64,
    pub delay_budget_s: f64,
    pub reliability_target: f64,
    pub sinr_threshold_linear: f64,
    pub gamma_linear: f64,
}

impl ServiceClass {
    pub fn embb() -> Self {
        Self {
            name: ServiceKind::Embb,
            user_count: 3000,
            arrival_rate_per_s: 100.0,
            cycles_per_packet: 5e4,
            tti_s: 6.25e-5,
            delay_budget_s: 1e-2,
            reliability_target: 0.9,
            sinr_threshold_linear: 1.0,
            gamma_linear: 1.0,
        }
    }

    pub fn urllc() -> Self {
        Self {
            name: ServiceKind::Urllc,
            user_count: 5000,
            arrival_rate_per_s: 10.0,
            cycles_per_packet: 2500.0,
            tti_s: 6.25e-5,
            delay_budget_s: 1e-3,
            reliability_target: 0.99999,
            sinr_threshold_linear: 1.0,
            gamma_linear: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(format!("{} service: {m}", self.name)));
        for (name, v) in [
            ("arrival_rate_per_s", self.arrival_rate_per_s),
            ("cycles_per_packet", self.cycles_per_packet),
            ("tti_s", self.tti_s),
            ("delay_budget_s", self.delay_budget_s),
            ("sinr_threshold_linear", self.sinr_threshold_linear),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.reliability_target > 0.0 && self.reliability_target < 1.0) {
            return bad(format!(
                "reliability_target must be in (0, 1), got {}",
                self.reliability_target
            ));
        }
        if self.delay_budget_s <= self.tti_s {
            return bad("delay_budget_s must exceed tti_s".into());
        }
        if !(self.gamma_linear >= 1.0) {
            return bad(format!(
                "gamma_linear must be >= 1, got {}",
                self.gamma_linear
            ));
        }
        Ok(())
    }

    /// Aggregate packet rate `K * lambda`.
    pub fn packet_rate(&self) -> f64 {
        self.user_count as f64 * self.arrival_rate_per_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub beta_cu: f64,
    pub beta_du: f64,
    pub control_overhead_s: f64,
    pub users_per_du: f64,
}

impl ModeProfile {
    pub fn validate(&self, mode: Mode) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(format!("{mode} profile: {m}")));
        if !(self.beta_cu > 0.0 && self.beta_cu < 1.0 && self.beta_du > 0.0 && self.beta_du < 1.0) {
            return bad("beta_cu and beta_du must be in (0, 1)".into());
        }
        if (self.beta_cu + self.beta_du - 1.0).abs() > 1e-9 {
            return bad(format!(
                "beta_cu + beta_du must be 1, got {}",
                self.beta_cu + self.beta_du
            ));
        }
        if !(self.control_overhead_s >= 0.0) || !self.control_overhead_s.is_finite() {
            return bad("control_overhead_s must be >= 0".into());
        }
        if !(self.users_per_du > 0.0) || !self.users_per_du.is_finite() {
            return bad("users_per_du must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProfiles {
    pub cm: ModeProfile,
    pub dm: ModeProfile,
}

impl Default for ModeProfiles {
    fn default() -> Self {
        Self {
            cm: ModeProfile {
                beta_cu: 0.7,
                beta_du: 0.3,
                control_overhead_s: 25e-6,
                users_per_du: 2.0,
            },
            dm: ModeProfile {
                beta_cu: 0.3,
                beta_du: 0.7,
                control_overhead_s: 0.0,
                users_per_du: 1.0,
            },
        }
    }
}

impl ModeProfiles {
    pub fn get(&self, mode: Mode) -> &ModeProfile {
        match mode {
            Mode::Cm => &self.cm,
            Mode::Dm => &self.dm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cm.validate(Mode::Cm)?;
        self.dm.validate(Mode::Dm)?;
        if self.cm.control_overhead_s < self.dm.control_overhead_s {
            return Err(Error::InvalidModel(
                "CM control overhead must be >= DM control overhead".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub cu_rate_cycles_per_s: f64,
    pub du_efficiency: f64,
    pub du_count: u64,
    pub retrans_time_s: f64,
}

impl Default for ServerSpec {
    fn default() -> Self {
        Self {
            cu_rate_cycles_per_s: 1e9,
            du_efficiency: 0.2,
            du_count: 20,
            retrans_time_s: 1e-4,
        }
    }
}

impl ServerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cu_rate_cycles_per_s > 0.0) || !self.cu_rate_cycles_per_s.is_finite() {
            return Err(Error::InvalidModel(
                "cu_rate_cycles_per_s must be > 0".into(),
            ));
        }
        if !(self.du_efficiency > 0.0 && self.du_efficiency < 1.0) {
            return Err(Error::InvalidModel(format!(
                "du_efficiency must be in (0, 1), got {}",
                self.du_efficiency
            )));
        }
        if self.du_count < 1 {
            return Err(Error::InvalidModel("du_count must be >= 1".into()));
        }
        if !(self.retrans_time_s >= 0.0) || !self.retrans_time_s.is_finite() {
            return Err(Error::InvalidModel("retrans_time_s must be >= 0".into()));
        }
        Ok(())
    }

    pub fn rate(&self, server: ServerKind) -> f64 {
        match server {
            ServerKind::Cu => self.cu_rate_cycles_per_s,
            ServerKind::Du => self.du_efficiency * self.cu_rate_cycles_per_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerKind {
    Cu,
    Du,
}

impl ServerKind {
    pub const ALL: [ServerKind; 2] = [ServerKind::Cu, ServerKind::Du];
}

impl fmt::Display for ServerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServerKind::Cu => "cu",
            ServerKind::Du => "du",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discipline {
    #[default]
    Ps,
    Fcfs,
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Discipline::Ps => "ps",
            Discipline::Fcfs => "fcfs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workload {
    pub rho_cu: f64,
    pub rho_du: f64,
}

impl Workload {
    pub fn get(&self, server: ServerKind) -> f64 {
        match server {
            ServerKind::Cu => self.rho_cu,
            ServerKind::Du => self.rho_du,
        }
    }

    /// Both servers below saturation. An idle server (`rho = 0`) counts as operable.
    pub fn is_operable(&self) -> bool {
        (0.0..1.0).contains(&self.rho_cu) && (0.0..1.0).contains(&self.rho_du)
    }

    pub fn max(&self) -> f64 {
        self.rho_cu.max(self.rho_du)
    }
}

fn check_mix(services: &[ServiceClass], mar: &[Mar]) -> Result<()> {
    if services.len() != mar.len() {
        return Err(Error::InvalidArgument(format!(
            "{} services but {} MAR entries",
            services.len(),
            mar.len()
        )));
    }
    for (s, m) in services.iter().zip(mar) {
        if (m.p_cm + m.p_dm - 1.0).abs() > 1e-9 || m.p_cm < 0.0 || m.p_dm < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "MAR of {} must lie on the simplex, got ({}, {})",
                s.name, m.p_cm, m.p_dm
            )));
        }
    }
    Ok(())
}

/// Packet arrival rate seen by one server of kind `server` from the
/// `(service, mode)` class. DU traffic is per DU.
pub fn class_arrival_rate(
    service: &ServiceClass,
    mode: Mode,
    p_mode: f64,
    server: ServerKind,
    modes: &ModeProfiles,
    spec: &ServerSpec,
) -> f64 {
    let base = service.packet_rate() * p_mode;
    match server {
        ServerKind::Cu => base,
        ServerKind::Du => modes.get(mode).users_per_du * base / spec.du_count as f64,
    }
}

/// Time to process one packet alone on the server.
pub fn service_time(
    service: &ServiceClass,
    mode: Mode,
    server: ServerKind,
    modes: &ModeProfiles,
    spec: &ServerSpec,
) -> f64 {
    let p = modes.get(mode);
    let beta = match server {
        ServerKind::Cu => p.beta_cu,
        ServerKind::Du => p.beta_du,
    };
    beta * service.cycles_per_packet / spec.rate(server)
}

/// Utilizations of the CU and of one DU. Values at or above 1 are returned as is.
pub fn workload(
    services: &[ServiceClass],
    modes: &ModeProfiles,
    mar: &[Mar],
    spec: &ServerSpec,
) -> Result<Workload> {
    check_mix(services, mar)?;
    let mut rho = [0.0; 2];
    for (server, r) in ServerKind::ALL.into_iter().zip(rho.iter_mut()) {
        for (s, m) in services.iter().zip(mar) {
            for mode in Mode::ALL {
                *r += class_arrival_rate(s, mode, m.get(mode), server, modes, spec)
                    * service_time(s, mode, server, modes, spec);
            }
        }
    }
    Ok(Workload {
        rho_cu: rho[0],
        rho_du: rho[1],
    })
}

/// Mean sojourn of a packet with standalone service time `tau` under PS at load `rho`.
pub fn ps_sojourn(tau: f64, rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::NotOperable { rho });
    }
    Ok(tau / (1.0 - rho))
}

pub fn ps_sojourn_mean(
    mode: Mode,
    service: &ServiceClass,
    server: ServerKind,
    rho: f64,
    modes: &ModeProfiles,
    spec: &ServerSpec,
) -> Result<f64> {
    ps_sojourn(service_time(service, mode, server, modes, spec), rho)
}

/// Geometric number-in-system law of the PS queue.
pub fn queue_length_pmf(rho: f64, q: u64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::NotOperable { rho });
    }
    if rho == 0.0 {
        return Ok(if q == 0 { 1.0 } else { 0.0 });
    }
    Ok((q as f64 * rho.ln()).exp() * (1.0 - rho))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassLoad {
    pub arrival_rate: f64,
    pub service_time: f64,
}

/// Mean FCFS waiting time for Poisson classes with deterministic service.
pub fn pk_waiting(classes: &[ClassLoad]) -> Result<f64> {
    let rho: f64 = classes
        .iter()
        .map(|c| c.arrival_rate * c.service_time)
        .sum();
    if !(rho < 1.0) {
        return Err(Error::NotOperable { rho });
    }
    let second: f64 = classes
        .iter()
        .map(|c| c.arrival_rate * c.service_time * c.service_time)
        .sum();
    Ok(second / (2.0 * (1.0 - rho)))
}

fn server_classes(
    services: &[ServiceClass],
    modes: &ModeProfiles,
    mar: &[Mar],
    spec: &ServerSpec,
    server: ServerKind,
) -> Vec<ClassLoad> {
    let mut out = Vec::with_capacity(services.len() * 2);
    for (s, m) in services.iter().zip(mar) {
        for mode in Mode::ALL {
            out.push(ClassLoad {
                arrival_rate: class_arrival_rate(s, mode, m.get(mode), server, modes, spec),
                service_time: service_time(s, mode, server, modes, spec),
            });
        }
    }
    out
}

/// FCFS mean sojourn of the `(services[service_index], mode)` class at `server`.
pub fn fcfs_sojourn_mean(
    mode: Mode,
    service_index: usize,
    server: ServerKind,
    services: &[ServiceClass],
    modes: &ModeProfiles,
    mar: &[Mar],
    spec: &ServerSpec,
) -> Result<f64> {
    check_mix(services, mar)?;
    let service = services.get(service_index).ok_or_else(|| {
        Error::InvalidArgument(format!("service index {service_index} out of range"))
    })?;
    let wait = pk_waiting(&server_classes(services, modes, mar, spec, server))?;
    Ok(wait + service_time(service, mode, server, modes, spec))
}

pub fn one_way_delay(cu_s: f64, du_s: f64, tti_s: f64, control_overhead_s: f64) -> f64 {
    cu_s + du_s + tti_s + control_overhead_s
}

/// Largest number of retransmissions that still fits in the delay budget.
pub fn max_retransmissions(one_way_s: f64, delay_budget_s: f64, retrans_time_s: f64) -> u32 {
    let slack = (delay_budget_s - one_way_s).max(0.0);
    let period = one_way_s + retrans_time_s;
    if slack == 0.0 {
        return 0;
    }
    if !(period > 0.0) {
        return u32::MAX;
    }
    // Relative slack keeps exact ratios like 0.8 / 0.4 from rounding down.
    let n = (slack / period * (1.0 + 1e-12)).floor();
    if n >= u32::MAX as f64 {
        u32::MAX
    } else {
        n as u32
    }
}

/// Probability that one of `n_max + 1` independent attempts succeeds.
pub fn retrans_success(p_succ: f64, n_max: u32) -> f64 {
    let fail = (1.0 - p_succ).clamp(0.0, 1.0);
    1.0 - fail.powf(n_max as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTerm {
    pub p_succ: f64,
    pub n_max: u32,
    pub p_mode: f64,
}

/// Mode-weighted mixture of per-mode retransmission success.
pub fn reliability(terms: &[ModeTerm]) -> f64 {
    terms
        .iter()
        .map(|t| t.p_mode * retrans_success(t.p_succ, t.n_max))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DelayKey {
    pub mode: Mode,
    pub service: ServiceKind,
}

/// Delays of every `(mode, service)` class for one MAR allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub rho_cu: f64,
    pub rho_du: f64,
    pub sojourn_s: BTreeMap<(Mode, ServiceKind, ServerKind), f64>,
    pub one_way_s: BTreeMap<DelayKey, f64>,
}

impl QueueState {
    pub fn workload(&self) -> Workload {
        Workload {
            rho_cu: self.rho_cu,
            rho_du: self.rho_du,
        }
    }

    pub fn one_way(&self, mode: Mode, service: ServiceKind) -> f64 {
        self.one_way_s[&DelayKey { mode, service }]
    }
}

/// Evaluates workloads and delays; fails with `NotOperable` when a server saturates.
pub fn queue_state(
    services: &[ServiceClass],
    modes: &ModeProfiles,
    mar: &[Mar],
    spec: &ServerSpec,
    discipline: Discipline,
) -> Result<QueueState> {
    let w = workload(services, modes, mar, spec)?;
    if !w.is_operable() {
        return Err(Error::NotOperable { rho: w.max() });
    }
    let waits = match discipline {
        Discipline::Ps => [0.0, 0.0],
        Discipline::Fcfs => [
            pk_waiting(&server_classes(services, modes, mar, spec, ServerKind::Cu))?,
            pk_waiting(&server_classes(services, modes, mar, spec, ServerKind::Du))?,
        ],
    };
    let mut sojourn_s = BTreeMap::new();
    let mut one_way_s = BTreeMap::new();
    for s in services {
        for mode in Mode::ALL {
            let mut parts = [0.0; 2];
            for (i, server) in ServerKind::ALL.into_iter().enumerate() {
                let tau = service_time(s, mode, server, modes, spec);
                parts[i] = match discipline {
                    Discipline::Ps => ps_sojourn(tau, w.get(server))?,
                    Discipline::Fcfs => waits[i] + tau,
                };
                sojourn_s.insert((mode, s.name, server), parts[i]);
            }
            one_way_s.insert(
                DelayKey {
                    mode,
                    service: s.name,
                },
                one_way_delay(
                    parts[0],
                    parts[1],
                    s.tti_s,
                    modes.get(mode).control_overhead_s,
                ),
            );
        }
    }
    Ok(QueueState {
        rho_cu: w.rho_cu,
        rho_du: w.rho_du,
        sojourn_s,
        one_way_s,
    })
}

/// Delay-budget reliability of `service` given per-mode success probabilities.
pub fn service_reliability(
    service: &ServiceClass,
    state: &QueueState,
    mar: &Mar,
    p_succ_cm: f64,
    p_succ_dm: f64,
    spec: &ServerSpec,
) -> f64 {
    let term = |mode: Mode, p_succ: f64| ModeTerm {
        p_succ,
        n_max: max_retransmissions(
            state.one_way(mode, service.name),
            service.delay_budget_s,
            spec.retrans_time_s,
        ),
        p_mode: mar.get(mode),
    };
    reliability(&[term(Mode::Cm, p_succ_cm), term(Mode::Dm, p_succ_dm)])
}
