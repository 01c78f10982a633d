//! Parameter sweeps over a full system: one CFSMA run per grid point and
//! discipline, with outage `1 - reliability` at the selected thresholds.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::des::{des_queue, ClassSpec, ServiceLaw};
use super::{McConfig, McEstimate};
use crate::geometry::Mar;
use crate::model::{Mode, ServiceKind};
use crate::optimizer::{cfsma, CfsmaOptions, CfsmaStatus, Constraint, SystemSpec};
use crate::queueing::{class_arrival_rate, queue_state, service_time, Discipline, ServerKind};
use crate::units::linear_to_db;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// eMBB users per km².
    EmbbDensity,
    /// URLLC users per km².
    UrllcDensity,
    /// CM control overhead in seconds.
    CmOverhead,
    /// DU efficiency factor.
    DuEfficiency,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::EmbbDensity => "embb_density_per_km2",
            SweepAxis::UrllcDensity => "urllc_density_per_km2",
            SweepAxis::CmOverhead => "cm_overhead_s",
            SweepAxis::DuEfficiency => "du_efficiency",
        })
    }
}

impl SweepAxis {
    /// Copy of `base` with the axis set to `value`. Densities become user
    /// counts over the model window.
    pub fn apply(&self, base: &SystemSpec, value: f64) -> Result<SystemSpec> {
        let mut sys = base.clone();
        let set_density = |sys: &mut SystemSpec, kind: ServiceKind| -> Result<()> {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "density must be >= 0, got {value}"
                )));
            }
            let count = (value * sys.model.area_km2()).round() as u64;
            sys.model.user_density_per_km2.insert(kind, value);
            for s in sys.services.iter_mut().filter(|s| s.name == kind) {
                s.user_count = count;
            }
            Ok(())
        };
        match self {
            SweepAxis::EmbbDensity => set_density(&mut sys, ServiceKind::Embb)?,
            SweepAxis::UrllcDensity => set_density(&mut sys, ServiceKind::Urllc)?,
            SweepAxis::CmOverhead => sys.modes.cm.control_overhead_s = value,
            SweepAxis::DuEfficiency => sys.server.du_efficiency = value,
        }
        Ok(sys)
    }
}

/// Simulated vs analytic CU sojourn of the dominant URLLC class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesCheck {
    pub mode: Mode,
    pub analytic_s: f64,
    pub simulated: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub discipline: Discipline,
    pub status: CfsmaStatus,
    pub violated: Option<Constraint>,
    pub p_cm_embb: f64,
    pub p_dm_embb: f64,
    pub p_cm_urllc: f64,
    pub p_dm_urllc: f64,
    pub gamma_embb_db: f64,
    pub gamma_urllc_db: f64,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub urllc_reliability: f64,
    pub outage: f64,
    pub rho_cu: f64,
    pub rho_du: f64,
    pub des: Option<DesCheck>,
}

fn des_check(sys: &SystemSpec, p_e: f64, p_u: f64, cfg: &McConfig) -> Result<Option<DesCheck>> {
    let mar: Vec<Mar> = sys
        .services
        .iter()
        .map(|s| match s.name {
            ServiceKind::Embb => Mar::from_cm(p_e),
            ServiceKind::Urllc => Mar::from_cm(p_u),
        })
        .collect();
    let state = match queue_state(&sys.services, &sys.modes, &mar, &sys.server, sys.discipline) {
        Ok(s) => s,
        Err(Error::NotOperable { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mode = if p_u >= 0.5 { Mode::Cm } else { Mode::Dm };
    let mut classes = Vec::new();
    let mut target = None;
    for (s, m) in sys.services.iter().zip(&mar) {
        for md in Mode::ALL {
            let rate =
                class_arrival_rate(s, md, m.get(md), ServerKind::Cu, &sys.modes, &sys.server);
            if rate <= 0.0 {
                continue;
            }
            if s.name == ServiceKind::Urllc && md == mode {
                target = Some(classes.len());
            }
            classes.push(ClassSpec {
                arrival_rate: rate,
                mean_service_s: service_time(s, md, ServerKind::Cu, &sys.modes, &sys.server),
                law: ServiceLaw::Deterministic,
            });
        }
    }
    let Some(target) = target else {
        return Ok(None);
    };
    let report = des_queue(sys.discipline, &classes, cfg)?;
    let urllc = sys.service(ServiceKind::Urllc).name;
    Ok(Some(DesCheck {
        mode,
        analytic_s: state.sojourn_s[&(mode, urllc, ServerKind::Cu)],
        simulated: report.sojourn_s[target],
    }))
}

fn row(
    base: &SystemSpec,
    axis: SweepAxis,
    value: f64,
    discipline: Discipline,
    opts: CfsmaOptions,
    des: Option<&McConfig>,
) -> Result<SweepRow> {
    let mut sys = axis.apply(base, value)?;
    sys.discipline = discipline;
    let r = cfsma(&sys, opts)?;
    let p_e = r.p_cm(ServiceKind::Embb);
    let p_u = r.p_cm(ServiceKind::Urllc);
    let des = match des {
        Some(cfg) if r.status == CfsmaStatus::Optimal => des_check(&sys, p_e, p_u, cfg)?,
        _ => None,
    };
    Ok(SweepRow {
        axis,
        value,
        discipline,
        status: r.status,
        violated: r.violated,
        p_cm_embb: p_e,
        p_dm_embb: 1.0 - p_e,
        p_cm_urllc: p_u,
        p_dm_urllc: 1.0 - p_u,
        gamma_embb_db: linear_to_db(r.gamma(ServiceKind::Embb)),
        gamma_urllc_db: linear_to_db(r.gamma(ServiceKind::Urllc)),
        rate_nats: r.achieved_rate.rate_nats,
        rate_bits: r.achieved_rate.rate_bits,
        urllc_reliability: r.urllc_reliability,
        outage: 1.0 - r.urllc_reliability,
        rho_cu: r.rho_cu,
        rho_du: r.rho_du,
        des,
    })
}

/// One row per `(value, discipline)`, in grid order. Infeasible points are
/// recorded in the row; numerical failures abort the sweep.
pub fn sweep_outage(
    scenario: &SystemSpec,
    axis: SweepAxis,
    values: &[f64],
    disciplines: &[Discipline],
    opts: CfsmaOptions,
    des: Option<&McConfig>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() || disciplines.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let jobs: Vec<(f64, Discipline)> = values
        .iter()
        .flat_map(|&v| disciplines.iter().map(move |&d| (v, d)))
        .collect();
    jobs.par_iter()
        .map(|&(v, d)| row(scenario, axis, v, d, opts, des))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkModel;
    use crate::optimizer::SuccessModel;
    use crate::queueing::{ModeProfiles, ServerSpec, ServiceClass};

    fn scenario() -> SystemSpec {
        SystemSpec {
            model: NetworkModel::default(),
            services: vec![
                ServiceClass {
                    user_count: 100,
                    ..ServiceClass::embb()
                },
                ServiceClass {
                    user_count: 500,
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

    fn quick() -> CfsmaOptions {
        CfsmaOptions {
            outer_points: 21,
            ..CfsmaOptions::default()
        }
    }

    #[test]
    fn axis_application() {
        let s = SweepAxis::EmbbDensity.apply(&scenario(), 250.4).unwrap();
        assert_eq!(s.service(ServiceKind::Embb).user_count, 250);
        assert_eq!(s.model.user_density(ServiceKind::Embb), 250.4);
        let s = SweepAxis::CmOverhead.apply(&scenario(), 5e-5).unwrap();
        assert_eq!(s.modes.cm.control_overhead_s, 5e-5);
        let s = SweepAxis::DuEfficiency.apply(&scenario(), 0.1).unwrap();
        assert_eq!(s.server.du_efficiency, 0.1);
        assert!(SweepAxis::UrllcDensity.apply(&scenario(), -1.0).is_err());
    }

    #[test]
    fn rows_are_consistent() {
        let rows = sweep_outage(
            &scenario(),
            SweepAxis::EmbbDensity,
            &[100.0, 700.0],
            &[Discipline::Ps, Discipline::Fcfs],
            quick(),
            None,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert_eq!(r.p_cm_embb + r.p_dm_embb, 1.0);
            assert_eq!(r.p_cm_urllc + r.p_dm_urllc, 1.0);
            assert_eq!(r.outage, 1.0 - r.urllc_reliability);
        }
        assert_eq!(rows[0].status, CfsmaStatus::Optimal);
        assert_eq!(rows[3].status, CfsmaStatus::Infeasible);
        assert!(sweep_outage(
            &scenario(),
            SweepAxis::EmbbDensity,
            &[],
            &[Discipline::Ps],
            quick(),
            None
        )
        .is_err());
    }

    #[test]
    fn des_check_tracks_analytic_sojourn() {
        let cfg = McConfig {
            trials: 2,
            warmup_packets: 2_000,
            horizon_packets: 100_000,
            ..McConfig::default()
        };
        let rows = sweep_outage(
            &scenario(),
            SweepAxis::EmbbDensity,
            &[200.0],
            &[Discipline::Ps],
            quick(),
            Some(&cfg),
        )
        .unwrap();
        let d = rows[0].des.expect("feasible row carries a DES check");
        let rel = (d.simulated.mean - d.analytic_s).abs() / d.analytic_s;
        assert!(rel < 0.05, "{d:?}");
    }
}
