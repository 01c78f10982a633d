//! One function per subcommand. Each returns tables ready for writing.

use flexsplit_core::geometry::{mar_analytic, mar_empirical, Mar};
use flexsplit_core::montecarlo::{
    des_queue, mc_coverage_multi, mc_rate_multi, sweep_outage, ClassSpec, SweepAxis, SweepRow,
};
use flexsplit_core::optimizer::cfsma;
use flexsplit_core::queueing::{
    class_arrival_rate, fcfs_sojourn_mean, ps_sojourn_mean, service_time, workload, Discipline,
    ServerKind,
};
use flexsplit_core::radio::{
    conditional_coverage, coverage_cm, coverage_dm, ergodic_rate, total_coverage, CoverageQuery,
    ModeSelector,
};
use flexsplit_core::units::{db_to_linear, linear_to_db};
use flexsplit_core::{Mode, Result, ServiceKind};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{col, num, opt, text, PlotSpec, ResultTable};

pub struct Run {
    pub tables: Vec<ResultTable>,
    pub result: Option<serde_json::Value>,
    pub summary: String,
}

pub fn mar_sweep(cfg: &ExperimentConfig) -> Result<Run> {
    let model = cfg.model(cfg.experiment.seed);
    let trials = cfg.experiment.monte_carlo.trials;
    let mut t = ResultTable::new(
        "mar-sweep",
        vec![
            col("gamma_db", "dB"),
            col("gamma_linear", "ratio"),
            col("p_cm_analytic", "probability"),
            col("p_dm_analytic", "probability"),
            col("p_cm_empirical", "probability"),
            col("p_dm_empirical", "probability"),
            col("half_width", "probability"),
            col("trials", "count"),
        ],
    )
    .with_plot(PlotSpec {
        figure: "mar_vs_gamma",
        x: "gamma_db",
        series: vec![],
        y: vec![
            "p_cm_analytic",
            "p_dm_analytic",
            "p_cm_empirical",
            "p_dm_empirical",
        ],
    });
    for &g_db in &cfg.experiment.mar_gamma_grid_db {
        let g = db_to_linear(g_db);
        let a = mar_analytic(g, model.pathloss_exponent)?;
        let e = mar_empirical(&model, g, trials)?;
        t.push(vec![
            num(g_db),
            num(g),
            num(a.p_cm),
            num(a.p_dm),
            num(e.p_cm),
            num(e.p_dm),
            num(e.half_width),
            text(e.trials),
        ]);
    }
    let summary = format!("{} PLD thresholds, {trials} topologies each", t.rows.len());
    Ok(Run {
        tables: vec![t],
        result: None,
        summary,
    })
}

pub fn coverage_sweep(cfg: &ExperimentConfig) -> Result<Run> {
    let model = cfg.model(cfg.experiment.seed);
    let mc = cfg.mc_config();
    let gammas: Vec<f64> = cfg
        .experiment
        .coverage_gamma_grid_db
        .iter()
        .map(|&d| db_to_linear(d))
        .collect();
    let t_grid: Vec<f64> = cfg
        .experiment
        .sinr_grid_db
        .iter()
        .map(|&d| db_to_linear(d))
        .collect();
    let sim = mc_coverage_multi(&model, &gammas, &t_grid, &mc)?;

    let mut cov = ResultTable::new(
        "coverage-sweep",
        vec![
            col("gamma_db", "dB"),
            col("sinr_threshold_db", "dB"),
            col("coverage_analytic", "probability"),
            col("coverage_cm_joint_analytic", "probability"),
            col("coverage_dm_joint_analytic", "probability"),
            col("coverage_cm_conditional_analytic", "probability"),
            col("coverage_dm_conditional_analytic", "probability"),
            col("coverage_mc", "probability"),
            col("coverage_mc_half_width", "probability"),
            col("coverage_cm_joint_mc", "probability"),
            col("coverage_dm_joint_mc", "probability"),
            col("trials", "count"),
        ],
    )
    .with_plot(PlotSpec {
        figure: "coverage_vs_threshold",
        x: "sinr_threshold_db",
        series: vec!["gamma_db"],
        y: vec!["coverage_analytic", "coverage_mc"],
    });
    for ((&g_db, &g), est) in cfg
        .experiment
        .coverage_gamma_grid_db
        .iter()
        .zip(&gammas)
        .zip(&sim)
    {
        for ((&t_db, &t), point) in cfg
            .experiment
            .sinr_grid_db
            .iter()
            .zip(&t_grid)
            .zip(&est.points)
        {
            let q = |sel| CoverageQuery {
                sinr_threshold_linear: t,
                gamma_linear: g,
                model: &model,
                mode_selector: sel,
            };
            cov.push(vec![
                num(g_db),
                num(t_db),
                num(total_coverage(&q(ModeSelector::Total))?),
                num(coverage_cm(&q(ModeSelector::Cm))?),
                num(coverage_dm(&q(ModeSelector::Dm))?),
                num(conditional_coverage(&model, t, g, Mode::Cm)?),
                num(conditional_coverage(&model, t, g, Mode::Dm)?),
                num(point.total.mean),
                num(point.total.half_width),
                num(point.cm.mean),
                num(point.dm.mean),
                text(point.total.trials_used),
            ]);
        }
    }

    let rates = mc_rate_multi(&model, &gammas, &mc)?;
    let mut rate = ResultTable::new(
        "coverage-sweep-rate",
        vec![
            col("gamma_db", "dB"),
            col("rate_nats_analytic", "nats/s/Hz"),
            col("rate_bits_analytic", "bits/s/Hz"),
            col("rate_nats_mc", "nats/s/Hz"),
            col("rate_nats_mc_half_width", "nats/s/Hz"),
            col("quadrature_error_estimate", "nats/s/Hz"),
        ],
    )
    .with_plot(PlotSpec {
        figure: "rate_vs_gamma",
        x: "gamma_db",
        series: vec![],
        y: vec!["rate_nats_analytic", "rate_nats_mc"],
    });
    for ((&g_db, &g), est) in cfg
        .experiment
        .coverage_gamma_grid_db
        .iter()
        .zip(&gammas)
        .zip(&rates)
    {
        let r = ergodic_rate(g, &model)?;
        rate.push(vec![
            num(g_db),
            num(r.rate_nats),
            num(r.rate_bits),
            num(est.mean),
            num(est.half_width),
            num(r.quadrature_error_estimate),
        ]);
    }
    let summary = format!(
        "{} coverage points and {} rates from {} draws",
        cov.rows.len(),
        rate.rows.len(),
        mc.trials
    );
    Ok(Run {
        tables: vec![cov, rate],
        result: None,
        summary,
    })
}

fn sweep_table(name: &str, axis: SweepAxis, rows: &[SweepRow]) -> ResultTable {
    let (axis_col, unit, figure) = match axis {
        SweepAxis::EmbbDensity => ("embb_density_per_km2", "1/km^2", "outage_vs_embb_density"),
        SweepAxis::UrllcDensity => ("urllc_density_per_km2", "1/km^2", "outage_vs_urllc_density"),
        SweepAxis::CmOverhead => ("cm_overhead_s", "s", "outage_vs_cm_overhead"),
        SweepAxis::DuEfficiency => ("du_efficiency", "ratio", "outage_vs_du_efficiency"),
    };
    let mut t = ResultTable::new(
        name,
        vec![
            col(axis_col, unit),
            col("discipline", ""),
            col("status", ""),
            col("violated", ""),
            col("p_cm_embb", "probability"),
            col("p_dm_embb", "probability"),
            col("p_cm_urllc", "probability"),
            col("p_dm_urllc", "probability"),
            col("gamma_embb_db", "dB"),
            col("gamma_urllc_db", "dB"),
            col("rate_nats", "nats/s/Hz"),
            col("rate_bits", "bits/s/Hz"),
            col("urllc_reliability", "probability"),
            col("outage", "probability"),
            col("rho_cu", "utilization"),
            col("rho_du", "utilization"),
            col("des_mode", ""),
            col("des_sojourn_analytic_s", "s"),
            col("des_sojourn_sim_s", "s"),
            col("des_sojourn_half_width_s", "s"),
        ],
    )
    .with_plot(PlotSpec {
        figure,
        x: axis_col,
        series: vec!["discipline"],
        y: vec!["outage", "p_cm_embb", "p_cm_urllc", "rate_nats"],
    });
    for r in rows {
        t.push(vec![
            num(r.value),
            text(r.discipline),
            text(format!("{:?}", r.status)),
            r.violated
                .map(|v| format!("{v:?}").to_lowercase())
                .unwrap_or_default(),
            num(r.p_cm_embb),
            num(r.p_dm_embb),
            num(r.p_cm_urllc),
            num(r.p_dm_urllc),
            num(r.gamma_embb_db),
            num(r.gamma_urllc_db),
            num(r.rate_nats),
            num(r.rate_bits),
            num(r.urllc_reliability),
            num(r.outage),
            num(r.rho_cu),
            num(r.rho_du),
            r.des.map(|d| d.mode.to_string()).unwrap_or_default(),
            opt(r.des.map(|d| d.analytic_s)),
            opt(r.des.map(|d| d.simulated.mean)),
            opt(r.des.map(|d| d.simulated.half_width)),
        ]);
    }
    t
}

fn sweep(cfg: &ExperimentConfig, name: &str, axis: SweepAxis, values: &[f64]) -> Result<Run> {
    let sys = cfg.system();
    let mc = cfg.des_config();
    let des = cfg.experiment.des_check.then_some(&mc);
    let rows = sweep_outage(
        &sys,
        axis,
        values,
        &cfg.experiment.sweep_disciplines,
        cfg.cfsma_options(),
        des,
    )?;
    let infeasible = rows
        .iter()
        .filter(|r| r.status != flexsplit_core::optimizer::CfsmaStatus::Optimal)
        .count();
    let summary = format!("{} rows along {axis}, {infeasible} infeasible", rows.len());
    Ok(Run {
        tables: vec![sweep_table(name, axis, &rows)],
        result: None,
        summary,
    })
}

pub fn density_sweep(cfg: &ExperimentConfig) -> Result<Run> {
    let d = &cfg.experiment.density_sweep;
    let axis = match d.service {
        ServiceKind::Embb => SweepAxis::EmbbDensity,
        ServiceKind::Urllc => SweepAxis::UrllcDensity,
    };
    sweep(cfg, "density-sweep", axis, &d.grid_per_km2)
}

pub fn overhead_sweep(cfg: &ExperimentConfig) -> Result<Run> {
    sweep(
        cfg,
        "overhead-sweep",
        SweepAxis::CmOverhead,
        &cfg.experiment.overhead_grid_s,
    )
}

pub fn eta_sweep(cfg: &ExperimentConfig) -> Result<Run> {
    sweep(
        cfg,
        "eta-sweep",
        SweepAxis::DuEfficiency,
        &cfg.experiment.eta_grid,
    )
}

pub fn cfsma_point(cfg: &ExperimentConfig) -> Result<Run> {
    let sys = cfg.system();
    let r = cfsma(&sys, cfg.cfsma_options())?;
    let gamma_db = |k| linear_to_db(r.gamma(k));
    let mut t = ResultTable::new(
        "cfsma",
        vec![
            col("discipline", ""),
            col("status", ""),
            col("violated", ""),
            col("p_cm_embb", "probability"),
            col("p_cm_urllc", "probability"),
            col("gamma_embb_db", "dB"),
            col("gamma_urllc_db", "dB"),
            col("rate_nats", "nats/s/Hz"),
            col("rate_bits", "bits/s/Hz"),
            col("urllc_reliability", "probability"),
            col("rho_cu", "utilization"),
            col("rho_du", "utilization"),
        ],
    );
    let violated = r
        .violated
        .map(|v| format!("{v:?}").to_lowercase())
        .unwrap_or_default();
    t.push(vec![
        text(sys.discipline),
        text(format!("{:?}", r.status)),
        violated.clone(),
        num(r.p_cm(ServiceKind::Embb)),
        num(r.p_cm(ServiceKind::Urllc)),
        num(gamma_db(ServiceKind::Embb)),
        num(gamma_db(ServiceKind::Urllc)),
        num(r.achieved_rate.rate_nats),
        num(r.achieved_rate.rate_bits),
        num(r.urllc_reliability),
        num(r.rho_cu),
        num(r.rho_du),
    ]);
    let result = json!({
        "status": format!("{:?}", r.status),
        "violated": r.violated.map(|v| format!("{v:?}").to_lowercase()),
        "gamma_star_db": {
            "embb": gamma_db(ServiceKind::Embb),
            "urllc": gamma_db(ServiceKind::Urllc),
        },
        "gamma_star_linear": r.gamma_star,
        "p_cm_star": r.p_cm_star,
        "rate_nats": r.achieved_rate.rate_nats,
        "rate_bits": r.achieved_rate.rate_bits,
        "urllc_reliability": r.urllc_reliability,
        "rho_cu": r.rho_cu,
        "rho_du": r.rho_du,
        "sets": r.sets,
    });
    let summary = format!(
        "status {:?}{}; gamma* = {:.2} dB (eMBB), {:.2} dB (URLLC); R = {:.4} nats/s/Hz; URLLC reliability {:.7}",
        r.status,
        if violated.is_empty() { String::new() } else { format!(" ({violated})") },
        gamma_db(ServiceKind::Embb),
        gamma_db(ServiceKind::Urllc),
        r.achieved_rate.rate_nats,
        r.urllc_reliability
    );
    Ok(Run {
        tables: vec![t],
        result: Some(result),
        summary,
    })
}

pub fn queue_sim(cfg: &ExperimentConfig) -> Result<Run> {
    let base = cfg.system();
    let mc = cfg.des_config();
    let q = &cfg.experiment.queue_sim;
    let mar: Vec<Mar> = base
        .services
        .iter()
        .map(|s| match s.name {
            ServiceKind::Embb => Mar::from_cm(q.p_cm_embb),
            ServiceKind::Urllc => Mar::from_cm(q.p_cm_urllc),
        })
        .collect();
    let mut t = ResultTable::new(
        "queue-sim",
        vec![
            col("discipline", ""),
            col("server", ""),
            col("service", ""),
            col("mode", ""),
            col("status", ""),
            col("arrival_rate_per_s", "1/s"),
            col("service_time_s", "s"),
            col("rho", "utilization"),
            col("sojourn_analytic_s", "s"),
            col("sojourn_sim_s", "s"),
            col("sojourn_half_width_s", "s"),
            col("replications", "count"),
        ],
    )
    .with_plot(PlotSpec {
        figure: "sojourn_by_class",
        x: "rho",
        series: vec!["discipline", "server", "service", "mode"],
        y: vec!["sojourn_analytic_s", "sojourn_sim_s"],
    });
    let load = workload(&base.services, &base.modes, &mar, &base.server)?;
    let mut unstable = 0;
    for &discipline in &cfg.experiment.sweep_disciplines {
        for server in ServerKind::ALL {
            let rho = load.get(server);
            let mut keys = Vec::new();
            let mut classes = Vec::new();
            for (i, (s, m)) in base.services.iter().zip(&mar).enumerate() {
                for mode in Mode::ALL {
                    let rate =
                        class_arrival_rate(s, mode, m.get(mode), server, &base.modes, &base.server);
                    if rate <= 0.0 {
                        continue;
                    }
                    keys.push((i, s.name, mode));
                    classes.push(ClassSpec {
                        arrival_rate: rate,
                        mean_service_s: service_time(s, mode, server, &base.modes, &base.server),
                        law: q.service_law,
                    });
                }
            }
            if classes.is_empty() {
                continue;
            }
            let stable = load.get(server) < 1.0;
            let report = if stable {
                Some(des_queue(discipline, &classes, &mc)?)
            } else {
                unstable += 1;
                None
            };
            for (k, (&(i, service, mode), class)) in keys.iter().zip(&classes).enumerate() {
                let analytic = match (stable, discipline) {
                    (false, _) => None,
                    (true, Discipline::Ps) => Some(ps_sojourn_mean(
                        mode,
                        &base.services[i],
                        server,
                        rho,
                        &base.modes,
                        &base.server,
                    )?),
                    (true, Discipline::Fcfs) => Some(fcfs_sojourn_mean(
                        mode,
                        i,
                        server,
                        &base.services,
                        &base.modes,
                        &mar,
                        &base.server,
                    )?),
                };
                let est = report.as_ref().map(|r| r.sojourn_s[k]);
                t.push(vec![
                    text(discipline),
                    text(server),
                    text(service),
                    text(mode),
                    text(if stable { "stable" } else { "unstable" }),
                    num(class.arrival_rate),
                    num(class.mean_service_s),
                    num(rho),
                    opt(analytic),
                    opt(est.map(|e| e.mean)),
                    opt(est.map(|e| e.half_width)),
                    report
                        .as_ref()
                        .map(|r| text(r.replications))
                        .unwrap_or_default(),
                ]);
            }
        }
    }
    let summary = format!(
        "{} class rows, {unstable} overloaded server(s) skipped ({} replications x {} packets)",
        t.rows.len(),
        mc.trials,
        mc.horizon_packets
    );
    Ok(Run {
        tables: vec![t],
        result: None,
        summary,
    })
}
