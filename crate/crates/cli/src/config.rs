//! Experiment configuration: versioned JSON, decibel fields suffixed `_db` or
//! `_dbm`, durations suffixed `_s`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use flexsplit_core::montecarlo::{McConfig, ServiceLaw};
use flexsplit_core::optimizer::{CfsmaOptions, SuccessModel, SystemSpec};
use flexsplit_core::queueing::{Discipline, ModeProfile, ModeProfiles, ServerSpec, ServiceClass};
use flexsplit_core::units::db_to_linear;
use flexsplit_core::{NetworkModel, ServiceKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Shipped defaults.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");

/// Free-form notes allowed in every section. Not part of the config hash.
type Comment = Option<serde_json::Value>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing)]
    pub _comment: Comment,
    pub network: NetworkSection,
    pub services: Vec<ServiceSection>,
    pub modes: ModesSection,
    pub server: ServerSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default, skip_serializing)]
    pub _comment: Comment,
    pub du_density_per_km2: f64,
    pub pathloss_exponent: f64,
    /// Rate of the exponential fading power.
    pub fading_mean: f64,
    pub tx_power_dbm: f64,
    /// `null` switches noise off.
    pub noise_dbm: Option<f64>,
    pub window_side_m: f64,
    pub max_comp_dus: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    #[serde(default, skip_serializing)]
    pub _comment: Comment,
    pub name: ServiceKind,
    pub user_density_per_km2: f64,
    pub arrival_rate_per_s: f64,
    pub cycles_per_packet: f64,
    pub tti_s: f64,
    pub delay_budget_s: f64,
    pub reliability_target: f64,
    pub sinr_threshold_db: f64,
    pub gamma_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    #[serde(default, skip_serializing)]
    pub _comment: Comment,
    pub cm: ModeSection,
    pub dm: ModeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub beta_cu: f64,
    pub beta_du: f64,
    pub control_overhead_s: f64,
    pub users_per_du: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    #[serde(default, skip_serializing)]
    pub _comment: Comment,
    pub cu_rate_cycles_per_s: f64,
    pub du_efficiency: f64,
    pub du_count: u64,
    pub retrans_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing)]
    pub _comment: Comment,
    pub seed: u64,
    pub discipline: Discipline,
    pub success_model: SuccessModel,
    pub output_dir: String,
    pub monte_carlo: MonteCarloSection,
    pub optimizer: OptimizerSection,
    pub mar_gamma_grid_db: Vec<f64>,
    pub coverage_gamma_grid_db: Vec<f64>,
    pub sinr_grid_db: Vec<f64>,
    pub density_sweep: DensitySweepSection,
    pub overhead_grid_s: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub sweep_disciplines: Vec<Discipline>,
    pub des_check: bool,
    pub queue_sim: QueueSimSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    /// Topology draws.
    pub trials: usize,
    /// Independent queue-simulation runs.
    pub replications: usize,
    pub warmup_packets: u64,
    pub horizon_packets: u64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub tol: f64,
    pub gamma_max_db: f64,
    pub outer_points: usize,
    pub coarse_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySweepSection {
    pub service: ServiceKind,
    pub grid_per_km2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSimSection {
    pub p_cm_embb: f64,
    pub p_cm_urllc: f64,
    pub service_law: ServiceLaw,
}

/// Problem with a config, located by its JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses a config, reporting the JSON path of the first offending field.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let parent = e.path().to_string();
        let inner = e.into_inner().to_string();
        // serde reports a missing field against its parent; name the field itself.
        let missing = inner
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
            .map(str::to_owned);
        match missing {
            Some(field) if parent == "." => err(field, inner),
            Some(field) => err(format!("{parent}.{field}"), inner),
            None => err(parent, inner),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        err(
            path.display().to_string(),
            format!("cannot read config: {e}"),
        )
    })?;
    parse(&text)
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(
            path,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(path, format!("must be >= 0, got {v}")))
    }
}

fn nonempty<T>(path: &str, v: &[T]) -> Result<(), ConfigError> {
    if v.is_empty() {
        Err(err(path, "grid must not be empty"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(err(
                "schema_version",
                format!(
                    "unsupported schema version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        let n = &self.network;
        positive("network.du_density_per_km2", n.du_density_per_km2)?;
        if !(n.pathloss_exponent > 2.0 && n.pathloss_exponent.is_finite()) {
            return Err(err(
                "network.pathloss_exponent",
                format!("must be > 2, got {}", n.pathloss_exponent),
            ));
        }
        positive("network.fading_mean", n.fading_mean)?;
        if !n.tx_power_dbm.is_finite() {
            return Err(err("network.tx_power_dbm", "must be finite"));
        }
        if n.noise_dbm.is_some_and(|x| !x.is_finite()) {
            return Err(err("network.noise_dbm", "must be finite or null"));
        }
        positive("network.window_side_m", n.window_side_m)?;
        if n.max_comp_dus == 0 {
            return Err(err("network.max_comp_dus", "must be >= 1"));
        }
        self.model(0)
            .validate()
            .map_err(|e| err("network", e.to_string()))?;

        for kind in [ServiceKind::Embb, ServiceKind::Urllc] {
            let count = self.services.iter().filter(|s| s.name == kind).count();
            if count != 1 {
                return Err(err(
                    "services",
                    format!("need exactly one {kind} service, found {count}"),
                ));
            }
        }
        for (i, s) in self.services.iter().enumerate() {
            let p = |f: &str| format!("services[{i}].{f}");
            nonnegative(&p("user_density_per_km2"), s.user_density_per_km2)?;
            positive(&p("arrival_rate_per_s"), s.arrival_rate_per_s)?;
            positive(&p("cycles_per_packet"), s.cycles_per_packet)?;
            positive(&p("tti_s"), s.tti_s)?;
            positive(&p("delay_budget_s"), s.delay_budget_s)?;
            if !(s.reliability_target > 0.0 && s.reliability_target < 1.0) {
                return Err(err(p("reliability_target"), "must be in (0, 1)"));
            }
            if !s.sinr_threshold_db.is_finite() {
                return Err(err(p("sinr_threshold_db"), "must be finite"));
            }
            if !(s.gamma_db >= 0.0 && s.gamma_db.is_finite()) {
                return Err(err(p("gamma_db"), "must be >= 0 dB"));
            }
            self.service(s)
                .validate()
                .map_err(|e| err(format!("services[{i}]"), e.to_string()))?;
        }

        for (name, m) in [("cm", &self.modes.cm), ("dm", &self.modes.dm)] {
            let p = |f: &str| format!("modes.{name}.{f}");
            nonnegative(&p("beta_cu"), m.beta_cu)?;
            nonnegative(&p("beta_du"), m.beta_du)?;
            nonnegative(&p("control_overhead_s"), m.control_overhead_s)?;
            positive(&p("users_per_du"), m.users_per_du)?;
        }
        self.mode_profiles()
            .validate()
            .map_err(|e| err("modes", e.to_string()))?;

        positive(
            "server.cu_rate_cycles_per_s",
            self.server.cu_rate_cycles_per_s,
        )?;
        if !(self.server.du_efficiency > 0.0 && self.server.du_efficiency < 1.0) {
            return Err(err("server.du_efficiency", "must be in (0, 1)"));
        }
        if self.server.du_count == 0 {
            return Err(err("server.du_count", "must be >= 1"));
        }
        nonnegative("server.retrans_time_s", self.server.retrans_time_s)?;

        let x = &self.experiment;
        let mc = &x.monte_carlo;
        if mc.trials == 0 {
            return Err(err("experiment.monte_carlo.trials", "must be >= 1"));
        }
        if mc.replications == 0 {
            return Err(err("experiment.monte_carlo.replications", "must be >= 1"));
        }
        if mc.horizon_packets <= mc.warmup_packets {
            return Err(err(
                "experiment.monte_carlo.horizon_packets",
                "must exceed warmup_packets",
            ));
        }
        if !(mc.confidence > 0.0 && mc.confidence < 1.0) {
            return Err(err(
                "experiment.monte_carlo.confidence",
                "must be in (0, 1)",
            ));
        }
        self.cfsma_options()
            .validate()
            .map_err(|e| err("experiment.optimizer", e.to_string()))?;
        nonempty("experiment.mar_gamma_grid_db", &x.mar_gamma_grid_db)?;
        nonempty(
            "experiment.coverage_gamma_grid_db",
            &x.coverage_gamma_grid_db,
        )?;
        nonempty("experiment.sinr_grid_db", &x.sinr_grid_db)?;
        nonempty(
            "experiment.density_sweep.grid_per_km2",
            &x.density_sweep.grid_per_km2,
        )?;
        nonempty("experiment.overhead_grid_s", &x.overhead_grid_s)?;
        nonempty("experiment.eta_grid", &x.eta_grid)?;
        nonempty("experiment.sweep_disciplines", &x.sweep_disciplines)?;
        for (path, grid) in [
            ("experiment.mar_gamma_grid_db", &x.mar_gamma_grid_db),
            (
                "experiment.coverage_gamma_grid_db",
                &x.coverage_gamma_grid_db,
            ),
        ] {
            for (i, &g) in grid.iter().enumerate() {
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(err(
                        format!("{path}[{i}]"),
                        "PLD thresholds must be >= 0 dB",
                    ));
                }
            }
        }
        for (i, &t) in x.sinr_grid_db.iter().enumerate() {
            if !t.is_finite() {
                return Err(err(
                    format!("experiment.sinr_grid_db[{i}]"),
                    "must be finite",
                ));
            }
        }
        for (i, &d) in x.density_sweep.grid_per_km2.iter().enumerate() {
            nonnegative(&format!("experiment.density_sweep.grid_per_km2[{i}]"), d)?;
        }
        for (i, &t) in x.overhead_grid_s.iter().enumerate() {
            let path = format!("experiment.overhead_grid_s[{i}]");
            nonnegative(&path, t)?;
            if t < self.modes.dm.control_overhead_s {
                return Err(err(path, "CM overhead must be >= DM overhead"));
            }
        }
        for (i, &e) in x.eta_grid.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(err(
                    format!("experiment.eta_grid[{i}]"),
                    "must be in (0, 1)",
                ));
            }
        }
        for (name, p) in [
            ("p_cm_embb", x.queue_sim.p_cm_embb),
            ("p_cm_urllc", x.queue_sim.p_cm_urllc),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(err(
                    format!("experiment.queue_sim.{name}"),
                    "must be in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    pub fn area_km2(&self) -> f64 {
        let side_km = self.network.window_side_m / 1000.0;
        side_km * side_km
    }

    pub fn model(&self, seed: u64) -> NetworkModel {
        let n = &self.network;
        NetworkModel {
            du_density_per_km2: n.du_density_per_km2,
            user_density_per_km2: self
                .services
                .iter()
                .map(|s| (s.name, s.user_density_per_km2))
                .collect::<BTreeMap<_, _>>(),
            pathloss_exponent: n.pathloss_exponent,
            fading_mean: n.fading_mean,
            tx_power_dbm: n.tx_power_dbm,
            noise_dbm: n.noise_dbm.unwrap_or(f64::NEG_INFINITY),
            window_side_m: n.window_side_m,
            max_comp_dus: n.max_comp_dus,
            rng_seed: seed,
        }
    }

    fn service(&self, s: &ServiceSection) -> ServiceClass {
        ServiceClass {
            name: s.name,
            user_count: (s.user_density_per_km2 * self.area_km2()).round() as u64,
            arrival_rate_per_s: s.arrival_rate_per_s,
            cycles_per_packet: s.cycles_per_packet,
            tti_s: s.tti_s,
            delay_budget_s: s.delay_budget_s,
            reliability_target: s.reliability_target,
            sinr_threshold_linear: db_to_linear(s.sinr_threshold_db),
            gamma_linear: db_to_linear(s.gamma_db),
        }
    }

    pub fn mode_profiles(&self) -> ModeProfiles {
        let conv = |m: &ModeSection| ModeProfile {
            beta_cu: m.beta_cu,
            beta_du: m.beta_du,
            control_overhead_s: m.control_overhead_s,
            users_per_du: m.users_per_du,
        };
        ModeProfiles {
            cm: conv(&self.modes.cm),
            dm: conv(&self.modes.dm),
        }
    }

    pub fn server_spec(&self) -> ServerSpec {
        ServerSpec {
            cu_rate_cycles_per_s: self.server.cu_rate_cycles_per_s,
            du_efficiency: self.server.du_efficiency,
            du_count: self.server.du_count,
            retrans_time_s: self.server.retrans_time_s,
        }
    }

    pub fn system(&self) -> SystemSpec {
        SystemSpec {
            model: self.model(self.experiment.seed),
            services: self.services.iter().map(|s| self.service(s)).collect(),
            modes: self.mode_profiles(),
            server: self.server_spec(),
            discipline: self.experiment.discipline,
            success: self.experiment.success_model,
        }
    }

    pub fn mc_config(&self) -> McConfig {
        let mc = &self.experiment.monte_carlo;
        McConfig {
            trials: mc.trials,
            seed: self.experiment.seed,
            warmup_packets: mc.warmup_packets,
            horizon_packets: mc.horizon_packets,
            confidence: mc.confidence,
        }
    }

    /// Queue simulation settings: one replication per trial.
    pub fn des_config(&self) -> McConfig {
        McConfig {
            trials: self.experiment.monte_carlo.replications,
            ..self.mc_config()
        }
    }

    pub fn cfsma_options(&self) -> CfsmaOptions {
        let o = &self.experiment.optimizer;
        CfsmaOptions {
            tol: o.tol,
            gamma_max_linear: db_to_linear(o.gamma_max_db),
            outer_points: o.outer_points,
            coarse_points: o.coarse_points,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, comments excluded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_value() -> serde_json::Value {
        serde_json::from_str(DEFAULT_CONFIG).unwrap()
    }

    #[test]
    fn shipped_default_reproduces_table_values() {
        let cfg = parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(cfg.network.du_density_per_km2, 20.0);
        assert_eq!(cfg.network.pathloss_exponent, 4.0);
        assert_eq!(cfg.network.noise_dbm, Some(-90.0));
        assert_eq!(cfg.area_km2(), 1.0);
        assert_eq!(cfg.server.cu_rate_cycles_per_s, 1e9);
        assert_eq!(cfg.server.retrans_time_s, 1e-4);
        let sys = cfg.system();
        let e = sys.service(ServiceKind::Embb);
        let u = sys.service(ServiceKind::Urllc);
        assert_eq!((e.arrival_rate_per_s, u.arrival_rate_per_s), (100.0, 10.0));
        assert_eq!((e.cycles_per_packet, u.cycles_per_packet), (5e4, 2500.0));
        assert_eq!(u.delay_budget_s, 1e-3);
        assert_eq!(u.reliability_target, 0.99999);
        assert_eq!(u.sinr_threshold_linear, 1.0);
        assert_eq!(u.tti_s, 6.25e-5);
        assert_eq!(cfg.modes.dm.control_overhead_s, 0.0);
    }

    #[test]
    fn missing_field_is_named_by_full_path() {
        let mut v = default_value();
        v["network"]
            .as_object_mut()
            .unwrap()
            .remove("pathloss_exponent");
        let e = parse(&v.to_string()).unwrap_err();
        assert_eq!(e.path, "network.pathloss_exponent");
    }

    #[test]
    fn wrong_type_and_unknown_field_paths() {
        let mut v = default_value();
        v["services"][1]["tti_s"] = serde_json::json!("fast");
        assert_eq!(parse(&v.to_string()).unwrap_err().path, "services[1].tti_s");
        let mut v = default_value();
        v["server"]["cu_rate"] = serde_json::json!(1);
        assert_eq!(parse(&v.to_string()).unwrap_err().path, "server.cu_rate");
    }

    #[test]
    fn range_errors_carry_paths() {
        let mut v = default_value();
        v["network"]["pathloss_exponent"] = serde_json::json!(2.0);
        assert_eq!(
            parse(&v.to_string()).unwrap_err().path,
            "network.pathloss_exponent"
        );
        let mut v = default_value();
        v["experiment"]["eta_grid"] = serde_json::json!([0.1, 1.5]);
        assert_eq!(
            parse(&v.to_string()).unwrap_err().path,
            "experiment.eta_grid[1]"
        );
        let mut v = default_value();
        v["schema_version"] = serde_json::json!(9);
        assert_eq!(parse(&v.to_string()).unwrap_err().path, "schema_version");
    }

    #[test]
    fn comments_do_not_change_the_hash() {
        let a = parse(DEFAULT_CONFIG).unwrap();
        let mut v = default_value();
        v["network"]["_comment"] = serde_json::json!("edited note");
        let b = parse(&v.to_string()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.experiment.seed += 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn null_noise_is_noiseless() {
        let mut v = default_value();
        v["network"]["noise_dbm"] = serde_json::Value::Null;
        let cfg = parse(&v.to_string()).unwrap();
        assert_eq!(cfg.model(1).normalized_noise(), 0.0);
    }
}
