use flexsplit_core::geometry::comp_cluster;
use flexsplit_core::montecarlo::{des_queue, ClassSpec, McConfig, ServiceLaw};
use flexsplit_core::optimizer::{cfsma, CfsmaOptions, CfsmaStatus, SuccessModel, SystemSpec};
use flexsplit_core::queueing::{
    reliability, retrans_success, Discipline, ModeProfiles, ModeTerm, ServerSpec, ServiceClass,
};
use flexsplit_core::radio::{
    coverage_cm, coverage_dm, total_coverage, CoverageQuery, ModeSelector,
};
use flexsplit_core::{NetworkModel, ServiceKind};
use proptest::prelude::*;

fn query(model: &NetworkModel, t: f64, gamma: f64, sel: ModeSelector) -> CoverageQuery<'_> {
    CoverageQuery {
        sinr_threshold_linear: t,
        gamma_linear: gamma,
        model,
        mode_selector: sel,
    }
}

fn system(k_e: u64, target: f64) -> SystemSpec {
    SystemSpec {
        model: NetworkModel::default(),
        services: vec![
            ServiceClass {
                user_count: k_e,
                ..ServiceClass::embb()
            },
            ServiceClass {
                user_count: 500,
                sinr_threshold_linear: 0.1,
                reliability_target: target,
                ..ServiceClass::urllc()
            },
        ],
        modes: ModeProfiles::default(),
        server: ServerSpec::default(),
        discipline: Discipline::Ps,
        success: SuccessModel::Conditional,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clustering_ignores_distance_scale(
        mut d in prop::collection::vec(1.0f64..500.0, 1..6),
        scale in 0.01f64..100.0,
        gamma in 1.0f64..1e3,
        alpha in 2.5f64..5.0,
    ) {
        d.sort_by(f64::total_cmp);
        let scaled: Vec<f64> = d.iter().map(|x| x * scale).collect();
        let a = comp_cluster(&d, gamma, alpha, 2).unwrap();
        let b = comp_cluster(&scaled, gamma, alpha, 2).unwrap();
        prop_assert_eq!(a.du_indices, b.du_indices);
        prop_assert_eq!(a.mode, b.mode);
    }

    #[test]
    fn reliability_lies_between_mode_terms(
        p_cm in 0.0f64..=1.0,
        s1 in 0.0f64..=1.0,
        s2 in 0.0f64..=1.0,
        n1 in 0u32..6,
        n2 in 0u32..6,
    ) {
        let terms = [
            ModeTerm { p_succ: s1, n_max: n1, p_mode: p_cm },
            ModeTerm { p_succ: s2, n_max: n2, p_mode: 1.0 - p_cm },
        ];
        let r = reliability(&terms);
        let (a, b) = (retrans_success(s1, n1), retrans_success(s2, n2));
        prop_assert!(r >= a.min(b) - 1e-15 && r <= a.max(b) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coverage_is_a_monotone_partitioned_probability(
        t_db in -15.0f64..25.0,
        step_db in 0.5f64..10.0,
        g_db in 0.0f64..30.0,
        g_step_db in 0.5f64..10.0,
    ) {
        let m = NetworkModel::default();
        let lin = |db: f64| 10f64.powf(db / 10.0);
        let (t, g) = (lin(t_db), lin(g_db));
        let total = total_coverage(&query(&m, t, g, ModeSelector::Total)).unwrap();
        let cm = coverage_cm(&query(&m, t, g, ModeSelector::Cm)).unwrap();
        let dm = coverage_dm(&query(&m, t, g, ModeSelector::Dm)).unwrap();
        prop_assert!((0.0..=1.0).contains(&total));
        prop_assert!((cm + dm - total).abs() <= 1e-6);
        let p_dm = g.powf(-0.5);
        prop_assert!(dm <= p_dm + 1e-9 && cm <= 1.0 - p_dm + 1e-9);
        let harder = total_coverage(&query(&m, t * lin(step_db), g, ModeSelector::Total)).unwrap();
        prop_assert!(harder <= total + 1e-9);
        let wider = total_coverage(&query(&m, t, g * lin(g_step_db), ModeSelector::Total)).unwrap();
        prop_assert!(wider >= total - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn stricter_reliability_never_raises_embb_gamma(
        k_e in 250u64..500,
        lo_exp in 3u32..5,
        extra in 1u32..3,
    ) {
        let opts = CfsmaOptions { outer_points: 41, ..CfsmaOptions::default() };
        let loose = cfsma(&system(k_e, 1.0 - 10f64.powi(-(lo_exp as i32))), opts).unwrap();
        let strict = cfsma(&system(k_e, 1.0 - 10f64.powi(-((lo_exp + extra) as i32))), opts).unwrap();
        if loose.status == CfsmaStatus::Optimal && strict.status == CfsmaStatus::Optimal {
            prop_assert!(
                strict.p_cm(ServiceKind::Embb) <= loose.p_cm(ServiceKind::Embb) + opts.tol,
                "{} > {}", strict.p_cm(ServiceKind::Embb), loose.p_cm(ServiceKind::Embb)
            );
        }
        // A stricter target cannot turn an infeasible problem feasible.
        prop_assert!(!(loose.status == CfsmaStatus::Infeasible && strict.status == CfsmaStatus::Optimal));
    }
}

#[test]
fn quadrupling_the_horizon_halves_the_interval() {
    let class = ClassSpec {
        arrival_rate: 0.5,
        mean_service_s: 1.0,
        law: ServiceLaw::Exponential,
    };
    let cfg = |horizon| McConfig {
        trials: 16,
        seed: 5,
        warmup_packets: 5_000,
        horizon_packets: horizon,
        ..McConfig::default()
    };
    let short = des_queue(Discipline::Ps, &[class], &cfg(50_000))
        .unwrap()
        .sojourn_s[0];
    let long = des_queue(Discipline::Ps, &[class], &cfg(200_000))
        .unwrap()
        .sojourn_s[0];
    let ratio = long.half_width / short.half_width;
    assert!((ratio - 0.5).abs() <= 0.15, "ratio {ratio}");
}

#[test]
fn des_is_bit_reproducible_for_fcfs_too() {
    let classes = [
        ClassSpec {
            arrival_rate: 0.2,
            mean_service_s: 1.0,
            law: ServiceLaw::Deterministic,
        },
        ClassSpec {
            arrival_rate: 0.02,
            mean_service_s: 10.0,
            law: ServiceLaw::Exponential,
        },
    ];
    let cfg = McConfig {
        trials: 3,
        seed: 17,
        warmup_packets: 1_000,
        horizon_packets: 20_000,
        ..McConfig::default()
    };
    let a = des_queue(Discipline::Fcfs, &classes, &cfg).unwrap();
    let b = des_queue(Discipline::Fcfs, &classes, &cfg).unwrap();
    assert_eq!(a, b);
}
