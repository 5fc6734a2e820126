use thermo_core::dbar::iid_dbar_exact;
use thermo_core::experiment::{
    continuity_potential_row, random_direction, run, run_continuity_g, run_continuity_potential, run_lipschitz, CheckStatus,
    ExperimentConfig, ExperimentKind,
};
use thermo_core::io::{Source, TableDoc};
use thermo_core::rpf::normalized_potential_gap;
use thermo_core::{Error, GFunction, Potential};

const SCHEDULE: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

#[test]
fn memoryless_continuity_sweep() {
    let config = ExperimentConfig::new(ExperimentKind::ContinuityG, SCHEDULE.to_vec());
    let report = run_continuity_g(&config).unwrap();
    assert_eq!(report.rows.len(), SCHEDULE.len());
    assert!(report.passed(), "{:?}", report.checks);
    let p = [2.0 / 3.0, 1.0 / 3.0];
    let g = GFunction::memoryless(&p).unwrap();
    for row in &report.rows {
        assert!((row.input_distance - row.delta).abs() <= 1e-9);
        // h_δ stays memoryless, so the exact distance is the total variation
        let (h, _) = thermo_core::experiment::perturb_g(&g, row.delta).unwrap();
        let exact = iid_dbar_exact(&p, h.table().values()).unwrap();
        assert!((row.coupling_upper.unwrap() - exact).abs() <= 1e-10);
        assert!((row.oracle_lower.unwrap() - exact).abs() <= 1e-10);
    }
    let last = report.rows.last().unwrap();
    assert!(last.exp_bound.unwrap() < 0.05 && last.kac_bound.unwrap() < 0.05 && last.coupling_upper.unwrap() < 0.05);
    assert!((last.exp_bound.unwrap() - 0.025f64.exp_m1()).abs() <= 1e-9);
}

#[test]
fn lipschitz_sweeps() {
    let config = ExperimentConfig::new(ExperimentKind::Lipschitz, vec![1.5f64.ln(), 0.2, 0.05]);
    let report = run_lipschitz(&config).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    let first = &report.rows[0];
    assert!((first.oracle_lower.unwrap() - 1.0 / 6.0).abs() <= 1e-9);
    assert!((first.lipschitz.unwrap() - 0.8109302162163288).abs() <= 1e-6);

    let mut config = ExperimentConfig::new(ExperimentKind::Lipschitz, vec![0.3, 0.1, 0.01]);
    let markov = GFunction::markov(&[vec![0.8, 0.4], vec![0.2, 0.6]]).unwrap();
    config.base = Some(Source::Inline(TableDoc::from_g(&markov)));
    config.block_lengths = vec![1, 2, 3, 4];
    let report = run_lipschitz(&config).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    assert!(report.rows.iter().all(|r| r.coupling_upper.unwrap() > 0.0));
}

#[test]
fn lipschitz_flags_out_of_hypothesis_rows() {
    let mut config = ExperimentConfig::new(ExperimentKind::Lipschitz, vec![0.9]);
    let g = GFunction::memoryless(&[0.9, 0.1]).unwrap();
    config.base = Some(Source::Inline(TableDoc::from_g(&g)));
    let report = run_lipschitz(&config).unwrap();
    assert!(!report.passed());
    assert!(report.failures().any(|c| c.name.contains("ln 2")));
}

#[test]
fn potential_sweep_columns() {
    let mut config = ExperimentConfig::new(ExperimentKind::ContinuityPotential, vec![0.4, 0.1, 0.025]);
    config.seed = 4;
    let report = run_continuity_potential(&config).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    for row in &report.rows {
        assert!(row.potential_gap.unwrap() > 0.0 && row.coupling_upper.unwrap() > 0.0);
        assert!(row.oracle_lower.unwrap() <= row.coupling_upper.unwrap() + 1e-8);
        assert!((row.input_distance - row.delta).abs() <= 1e-12);
    }
}

#[test]
fn depth_one_gap_is_the_sup_term() {
    let phi = Potential::from_weights(2, 1, &[2.0 / 3.0, 1.0 / 3.0]).unwrap();
    let w = random_direction(2, 1, 0.5, 2).unwrap();
    let config = ExperimentConfig::new(ExperimentKind::ContinuityPotential, vec![0.1]);
    for delta in [0.2, 0.05] {
        let row = continuity_potential_row(&phi, &w, delta, &config).unwrap();
        let tau = phi.add_scaled(&w, delta).unwrap();
        let gap = normalized_potential_gap(&phi, &tau, 0).unwrap();
        assert!(gap.ratio_term <= 1e-12);
        assert!((row.potential_gap.unwrap() - gap.sup_term).abs() <= 1e-12);
    }
}

#[test]
fn suites_pass() {
    let mut config = ExperimentConfig::new(ExperimentKind::PressureSuite, vec![0.3, 0.1]);
    let report = run(&config).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    config.kind = ExperimentKind::CouplingSuite;
    config.mc_steps = 50_000;
    let report = run(&config).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    assert!(report.checks.iter().all(|c| c.status == CheckStatus::Passed));
}

#[test]
fn reports_are_bit_identical() {
    for kind in [ExperimentKind::ContinuityG, ExperimentKind::ContinuityPotential, ExperimentKind::CouplingSuite] {
        let mut config = ExperimentConfig::new(kind, vec![0.3, 0.1]);
        config.seed = 17;
        config.mc_steps = 20_000;
        let a = serde_json::to_string(&run(&config).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&config).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn invalid_schedules_are_rejected() {
    for schedule in [vec![], vec![0.1, 0.2], vec![0.2, 0.2], vec![0.1, -0.1]] {
        let config = ExperimentConfig::new(ExperimentKind::ContinuityG, schedule);
        assert!(matches!(run(&config), Err(Error::InvalidSchedule(_))));
    }
}

#[test]
fn config_documents_parse() {
    let config: ExperimentConfig = serde_json::from_str(
        r#"{"kind": "continuity-g", "schedule": [0.4, 0.1], "base": {"depth": 1, "alphabet_size": 2, "table": [0.6, 0.4]}}"#,
    )
    .unwrap();
    assert_eq!(config.kind, ExperimentKind::ContinuityG);
    assert_eq!(config.block_lengths, vec![1, 2, 3]);
    assert!(run(&config).unwrap().rows.len() == 2);
}
