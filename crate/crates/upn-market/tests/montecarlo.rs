use approx::assert_abs_diff_eq;
use upn_market::model::{meeting_prob, MembershipState};
use upn_market::montecarlo::{compare_with_theory, simulate, write_validation_csv, SimConfig};
use upn_market::params::{MarketParams, OperatorStrategy};

fn baseline_setup() -> (MarketParams, OperatorStrategy, MembershipState) {
    let params = MarketParams::baseline();
    let strategy = OperatorStrategy::new(2.0, 0.4);
    let state = MembershipState::from_fractions(0.47, 0.38, &params.type_distribution);
    (params, strategy, state)
}

#[test]
fn config_validation_rejects_degenerate_populations() {
    let (_, _, state) = baseline_setup();
    let ok = SimConfig { n_agents: 100, lambda: 5.0, slots: 10, seed: 1, state: state.clone() };
    assert!(ok.validate().is_ok());

    let too_small = SimConfig { n_agents: 1, ..ok.clone() };
    assert!(too_small.validate().is_err());

    let no_slots = SimConfig { slots: 0, ..ok.clone() };
    assert!(no_slots.validate().is_err());

    // ρ = λ/N must stay below one: N = 2, λ = 2 sits exactly at one.
    let rho_one = SimConfig { n_agents: 2, lambda: 2.0, ..ok.clone() };
    assert!(rho_one.validate().is_err());
    let rho_ok = SimConfig { n_agents: 2, lambda: 1.9, ..ok };
    assert!(rho_ok.validate().is_ok());
}

#[test]
fn stratified_assignment_hits_exact_class_counts() {
    let (params, strategy, state) = baseline_setup();
    let config = SimConfig { n_agents: 5000, lambda: 5.0, slots: 1, seed: 3, state };
    let stats = simulate(&config, &params, &strategy);
    // (0.47, 0.38)·5000 splits the stratified quantile grid exactly.
    assert_eq!(stats.n_clients, 2350);
    assert_eq!(stats.n_hosts, 1900);
    assert_eq!(stats.n_agents, 5000);
}

#[test]
fn no_hosts_means_no_connections_exactly() {
    let params = MarketParams::baseline();
    let strategy = OperatorStrategy::new(2.0, 0.4);
    let state = MembershipState::from_fractions(0.5, 0.0, &params.type_distribution);
    let config = SimConfig { n_agents: 1000, lambda: 3.0, slots: 50, seed: 9, state: state.clone() };
    let stats = simulate(&config, &params, &strategy);
    assert_eq!(stats.p_h_hat, 0.0);
    assert_eq!(stats.y_c_hat, 0.0);
    assert!(stats.flow_conserved);
    // Theory agrees on both sides being zero, so everything passes.
    let report = compare_with_theory(&stats, &state, &params, &strategy, 3.0);
    assert!(report.rows.iter().take(2).all(|r| r.pass));
    assert!(report.rows[0].theory == 0.0 && report.rows[0].estimate == 0.0);
}

#[test]
fn identical_configs_give_bitwise_identical_stats() {
    let (params, strategy, state) = baseline_setup();
    let config =
        SimConfig { n_agents: 2000, lambda: 4.0, slots: 25, seed: 1234, state };
    let a = simulate(&config, &params, &strategy);
    let b = simulate(&config, &params, &strategy);
    assert_eq!(a, b);
    assert_eq!(a.p_h_hat.to_bits(), b.p_h_hat.to_bits());
    assert_eq!(a.revenue_hat.to_bits(), b.revenue_hat.to_bits());

    // A single-slot run is equally reproducible.
    let one = SimConfig { slots: 1, n_agents: 2000, lambda: 4.0, seed: 77, state: baseline_setup().2 };
    assert_eq!(simulate(&one, &params, &strategy), simulate(&one, &params, &strategy));
}

#[test]
fn different_seeds_give_different_noise() {
    let (params, strategy, state) = baseline_setup();
    let a = SimConfig { n_agents: 2000, lambda: 4.0, slots: 25, seed: 1, state: state.clone() };
    let b = SimConfig { seed: 2, ..a.clone() };
    assert_ne!(simulate(&a, &params, &strategy).p_h_hat, simulate(&b, &params, &strategy).p_h_hat);
}

#[test]
fn flow_conservation_holds_on_every_slot() {
    let (params, strategy, state) = baseline_setup();
    for seed in [5, 6, 7] {
        let config =
            SimConfig { n_agents: 1500, lambda: 6.0, slots: 200, seed, state: state.clone() };
        assert!(simulate(&config, &params, &strategy).flow_conserved);
    }
}

#[test]
fn estimates_match_theory_at_calibration_scale() {
    let (params, strategy, state) = baseline_setup();
    let config =
        SimConfig { n_agents: 5000, lambda: 5.0, slots: 2000, seed: 12, state: state.clone() };
    let stats = simulate(&config, &params, &strategy);
    let report = compare_with_theory(&stats, &state, &params, &strategy, 3.0);
    assert!(report.all_pass, "report: {:?}", report.rows);
    assert_abs_diff_eq!(report.rows[0].theory, 0.850431380777364947, epsilon = 1e-12);
    assert_abs_diff_eq!(report.rows[1].theory, 1.051849339382530323, epsilon = 1e-12);
    assert!(report.rows.iter().all(|r| r.half_width > 0.0));
    assert_eq!(report.seed, 12);
}

#[test]
fn mismatched_state_is_flagged_as_a_negative_control() {
    let (params, strategy, state) = baseline_setup();
    let config =
        SimConfig { n_agents: 5000, lambda: 5.0, slots: 1000, seed: 21, state: state.clone() };
    let stats = simulate(&config, &params, &strategy);
    let wrong = MembershipState::from_fractions(0.30, 0.55, &params.type_distribution);
    let report = compare_with_theory(&stats, &wrong, &params, &strategy, 3.0);
    assert!(!report.all_pass);
    let ph_row = report.rows.iter().find(|r| r.quantity == "p_h").unwrap();
    assert!(!ph_row.pass, "p_h should be the discrepant quantity");
}

#[test]
fn finite_population_gap_shrinks_with_n() {
    // Same λ, same slots·N work budget; the binomial-vs-Poisson bias
    // falls like 1/N and dominates the small-N gap.
    let (params, strategy, state) = baseline_setup();
    let theory = meeting_prob(state.mu_h, 5.0);
    let gap = |n: usize, slots: usize| {
        let config =
            SimConfig { n_agents: n, lambda: 5.0, slots, seed: 12, state: state.clone() };
        (simulate(&config, &params, &strategy).p_h_hat - theory).abs()
    };
    let g500 = gap(500, 100_000);
    let g5000 = gap(5_000, 10_000);
    let g50000 = gap(50_000, 1_000);
    assert!(
        g5000 < g500 && g50000 < g500,
        "gaps did not shrink: {g500:.3e}, {g5000:.3e}, {g50000:.3e}"
    );
}

#[test]
fn minimal_population_edge_case_runs() {
    let (params, strategy, _) = baseline_setup();
    let state = MembershipState::from_fractions(0.47, 0.38, &params.type_distribution);
    let config = SimConfig { n_agents: 2, lambda: 1.9, slots: 100, seed: 4, state: state.clone() };
    let stats = simulate(&config, &params, &strategy);
    assert!(stats.flow_conserved);
    let report = compare_with_theory(&stats, &state, &params, &strategy, 3.0);
    // With two agents the bias bound is enormous; the report must still
    // be structurally sound.
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows.iter().all(|r| r.bias_bound.is_finite()));
}

#[test]
fn validation_csv_roundtrip() {
    let (params, strategy, state) = baseline_setup();
    let config =
        SimConfig { n_agents: 1000, lambda: 5.0, slots: 200, seed: 8, state: state.clone() };
    let stats = simulate(&config, &params, &strategy);
    let report = compare_with_theory(&stats, &state, &params, &strategy, 3.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("validation.csv");
    write_validation_csv(&report, &path).unwrap();

    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["quantity", "theory", "estimate", "half_width", "bias_bound", "pass"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].get(0).unwrap(), "p_h");
    assert_eq!(rows[1].get(0).unwrap(), "y_c");
    assert_eq!(rows[2].get(0).unwrap(), "revenue");
    for row in &rows {
        assert!(row.get(1).unwrap().parse::<f64>().is_ok());
        assert!(matches!(row.get(5).unwrap(), "true" | "false"));
    }
}
