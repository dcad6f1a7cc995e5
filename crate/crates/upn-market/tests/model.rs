use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upn_market::dist::TypeDistribution;
use upn_market::model::{
    class_means, clients_per_host, connect_prob, environment, meeting_prob, other_hosts_pmf,
    payoff, unit_benefits, Membership, MembershipState, SERIES_CUTOFF,
};
use upn_market::params::{MarketParams, OperatorStrategy};

/// Baseline equilibrium fractions, polished to machine precision by an
/// independent root refinement; frozen here as the reference point for
/// environment-level constants.
const EQ_MU_C: f64 = 0.471197857456288088;
const EQ_MU_H: f64 = 0.379950930974667748;

#[test]
fn meeting_prob_frozen_values() {
    assert_abs_diff_eq!(meeting_prob(0.38, 5.0), 0.850431380777364947, epsilon = 1e-15);
    assert_eq!(meeting_prob(0.0, 5.0), 0.0);
    assert_eq!(meeting_prob(0.5, 0.0), 0.0);
    // Tends to one as hosts densify.
    assert!(meeting_prob(1.0, 50.0) > 1.0 - 1e-12);
}

#[test]
fn other_hosts_pmf_frozen_values() {
    // Poisson(μ_h λ) point masses.
    assert_abs_diff_eq!(other_hosts_pmf(0, 0.38, 5.0), 0.149568619222635052, epsilon = 1e-15);
    assert_abs_diff_eq!(other_hosts_pmf(1, 0.5, 2.0), 0.367879441171442321, epsilon = 1e-15);
    // Zero rate degenerates to a point mass at zero.
    assert_eq!(other_hosts_pmf(0, 0.0, 5.0), 1.0);
    assert_eq!(other_hosts_pmf(3, 0.0, 5.0), 0.0);
}

#[test]
fn pmf_sums_to_one() {
    let total: f64 = (0..200).map(|k| other_hosts_pmf(k, 0.6, 8.0)).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
}

#[test]
fn connect_prob_frozen_and_series_branch() {
    assert_abs_diff_eq!(connect_prob(0.38, 5.0), 0.44759546356703418, epsilon = 1e-14);
    // Above the cutoff the closed form applies; below it the series.
    // The two branches agree to high order at the boundary.
    let x = SERIES_CUTOFF;
    let closed = -f64::exp_m1(-x) / x;
    let series = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
    assert_abs_diff_eq!(closed, series, epsilon = 1e-14);
    let tiny = connect_prob(1e-8, 10.0); // x = 1e-7, series branch
    assert!(tiny <= 1.0 && tiny > 1.0 - 1e-6);
    // x → 0 limit is exactly 1.
    assert_eq!(connect_prob(0.0, 5.0), 1.0);
}

#[test]
fn connect_prob_matches_poisson_average() {
    // connect_prob is E[1/(K+1)] with K ~ Poisson(μ_h λ).
    for (mu_h, lambda) in [(0.38, 5.0), (0.1, 2.0), (0.9, 10.0), (0.05, 0.5)] {
        let expect: f64 = (0..400)
            .map(|k| other_hosts_pmf(k, mu_h, lambda) / (k + 1) as f64)
            .sum();
        assert_abs_diff_eq!(connect_prob(mu_h, lambda), expect, epsilon = 1e-10);
    }
}

#[test]
fn clients_per_host_frozen_value() {
    assert_abs_diff_eq!(
        clients_per_host(0.47, 0.38, 5.0),
        1.051849339382530323,
        epsilon = 1e-14
    );
    assert_eq!(clients_per_host(0.0, 0.38, 5.0), 0.0);
}

#[test]
fn flow_conservation_identity() {
    // Host-side and client-side connection counts agree:
    // μ_h · Y_c = μ_c · P_H, for any fractions and density.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let mu_c: f64 = rng.gen_range(0.0..1.0);
        let mu_h: f64 = rng.gen_range(0.0..(1.0 - mu_c));
        let lambda: f64 = rng.gen_range(0.01..20.0);
        let lhs = mu_h * clients_per_host(mu_c, mu_h, lambda);
        let rhs = mu_c * meeting_prob(mu_h, lambda);
        assert!((lhs - rhs).abs() <= 1e-12, "flow violated: {lhs} vs {rhs}");
    }
}

#[test]
fn finite_population_meeting_prob_approaches_limit() {
    let n: f64 = 1e5;
    for (mu_h, lambda) in [(0.38, 5.0), (0.2, 1.0), (0.7, 8.0)] {
        let finite = 1.0 - (1.0 - lambda * mu_h / n).powf(n - 1.0);
        assert!((finite - meeting_prob(mu_h, lambda)).abs() < 1e-3);
    }
}

#[test]
fn unit_benefits_baseline_strategy() {
    let params = MarketParams::baseline();
    let ben = unit_benefits(&params, &OperatorStrategy::new(2.0, 0.4));
    assert_abs_diff_eq!(ben.pi_c, 7.9, epsilon = 1e-12);
    assert_abs_diff_eq!(ben.pi_h, 13.3, epsilon = 1e-12);
    assert_abs_diff_eq!(ben.pi_h_tilde, -0.2, epsilon = 1e-12);
    assert!(ben.flags.hosting_benefit_dominates);
    assert!(ben.flags.hosting_cost_dominates);
    // δp = 0.8 < γ_hc = 1: forwarding runs at a loss at this strategy.
    assert!(!ben.flags.forwarding_profitable);
}

#[test]
fn environment_frozen_at_baseline_equilibrium() {
    let params = MarketParams::baseline();
    let strategy = OperatorStrategy::new(2.0, 0.4);
    let state = MembershipState::from_fractions(EQ_MU_C, EQ_MU_H, &params.type_distribution);
    let env = environment(&params, &strategy, &state);
    assert_abs_diff_eq!(env.p_h, 0.850394680343585029, epsilon = 1e-10);
    assert_abs_diff_eq!(env.y_c, 1.054620791011664008, epsilon = 1e-10);
    assert_abs_diff_eq!(env.theta_bar_c, 0.384450140297188209, epsilon = 1e-10);
    assert_abs_diff_eq!(env.theta_bar_h, 0.810024534512666126, epsilon = 1e-10);
}

#[test]
fn payoffs_are_affine_with_documented_slopes() {
    let params = MarketParams::baseline();
    let strategy = OperatorStrategy::new(2.0, 0.4);
    let state = MembershipState::from_fractions(0.4, 0.3, &params.type_distribution);
    let env = environment(&params, &strategy, &state);

    for theta in [0.0, 0.33, 1.0] {
        assert_eq!(payoff(theta, Membership::Alien, &env, &params), 0.0);
    }
    // Client: slope P_H·Π_c, intercept −c_c.
    let u0 = payoff(0.0, Membership::Client, &env, &params);
    let u1 = payoff(1.0, Membership::Client, &env, &params);
    assert_abs_diff_eq!(u0, -params.c_c, epsilon = 1e-12);
    assert_abs_diff_eq!(u1 - u0, env.p_h * env.benefits.pi_c, epsilon = 1e-12);
    let mid = payoff(0.5, Membership::Client, &env, &params);
    assert_abs_diff_eq!(mid, 0.5 * (u0 + u1), epsilon = 1e-12);
    // Host: slope Π_h, intercept θ̄_c·Y_c·Π̃_h − c_h.
    let h0 = payoff(0.0, Membership::Host, &env, &params);
    let h1 = payoff(1.0, Membership::Host, &env, &params);
    assert_abs_diff_eq!(
        h0,
        env.theta_bar_c * env.y_c * env.benefits.pi_h_tilde - params.c_h,
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(h1 - h0, env.benefits.pi_h, epsilon = 1e-12);
}

#[test]
fn threshold_state_construction() {
    let f = TypeDistribution::Uniform;
    let s = MembershipState::from_thresholds(0.3, 0.8, &f);
    assert_abs_diff_eq!(s.mu_a, 0.3, epsilon = 1e-15);
    assert_abs_diff_eq!(s.mu_c, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(s.mu_h, 0.2, epsilon = 1e-15);
    assert!(s.validate(&f));

    // Crossed thresholds collapse the client class.
    let s = MembershipState::from_thresholds(0.9, 0.2, &f);
    assert_eq!(s.mu_c, 0.0);
    assert!(s.client_intervals.is_empty());
    assert_abs_diff_eq!(s.mu_h, 0.1, epsilon = 1e-15);
    assert!(s.validate(&f));

    // Degenerate corner: everyone a host.
    let s = MembershipState::from_thresholds(0.0, 0.0, &f);
    assert_eq!(s.mu_h, 1.0);
    assert!(s.validate(&f));
}

#[test]
fn fraction_state_roundtrip() {
    let f = TypeDistribution::Uniform;
    let s = MembershipState::from_fractions(0.47, 0.38, &f);
    assert_abs_diff_eq!(s.mu_c, 0.47, epsilon = 1e-12);
    assert_abs_diff_eq!(s.mu_h, 0.38, epsilon = 1e-12);
    assert_abs_diff_eq!(s.mu_a, 0.15, epsilon = 1e-12);
    assert!(s.validate(&f));

    // Oversized requests are clamped onto the simplex.
    let s = MembershipState::from_fractions(0.8, 0.5, &f);
    assert_abs_diff_eq!(s.mu_c, 0.8, epsilon = 1e-12);
    assert_abs_diff_eq!(s.mu_h, 0.2, epsilon = 1e-12);

    let aa = MembershipState::all_alien();
    assert!(aa.validate(&f));
    assert_eq!(aa.mu_a, 1.0);
}

#[test]
fn class_means_match_interval_midpoints_under_uniform() {
    let f = TypeDistribution::Uniform;
    let s = MembershipState::from_thresholds(0.2, 0.6, &f);
    let (tbc, tbh) = class_means(&s, &f);
    assert_abs_diff_eq!(tbc, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(tbh, 0.8, epsilon = 1e-12);
    // Uniform closed forms: θ̄_c* = (2 − 2μ_h − μ_c)/2, θ̄_h* = (2 − μ_h)/2.
    assert_abs_diff_eq!(tbc, (2.0 - 2.0 * s.mu_h - s.mu_c) / 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(tbh, (2.0 - s.mu_h) / 2.0, epsilon = 1e-12);
}

#[test]
fn series_cutoff_is_pinned() {
    assert_eq!(SERIES_CUTOFF, 1e-6);
}
