//! Per-user payoffs and the random-encounter environment.
//!
//! A membership partition of the unit-mass population induces a *market
//! environment*: the probability `P_H` that a client meets at least one
//! host in a slot, the mean number `Y_c` of clients a host serves per
//! slot, and the mean types of the client and host classes.  Payoffs are
//! affine in the user's type θ given that environment:
//!
//! - alien:  `U = 0`
//! - client: `U = θ·P_H·Π_c − c_c`
//! - host:   `U = θ·Π_h + θ̄_c·Y_c·Π̃_h − c_h`
//!
//! with per-byte benefit terms `Π_c = v̄_c − γ_c − p`,
//! `Π_h = v̄_h − γ_h − p(1−δ)` and `Π̃_h = δp − γ_hc`.

use crate::dist::TypeDistribution;
use crate::params::{MarketParams, OperatorStrategy};
use statrs::function::gamma::ln_gamma;

/// Threshold below which `connect_prob` switches to its series expansion
/// around the removable singularity at μ_h·λ = 0.
pub const SERIES_CUTOFF: f64 = 1e-6;

/// A user's membership choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// Opted out of the service.
    Alien,
    /// Buys connectivity through nearby hosts.
    Client,
    /// Subscribes directly and resells connectivity.
    Host,
}

/// Truth values of the model's standing assumptions at a given strategy.
///
/// The assumptions are recorded, never enforced: the operator's search box
/// contains strategies that violate them, and the general best response
/// still evaluates such points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionFlags {
    /// Π_h > Π_c: a host values its own traffic more than a client does.
    pub hosting_benefit_dominates: bool,
    /// c_h > c_c: hosting is the costlier membership.
    pub hosting_cost_dominates: bool,
    /// Π̃_h > 0: forwarding client traffic is profitable for a host.
    pub forwarding_profitable: bool,
}

/// The three per-byte benefit terms at a strategy, with assumption flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBenefits {
    /// Π_c = v̄_c − γ_c − p: a client's net value per byte.
    pub pi_c: f64,
    /// Π_h = v̄_h − γ_h − p(1−δ): a host's net value per own byte.
    pub pi_h: f64,
    /// Π̃_h = δp − γ_hc: a host's net rebate per forwarded client byte.
    pub pi_h_tilde: f64,
    /// Which standing assumptions hold at this strategy.
    pub flags: AssumptionFlags,
}

/// Computes the per-byte benefit terms for a strategy.
pub fn unit_benefits(params: &MarketParams, strategy: &OperatorStrategy) -> UnitBenefits {
    let pi_c = params.v_bar_c - params.gamma_c - strategy.p;
    let pi_h = params.v_bar_h - params.gamma_h - strategy.p * (1.0 - strategy.delta);
    let pi_h_tilde = strategy.delta * strategy.p - params.gamma_hc;
    UnitBenefits {
        pi_c,
        pi_h,
        pi_h_tilde,
        flags: AssumptionFlags {
            hosting_benefit_dominates: pi_h > pi_c,
            hosting_cost_dominates: params.c_h > params.c_c,
            forwarding_profitable: pi_h_tilde > 0.0,
        },
    }
}

/// A population partition into aliens, clients, and hosts.
///
/// The fractions are the f-measures of the generating type-interval
/// lists; aliens hold whatever type mass the other two classes do not.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipState {
    /// Fraction of aliens.
    pub mu_a: f64,
    /// Fraction of clients.
    pub mu_c: f64,
    /// Fraction of hosts.
    pub mu_h: f64,
    /// Disjoint type intervals occupied by clients.
    pub client_intervals: Vec<(f64, f64)>,
    /// Disjoint type intervals occupied by hosts.
    pub host_intervals: Vec<(f64, f64)>,
}

impl MembershipState {
    /// The all-alien state — the mandated starting point of the
    /// best-response dynamics.
    pub fn all_alien() -> Self {
        MembershipState {
            mu_a: 1.0,
            mu_c: 0.0,
            mu_h: 0.0,
            client_intervals: Vec::new(),
            host_intervals: Vec::new(),
        }
    }

    /// Builds the threshold partition: aliens on [0, θ_a], clients on
    /// (θ_a, θ_h), hosts on [θ_h, 1].  Fractions are the f-measures of
    /// the intervals, so the measure-zero boundary convention (θ_a to
    /// alien, θ_h to host) never shows up in them.
    pub fn from_thresholds(theta_a: f64, theta_h: f64, f: &TypeDistribution) -> Self {
        let theta_a = theta_a.clamp(0.0, 1.0);
        let theta_h = theta_h.clamp(theta_a, 1.0);
        let client_intervals = if theta_h > theta_a { vec![(theta_a, theta_h)] } else { Vec::new() };
        let host_intervals = if theta_h < 1.0 { vec![(theta_h, 1.0)] } else { Vec::new() };
        Self::from_intervals(client_intervals, host_intervals, f)
    }

    /// Builds a state from explicit client/host interval lists; fractions
    /// are their f-measures and aliens take the rest.
    pub fn from_intervals(
        client_intervals: Vec<(f64, f64)>,
        host_intervals: Vec<(f64, f64)>,
        f: &TypeDistribution,
    ) -> Self {
        let mu_c = f.measure(&client_intervals).clamp(0.0, 1.0);
        let mu_h = f.measure(&host_intervals).clamp(0.0, 1.0);
        let mu_a = (1.0 - mu_c - mu_h).clamp(0.0, 1.0);
        MembershipState { mu_a, mu_c, mu_h, client_intervals, host_intervals }
    }

    /// Rebuilds the threshold partition that carries the given fractions
    /// under f (aliens lowest, hosts highest), via quantiles.
    pub fn from_fractions(mu_c: f64, mu_h: f64, f: &TypeDistribution) -> Self {
        let mu_c = mu_c.clamp(0.0, 1.0);
        let mu_h = mu_h.clamp(0.0, 1.0 - mu_c);
        let theta_a = f.quantile(1.0 - mu_c - mu_h);
        let theta_h = f.quantile(1.0 - mu_h);
        Self::from_thresholds(theta_a, theta_h, f)
    }

    /// Checks the partition invariants: fractions in range, summing to 1
    /// within 1e-12, and matching the f-measures of their intervals
    /// within 1e-9.
    pub fn validate(&self, f: &TypeDistribution) -> bool {
        let in_range = [self.mu_a, self.mu_c, self.mu_h]
            .iter()
            .all(|m| (0.0..=1.0).contains(m));
        let sums = (self.mu_a + self.mu_c + self.mu_h - 1.0).abs() <= 1e-12;
        let measures = (f.measure(&self.client_intervals) - self.mu_c).abs() <= 1e-9
            && (f.measure(&self.host_intervals) - self.mu_h).abs() <= 1e-9;
        in_range && sums && measures
    }
}

/// Derived per-state quantities consumed by the payoff functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketEnvironment {
    /// Per-byte benefit terms at the strategy.
    pub benefits: UnitBenefits,
    /// Probability a client meets at least one host in a slot.
    pub p_h: f64,
    /// Mean clients served per host per slot.
    pub y_c: f64,
    /// Mean type of the client class (0 when empty).
    pub theta_bar_c: f64,
    /// Mean type of the host class (0 when empty).
    pub theta_bar_h: f64,
}

/// Computes the environment a membership state induces under a strategy.
pub fn environment(
    params: &MarketParams,
    strategy: &OperatorStrategy,
    state: &MembershipState,
) -> MarketEnvironment {
    let f = &params.type_distribution;
    MarketEnvironment {
        benefits: unit_benefits(params, strategy),
        p_h: meeting_prob(state.mu_h, params.lambda),
        y_c: clients_per_host(state.mu_c, state.mu_h, params.lambda),
        theta_bar_c: f.conditional_mean(&state.client_intervals),
        theta_bar_h: f.conditional_mean(&state.host_intervals),
    }
}

/// P_H = 1 − e^{−μ_h·λ}: probability of meeting at least one host in a
/// slot.
pub fn meeting_prob(mu_h: f64, lambda: f64) -> f64 {
    -f64::exp_m1(-(mu_h * lambda))
}

/// Poisson probability that a client meets k *other* hosts in a slot
/// besides a given one, at rate μ_h·λ.
///
/// pmf(k) = (μ_h λ)^k e^{−μ_h λ} / k!.  Averaging the uniform choice
/// 1/(k+1) over this pmf yields `connect_prob`.
pub fn other_hosts_pmf(k: u64, mu_h: f64, lambda: f64) -> f64 {
    let rate = mu_h * lambda;
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    ((k as f64) * rate.ln() - rate - ln_gamma(k as f64 + 1.0)).exp()
}

/// Probability that a meeting client actually connects to a given host:
/// (1 − e^{−x})/x at x = μ_h·λ, extended by continuity to 1 at x = 0.
///
/// Near the removable singularity the Taylor series
/// 1 − x/2 + x²/6 − x³/24 is used to avoid cancellation.
pub fn connect_prob(mu_h: f64, lambda: f64) -> f64 {
    let x = mu_h * lambda;
    if x < SERIES_CUTOFF {
        1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else {
        -f64::exp_m1(-x) / x
    }
}

/// Y_c = μ_c·λ·connect_prob(μ_h, λ): mean clients served per host per
/// slot.  Equals μ_c/μ_h·(1 − e^{−μ_h λ}) for μ_h > 0 and tends to μ_c·λ
/// as μ_h → 0.
pub fn clients_per_host(mu_c: f64, mu_h: f64, lambda: f64) -> f64 {
    mu_c * lambda * connect_prob(mu_h, lambda)
}

/// Conditional mean types (θ̄_c, θ̄_h) of the client and host classes.
///
/// Empty classes report mean 0; every payoff term using such a mean is
/// multiplied by the matching zero measure, so the convention is
/// observationally neutral.
pub fn class_means(state: &MembershipState, f: &TypeDistribution) -> (f64, f64) {
    (
        f.conditional_mean(&state.client_intervals),
        f.conditional_mean(&state.host_intervals),
    )
}

/// Expected per-slot payoff of a type-θ user under the given membership.
pub fn payoff(
    theta: f64,
    membership: Membership,
    env: &MarketEnvironment,
    params: &MarketParams,
) -> f64 {
    match membership {
        Membership::Alien => 0.0,
        Membership::Client => theta * env.p_h * env.benefits.pi_c - params.c_c,
        Membership::Host => {
            theta * env.benefits.pi_h + env.theta_bar_c * env.y_c * env.benefits.pi_h_tilde
                - params.c_h
        }
    }
}
