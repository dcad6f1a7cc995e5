//! Stage-II membership-selection game: thresholds, best-response
//! dynamics, equilibrium detection, and an independent grid oracle.
//!
//! Users react to a population state through two type thresholds,
//!
//! ```text
//! θ_a = [ min{ c_c/(P_H·Π_c), (c_h − θ̄_c·Y_c·Π̃_h)/Π_h } ]₀¹
//! θ_h = [ max{ (c_h − θ̄_c·Y_c·Π̃_h)/Π_h,
//!              (c_h − c_c − θ̄_c·Y_c·Π̃_h)/(Π_h − P_H·Π_c) } ]₀¹
//! ```
//!
//! sending types in [0, θ_a] to alien, (θ_a, θ_h) to client, and [θ_h, 1]
//! to host.  A membership-selection equilibrium is a fixed point of the
//! induced simultaneous best-response map on fractions.  The closed-form
//! thresholds are valid only while the host payoff line is steeper than
//! the client line (Π_h > P_H·Π_c) and ascending (Π_h > 0); outside that
//! regime [`best_response`] falls back to [`general_partition`], the exact
//! argmax partition of the three affine payoff lines.
//!
//! Dynamics start from the all-alien state and apply the simultaneous
//! best response, undamped by default; a damping factor α ∈ (0, 1] is
//! available for strategies where the undamped map cycles.  The
//! [`grid_oracle`] locates fixed points independently of the dynamics by
//! scanning the (μ_c, μ_h) simplex for residual minima and refining them
//! by coordinate step-halving.

use crate::dist::TypeDistribution;
use crate::model::{
    clients_per_host, environment, meeting_prob, unit_benefits, MarketEnvironment,
    MembershipState, UnitBenefits,
};
use crate::params::{MarketParams, OperatorStrategy};
use std::path::Path;
use thiserror::Error;

/// Fixed-point displacement below which a refined grid-oracle candidate
/// counts as a root.
const ORACLE_ROOT_TOL: f64 = 1e-8;

/// Step size at which the oracle's step-halving refinement stops.
const ORACLE_STEP_MIN: f64 = 1e-12;

/// Sup-norm distance under which two oracle roots are considered the same
/// fixed point.
const ORACLE_DEDUP_TOL: f64 = 1e-6;

/// The two clamped type thresholds characterizing a best response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Types at or below θ_a stay alien.
    pub theta_a: f64,
    /// Types at or above θ_h host; the open interval between the two
    /// thresholds holds the clients.
    pub theta_h: f64,
}

/// Errors from the closed-form threshold computation.
#[derive(Debug, Clone, Copy, Error)]
pub enum EquilibriumError {
    /// The closed-form thresholds are outside their validity regime
    /// (Π_h ≤ 0 or Π_h ≤ P_H·Π_c), so the clamped pair could violate
    /// θ_a ≤ θ_h.  Normal-mode callers fall back to
    /// [`general_partition`]; seeing this error directly is the
    /// diagnostic that a standing assumption is violated.
    #[error(
        "degenerate threshold ordering: pi_h = {pi_h} must exceed both 0 and the client slope {client_slope}"
    )]
    DegenerateOrdering { pi_h: f64, client_slope: f64 },
}

/// Stopping controls for the best-response dynamics.
#[derive(Debug, Clone, Copy)]
pub struct DynamicsSettings {
    /// Sup-norm tolerance on the (μ_c, μ_h) best-response displacement.
    pub tol: f64,
    /// Iteration cap; exhausting it surfaces as `converged = false`.
    pub max_iter: usize,
    /// Damping factor α ∈ (0, 1]: the next state carries fractions
    /// (1−α)·μ + α·BR(μ).  α = 1 is the plain simultaneous update.
    pub damping: f64,
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        DynamicsSettings { tol: 1e-9, max_iter: 10_000, damping: 1.0 }
    }
}

/// Outcome of a best-response dynamics run.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    /// Final population state.
    pub state: MembershipState,
    /// Environment induced by the final state.
    pub env: MarketEnvironment,
    /// Visited states, one entry per iteration, starting with the
    /// initial state.
    pub trajectory: Vec<MembershipState>,
    /// Whether the displacement dropped to the tolerance before the
    /// iteration cap.
    pub converged: bool,
    /// Iterations performed.
    pub iterations: usize,
    /// Sup-norm best-response displacement at the last step.
    pub residual: f64,
}

/// Best-response class regions in type space, allocation-free.
#[derive(Debug, Clone, Copy)]
struct BrRegions {
    client: Option<(f64, f64)>,
    host: Option<(f64, f64)>,
}

/// Closed-form threshold pair for a scalar environment.
///
/// Ratio conventions: when the client payoff slope P_H·Π_c is
/// nonpositive, clienthood never beats alien for any type, so the client
/// ratio is +∞ and the min selects the host term.  When Π_h ≤ 0 or
/// Π_h ≤ P_H·Π_c the closed form is outside its validity regime and the
/// call reports `DegenerateOrdering` instead of a possibly mis-ordered
/// pair.
fn threshold_pair(
    params: &MarketParams,
    ben: &UnitBenefits,
    p_h: f64,
    y_c: f64,
    theta_bar_c: f64,
) -> Result<(f64, f64), EquilibriumError> {
    let client_slope = p_h * ben.pi_c;
    if !(ben.pi_h > 0.0) || ben.pi_h <= client_slope {
        return Err(EquilibriumError::DegenerateOrdering { pi_h: ben.pi_h, client_slope });
    }
    let reward = theta_bar_c * y_c * ben.pi_h_tilde;
    let r_client =
        if client_slope > 0.0 { params.c_c / client_slope } else { f64::INFINITY };
    let r_host = (params.c_h - reward) / ben.pi_h;
    let r_switch = (params.c_h - params.c_c - reward) / (ben.pi_h - client_slope);
    let theta_a = r_client.min(r_host).clamp(0.0, 1.0);
    let theta_h = r_host.max(r_switch).clamp(0.0, 1.0);
    Ok((theta_a, theta_h))
}

/// Exact argmax partition of the three affine payoff lines
/// U_A ≡ 0, U_C(θ) = P_H·Π_c·θ − c_c, U_H(θ) = Π_h·θ + θ̄_c·Y_c·Π̃_h − c_h
/// over θ ∈ [0, 1].
///
/// Works for any slope signs, so it covers every strategy in the search
/// box.  Segment winners at exact payoff ties follow the preference
/// host ≻ alien ≻ client, the closed-interval convention that assigns
/// θ_a to alien and θ_h to host.
fn envelope_regions(
    params: &MarketParams,
    ben: &UnitBenefits,
    p_h: f64,
    y_c: f64,
    theta_bar_c: f64,
) -> BrRegions {
    let sc = p_h * ben.pi_c;
    let ic = -params.c_c;
    let sh = ben.pi_h;
    let ih = theta_bar_c * y_c * ben.pi_h_tilde - params.c_h;

    let mut pts = [0.0f64, 1.0, f64::NAN, f64::NAN, f64::NAN];
    let mut n = 2;
    let push = |pts: &mut [f64; 5], n: &mut usize, x: f64| {
        if x.is_finite() && x > 0.0 && x < 1.0 {
            pts[*n] = x;
            *n += 1;
        }
    };
    if sc != 0.0 {
        push(&mut pts, &mut n, -ic / sc);
    }
    if sh != 0.0 {
        push(&mut pts, &mut n, -ih / sh);
    }
    if sh != sc {
        push(&mut pts, &mut n, (ic - ih) / (sh - sc));
    }
    pts[..n].sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let mut client: Option<(f64, f64)> = None;
    let mut host: Option<(f64, f64)> = None;
    for w in pts[..n].windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        let mid = 0.5 * (x0 + x1);
        let uc = sc * mid + ic;
        let uh = sh * mid + ih;
        let slot = if uh >= 0.0 && uh >= uc {
            &mut host
        } else if 0.0 >= uc {
            continue;
        } else {
            &mut client
        };
        match slot {
            Some((_, end)) => *end = x1,
            None => *slot = Some((x0, x1)),
        }
    }
    BrRegions { client, host }
}

/// Best-response regions at a scalar environment, delegating to the
/// envelope outside the closed-form regime.
fn br_regions(
    params: &MarketParams,
    ben: &UnitBenefits,
    p_h: f64,
    y_c: f64,
    theta_bar_c: f64,
) -> BrRegions {
    match threshold_pair(params, ben, p_h, y_c, theta_bar_c) {
        Ok((theta_a, theta_h)) => BrRegions {
            client: (theta_a < theta_h).then_some((theta_a, theta_h)),
            host: (theta_h < 1.0).then_some((theta_h, 1.0)),
        },
        Err(_) => envelope_regions(params, ben, p_h, y_c, theta_bar_c),
    }
}

/// Closed-form best-response thresholds evaluated at a state.
///
/// This is the diagnostic entry point: it surfaces
/// [`EquilibriumError::DegenerateOrdering`] when the clamped pair could
/// violate θ_a ≤ θ_h.  [`best_response`] is the normal-mode caller and
/// falls back to [`general_partition`] on that error.
pub fn thresholds(
    state: &MembershipState,
    params: &MarketParams,
    strategy: &OperatorStrategy,
) -> Result<Thresholds, EquilibriumError> {
    let env = environment(params, strategy, state);
    threshold_pair(params, &env.benefits, env.p_h, env.y_c, env.theta_bar_c)
        .map(|(theta_a, theta_h)| Thresholds { theta_a, theta_h })
}

/// Simultaneous best response to a state: the partition every type picks
/// against the environment the state induces.
pub fn best_response(
    state: &MembershipState,
    params: &MarketParams,
    strategy: &OperatorStrategy,
) -> MembershipState {
    let env = environment(params, strategy, state);
    let regions = br_regions(params, &env.benefits, env.p_h, env.y_c, env.theta_bar_c);
    regions_to_state(&regions, &params.type_distribution)
}

/// Exact pointwise-argmax partition of the three payoff lines for an
/// environment, regardless of assumption flags.
///
/// Coincides with [`best_response`] whenever the closed-form threshold
/// regime applies.
pub fn general_partition(
    params: &MarketParams,
    _strategy: &OperatorStrategy,
    env: &MarketEnvironment,
) -> MembershipState {
    let regions = envelope_regions(params, &env.benefits, env.p_h, env.y_c, env.theta_bar_c);
    regions_to_state(&regions, &params.type_distribution)
}

fn regions_to_state(regions: &BrRegions, f: &TypeDistribution) -> MembershipState {
    MembershipState::from_intervals(
        regions.client.into_iter().collect(),
        regions.host.into_iter().collect(),
        f,
    )
}

/// Effective thresholds describing the best response at a state: the
/// closed-form pair when valid, otherwise the boundaries of the envelope
/// partition.
pub fn effective_thresholds(
    state: &MembershipState,
    params: &MarketParams,
    strategy: &OperatorStrategy,
) -> Thresholds {
    match thresholds(state, params, strategy) {
        Ok(t) => t,
        Err(_) => {
            let env = environment(params, strategy, state);
            let regions =
                envelope_regions(params, &env.benefits, env.p_h, env.y_c, env.theta_bar_c);
            let theta_h = regions.host.map_or(1.0, |(a, _)| a);
            let theta_a = regions.client.map_or(theta_h, |(a, _)| a);
            Thresholds { theta_a, theta_h }
        }
    }
}

/// Runs the simultaneous best-response dynamics until the sup-norm
/// displacement of (μ_c, μ_h) drops to `tol` or `max_iter` is reached.
///
/// Non-convergence is surfaced as `converged = false` with the full
/// trajectory, never as an error.  With damping α < 1 the next state
/// carries the fraction mix (1−α)·μ + α·BR(μ), rebuilt as a threshold
/// partition; the stopping rule stays on the *undamped* displacement, so
/// a converged damped run satisfies the same fixed-point residual as an
/// undamped one.
pub fn iterate_dynamics(
    initial: &MembershipState,
    params: &MarketParams,
    strategy: &OperatorStrategy,
    settings: &DynamicsSettings,
) -> EquilibriumResult {
    let f = &params.type_distribution;
    let mut state = initial.clone();
    let mut trajectory = vec![state.clone()];
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    for it in 1..=settings.max_iter {
        let br = best_response(&state, params, strategy);
        let disp =
            (br.mu_c - state.mu_c).abs().max((br.mu_h - state.mu_h).abs());
        state = if settings.damping >= 1.0 {
            br
        } else {
            let a = settings.damping;
            MembershipState::from_fractions(
                (1.0 - a) * state.mu_c + a * br.mu_c,
                (1.0 - a) * state.mu_h + a * br.mu_h,
                f,
            )
        };
        trajectory.push(state.clone());
        iterations = it;
        residual = disp;
        if disp <= settings.tol {
            converged = true;
            break;
        }
    }

    let env = environment(params, strategy, &state);
    EquilibriumResult { state, env, trajectory, converged, iterations, residual }
}

/// Convenience wrapper: dynamics from the all-alien state, the model's
/// mandated starting point.
pub fn solve_from_all_alien(
    params: &MarketParams,
    strategy: &OperatorStrategy,
    settings: &DynamicsSettings,
) -> EquilibriumResult {
    iterate_dynamics(&MembershipState::all_alien(), params, strategy, settings)
}

/// Checks the fixed-point condition at a state: the best-response
/// fractions move by at most `tol` in sup-norm.
///
/// In the closed-form regime this is exactly |μ_c − (θ_h − θ_a)| ≤ tol
/// and |μ_h − (1 − θ_h)| ≤ tol with thresholds evaluated at the state
/// (f-measures for general f); outside it the same displacement test is
/// applied to the envelope partition.
pub fn verify_equilibrium(
    state: &MembershipState,
    params: &MarketParams,
    strategy: &OperatorStrategy,
    tol: f64,
) -> bool {
    let br = best_response(state, params, strategy);
    (br.mu_c - state.mu_c).abs() <= tol && (br.mu_h - state.mu_h).abs() <= tol
}

/// Scalar best-response map on threshold-partition fractions; shared by
/// the grid oracle and the operator's profit grid so neither allocates
/// per evaluation.
pub(crate) fn br_fractions(
    params: &MarketParams,
    ben: &UnitBenefits,
    mu_c: f64,
    mu_h: f64,
) -> (f64, f64) {
    let f = &params.type_distribution;
    let q_a = f.quantile((1.0 - mu_c - mu_h).clamp(0.0, 1.0));
    let q_h = f.quantile((1.0 - mu_h).clamp(0.0, 1.0));
    let theta_bar_c = f.conditional_mean(&[(q_a, q_h)]);
    let p_h = meeting_prob(mu_h, params.lambda);
    let y_c = clients_per_host(mu_c, mu_h, params.lambda);
    let regions = br_regions(params, ben, p_h, y_c, theta_bar_c);
    let next_c = regions.client.map_or(0.0, |(a, b)| f.interval_measure(a, b));
    let next_h = regions.host.map_or(0.0, |(a, b)| f.interval_measure(a, b));
    (next_c, next_h)
}

/// Scalar displacement of the best-response map at fractions.
pub(crate) fn br_displacement(
    params: &MarketParams,
    ben: &UnitBenefits,
    mu_c: f64,
    mu_h: f64,
) -> f64 {
    let (nc, nh) = br_fractions(params, ben, mu_c, mu_h);
    (nc - mu_c).abs().max((nh - mu_h).abs())
}

/// Final state of a trajectory-free dynamics run on the operator's hot
/// paths: the class regions with their fractions, plus convergence
/// bookkeeping.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScalarEquilibrium {
    pub client: Option<(f64, f64)>,
    pub host: Option<(f64, f64)>,
    pub mu_c: f64,
    pub mu_h: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Trajectory-free best-response dynamics from all-alien.
///
/// Mirrors [`solve_from_all_alien`] operation for operation — same
/// environment arithmetic, same update, same stopping rule — while
/// carrying only the current class regions on the stack, so the final
/// fractions are bit-identical to the state-path result without any
/// per-iteration allocation.
pub(crate) fn converge_scalar(
    params: &MarketParams,
    strategy: &OperatorStrategy,
    settings: &DynamicsSettings,
) -> ScalarEquilibrium {
    let f = &params.type_distribution;
    let ben = unit_benefits(params, strategy);
    let mut cur = ScalarEquilibrium {
        client: None,
        host: None,
        mu_c: 0.0,
        mu_h: 0.0,
        iterations: 0,
        converged: false,
    };
    for it in 1..=settings.max_iter {
        let theta_bar_c = match cur.client {
            Some(iv) => f.conditional_mean(&[iv]),
            None => f.conditional_mean(&[]),
        };
        let p_h = meeting_prob(cur.mu_h, params.lambda);
        let y_c = clients_per_host(cur.mu_c, cur.mu_h, params.lambda);
        let regions = br_regions(params, &ben, p_h, y_c, theta_bar_c);
        let nc = regions
            .client
            .map_or(0.0, |(a, b)| f.interval_measure(a, b))
            .clamp(0.0, 1.0);
        let nh = regions
            .host
            .map_or(0.0, |(a, b)| f.interval_measure(a, b))
            .clamp(0.0, 1.0);
        let disp = (nc - cur.mu_c).abs().max((nh - cur.mu_h).abs());
        if settings.damping >= 1.0 {
            cur.client = regions.client;
            cur.host = regions.host;
            cur.mu_c = nc;
            cur.mu_h = nh;
        } else {
            let a = settings.damping;
            let mc = ((1.0 - a) * cur.mu_c + a * nc).clamp(0.0, 1.0);
            let mh = ((1.0 - a) * cur.mu_h + a * nh).clamp(0.0, 1.0 - mc);
            let theta_a = f.quantile(1.0 - mc - mh).clamp(0.0, 1.0);
            let theta_h = f.quantile(1.0 - mh).clamp(theta_a, 1.0);
            cur.client = (theta_h > theta_a).then_some((theta_a, theta_h));
            cur.host = (theta_h < 1.0).then_some((theta_h, 1.0));
            cur.mu_c = cur
                .client
                .map_or(0.0, |(lo, hi)| f.interval_measure(lo, hi))
                .clamp(0.0, 1.0);
            cur.mu_h = cur
                .host
                .map_or(0.0, |(lo, hi)| f.interval_measure(lo, hi))
                .clamp(0.0, 1.0);
        }
        cur.iterations = it;
        if disp <= settings.tol {
            cur.converged = true;
            break;
        }
    }
    cur
}

/// Scans the fraction simplex for fixed points of the best-response map.
///
/// Every local minimum of the sup-norm displacement on the
/// `resolution`-spaced grid is refined by coordinate step-halving
/// (bisection of the step) down to step 1e-12; refined points whose
/// displacement falls below 1e-8 are reported as roots, deduplicated
/// within 1e-6 and sorted by μ_h then μ_c.  Refining *all* grid minima —
/// not only those already below the coarse threshold 2/resolution —
/// protects against the map's Lipschitz constant hiding a root between
/// grid nodes.
///
/// The list is independent of the dynamics: it is the cross-check that
/// the dynamics' fixed point is genuine, and the detector for multiple
/// equilibria.
pub fn grid_oracle(
    params: &MarketParams,
    strategy: &OperatorStrategy,
    resolution: usize,
) -> Vec<MembershipState> {
    assert!(resolution >= 10, "grid_oracle needs resolution >= 10");
    let ben = unit_benefits(params, strategy);
    let n = resolution;
    let h = 1.0 / n as f64;
    let stride = n + 1;

    let mut grid = vec![f64::INFINITY; stride * stride];
    for j in 0..=n {
        let mu_h = j as f64 * h;
        for i in 0..=(n - j) {
            let mu_c = i as f64 * h;
            grid[j * stride + i] = br_displacement(params, &ben, mu_c, mu_h);
        }
    }

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for j in 0..=n {
        for i in 0..=(n - j) {
            let v = grid[j * stride + i];
            let mut is_min = true;
            'scan: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if nj > n || ni > n - nj {
                        continue;
                    }
                    if grid[nj * stride + ni] < v {
                        is_min = false;
                        break 'scan;
                    }
                }
            }
            if is_min {
                candidates.push((i as f64 * h, j as f64 * h));
            }
        }
    }

    let mut roots: Vec<(f64, f64, f64)> = Vec::new();
    for (mu_c, mu_h) in candidates {
        let (rc, rh, res) = refine_root(params, &ben, mu_c, mu_h, h);
        if res <= ORACLE_ROOT_TOL {
            roots.push((rc, rh, res));
        }
    }

    roots.sort_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap());
    let mut unique: Vec<(f64, f64, f64)> = Vec::new();
    for r in roots {
        match unique.iter_mut().find(|u| {
            (u.0 - r.0).abs() <= ORACLE_DEDUP_TOL && (u.1 - r.1).abs() <= ORACLE_DEDUP_TOL
        }) {
            Some(u) => {
                if r.2 < u.2 {
                    *u = r;
                }
            }
            None => unique.push(r),
        }
    }

    unique
        .into_iter()
        .map(|(mu_c, mu_h, _)| {
            MembershipState::from_fractions(mu_c, mu_h, &params.type_distribution)
        })
        .collect()
}

/// Polishes a grid candidate to a root of the displacement field.
///
/// Primary step: damped Newton on g(μ) = BR(μ) − μ with a
/// forward-difference Jacobian, which converges quadratically near
/// regular roots.  Where Newton stalls (singular Jacobian, kinks of the
/// piecewise map), it falls back to an eight-direction pattern-search
/// pass with step halving; the displacement surface is a piecewise
/// max-of-affine valley there, so the diagonal directions matter.
/// All probes stay inside the fraction simplex.
fn refine_root(
    params: &MarketParams,
    ben: &UnitBenefits,
    mut mu_c: f64,
    mut mu_h: f64,
    initial_step: f64,
) -> (f64, f64, f64) {
    let residual = |c: f64, h: f64| -> (f64, f64) {
        let (nc, nh) = br_fractions(params, ben, c, h);
        (nc - c, nh - h)
    };
    let clamp = |c: f64, h: f64| -> (f64, f64) {
        let c = c.clamp(0.0, 1.0);
        (c, h.clamp(0.0, 1.0 - c))
    };
    let norm = |g: (f64, f64)| g.0.abs().max(g.1.abs());

    let mut g = residual(mu_c, mu_h);
    let mut best = norm(g);
    let mut step = initial_step;
    for _ in 0..200 {
        if best <= 1e-14 || step <= ORACLE_STEP_MIN {
            break;
        }

        // Newton step from a finite-difference Jacobian.
        let mut improved = false;
        let d = (step * 1e-3).max(1e-9);
        let dc = if mu_c + d + mu_h <= 1.0 { d } else { -d };
        let dh = if mu_c + mu_h + d <= 1.0 { d } else { -d };
        let gc = residual(mu_c + dc, mu_h);
        let gh = residual(mu_c, mu_h + dh);
        let (j00, j10) = ((gc.0 - g.0) / dc, (gc.1 - g.1) / dc);
        let (j01, j11) = ((gh.0 - g.0) / dh, (gh.1 - g.1) / dh);
        let det = j00 * j11 - j01 * j10;
        if det.abs() > 1e-14 {
            let full_c = (-g.0 * j11 + g.1 * j01) / det;
            let full_h = (-g.1 * j00 + g.0 * j10) / det;
            let mut t = 1.0;
            for _ in 0..8 {
                let (c, h) = clamp(mu_c + t * full_c, mu_h + t * full_h);
                let gt = residual(c, h);
                let vt = norm(gt);
                if vt < best {
                    mu_c = c;
                    mu_h = h;
                    g = gt;
                    best = vt;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if improved {
            continue;
        }

        // Pattern-search fallback over compass and diagonal moves.
        let dirs = [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
        ];
        let mut moved = false;
        for (uc, uh) in dirs {
            let c = mu_c + uc * step;
            let h = mu_h + uh * step;
            if c < 0.0 || h < 0.0 || c + h > 1.0 {
                continue;
            }
            let gt = residual(c, h);
            let vt = norm(gt);
            if vt < best {
                mu_c = c;
                mu_h = h;
                g = gt;
                best = vt;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (mu_c, mu_h, best)
}

/// Writes a dynamics trajectory as CSV with columns
/// `iter, mu_a, mu_c, mu_h, theta_a, theta_h, residual`.
///
/// The threshold columns are the effective best-response thresholds
/// evaluated at each visited state; the residual column is the sup-norm
/// (μ_c, μ_h) change from the previous row (0 on the initial row).
pub fn write_trajectory_csv(
    result: &EquilibriumResult,
    params: &MarketParams,
    strategy: &OperatorStrategy,
    path: &Path,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "mu_a", "mu_c", "mu_h", "theta_a", "theta_h", "residual"])?;
    let mut prev: Option<&MembershipState> = None;
    for (i, state) in result.trajectory.iter().enumerate() {
        let t = effective_thresholds(state, params, strategy);
        let residual = prev.map_or(0.0, |p| {
            (state.mu_c - p.mu_c).abs().max((state.mu_h - p.mu_h).abs())
        });
        w.write_record([
            i.to_string(),
            state.mu_a.to_string(),
            state.mu_c.to_string(),
            state.mu_h.to_string(),
            t.theta_a.to_string(),
            t.theta_h.to_string(),
            residual.to_string(),
        ])?;
        prev = Some(state);
    }
    w.flush()?;
    Ok(())
}
