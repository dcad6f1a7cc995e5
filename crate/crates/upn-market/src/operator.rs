//! Stage-I operator problem: profit evaluation and optimization of the
//! price / free-quota pair.
//!
//! The operator earns the margin p(1−δ) − ω on every served byte — hosts'
//! own usage `x_h = μ_h·θ̄_h` plus connected client usage
//! `x_c = μ_c·θ̄_c·P_H` — evaluated at the Stage-II equilibrium the
//! strategy induces.  All profits are per user: the population scale N
//! enters the model only as a multiplicative factor and is divided out.
//!
//! The profit landscape is non-convex and the inner equilibrium is
//! piecewise-smooth with clamping kinks, so the search is derivative-free:
//! a coarse 2D grid (default 144×101 over [0, p_max]×[0, 1]) followed by
//! golden-section refinement of the conditional optima p*(δ) and δ*(p),
//! alternated until the pair settles.  Grid points whose dynamics do not
//! converge are flagged and excluded from argmax candidacy: profit at a
//! non-equilibrium point is not model-meaningful.  Argmax ties break
//! toward the lexicographically smallest (p, δ).

use crate::equilibrium::{
    converge_scalar, effective_thresholds, solve_from_all_alien, DynamicsSettings,
    EquilibriumResult,
};
use crate::params::{MarketParams, OperatorStrategy};
use rayon::prelude::*;
use std::path::Path;

/// Bracket width at which golden-section refinement stops; comfortably
/// below the contracted resolution of 1e-3 so that shallow conditional
/// optima (δ* within one coarse step of 0) are still resolved.
const GOLDEN_TOL: f64 = 1e-5;

/// Rounds of alternating conditional refinement in [`optimize`].
const REFINE_ROUNDS: usize = 8;

/// Profit assigned to non-converged points during maximization, keeping
/// them below every model-meaningful value.
const EXCLUDED: f64 = f64::NEG_INFINITY;

/// Search resolutions and inner-dynamics controls for the operator's
/// optimization routines.
#[derive(Debug, Clone, Copy)]
pub struct SearchGrid {
    /// Coarse grid points along p ∈ [0, p_max].
    pub p_steps: usize,
    /// Coarse grid points along δ ∈ [0, 1].
    pub delta_steps: usize,
    /// Stopping controls for the inner best-response dynamics.
    pub dynamics: DynamicsSettings,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid { p_steps: 144, delta_steps: 101, dynamics: DynamicsSettings::default() }
    }
}

/// A fully evaluated strategy: profit, demands, and the inner
/// equilibrium that produced them.
#[derive(Debug, Clone)]
pub struct ProfitPoint {
    /// The evaluated strategy.
    pub strategy: OperatorStrategy,
    /// Per-user, per-slot profit (x_h + x_c)·(p(1−δ) − ω).
    pub profit_per_user: f64,
    /// Dynamics outcome at the strategy; `converged = false` flags the
    /// point as evaluated at the last iterate rather than an equilibrium.
    pub equilibrium: EquilibriumResult,
    /// Host-side demand μ_h·θ̄_h, bytes per slot per user.
    pub x_h: f64,
    /// Client-side served demand μ_c·θ̄_c·P_H, bytes per slot per user.
    pub x_c: f64,
}

/// One entry of the profit surface grid.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub p: f64,
    pub delta: f64,
    /// Per-user profit at the dynamics' final iterate.
    pub profit: f64,
    pub mu_a: f64,
    pub mu_c: f64,
    pub mu_h: f64,
    /// Whether the inner dynamics converged; non-converged entries are
    /// excluded from argmax candidacy.
    pub converged: bool,
}

/// One sample of the conditional-optimum curve δ ↦ p*(δ).
#[derive(Debug, Clone, Copy)]
pub struct PStarPoint {
    pub delta: f64,
    pub p_star: f64,
    pub profit: f64,
}

/// One sample of the conditional-optimum curve p ↦ δ*(p).
#[derive(Debug, Clone, Copy)]
pub struct DeltaStarPoint {
    pub p: f64,
    pub delta_star: f64,
    pub profit: f64,
}

/// Outcome of the two-level Stage-I search.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// The refined global optimum.
    pub best: ProfitPoint,
    /// Sampled map δ → p*(δ) on the coarse δ grid.
    pub p_star_curve: Vec<PStarPoint>,
    /// Sampled map p → δ*(p) on the coarse p grid.
    pub delta_star_curve: Vec<DeltaStarPoint>,
    /// The coarse profit surface, row-major in p then δ.
    pub surface: Vec<SurfacePoint>,
    /// The pricing-only (δ = 0) optimum.
    pub benchmark: ProfitPoint,
}

/// The variable swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Lambda,
    P,
    Delta,
}

impl SweepVariable {
    /// Column name used in sweep CSV output.
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::Lambda => "lambda",
            SweepVariable::P => "p",
            SweepVariable::Delta => "delta",
        }
    }
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    /// Value of the swept variable.
    pub value: f64,
    pub mu_a: f64,
    pub mu_c: f64,
    pub mu_h: f64,
    pub theta_a: f64,
    pub theta_h: f64,
    pub profit: f64,
    pub x_h: f64,
    pub x_c: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Evaluates a strategy with default dynamics settings.
pub fn profit_per_user(strategy: &OperatorStrategy, params: &MarketParams) -> ProfitPoint {
    profit_per_user_with(strategy, params, &DynamicsSettings::default())
}

/// Evaluates a strategy: runs the dynamics from all-alien and computes
/// demands and profit at the final state.
///
/// A non-converged run is never fatal: the point is flagged through
/// `equilibrium.converged` and the profit reports the last iterate.
pub fn profit_per_user_with(
    strategy: &OperatorStrategy,
    params: &MarketParams,
    settings: &DynamicsSettings,
) -> ProfitPoint {
    let equilibrium = solve_from_all_alien(params, strategy, settings);
    let state = &equilibrium.state;
    let env = &equilibrium.env;
    let x_h = state.mu_h * env.theta_bar_h;
    let x_c = state.mu_c * env.theta_bar_c * env.p_h;
    let margin = strategy.p * (1.0 - strategy.delta) - params.omega;
    let profit_per_user = (x_h + x_c) * margin;
    ProfitPoint { strategy: *strategy, profit_per_user, equilibrium, x_h, x_c }
}

/// Allocation-free profit of a strategy on the search hot path;
/// bit-identical to [`profit_per_user_with`] by the scalar-mirror
/// construction in the equilibrium module.
fn scalar_surface_point(
    p: f64,
    delta: f64,
    params: &MarketParams,
    settings: &DynamicsSettings,
) -> SurfacePoint {
    let strategy = OperatorStrategy::new(p, delta);
    let f = &params.type_distribution;
    let eq = converge_scalar(params, &strategy, settings);
    let theta_bar_c = eq.client.map_or(0.0, |iv| f.conditional_mean(&[iv]));
    let theta_bar_h = eq.host.map_or(0.0, |iv| f.conditional_mean(&[iv]));
    let p_h = crate::model::meeting_prob(eq.mu_h, params.lambda);
    let x_h = eq.mu_h * theta_bar_h;
    let x_c = eq.mu_c * theta_bar_c * p_h;
    let margin = p * (1.0 - delta) - params.omega;
    SurfacePoint {
        p,
        delta,
        profit: (x_h + x_c) * margin,
        mu_a: (1.0 - eq.mu_c - eq.mu_h).clamp(0.0, 1.0),
        mu_c: eq.mu_c,
        mu_h: eq.mu_h,
        converged: eq.converged,
    }
}

/// Profit for maximization purposes: non-converged points are excluded
/// by mapping them to −∞.
fn search_value(p: f64, delta: f64, params: &MarketParams, settings: &DynamicsSettings) -> f64 {
    let pt = scalar_surface_point(p, delta, params, settings);
    if pt.converged {
        pt.profit
    } else {
        EXCLUDED
    }
}

/// `n` evenly spaced samples over [lo, hi], endpoints exact.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// Golden-section maximization over [lo, hi] down to bracket width
/// `tol_x`.
///
/// Endpoints are evaluated too, and the best probed point wins with ties
/// broken toward smaller x, so boundary optima (δ* = 0 in particular)
/// are returned exactly.
fn golden_max(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, tol_x: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut best = (lo, f(lo));
    let consider = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v > best.1 || (v == best.1 && x < best.0) {
            *best = (x, v);
        }
    };
    let vhi = f(hi);
    consider(hi, vhi, &mut best);

    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    while b - a > tol_x {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            consider(d, fd, &mut best);
        }
    }
    best
}

/// One-dimensional conditional optimum p*(δ): coarse scan over the p
/// grid, then golden-section refinement of the bracket around the best
/// grid point.  Ties break toward smaller p.
pub fn best_p_given_delta(delta: f64, params: &MarketParams, grid: &SearchGrid) -> (f64, f64) {
    let ps = linspace(0.0, params.p_max, grid.p_steps);
    conditional_optimum(&ps, &mut |p| search_value(p, delta, params, &grid.dynamics))
}

/// One-dimensional conditional optimum δ*(p), symmetric to
/// [`best_p_given_delta`].
pub fn best_delta_given_p(p: f64, params: &MarketParams, grid: &SearchGrid) -> (f64, f64) {
    let ds = linspace(0.0, 1.0, grid.delta_steps);
    conditional_optimum(&ds, &mut |d| search_value(p, d, params, &grid.dynamics))
}

fn conditional_optimum(xs: &[f64], f: &mut dyn FnMut(f64) -> f64) -> (f64, f64) {
    let mut best_i = 0;
    let mut best_v = f(xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { xs[0] } else { xs[best_i - 1] };
    let hi = if best_i + 1 == xs.len() { xs[xs.len() - 1] } else { xs[best_i + 1] };
    let (gx, gv) = golden_max(f, lo, hi, GOLDEN_TOL);
    if gv > best_v || (gv == best_v && gx < xs[best_i]) {
        (gx, gv)
    } else {
        (xs[best_i], best_v)
    }
}

/// Two-level Stage-I search: coarse 2D grid argmax, conditional-optimum
/// curves, and alternating golden refinement to below-grid resolution.
///
/// The surface is evaluated in parallel with order-deterministic
/// assembly; the whole search is a pure function of its inputs.
pub fn optimize(params: &MarketParams, grid: &SearchGrid) -> OptimizationResult {
    assert!(
        grid.p_steps >= 50 && grid.delta_steps >= 50,
        "optimize needs at least 50 grid points per dimension"
    );
    let ps = linspace(0.0, params.p_max, grid.p_steps);
    let ds = linspace(0.0, 1.0, grid.delta_steps);

    let surface: Vec<SurfacePoint> = ps
        .par_iter()
        .flat_map_iter(|&p| {
            let ds = ds.clone();
            ds.into_iter()
                .map(move |d| scalar_surface_point(p, d, params, &grid.dynamics))
        })
        .collect();

    let grid_best = surface
        .iter()
        .filter(|pt| pt.converged)
        .fold(None::<(f64, f64, f64)>, |acc, pt| match acc {
            None => Some((pt.p, pt.delta, pt.profit)),
            Some((bp, bd, bv)) => {
                if pt.profit > bv
                    || (pt.profit == bv && (pt.p < bp || (pt.p == bp && pt.delta < bd)))
                {
                    Some((pt.p, pt.delta, pt.profit))
                } else {
                    Some((bp, bd, bv))
                }
            }
        })
        .expect("profit surface contains no converged point");

    let p_star_curve: Vec<PStarPoint> = ds
        .par_iter()
        .map(|&delta| {
            let (p_star, profit) = best_p_given_delta(delta, params, grid);
            PStarPoint { delta, p_star, profit }
        })
        .collect();
    let delta_star_curve: Vec<DeltaStarPoint> = ps
        .par_iter()
        .map(|&p| {
            let (delta_star, profit) = best_delta_given_p(p, params, grid);
            DeltaStarPoint { p, delta_star, profit }
        })
        .collect();

    let mut incumbent = (grid_best.0, grid_best.1, grid_best.2);
    let consider = |cand: (f64, f64, f64), inc: &mut (f64, f64, f64)| {
        if cand.2 > inc.2
            || (cand.2 == inc.2 && (cand.0 < inc.0 || (cand.0 == inc.0 && cand.1 < inc.1)))
        {
            *inc = cand;
        }
    };
    for cp in &p_star_curve {
        consider((cp.p_star, cp.delta, cp.profit), &mut incumbent);
    }
    for cp in &delta_star_curve {
        consider((cp.p, cp.delta_star, cp.profit), &mut incumbent);
    }

    let (mut p_cur, mut d_cur, mut v_cur) = incumbent;
    for _ in 0..REFINE_ROUNDS {
        let mut moved = false;
        let (p_new, v_p) = best_p_given_delta(d_cur, params, grid);
        if v_p > v_cur {
            p_cur = p_new;
            v_cur = v_p;
            moved = true;
        }
        let (d_new, v_d) = best_delta_given_p(p_cur, params, grid);
        if v_d > v_cur {
            d_cur = d_new;
            v_cur = v_d;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    consider((p_cur, d_cur, v_cur), &mut incumbent);

    let best = profit_per_user_with(
        &OperatorStrategy::new(incumbent.0, incumbent.1),
        params,
        &grid.dynamics,
    );
    let bench = &p_star_curve[0];
    let benchmark = profit_per_user_with(
        &OperatorStrategy::new(bench.p_star, 0.0),
        params,
        &grid.dynamics,
    );

    debug_assert!(
        surface
            .iter()
            .filter(|pt| pt.converged)
            .all(|pt| best.profit_per_user >= pt.profit),
        "refined best must dominate the surface"
    );
    debug_assert!(
        !benchmark.equilibrium.converged
            || best.profit_per_user >= benchmark.profit_per_user,
        "hybrid optimum must dominate the pricing-only benchmark"
    );

    OptimizationResult { best, p_star_curve, delta_star_curve, surface, benchmark }
}

/// The pricing-only benchmark: δ fixed at 0, price optimized.
pub fn benchmark(params: &MarketParams, grid: &SearchGrid) -> ProfitPoint {
    let (p_star, _) = best_p_given_delta(0.0, params, grid);
    profit_per_user_with(&OperatorStrategy::new(p_star, 0.0), params, &grid.dynamics)
}

/// Sweeps one variable over explicit sample values, holding the others
/// fixed; reports the full equilibrium summary per point in input order.
///
/// The swept component of `base` (or λ of `params`) is overridden point
/// by point.
pub fn sweep(
    params: &MarketParams,
    variable: SweepVariable,
    values: &[f64],
    base: &OperatorStrategy,
    settings: &DynamicsSettings,
) -> Vec<SweepRow> {
    assert!(
        !values.is_empty() && values.iter().all(|v| v.is_finite()),
        "sweep range must be finite and nonempty"
    );
    assert!(
        values.windows(2).all(|w| w[1] > w[0]),
        "sweep range must be increasing"
    );
    values
        .iter()
        .map(|&v| {
            let (pp, ss): (MarketParams, OperatorStrategy) = match variable {
                SweepVariable::Lambda => (params.with_lambda(v), *base),
                SweepVariable::P => (params.clone(), OperatorStrategy::new(v, base.delta)),
                SweepVariable::Delta => (params.clone(), OperatorStrategy::new(base.p, v)),
            };
            let point = profit_per_user_with(&ss, &pp, settings);
            let t = effective_thresholds(&point.equilibrium.state, &pp, &ss);
            SweepRow {
                value: v,
                mu_a: point.equilibrium.state.mu_a,
                mu_c: point.equilibrium.state.mu_c,
                mu_h: point.equilibrium.state.mu_h,
                theta_a: t.theta_a,
                theta_h: t.theta_h,
                profit: point.profit_per_user,
                x_h: point.x_h,
                x_c: point.x_c,
                converged: point.equilibrium.converged,
                iterations: point.equilibrium.iterations,
            }
        })
        .collect()
}

/// Writes the profit surface as CSV with columns
/// `p, delta, profit, mu_a, mu_c, mu_h, converged`.
pub fn write_surface_csv(surface: &[SurfacePoint], path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "delta", "profit", "mu_a", "mu_c", "mu_h", "converged"])?;
    for pt in surface {
        w.write_record([
            pt.p.to_string(),
            pt.delta.to_string(),
            pt.profit.to_string(),
            pt.mu_a.to_string(),
            pt.mu_c.to_string(),
            pt.mu_h.to_string(),
            pt.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the δ → p*(δ) curve as CSV with columns
/// `delta, p_star, profit`.
pub fn write_p_star_curve_csv(curve: &[PStarPoint], path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "p_star", "profit"])?;
    for pt in curve {
        w.write_record([pt.delta.to_string(), pt.p_star.to_string(), pt.profit.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the p → δ*(p) curve as CSV with columns
/// `p, delta_star, profit`.
pub fn write_delta_star_curve_csv(
    curve: &[DeltaStarPoint],
    path: &Path,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "delta_star", "profit"])?;
    for pt in curve {
        w.write_record([
            pt.p.to_string(),
            pt.delta_star.to_string(),
            pt.profit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a sweep table as CSV; the first column carries the swept
/// variable's name.
pub fn write_sweep_csv(
    rows: &[SweepRow],
    variable: SweepVariable,
    path: &Path,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        variable.as_str(),
        "mu_a",
        "mu_c",
        "mu_h",
        "theta_a",
        "theta_h",
        "profit",
        "x_h",
        "x_c",
        "converged",
        "iterations",
    ])?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.mu_a.to_string(),
            r.mu_c.to_string(),
            r.mu_h.to_string(),
            r.theta_a.to_string(),
            r.theta_h.to_string(),
            r.profit.to_string(),
            r.x_h.to_string(),
            r.x_c.to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
