//! `upn` — command-line driver for the user-provided-network market
//! model.  Loads a flat `key = value` parameter file, dispatches to one
//! of four workflows, and writes CSV artifacts into the output
//! directory:
//!
//! * `equilibrium` — best-response dynamics from the all-alien state for
//!   the configured strategy; writes `trajectory.csv` and `summary.csv`.
//! * `sweep` — equilibrium summaries along a range of λ, p, or δ;
//!   writes `sweep.csv`.
//! * `optimize` — two-level grid search for the profit-optimal
//!   (p, δ) and the pricing-only benchmark; writes `surface.csv`,
//!   `p_star_curve.csv`, `delta_star_curve.csv`, `best.csv`, and
//!   optionally `lambda_profits.csv` across a λ range.
//! * `validate` — finite-population Monte-Carlo run compared against
//!   the closed forms; writes `validation.csv`.
//!
//! Every command is deterministic given its config (plus the seed for
//! `validate`); rerunning overwrites byte-identical artifacts.  Exit
//! codes: 0 success, 1 configuration error, 2 non-convergence,
//! 3 validation failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use upn_market::equilibrium::{
    effective_thresholds, solve_from_all_alien, write_trajectory_csv, DynamicsSettings,
    EquilibriumResult,
};
use upn_market::model::MembershipState;
use upn_market::montecarlo::{compare_with_theory, simulate, write_validation_csv, SimConfig};
use upn_market::operator::{
    optimize, sweep, write_delta_star_curve_csv, write_p_star_curve_csv, write_surface_csv,
    write_sweep_csv, OptimizationResult, SearchGrid, SweepVariable,
};
use upn_market::params::{load_config, RunSettings};
use upn_market::{MarketParams, OperatorStrategy, TypeDistribution};

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "upn",
    version,
    about = "Membership equilibria, operator pricing, and Monte-Carlo validation \
             for mobile user-provided networks"
)]
struct Cli {
    /// Parameter file: flat `key = value` lines with params.* and run.*
    /// keys; omitted keys keep their baseline defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory receiving the CSV artifacts (created if absent).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the membership equilibrium for the configured strategy
    /// (run.p, run.delta) from the all-alien start.
    Equilibrium,
    /// Resolve the equilibrium along a range of one variable, holding
    /// the configured strategy fixed otherwise.
    Sweep {
        /// Variable to sweep.
        #[arg(long, value_enum)]
        var: Var,
        /// First value of the range.
        #[arg(long)]
        from: f64,
        /// Last value of the range, inclusive.
        #[arg(long)]
        to: f64,
        /// Number of evenly spaced samples.
        #[arg(long)]
        steps: usize,
    },
    /// Grid-search the operator's price and free-quota ratio for the
    /// profit optimum and the pricing-only benchmark.
    Optimize {
        /// Coarse grid points along p (at least 50).
        #[arg(long, default_value_t = 144)]
        p_steps: usize,
        /// Coarse grid points along delta (at least 50).
        #[arg(long, default_value_t = 101)]
        delta_steps: usize,
        /// With --lambda-to and --lambda-steps: additionally optimize at
        /// each lambda in the range and tabulate hybrid vs pricing-only
        /// profit in lambda_profits.csv.
        #[arg(long, value_name = "LAMBDA")]
        lambda_from: Option<f64>,
        /// Upper end of the lambda range, inclusive.
        #[arg(long, value_name = "LAMBDA")]
        lambda_to: Option<f64>,
        /// Number of lambda samples.
        #[arg(long, value_name = "N")]
        lambda_steps: Option<usize>,
    },
    /// Simulate the finite-population market and compare the empirical
    /// meeting probability, per-host load, and revenue with the closed
    /// forms.
    Validate {
        /// Population size N (at least 2).
        #[arg(long, default_value_t = 5000)]
        agents: usize,
        /// Number of simulated slots.
        #[arg(long, default_value_t = 10_000)]
        slots: usize,
        /// PRNG seed; echoed in the report for reproducibility.
        #[arg(long, default_value_t = 12)]
        seed: u64,
        /// Compare against a deliberately perturbed state instead of the
        /// simulated one; expected to trip the detector and exit 3.
        #[arg(long)]
        negative_control: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Var {
    Lambda,
    P,
    Delta,
}

impl Var {
    fn to_sweep(self) -> SweepVariable {
        match self {
            Var::Lambda => SweepVariable::Lambda,
            Var::P => SweepVariable::P,
            Var::Delta => SweepVariable::Delta,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors; every other parse
            // problem is a configuration mistake and must exit 1, not
            // clap's default 2 (reserved here for non-convergence).
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli))
}

fn run(cli: Cli) -> u8 {
    let loaded = match &cli.config {
        Some(path) => load_config(path),
        None => Ok((MarketParams::baseline(), RunSettings::default())),
    };
    let (params, run) = match loaded {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!(
            "config error: cannot create output directory {}: {e}",
            cli.out.display()
        );
        return EXIT_CONFIG;
    }
    match cli.command {
        Command::Equilibrium => cmd_equilibrium(&params, &run, &cli.out),
        Command::Sweep { var, from, to, steps } => {
            cmd_sweep(&params, &run, var.to_sweep(), from, to, steps, &cli.out)
        }
        Command::Optimize {
            p_steps,
            delta_steps,
            lambda_from,
            lambda_to,
            lambda_steps,
        } => cmd_optimize(
            &params,
            &run,
            p_steps,
            delta_steps,
            (lambda_from, lambda_to, lambda_steps),
            &cli.out,
        ),
        Command::Validate { agents, slots, seed, negative_control } => {
            cmd_validate(&params, &run, agents, slots, seed, negative_control, &cli.out)
        }
    }
}

/// Dynamics stopping controls from the run.* config section.
fn dynamics(run: &RunSettings) -> DynamicsSettings {
    DynamicsSettings { tol: run.tol, max_iter: run.max_iter, damping: run.damping }
}

/// The configured strategy, box-checked; failures print the offending
/// key and map to exit 1.
fn configured_strategy(params: &MarketParams, run: &RunSettings) -> Result<OperatorStrategy, u8> {
    run.strategy()
        .and_then(|s| s.validate(params).map(|()| s))
        .map_err(|e| {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        })
}

fn artifact_error(path: &Path, e: &csv::Error) -> u8 {
    eprintln!("config error: cannot write {}: {e}", path.display());
    EXIT_CONFIG
}

fn cmd_equilibrium(params: &MarketParams, run: &RunSettings, out: &Path) -> u8 {
    let strategy = match configured_strategy(params, run) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let result = solve_from_all_alien(params, &strategy, &dynamics(run));

    let trajectory_path = out.join("trajectory.csv");
    if let Err(e) = write_trajectory_csv(&result, params, &strategy, &trajectory_path) {
        return artifact_error(&trajectory_path, &e);
    }
    let summary_path = out.join("summary.csv");
    if let Err(e) = write_summary_csv(&result, params, &strategy, &summary_path) {
        return artifact_error(&summary_path, &e);
    }

    let s = &result.state;
    println!(
        "equilibrium at (p = {}, delta = {}): mu_a = {:.6}, mu_c = {:.6}, mu_h = {:.6}",
        strategy.p, strategy.delta, s.mu_a, s.mu_c, s.mu_h
    );
    println!(
        "converged = {} after {} iterations (residual {:.3e})",
        result.converged, result.iterations, result.residual
    );
    println!("wrote {} and {}", trajectory_path.display(), summary_path.display());
    if result.converged {
        EXIT_OK
    } else {
        eprintln!("dynamics did not converge within {} iterations", result.iterations);
        EXIT_NO_CONVERGENCE
    }
}

/// One-row final-state summary with columns
/// `mu_a, mu_c, mu_h, theta_a, theta_h, p_h, y_c, converged, iterations,
/// residual`.
fn write_summary_csv(
    result: &EquilibriumResult,
    params: &MarketParams,
    strategy: &OperatorStrategy,
    path: &Path,
) -> Result<(), csv::Error> {
    let th = effective_thresholds(&result.state, params, strategy);
    let s = &result.state;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mu_a",
        "mu_c",
        "mu_h",
        "theta_a",
        "theta_h",
        "p_h",
        "y_c",
        "converged",
        "iterations",
        "residual",
    ])?;
    w.write_record([
        s.mu_a.to_string(),
        s.mu_c.to_string(),
        s.mu_h.to_string(),
        th.theta_a.to_string(),
        th.theta_h.to_string(),
        result.env.p_h.to_string(),
        result.env.y_c.to_string(),
        result.converged.to_string(),
        result.iterations.to_string(),
        result.residual.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn cmd_sweep(
    params: &MarketParams,
    run: &RunSettings,
    variable: SweepVariable,
    from: f64,
    to: f64,
    steps: usize,
    out: &Path,
) -> u8 {
    let values = match range_values(variable, from, to, steps, params) {
        Ok(v) => v,
        Err(reason) => {
            eprintln!("config error: invalid sweep range: {reason}");
            return EXIT_CONFIG;
        }
    };
    let strategy = match configured_strategy(params, run) {
        Ok(s) => s,
        Err(code) => return code,
    };

    let rows = sweep(params, variable, &values, &strategy, &dynamics(run));
    let path = out.join("sweep.csv");
    if let Err(e) = write_sweep_csv(&rows, variable, &path) {
        return artifact_error(&path, &e);
    }
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    println!(
        "swept {} over [{from}, {to}] in {} points ({unconverged} non-converged)",
        variable.as_str(),
        rows.len()
    );
    println!("wrote {}", path.display());
    EXIT_OK
}

/// Evenly spaced sample values for a sweep or a λ table, validated
/// against the variable's box.
fn range_values(
    variable: SweepVariable,
    from: f64,
    to: f64,
    steps: usize,
    params: &MarketParams,
) -> Result<Vec<f64>, String> {
    if steps == 0 {
        return Err("steps must be at least 1".into());
    }
    if !from.is_finite() || !to.is_finite() {
        return Err("endpoints must be finite".into());
    }
    if from > to {
        return Err(format!("range start {from} exceeds end {to}"));
    }
    if steps > 1 && from == to {
        return Err("a degenerate range needs steps = 1".into());
    }
    let (lo, hi, box_name) = match variable {
        SweepVariable::Lambda => (0.0, f64::INFINITY, "lambda >= 0"),
        SweepVariable::P => (0.0, params.p_max, "p in [0, p_max]"),
        SweepVariable::Delta => (0.0, 1.0, "delta in [0, 1]"),
    };
    if from < lo || to > hi {
        return Err(format!("range [{from}, {to}] leaves the box {box_name}"));
    }
    let values: Vec<f64> = if steps == 1 {
        vec![from]
    } else {
        (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err("range is too fine to resolve distinct samples".into());
    }
    Ok(values)
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    params: &MarketParams,
    run: &RunSettings,
    p_steps: usize,
    delta_steps: usize,
    lambda_range: (Option<f64>, Option<f64>, Option<usize>),
    out: &Path,
) -> u8 {
    if p_steps < 50 || delta_steps < 50 {
        eprintln!("config error: invalid grid: --p-steps and --delta-steps must be at least 50");
        return EXIT_CONFIG;
    }
    let lambdas = match lambda_range {
        (None, None, None) => None,
        (Some(a), Some(b), Some(n)) => {
            match range_values(SweepVariable::Lambda, a, b, n, params) {
                Ok(v) => Some(v),
                Err(reason) => {
                    eprintln!("config error: invalid lambda range: {reason}");
                    return EXIT_CONFIG;
                }
            }
        }
        _ => {
            eprintln!(
                "config error: --lambda-from, --lambda-to, and --lambda-steps \
                 must be given together"
            );
            return EXIT_CONFIG;
        }
    };

    let grid = SearchGrid { p_steps, delta_steps, dynamics: dynamics(run) };
    let result = optimize(params, &grid);

    let surface_path = out.join("surface.csv");
    if let Err(e) = write_surface_csv(&result.surface, &surface_path) {
        return artifact_error(&surface_path, &e);
    }
    let p_star_path = out.join("p_star_curve.csv");
    if let Err(e) = write_p_star_curve_csv(&result.p_star_curve, &p_star_path) {
        return artifact_error(&p_star_path, &e);
    }
    let delta_star_path = out.join("delta_star_curve.csv");
    if let Err(e) = write_delta_star_curve_csv(&result.delta_star_curve, &delta_star_path) {
        return artifact_error(&delta_star_path, &e);
    }
    let best_path = out.join("best.csv");
    if let Err(e) = write_best_csv(&result, &best_path) {
        return artifact_error(&best_path, &e);
    }

    println!(
        "hybrid optimum: p = {:.6}, delta = {:.6}, profit per user = {:.6}",
        result.best.strategy.p, result.best.strategy.delta, result.best.profit_per_user
    );
    println!(
        "pricing-only benchmark: p = {:.6}, profit per user = {:.6}",
        result.benchmark.strategy.p, result.benchmark.profit_per_user
    );
    println!(
        "wrote {}, {}, {} and {}",
        surface_path.display(),
        p_star_path.display(),
        delta_star_path.display(),
        best_path.display()
    );

    if let Some(values) = lambdas {
        let table: Vec<(f64, OptimizationResult)> = values
            .iter()
            .map(|&lambda| (lambda, optimize(&params.with_lambda(lambda), &grid)))
            .collect();
        let table_path = out.join("lambda_profits.csv");
        if let Err(e) = write_lambda_profits_csv(&table, &table_path) {
            return artifact_error(&table_path, &e);
        }
        println!("wrote {}", table_path.display());
    }
    EXIT_OK
}

/// Two-row table pinning the refined optimum and the δ = 0 benchmark.
fn write_best_csv(result: &OptimizationResult, path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["role", "p", "delta", "profit", "mu_a", "mu_c", "mu_h", "converged"])?;
    for (role, point) in [("hybrid", &result.best), ("benchmark", &result.benchmark)] {
        let s = &point.equilibrium.state;
        w.write_record([
            role.to_string(),
            point.strategy.p.to_string(),
            point.strategy.delta.to_string(),
            point.profit_per_user.to_string(),
            s.mu_a.to_string(),
            s.mu_c.to_string(),
            s.mu_h.to_string(),
            point.equilibrium.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-λ comparison of the hybrid optimum and the pricing-only
/// benchmark, one row per λ sample.
fn write_lambda_profits_csv(
    table: &[(f64, OptimizationResult)],
    path: &Path,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "lambda",
        "p_star",
        "delta_star",
        "hybrid_profit",
        "benchmark_p",
        "benchmark_profit",
    ])?;
    for (lambda, result) in table {
        w.write_record([
            lambda.to_string(),
            result.best.strategy.p.to_string(),
            result.best.strategy.delta.to_string(),
            result.best.profit_per_user.to_string(),
            result.benchmark.strategy.p.to_string(),
            result.benchmark.profit_per_user.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    params: &MarketParams,
    run: &RunSettings,
    agents: usize,
    slots: usize,
    seed: u64,
    negative_control: bool,
    out: &Path,
) -> u8 {
    let strategy = match configured_strategy(params, run) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let f = &params.type_distribution;
    // The simulated partition: explicit fractions when the config pins
    // them, otherwise the equilibrium of the configured strategy.
    let state = match (run.mu_c, run.mu_h) {
        (Some(mu_c), Some(mu_h)) => MembershipState::from_fractions(mu_c, mu_h, f),
        _ => {
            let result = solve_from_all_alien(params, &strategy, &dynamics(run));
            if !result.converged {
                eprintln!(
                    "dynamics did not converge within {} iterations; \
                     cannot validate against a non-equilibrium state \
                     (set run.mu_c and run.mu_h to pin one explicitly)",
                    result.iterations
                );
                return EXIT_NO_CONVERGENCE;
            }
            result.state
        }
    };

    let config = SimConfig {
        n_agents: agents,
        lambda: params.lambda,
        slots,
        seed,
        state: state.clone(),
    };
    if let Err(reason) = config.validate() {
        eprintln!("config error: {reason}");
        return EXIT_CONFIG;
    }

    let stats = simulate(&config, params, &strategy);
    let reference = if negative_control { perturbed_state(&state, f) } else { state };
    let report = compare_with_theory(&stats, &reference, params, &strategy, 3.0);

    let path = out.join("validation.csv");
    if let Err(e) = write_validation_csv(&report, &path) {
        return artifact_error(&path, &e);
    }

    println!(
        "validation run: N = {agents}, lambda = {}, slots = {slots}, seed = {}",
        params.lambda, report.seed
    );
    println!(
        "simulated state: mu_c = {:.6}, mu_h = {:.6} ({} hosts, {} clients)",
        config.state.mu_c, config.state.mu_h, stats.n_hosts, stats.n_clients
    );
    if negative_control {
        println!(
            "negative control: comparing against a perturbed state \
             (mu_c = {:.6}, mu_h = {:.6})",
            reference.mu_c, reference.mu_h
        );
    }
    for row in &report.rows {
        println!(
            "  {:<8} theory {:>12.6}  estimate {:>12.6}  band {:>10.3e}  {}",
            row.quantity,
            row.theory,
            row.estimate,
            3.0 * row.half_width + row.bias_bound,
            if row.pass { "ok" } else { "DISCREPANT" }
        );
    }
    println!("flow conservation held on every slot: {}", report.flow_conserved);
    println!("wrote {}", path.display());

    if report.all_pass {
        EXIT_OK
    } else {
        let discrepant: Vec<&str> =
            report.rows.iter().filter(|r| !r.pass).map(|r| r.quantity).collect();
        if !discrepant.is_empty() {
            eprintln!("validation failed: discrepant quantities: {}", discrepant.join(", "));
        }
        if !report.flow_conserved {
            eprintln!("validation failed: flow conservation violated");
        }
        EXIT_VALIDATION
    }
}

/// A deliberately wrong reference state for the negative control: half
/// the hosts are reclassified as clients, which shifts both the meeting
/// probability and the per-host load far outside the confidence bands
/// at practical scales.
fn perturbed_state(state: &MembershipState, f: &TypeDistribution) -> MembershipState {
    let mu_h = 0.5 * state.mu_h;
    let mu_c = (state.mu_c + 0.5 * state.mu_h).min(1.0 - mu_h);
    MembershipState::from_fractions(mu_c, mu_h, f)
}
