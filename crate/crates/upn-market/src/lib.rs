//! Solver and simulator for a mobile user-provided network (UPN) market.
//!
//! A network operator sells mobile data at unit price `p` and lets
//! subscribers resell connectivity: a *host* opens a personal hotspot and
//! forwards traffic for nearby *clients*, earning a rebate `delta * p` per
//! forwarded byte, while an *alien* opts out of the service entirely.  Users
//! are heterogeneous in how much they value connectivity, and each picks the
//! membership (alien / client / host) that maximizes expected payoff given
//! what everyone else does.
//!
//! The crate is organized in layers:
//!
//! - [`dist`] — user-type distributions on `[0, 1]` (uniform, Beta);
//! - [`params`] — market parameters, operator strategy, config parsing;
//! - [`model`] — per-user payoffs and the random-encounter environment;
//! - [`equilibrium`] — best-response dynamics, threshold fixed points, and
//!   an independent grid oracle for locating all equilibria;
//! - [`operator`] — profit evaluation and two-level optimization of the
//!   operator's price and free-quota ratio, plus parameter sweeps;
//! - [`montecarlo`] — a finite-population discrete-slot simulator that
//!   checks the closed-form connection statistics against sampled ones.
//!
//! All population quantities are fractions of a unit-mass continuum; the
//! Monte-Carlo layer is the only place where a finite number of agents
//! appears.

pub mod dist;
pub mod equilibrium;
pub mod model;
pub mod montecarlo;
pub mod operator;
pub mod params;

pub use dist::TypeDistribution;
pub use equilibrium::{DynamicsSettings, EquilibriumResult, Thresholds};
pub use model::{MarketEnvironment, MembershipState, UnitBenefits};
pub use params::{ConfigError, MarketParams, OperatorStrategy, RunSettings};
