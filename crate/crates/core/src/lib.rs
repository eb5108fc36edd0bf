//! Reactive-power compensation game between customers of a shared feeder.
//!
//! Customers pick a target power factor, pay for the reactive power they
//! compensate, and share the surplus or shortfall against the standard
//! requirement. The engine builds utility tables, learns equilibria by
//! fictitious play, checks them against brute-force oracles and runs
//! parameter studies.

pub mod analysis;
pub mod error;
pub mod format;
pub mod fp;
pub mod game;
pub mod io;
pub mod oracle;
pub mod power;
pub mod reproduce;
pub mod scenarios;
pub mod summary;

pub use analysis::{
    classify_regime, k_threshold, sweep, Regime, Scope, SweepParam, SweepSpec, SweepTable, ThresholdResult,
};
pub use error::{Error, Result};
pub use fp::{best_response, fp_step, run_fp, BeliefState, EquilibriumResult, FpSettings, UpdateOrder};
pub use game::{build_tables, ActionProfile, MixedProfile, UtilityTables};
pub use oracle::{enumerate_pure_ne, solve_2x2_mixed, verify_epsilon_ne, NeReport};
pub use power::{var_compensation, CustomerSpec, Mode, ModeSet, PowerFactor, ReferenceMode, Scenario};

/// Engine version recorded in run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
