//! Fictitious-play learning of mixed equilibria.
//!
//! Each customer keeps an action histogram seeded with its initial mixed
//! strategy as a pseudo-observation of weight `prior_weight`. Its empirical
//! frequency after `m` plays is `(w0 * prior + counts) / (w0 + m)`, i.e. the
//! usual `sigma(m) = (m-1)/m * sigma(m-1) + 1/m * 1{a(m) = a}` recursion with
//! the initial strategy counted as the first observation. At every step a
//! customer best-responds to the others' current frequencies; ties go to the
//! lowest power factor.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::format::{fmt_f64, fmt_vec};
use crate::game::{build_tables, MixedProfile, UtilityTables};
use crate::oracle::verify_epsilon_ne;
use crate::power::{Mode, Scenario};

/// Two expected utilities closer than this are treated as tied.
pub const TIE_EPS: f64 = 1e-12;

/// Default ε for the ε-NE check performed on every solved profile.
pub const DEFAULT_NE_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Every customer responds to the previous iteration's frequencies.
    #[default]
    Simultaneous,
    /// Customers respond in index order, each seeing the updates already made
    /// earlier in the same iteration.
    RoundRobin,
}

fn default_stop_tol() -> f64 {
    1e-4
}

fn default_max_iters() -> u64 {
    1_000_000
}

fn default_prior_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpSettings {
    /// Stop once no frequency moves by this much (∞-norm) in one iteration.
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
    #[serde(default)]
    pub update_order: UpdateOrder,
    #[serde(default = "default_prior_weight")]
    pub prior_weight: f64,
}

impl Default for FpSettings {
    fn default() -> Self {
        FpSettings {
            stop_tol: default_stop_tol(),
            max_iters: default_max_iters(),
            update_order: UpdateOrder::default(),
            prior_weight: default_prior_weight(),
        }
    }
}

/// Histograms and priors behind the empirical frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub counts: Vec<Vec<u64>>,
    pub prior: Vec<Vec<f64>>,
    pub prior_weight: f64,
    /// Completed iterations.
    pub iteration: u64,
    pub last_actions: Option<Vec<usize>>,
}

impl BeliefState {
    pub fn new(prior: Vec<Vec<f64>>, prior_weight: f64) -> Self {
        BeliefState {
            counts: prior.iter().map(|p| vec![0; p.len()]).collect(),
            prior,
            prior_weight,
            iteration: 0,
            last_actions: None,
        }
    }

    pub fn frequency(&self, i: usize) -> Vec<f64> {
        let counts = &self.counts[i];
        let total: u64 = counts.iter().sum();
        let denom = self.prior_weight + total as f64;
        if denom == 0.0 {
            return self.prior[i].clone();
        }
        counts
            .iter()
            .zip(&self.prior[i])
            .map(|(&c, &p)| (self.prior_weight * p + c as f64) / denom)
            .collect()
    }

    pub fn frequencies(&self) -> MixedProfile {
        MixedProfile((0..self.counts.len()).map(|i| self.frequency(i)).collect())
    }

    fn record(&mut self, i: usize, action: usize) {
        self.counts[i][action] += 1;
    }

    /// One fictitious-play iteration, in place.
    pub fn step(&mut self, tables: &UtilityTables, mode: Mode, order: UpdateOrder) {
        let n = self.counts.len();
        let mut played = vec![0usize; n];
        match order {
            UpdateOrder::Simultaneous => {
                let beliefs = self.frequencies();
                for (i, slot) in played.iter_mut().enumerate() {
                    *slot = best_response(i, &beliefs, tables, mode);
                }
                for (i, &a) in played.iter().enumerate() {
                    self.record(i, a);
                }
            }
            UpdateOrder::RoundRobin => {
                let mut beliefs = self.frequencies();
                for (i, slot) in played.iter_mut().enumerate() {
                    let a = best_response(i, &beliefs, tables, mode);
                    *slot = a;
                    self.record(i, a);
                    beliefs.0[i] = self.frequency(i);
                }
            }
        }
        self.iteration += 1;
        self.last_actions = Some(played);
    }
}

/// Best pure action of customer `i` against the others' frequencies in
/// `beliefs`; ties (within [`TIE_EPS`]) resolve to the lowest power factor.
pub fn best_response(i: usize, beliefs: &MixedProfile, tables: &UtilityTables, mode: Mode) -> usize {
    let rows = tables.action_utilities(i, beliefs, mode);
    let best = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .position(|&r| r >= best - TIE_EPS)
        .expect("action set is non-empty")
}

pub fn fp_step(state: &BeliefState, tables: &UtilityTables, mode: Mode, settings: &FpSettings) -> BeliefState {
    let mut next = state.clone();
    next.step(tables, mode, settings.update_order);
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub mode: Mode,
    pub profile: MixedProfile,
    pub expected_utilities: Vec<f64>,
    pub iterations: u64,
    pub converged: bool,
    /// ∞-norm of the last frequency change.
    pub final_step: f64,
    /// Largest pure-deviation improvement over all customers.
    pub ne_gap: f64,
    pub gaps: Vec<f64>,
}

impl EquilibriumResult {
    pub fn total_utility(&self) -> f64 {
        self.expected_utilities.iter().sum()
    }

    /// Index of the most likely action of customer `i`.
    pub fn modal_action(&self, i: usize) -> usize {
        let v = self.profile.customer(i);
        let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter().position(|&p| p == best).unwrap_or(0)
    }
}

/// Runs fictitious play from `prior` until the frequencies settle or
/// `max_iters` is exhausted. `observer` sees the state after every iteration.
pub fn learn(
    tables: &UtilityTables,
    settings: &FpSettings,
    prior: Vec<Vec<f64>>,
    mode: Mode,
    mut observer: impl FnMut(&BeliefState),
) -> EquilibriumResult {
    let mut state = BeliefState::new(prior, settings.prior_weight);
    let mut current = state.frequencies();
    let mut converged = false;
    let mut final_step = f64::INFINITY;
    while state.iteration < settings.max_iters {
        state.step(tables, mode, settings.update_order);
        observer(&state);
        let next = state.frequencies();
        final_step = next.max_abs_diff(&current);
        current = next;
        if final_step < settings.stop_tol {
            converged = true;
            break;
        }
    }
    let n = tables.n_customers();
    let expected_utilities = (0..n).map(|i| tables.expected_utility(i, &current, mode)).collect();
    let check = verify_epsilon_ne(&current, tables, mode, DEFAULT_NE_EPS);
    EquilibriumResult {
        mode,
        profile: current,
        expected_utilities,
        iterations: state.iteration,
        converged,
        final_step,
        ne_gap: check.max_gap(),
        gaps: check.gaps,
    }
}

/// Builds the tables for `s` and runs fictitious play under `mode`.
pub fn run_fp(s: &Scenario, mode: Mode) -> Result<EquilibriumResult> {
    let tables = build_tables(s)?;
    Ok(run_fp_on(&tables, s, mode))
}

pub fn run_fp_on(tables: &UtilityTables, s: &Scenario, mode: Mode) -> EquilibriumResult {
    learn(tables, &s.fp, s.resolved_initial_strategies(), mode, |_| {})
}

/// Equilibrium plus the wall time it took.
pub fn run_fp_timed(tables: &UtilityTables, s: &Scenario, mode: Mode) -> (EquilibriumResult, std::time::Duration) {
    let start = Instant::now();
    let r = run_fp_on(tables, s, mode);
    (r, start.elapsed())
}

/// One line of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub customer: usize,
    pub action: usize,
    pub action_pf: f64,
    pub frequencies: Vec<f64>,
}

/// Runs fictitious play and records, for every iteration and customer, the
/// action played and the resulting frequencies.
pub fn run_fp_traced(tables: &UtilityTables, s: &Scenario, mode: Mode) -> (EquilibriumResult, Vec<TraceRow>) {
    let mut rows = Vec::new();
    let result = learn(tables, &s.fp, s.resolved_initial_strategies(), mode, |state| {
        let played = state.last_actions.as_ref().expect("set after a step");
        for (i, &a) in played.iter().enumerate() {
            rows.push(TraceRow {
                iteration: state.iteration,
                customer: i,
                action: a,
                action_pf: tables.action_values(i)[a],
                frequencies: state.frequency(i),
            });
        }
    });
    (result, rows)
}

/// Trace CSV: `m,customer,action_index,action_pf,frequencies`, frequencies
/// semicolon-joined in action order.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], ids: &[String], mut w: W) -> std::io::Result<()> {
    writeln!(w, "m,customer,action_index,action_pf,frequencies")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iteration,
            ids[r.customer],
            r.action,
            fmt_f64(r.action_pf),
            fmt_vec(&r.frequencies)
        )?;
    }
    Ok(())
}
