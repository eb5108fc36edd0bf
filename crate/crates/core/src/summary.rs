//! Machine-readable record of a solve run.

use serde::{Deserialize, Serialize};

use crate::analysis::{classify_regime, Regime, SweepTable, ThresholdResult};
use crate::error::Result;
use crate::fp::{run_fp_timed, EquilibriumResult, DEFAULT_NE_EPS};
use crate::game::build_tables;
use crate::oracle::{full_report, NeReport};
use crate::power::{ModeSet, Scenario};
use crate::VERSION;

/// Modelling choices every summary records alongside the numbers.
pub const ENGINE_NOTES: &[&str] = &[
    "belief update counts the indicator of the action actually played at each step",
    "initial strategies enter beliefs as a prior pseudo-observation of weight prior_weight",
    "convergence is the max-abs change of any customer's frequency vector between iterations",
    "best-response ties within 1e-12 go to the smallest power factor",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRun {
    pub result: EquilibriumResult,
    /// Whether `result.profile` passes the pure-deviation check at `ne_epsilon`.
    pub is_epsilon_ne: bool,
    pub ne_epsilon: f64,
    pub oracle: NeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub engine_version: String,
    /// Everything needed to rerun.
    pub scenario: Scenario,
    pub regime: Regime,
    pub reference_points: Vec<f64>,
    pub runs: Vec<ModeRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
    /// True when the run was asked to certify that no random source is used.
    pub seedless: bool,
    pub notes: Vec<String>,
    /// Wall time per run, milliseconds. Not part of the reproducible record.
    pub timing_ms: Vec<f64>,
}

impl RunSummary {
    /// Solves `s` under every mode in `modes`.
    pub fn solve(s: &Scenario, modes: ModeSet, seedless: bool) -> Result<Self> {
        let tables = build_tables(s)?;
        let mut runs = Vec::new();
        let mut timing_ms = Vec::new();
        for &mode in modes.modes() {
            let (result, elapsed) = run_fp_timed(&tables, s, mode);
            let is_epsilon_ne = result.ne_gap <= DEFAULT_NE_EPS;
            runs.push(ModeRun {
                result,
                is_epsilon_ne,
                ne_epsilon: DEFAULT_NE_EPS,
                oracle: full_report(&tables, mode),
            });
            timing_ms.push(elapsed.as_secs_f64() * 1e3);
        }
        let mut scenario = s.clone();
        scenario.mode = modes;
        Ok(RunSummary {
            engine_version: VERSION.to_string(),
            regime: classify_regime(s),
            reference_points: tables.reference_points().to_vec(),
            scenario,
            runs,
            threshold: None,
            sweep: None,
            seedless,
            notes: ENGINE_NOTES.iter().map(|n| n.to_string()).collect(),
            timing_ms,
        })
    }

    /// Solves again from the embedded scenario.
    pub fn rerun(&self) -> Result<Self> {
        RunSummary::solve(&self.scenario, self.scenario.mode, self.seedless)
    }

    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.result.converged)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
