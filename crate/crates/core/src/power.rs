//! Power-factor geometry and the validated customer / scenario types.
//!
//! Active power is in kW and compensation in kVar throughout. A customer that
//! raises its power factor from `phi` to `a` offsets
//! `p * (tan(acos(phi)) - tan(acos(a)))` kVar of reactive power.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::FpSettings;

/// Absolute tolerance used whenever two power factors (or the compensation
/// totals derived from them) are compared.
pub const PF_EPS: f64 = 1e-12;

/// Tolerance on the sum of a probability vector.
pub const SIMPLEX_EPS: f64 = 1e-9;

/// Cosine of the power angle, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PowerFactor(f64);

impl PowerFactor {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value <= 1.0 {
            Ok(PowerFactor(value))
        } else {
            Err(Error::Domain(format!("power factor {value} outside (0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `tan` of the power angle, `sqrt(1 - pf^2) / pf`. Zero at unity PF.
    pub fn tan_angle(self) -> f64 {
        if self.0 == 1.0 {
            0.0
        } else {
            (1.0 - self.0 * self.0).sqrt() / self.0
        }
    }
}

impl TryFrom<f64> for PowerFactor {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        PowerFactor::new(value)
    }
}

impl From<PowerFactor> for f64 {
    fn from(pf: PowerFactor) -> f64 {
        pf.0
    }
}

impl fmt::Display for PowerFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Reactive power (kVar) compensated by raising the power factor of a load
/// drawing `p` kW from `phi` to `a`.
///
/// Returns zero when `a == phi` and is strictly increasing in `a`.
pub fn var_compensation(p: f64, phi: f64, a: f64) -> Result<f64> {
    let phi = PowerFactor::new(phi)?;
    let a = PowerFactor::new(a)?;
    Ok(compensation(p, phi, a))
}

pub(crate) fn compensation(p: f64, phi: PowerFactor, a: PowerFactor) -> f64 {
    p * (phi.tan_angle() - a.tan_angle())
}

/// How a customer's prospect-theory reference utility is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Utility at the profile where every customer sits exactly at its
    /// standard power factor.
    #[default]
    StandardProfile,
    Explicit(f64),
    Zero,
}

fn default_one() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One customer's physical and behavioural parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerSpec {
    pub id: String,
    /// Active power, kW.
    pub p: f64,
    pub phi_init: PowerFactor,
    pub phi_std: PowerFactor,
    pub tau: f64,
    /// Discrete strategy set, strictly increasing.
    pub actions: Vec<PowerFactor>,
    #[serde(default = "default_one")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub beta: f64,
    #[serde(default = "default_one")]
    pub k: f64,
    #[serde(default)]
    pub reference: ReferenceMode,
    /// Marks placeholder parameters that are not taken from measured data.
    #[serde(default, skip_serializing_if = "is_false")]
    pub unverified: bool,
}

impl CustomerSpec {
    /// Compensation (kVar) needed to move from `phi_init` to `phi_std`.
    pub fn var_required(&self) -> f64 {
        compensation(self.p, self.phi_init, self.phi_std)
    }

    pub fn var_at(&self, action: usize) -> f64 {
        compensation(self.p, self.phi_init, self.actions[action])
    }

    pub fn action_values(&self) -> Vec<f64> {
        self.actions.iter().map(|a| a.value()).collect()
    }
}

pub fn var_required(customer: &CustomerSpec) -> f64 {
    customer.var_required()
}

/// Objective expected utility or its prospect-theoretic framing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Eut,
    Pt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Eut => "eut",
            Mode::Pt => "pt",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSet {
    Eut,
    Pt,
    #[default]
    Both,
}

impl ModeSet {
    pub fn modes(self) -> &'static [Mode] {
        match self {
            ModeSet::Eut => &[Mode::Eut],
            ModeSet::Pt => &[Mode::Pt],
            ModeSet::Both => &[Mode::Eut, Mode::Pt],
        }
    }
}

/// A complete game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub customers: Vec<CustomerSpec>,
    #[serde(default)]
    pub mode: ModeSet,
    #[serde(default)]
    pub fp: FpSettings,
    /// One probability vector per customer; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_strategies: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Scenario {
    pub fn new(customers: Vec<CustomerSpec>) -> Self {
        Scenario {
            customers,
            mode: ModeSet::Both,
            fp: FpSettings::default(),
            initial_strategies: None,
            notes: Vec::new(),
        }
    }

    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.customers.iter().map(|c| c.actions.len()).collect()
    }

    /// Initial mixed strategies, defaulting to uniform over each action set.
    pub fn resolved_initial_strategies(&self) -> Vec<Vec<f64>> {
        match &self.initial_strategies {
            Some(s) => s.clone(),
            None => self
                .customers
                .iter()
                .map(|c| {
                    let n = c.actions.len();
                    vec![1.0 / n as f64; n]
                })
                .collect(),
        }
    }

    /// Copy of the scenario with `f` applied to every customer.
    pub fn map_customers(&self, mut f: impl FnMut(&mut CustomerSpec)) -> Scenario {
        let mut s = self.clone();
        s.customers.iter_mut().for_each(&mut f);
        s
    }

    /// Validates and returns `Err(Error::Validation)` on any violation.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_scenario(self);
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Customer id, or `None` for scenario-level fields.
    pub customer: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.customer {
            Some(id) => write!(f, "customer {id}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// True if some violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    fn push(&mut self, customer: Option<&str>, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            customer: customer.map(str::to_owned),
            field: field.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every scenario invariant and reports all breaches. Never fails.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();

    if s.customers.is_empty() {
        report.push(None, "customers", "at least one customer is required");
    }

    for (idx, c) in s.customers.iter().enumerate() {
        let id = Some(c.id.as_str());
        if s.customers[..idx].iter().any(|o| o.id == c.id) {
            report.push(id, "id", "duplicate customer id");
        }
        if !(c.p.is_finite() && c.p > 0.0) {
            report.push(id, "p", "p must be > 0");
        }
        if c.phi_init.value() >= 1.0 {
            report.push(id, "phi_init", "phi_init = 1 leaves an empty strategy space");
        }
        if !(c.tau.is_finite() && (0.0..=1.0).contains(&c.tau)) {
            report.push(id, "tau", "tau out of [0,1]");
        }
        if !(c.alpha > 0.0 && c.alpha <= 1.0) {
            report.push(id, "alpha", "alpha out of (0,1]");
        }
        if !(c.beta > 0.0 && c.beta <= 1.0) {
            report.push(id, "beta", "beta out of (0,1]");
        }
        if !(c.k.is_finite() && c.k > 0.0) {
            report.push(id, "k", "k must be > 0");
        }
        if let ReferenceMode::Explicit(v) = c.reference {
            if !v.is_finite() {
                report.push(id, "reference", "explicit reference must be finite");
            }
        }
        if c.actions.is_empty() {
            report.push(id, "actions", "action set is empty");
        }
        for (j, a) in c.actions.iter().enumerate() {
            if a.value() <= c.phi_init.value() {
                report.push(id, format!("actions[{j}]"), "action ≤ phi_init");
            }
            if j > 0 && a.value() <= c.actions[j - 1].value() {
                report.push(id, format!("actions[{j}]"), "actions not strictly increasing");
            }
        }
    }

    if let Some(init) = &s.initial_strategies {
        if init.len() != s.customers.len() {
            report.push(
                None,
                "initial_strategies",
                format!("{} vectors for {} customers", init.len(), s.customers.len()),
            );
        }
        for (c, v) in s.customers.iter().zip(init) {
            let id = Some(c.id.as_str());
            if v.len() != c.actions.len() {
                report.push(
                    id,
                    "initial_strategies",
                    format!("{} probabilities for {} actions", v.len(), c.actions.len()),
                );
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                report.push(id, "initial_strategies", "negative or non-finite probability");
            }
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_EPS {
                report.push(id, "initial_strategies", format!("probabilities sum to {sum}, not 1"));
            }
        }
    }

    let fp = &s.fp;
    if !(fp.stop_tol.is_finite() && fp.stop_tol > 0.0) {
        report.push(None, "fp.stop_tol", "stop_tol must be > 0");
    }
    if fp.max_iters == 0 {
        report.push(None, "fp.max_iters", "max_iters must be ≥ 1");
    }
    if !(fp.prior_weight.is_finite() && fp.prior_weight >= 0.0) {
        report.push(None, "fp.prior_weight", "prior_weight must be ≥ 0");
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pf(v: f64) -> PowerFactor {
        PowerFactor::new(v).unwrap()
    }

    #[test]
    fn compensation_examples() {
        assert_abs_diff_eq!(var_compensation(2.0, 0.77, 0.85).unwrap(), 0.41777, epsilon = 5e-6);
        assert_eq!(var_compensation(5.0, 0.9, 0.9).unwrap(), 0.0);
        assert_abs_diff_eq!(var_compensation(2.0, 0.77, 1.0).unwrap(), 1.65726, epsilon = 5e-6);
    }

    #[test]
    fn required_compensation_examples() {
        let s = scenarios::two_customer();
        assert_abs_diff_eq!(var_required(&s.customers[0]), 0.41777, epsilon = 5e-6);
        assert_abs_diff_eq!(var_required(&s.customers[1]), 0.46902, epsilon = 5e-6);
        let mut c = s.customers[0].clone();
        c.phi_std = c.phi_init;
        assert_eq!(var_required(&c), 0.0);
    }

    #[test]
    fn compensation_rejects_bad_power_factors() {
        assert!(matches!(var_compensation(1.0, 0.0, 0.9), Err(Error::Domain(_))));
        assert!(matches!(var_compensation(1.0, 0.8, 1.2), Err(Error::Domain(_))));
        assert!(matches!(var_compensation(1.0, -0.3, 0.9), Err(Error::Domain(_))));
        assert!(var_compensation(1.0, f64::NAN, 0.9).is_err());
    }

    #[test]
    fn bundled_two_customer_scenario_is_valid() {
        assert!(validate_scenario(&scenarios::two_customer()).is_empty());
        assert!(validate_scenario(&scenarios::three_customer()).is_empty());
        assert!(validate_scenario(&scenarios::seven_customer(6.0 / 7.0)).is_empty());
    }

    #[test]
    fn action_below_initial_pf_is_reported() {
        let s = scenarios::two_customer().map_customers(|c| {
            if c.id == "c1" {
                c.actions = vec![pf(0.75), pf(0.9)];
            }
        });
        let report = validate_scenario(&s);
        assert!(report.mentions("action ≤ phi_init"));
        assert_eq!(report.violations[0].customer.as_deref(), Some("c1"));
        assert_eq!(report.violations[0].field, "actions[0]");
    }

    #[test]
    fn tau_and_shape_violations_are_all_listed() {
        let mut s = scenarios::two_customer().map_customers(|c| c.tau = 1.2);
        s.customers[1].actions = vec![pf(0.9), pf(0.8)];
        s.customers[1].alpha = 0.0;
        s.initial_strategies = Some(vec![vec![0.5, 0.6], vec![1.0]]);
        let report = validate_scenario(&s);
        assert!(report.mentions("tau out of [0,1]"));
        assert!(report.mentions("actions not strictly increasing"));
        assert!(report.mentions("alpha out of (0,1]"));
        assert!(report.mentions("sum to"));
        assert!(report.mentions("1 probabilities for 2 actions"));
        assert_eq!(report.violations.iter().filter(|v| v.field == "tau").count(), 2);
    }

    #[test]
    fn unity_initial_pf_is_rejected() {
        let s = scenarios::two_customer().map_customers(|c| c.phi_init = pf(1.0));
        assert!(validate_scenario(&s).mentions("empty strategy space"));
    }

    #[test]
    fn empty_scenario_is_rejected() {
        let s = Scenario::new(vec![]);
        assert!(!validate_scenario(&s).is_empty());
        assert!(matches!(s.ensure_valid(), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn compensation_is_monotone_in_action(
            p in 0.01f64..100.0,
            phi in 0.05f64..0.99,
            a in 0.05f64..1.0,
            b in 0.05f64..1.0,
        ) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(var_compensation(p, phi, lo).unwrap() < var_compensation(p, phi, hi).unwrap());
        }

        #[test]
        fn compensation_sign_and_scaling(
            p in 0.01f64..100.0,
            c in 0.01f64..10.0,
            phi in 0.05f64..1.0,
            a in 0.05f64..1.0,
        ) {
            let q = var_compensation(p, phi, a).unwrap();
            if a > phi { prop_assert!(q > 0.0); }
            if a < phi { prop_assert!(q < 0.0); }
            let scaled = var_compensation(c * p, phi, a).unwrap();
            prop_assert!((scaled - c * q).abs() <= 1e-12 * (1.0 + scaled.abs()));
        }
    }

    #[test]
    fn unity_action_has_no_residual_term() {
        assert_eq!(pf(1.0).tan_angle(), 0.0);
        assert_eq!(var_compensation(3.0, 0.8, 1.0).unwrap(), 3.0 * pf(0.8).tan_angle());
        assert_eq!(var_compensation(3.0, 0.8, 0.8).unwrap(), 0.0);
    }
}
