//! Parameter sweeps, the loss-aversion threshold search and regime
//! classification.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{fmt_f64, fmt_vec};
use crate::fp::{run_fp_on, EquilibriumResult};
use crate::game::build_tables;
use crate::power::{Mode, ModeSet, ReferenceMode, Scenario, PF_EPS};

/// How the penalty factors compare with the sharing ratio `(N-1)/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyRelation {
    Below,
    Equal,
    Above,
    /// Customers fall on different sides.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "regime")]
pub enum Regime {
    /// No action of any customer reaches its standard PF.
    AllBelow,
    /// Every action of every customer exceeds its standard PF.
    AllAbove {
        penalty: PenaltyRelation,
    },
    /// Two customers with different loads sharing a two-action set
    /// `{v1, v2}` whose midpoint is the common standard PF.
    TwoByTwoStraddle,
    General,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::AllBelow => f.write_str("all_below"),
            Regime::AllAbove { penalty } => write!(f, "all_above(tau {penalty:?} (N-1)/N)"),
            Regime::TwoByTwoStraddle => f.write_str("two_by_two_straddle"),
            Regime::General => f.write_str("general"),
        }
    }
}

impl Regime {
    /// The unique pure equilibrium the regime predicts, as action indices.
    pub fn predicted_pure_profile(&self, s: &Scenario) -> Option<Vec<usize>> {
        match self {
            Regime::AllBelow
            | Regime::AllAbove {
                penalty: PenaltyRelation::Above,
            } => Some(vec![0; s.n_customers()]),
            Regime::AllAbove {
                penalty: PenaltyRelation::Below,
            } => Some(s.customers.iter().map(|c| c.actions.len() - 1).collect()),
            _ => None,
        }
    }
}

pub fn classify_regime(s: &Scenario) -> Regime {
    let all_below = s
        .customers
        .iter()
        .all(|c| c.actions.iter().all(|a| a.value() < c.phi_std.value() - PF_EPS));
    if all_below {
        return Regime::AllBelow;
    }

    let all_above = s
        .customers
        .iter()
        .all(|c| c.actions.iter().all(|a| a.value() > c.phi_std.value() + PF_EPS));
    if all_above {
        let n = s.n_customers() as f64;
        let ratio = (n - 1.0) / n;
        let relation = |tau: f64| {
            if (tau - ratio).abs() <= PF_EPS {
                PenaltyRelation::Equal
            } else if tau < ratio {
                PenaltyRelation::Below
            } else {
                PenaltyRelation::Above
            }
        };
        let first = relation(s.customers[0].tau);
        let penalty = if s.customers.iter().all(|c| relation(c.tau) == first) {
            first
        } else {
            PenaltyRelation::Mixed
        };
        return Regime::AllAbove { penalty };
    }

    if let [c1, c2] = s.customers.as_slice() {
        let std = c1.phi_std.value();
        let same_std = (c2.phi_std.value() - std).abs() <= PF_EPS;
        let same_actions = c1.actions == c2.actions;
        if same_std && same_actions && c1.actions.len() == 2 && c1.p != c2.p {
            let mid = 0.5 * (c1.actions[0].value() + c1.actions[1].value());
            if (mid - std).abs() <= PF_EPS {
                return Regime::TwoByTwoStraddle;
            }
        }
    }
    Regime::General
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    /// Explicit reference utility applied to every customer.
    Reference,
    K,
    Tau,
    /// Number of clones of the base scenario's first customer.
    NCustomers,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Reference => "reference",
            SweepParam::K => "k",
            SweepParam::Tau => "tau",
            SweepParam::NCustomers => "n_customers",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "beta" => Ok(SweepParam::Beta),
            "reference" | "u0" => Ok(SweepParam::Reference),
            "k" => Ok(SweepParam::K),
            "tau" => Ok(SweepParam::Tau),
            "n_customers" | "n" => Ok(SweepParam::NCustomers),
            other => Err(Error::InvalidArgument(format!("unknown sweep parameter `{other}`"))),
        }
    }

    /// The base scenario with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        Ok(match self {
            SweepParam::Beta => base.map_customers(|c| c.beta = value),
            SweepParam::Reference => base.map_customers(|c| c.reference = ReferenceMode::Explicit(value)),
            SweepParam::K => base.map_customers(|c| c.k = value),
            SweepParam::Tau => base.map_customers(|c| c.tau = value),
            SweepParam::NCustomers => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "customer count {value} is not a positive integer"
                    )));
                }
                let template = base
                    .customers
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("base scenario has no customers".into()))?;
                let customers = (1..=value as usize)
                    .map(|n| {
                        let mut c = template.clone();
                        c.id = format!("c{n}");
                        c
                    })
                    .collect();
                Scenario {
                    customers,
                    initial_strategies: None,
                    ..base.clone()
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
    pub base: Scenario,
    pub modes: ModeSet,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if self
            .grid
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        {
            return Err(Error::InvalidArgument("sweep grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Parses `start:stop:step` (inclusive of `stop`) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse grid `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| {
                    let v = start + i as f64 * step;
                    fmt_f64(v).parse().expect("formatted float")
                })
                .collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub customer_ids: Vec<String>,
    pub results: Vec<EquilibriumResult>,
    /// Set when the grid point could not be solved at all.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn result(&self, mode: Mode) -> Option<&EquilibriumResult> {
        self.results.iter().find(|r| r.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

fn solve_point(param: SweepParam, base: &Scenario, value: f64, modes: ModeSet) -> SweepRow {
    let attempt = || -> Result<(Vec<String>, Vec<EquilibriumResult>)> {
        let s = param.apply(base, value)?;
        let tables = build_tables(&s)?;
        let results = modes.modes().iter().map(|&m| run_fp_on(&tables, &s, m)).collect();
        Ok((s.customers.iter().map(|c| c.id.clone()).collect(), results))
    };
    match attempt() {
        Ok((customer_ids, results)) => SweepRow {
            value,
            customer_ids,
            results,
            error: None,
        },
        Err(e) => SweepRow {
            value,
            customer_ids: Vec::new(),
            results: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Solves every grid point independently (in parallel) and returns rows in
/// grid order.
pub fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let rows = spec
        .grid
        .par_iter()
        .map(|&v| solve_point(spec.param, &spec.base, v, spec.modes))
        .collect();
    Ok(SweepTable {
        param: spec.param,
        rows,
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "param,value,mode,customer,expected_utility,probabilities,converged,iterations,ne_gap,error";

impl SweepTable {
    /// Long-format CSV: one line per grid value, mode and customer, plus
    /// `total` and `average` lines per grid value and mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        let p = self.param.as_str();
        for row in &self.rows {
            let v = fmt_f64(row.value);
            if let Some(e) = &row.error {
                writeln!(w, "{p},{v},,,,,,,,{}", e.replace([',', '\n'], ";"))?;
                continue;
            }
            for r in &row.results {
                let tail = format!("{},{},{}", r.converged, r.iterations, fmt_f64(r.ne_gap));
                for (i, id) in row.customer_ids.iter().enumerate() {
                    writeln!(
                        w,
                        "{p},{v},{},{id},{},{},{tail},",
                        r.mode,
                        fmt_f64(r.expected_utilities[i]),
                        fmt_vec(r.profile.customer(i))
                    )?;
                }
                let total = r.total_utility();
                let avg = total / row.customer_ids.len() as f64;
                writeln!(w, "{p},{v},{},total,{},,{tail},", r.mode, fmt_f64(total))?;
                writeln!(w, "{p},{v},{},average,{},,{tail},", r.mode, fmt_f64(avg))?;
            }
        }
        Ok(())
    }
}

/// Which expected utility the threshold search compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Total,
    Customer(usize),
}

impl Scope {
    fn pick(self, r: &EquilibriumResult) -> f64 {
        match self {
            Scope::Total => r.total_utility(),
            Scope::Customer(i) => r.expected_utilities[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub k0: f64,
    pub bracket: (f64, f64),
    /// PT minus EUT utility at the bracket ends.
    pub gap_at_bracket: (f64, f64),
    pub scope: Scope,
    pub eut_utility: f64,
    /// Every `(k, PT - EUT)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Finds the loss-aversion level at which the equilibrium PT utility crosses
/// the EUT utility, by bisection on `[k_lo, k_hi]`.
///
/// Every customer's `k` is set to the probe value and the PT game is re-solved
/// by fictitious play at each probe. Only a sign change across the initial
/// bracket is required.
pub fn k_threshold(base: &Scenario, k_lo: f64, k_hi: f64, tol: f64, scope: Scope) -> Result<ThresholdResult> {
    if !(k_lo > 0.0 && k_hi > k_lo && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < k_lo < k_hi and tol > 0, got [{k_lo}, {k_hi}], tol {tol}"
        )));
    }
    if let Scope::Customer(i) = scope {
        if i >= base.n_customers() {
            return Err(Error::InvalidArgument(format!("customer index {i} out of range")));
        }
    }
    let tables = build_tables(base)?;
    let eut = scope.pick(&run_fp_on(&tables, base, Mode::Eut));
    let gap = |k: f64, evaluations: &mut Vec<(f64, f64)>| -> Result<f64> {
        let s = base.map_customers(|c| c.k = k);
        let t = build_tables(&s)?;
        let g = scope.pick(&run_fp_on(&t, &s, Mode::Pt)) - eut;
        evaluations.push((k, g));
        Ok(g)
    };

    let mut evaluations = Vec::new();
    let (mut lo, mut hi) = (k_lo, k_hi);
    let mut g_lo = gap(lo, &mut evaluations)?;
    let mut g_hi = gap(hi, &mut evaluations)?;
    let k0 = if g_lo == 0.0 {
        lo
    } else if g_hi == 0.0 {
        hi
    } else if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoSignChange { lo, hi, g_lo, g_hi });
    } else {
        loop {
            if hi - lo < tol {
                break 0.5 * (lo + hi);
            }
            let mid = 0.5 * (lo + hi);
            let g_mid = gap(mid, &mut evaluations)?;
            if g_mid == 0.0 {
                (lo, hi, g_lo, g_hi) = (mid, mid, 0.0, 0.0);
                break mid;
            }
            if g_mid.signum() == g_lo.signum() {
                (lo, g_lo) = (mid, g_mid);
            } else {
                (hi, g_hi) = (mid, g_mid);
            }
        }
    };
    Ok(ThresholdResult {
        k0,
        bracket: (lo, hi),
        gap_at_bracket: (g_lo, g_hi),
        scope,
        eut_utility: eut,
        evaluations,
    })
}
