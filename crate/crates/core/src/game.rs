//! Pure-strategy utilities, prospect-theoretic framing and expected utilities
//! over the exhaustively enumerated joint action space.
//!
//! For a joint profile `a` with compensations `q_j = q_j^c(a_j)`, let
//! `E_i = q_i - mean(q)` and let MET hold when `sum(q) >= sum(q_std)`.
//! Customer `i` then receives
//!
//! ```text
//! E_i - tau_i * max(0, q_i - q_std_i)   if MET and a_i >= phi_std_i
//! E_i                                   if MET and a_i <  phi_std_i
//! -q_i                                  otherwise
//! ```
//!
//! Profiles are enumerated row-major with customer 0 varying slowest, so a
//! profile id is `sum_i a_i * stride_i` with `stride_{N-1} = 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::power::{Mode, ReferenceMode, Scenario, PF_EPS, SIMPLEX_EPS};

/// Default cap on the number of joint profiles a table may hold.
pub const DEFAULT_PROFILE_CAP: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_PROFILE_CAP`].
pub const PROFILE_CAP_ENV: &str = "VARGAME_PROFILE_CAP";

/// Profile cap from `VARGAME_PROFILE_CAP`, falling back to the default.
pub fn profile_cap_from_env() -> Result<u64> {
    match std::env::var(PROFILE_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{PROFILE_CAP_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_PROFILE_CAP),
    }
}

/// One action index per customer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(pub Vec<usize>);

impl std::ops::Deref for ActionProfile {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// One probability vector per customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedProfile(pub Vec<Vec<f64>>);

impl MixedProfile {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        for (i, v) in vectors.iter().enumerate() {
            if v.is_empty() || v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "mixed strategy {i} has negative, non-finite or no entries"
                )));
            }
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_EPS {
                return Err(Error::InvalidArgument(format!("mixed strategy {i} sums to {sum}")));
            }
        }
        Ok(MixedProfile(vectors))
    }

    pub fn uniform(counts: &[usize]) -> Self {
        MixedProfile(counts.iter().map(|&n| vec![1.0 / n as f64; n]).collect())
    }

    /// All mass on `profile`.
    pub fn pure(counts: &[usize], profile: &[usize]) -> Self {
        MixedProfile(
            counts
                .iter()
                .zip(profile)
                .map(|(&n, &a)| {
                    let mut v = vec![0.0; n];
                    v[a] = 1.0;
                    v
                })
                .collect(),
        )
    }

    pub fn n_customers(&self) -> usize {
        self.0.len()
    }

    pub fn customer(&self, i: usize) -> &[f64] {
        &self.0[i]
    }

    /// Largest absolute entrywise difference over all customers.
    pub fn max_abs_diff(&self, other: &MixedProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Copy with customer `i`'s vector replaced.
    pub fn with_customer(&self, i: usize, v: Vec<f64>) -> MixedProfile {
        let mut out = self.clone();
        out.0[i] = v;
        out
    }
}

/// Index arithmetic over the joint action space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl ProfileSpace {
    pub fn new(counts: &[usize], cap: u64) -> Result<Self> {
        let mut total: u128 = 1;
        for &c in counts {
            total = total.saturating_mul(c as u128);
        }
        if total > cap as u128 {
            return Err(Error::Capacity { profiles: total, cap });
        }
        let mut strides = vec![1usize; counts.len()];
        for i in (0..counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        Ok(ProfileSpace {
            counts: counts.to_vec(),
            strides,
            len: total as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    pub fn index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let a = idx / s;
                idx %= s;
                a
            })
            .collect()
    }

    /// Visits every profile in id order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[usize])) {
        let n = self.counts.len();
        let mut profile = vec![0usize; n];
        for idx in 0..self.len {
            f(idx, &profile);
            for j in (0..n).rev() {
                profile[j] += 1;
                if profile[j] < self.counts[j] {
                    break;
                }
                profile[j] = 0;
            }
        }
    }
}

/// Prospect-theoretic framing of `u` around the reference `u0`.
pub fn pt_frame(u: f64, u0: f64, alpha: f64, beta: f64, k: f64) -> f64 {
    if u >= u0 {
        (u - u0).powf(alpha)
    } else {
        -k * (u0 - u).powf(beta)
    }
}

#[derive(Debug, Clone)]
struct CustomerTerms {
    phi_std: f64,
    tau: f64,
    var_required: f64,
}

/// Evaluates the objective utility of every customer from the actions they
/// play (as power factors) and the compensations those actions imply.
fn utility_vector(terms: &[CustomerTerms], total_required: f64, actions: &[f64], vars: &[f64], out: &mut [f64]) {
    let n = terms.len() as f64;
    let total: f64 = vars.iter().sum();
    let met = total >= total_required - PF_EPS;
    let mean = total / n;
    for (i, t) in terms.iter().enumerate() {
        let exchange = vars[i] - mean;
        out[i] = if !met {
            -vars[i]
        } else if actions[i] >= t.phi_std - PF_EPS {
            exchange - t.tau * (vars[i] - t.var_required).max(0.0)
        } else {
            exchange
        };
    }
}

/// Dense utility tables for one scenario.
#[derive(Debug, Clone)]
pub struct UtilityTables {
    space: ProfileSpace,
    n: usize,
    terms: Vec<CustomerTerms>,
    action_values: Vec<Vec<f64>>,
    /// `q_i^c` per customer and action.
    var: Vec<Vec<f64>>,
    total_required: f64,
    reference: Vec<f64>,
    /// `[profile * n + i]`
    objective: Vec<f64>,
    framed: Vec<f64>,
    ids: Vec<String>,
}

/// Builds the tables with the profile cap from [`profile_cap_from_env`].
pub fn build_tables(s: &Scenario) -> Result<UtilityTables> {
    build_tables_with_cap(s, profile_cap_from_env()?)
}

pub fn build_tables_with_cap(s: &Scenario, cap: u64) -> Result<UtilityTables> {
    s.ensure_valid()?;
    let space = ProfileSpace::new(&s.action_counts(), cap)?;
    let n = s.n_customers();

    let terms: Vec<CustomerTerms> = s
        .customers
        .iter()
        .map(|c| CustomerTerms {
            phi_std: c.phi_std.value(),
            tau: c.tau,
            var_required: c.var_required(),
        })
        .collect();
    let total_required: f64 = terms.iter().map(|t| t.var_required).sum();
    let action_values: Vec<Vec<f64>> = s.customers.iter().map(|c| c.action_values()).collect();
    let var: Vec<Vec<f64>> = s
        .customers
        .iter()
        .map(|c| (0..c.actions.len()).map(|a| c.var_at(a)).collect())
        .collect();

    // Reference profile: everyone exactly at its standard PF, whether or not
    // that value is in the action set.
    let std_actions: Vec<f64> = terms.iter().map(|t| t.phi_std).collect();
    let std_vars: Vec<f64> = terms.iter().map(|t| t.var_required).collect();
    let mut standard = vec![0.0; n];
    utility_vector(&terms, total_required, &std_actions, &std_vars, &mut standard);
    let reference: Vec<f64> = s
        .customers
        .iter()
        .zip(&standard)
        .map(|(c, &u_std)| match c.reference {
            ReferenceMode::StandardProfile => u_std,
            ReferenceMode::Explicit(v) => v,
            ReferenceMode::Zero => 0.0,
        })
        .collect();

    let mut objective = vec![0.0; space.len() * n];
    let mut framed = vec![0.0; space.len() * n];
    let mut acts = vec![0.0; n];
    let mut vars = vec![0.0; n];
    space.for_each(|idx, profile| {
        for i in 0..n {
            acts[i] = action_values[i][profile[i]];
            vars[i] = var[i][profile[i]];
        }
        let row = &mut objective[idx * n..(idx + 1) * n];
        utility_vector(&terms, total_required, &acts, &vars, row);
        for (i, c) in s.customers.iter().enumerate() {
            framed[idx * n + i] = pt_frame(row[i], reference[i], c.alpha, c.beta, c.k);
        }
    });

    Ok(UtilityTables {
        space,
        n,
        terms,
        action_values,
        var,
        total_required,
        reference,
        objective,
        framed,
        ids: s.customers.iter().map(|c| c.id.clone()).collect(),
    })
}

impl UtilityTables {
    pub fn n_customers(&self) -> usize {
        self.n
    }

    pub fn n_profiles(&self) -> usize {
        self.space.len()
    }

    pub fn space(&self) -> &ProfileSpace {
        &self.space
    }

    pub fn action_counts(&self) -> &[usize] {
        self.space.counts()
    }

    pub fn action_values(&self, i: usize) -> &[f64] {
        &self.action_values[i]
    }

    pub fn customer_ids(&self) -> &[String] {
        &self.ids
    }

    /// `q_i^c` for customer `i` playing action index `a`.
    pub fn var(&self, i: usize, a: usize) -> f64 {
        self.var[i][a]
    }

    pub fn var_required(&self, i: usize) -> f64 {
        self.terms[i].var_required
    }

    pub fn total_required(&self) -> f64 {
        self.total_required
    }

    /// Resolved reference utility `u_i^0`.
    pub fn reference_point(&self, i: usize) -> f64 {
        self.reference[i]
    }

    pub fn reference_points(&self) -> &[f64] {
        &self.reference
    }

    /// Compensation of customer `i` minus the population mean.
    pub fn exchange_term(&self, i: usize, profile: &[usize]) -> f64 {
        let total: f64 = profile.iter().enumerate().map(|(j, &a)| self.var[j][a]).sum();
        self.var[i][profile[i]] - total / self.n as f64
    }

    /// Whether total compensation at `profile` meets the total requirement.
    pub fn requirement_met(&self, profile: &[usize]) -> bool {
        let total: f64 = profile.iter().enumerate().map(|(j, &a)| self.var[j][a]).sum();
        total >= self.total_required - PF_EPS
    }

    /// Objective utility `u_i` evaluated from scratch (not from the table).
    pub fn pure_utility(&self, i: usize, profile: &[usize]) -> f64 {
        let acts: Vec<f64> = profile
            .iter()
            .enumerate()
            .map(|(j, &a)| self.action_values[j][a])
            .collect();
        let vars: Vec<f64> = profile.iter().enumerate().map(|(j, &a)| self.var[j][a]).collect();
        let mut out = vec![0.0; self.n];
        utility_vector(&self.terms, self.total_required, &acts, &vars, &mut out);
        out[i]
    }

    /// Tabulated utility of customer `i` at profile id `idx`.
    pub fn utility_at(&self, idx: usize, i: usize, mode: Mode) -> f64 {
        match mode {
            Mode::Eut => self.objective[idx * self.n + i],
            Mode::Pt => self.framed[idx * self.n + i],
        }
    }

    pub fn utility(&self, i: usize, profile: &[usize], mode: Mode) -> f64 {
        self.utility_at(self.space.index(profile), i, mode)
    }

    /// Expected utility of customer `i` under `sigma`: the sum over every
    /// joint profile of its probability times the (objective or framed)
    /// utility.
    pub fn expected_utility(&self, i: usize, sigma: &MixedProfile, mode: Mode) -> f64 {
        let mut acc = 0.0;
        self.space.for_each(|idx, profile| {
            let w: f64 = profile.iter().enumerate().map(|(j, &a)| sigma.0[j][a]).product();
            acc += w * self.utility_at(idx, i, mode);
        });
        acc
    }

    /// Expected utility of every pure action of customer `i` against the
    /// other customers' mixed strategies in `sigma` (customer `i`'s own entry
    /// is ignored).
    pub fn action_utilities(&self, i: usize, sigma: &MixedProfile, mode: Mode) -> Vec<f64> {
        let mut rows = vec![0.0; self.space.counts()[i]];
        self.space.for_each(|idx, profile| {
            let w: f64 = profile
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, &a)| sigma.0[j][a])
                .product();
            rows[profile[i]] += w * self.utility_at(idx, i, mode);
        });
        rows
    }

    pub fn expected_utility_of_action(&self, i: usize, action: usize, sigma: &MixedProfile, mode: Mode) -> f64 {
        self.action_utilities(i, sigma, mode)[action]
    }

    /// Splits the expected framed utility of customer `i` into the parts
    /// contributed by gain profiles (`u_i > u_i^0`) and loss profiles
    /// (`u_i < u_i^0`). Profiles exactly at the reference contribute zero.
    pub fn pt_gain_loss(&self, i: usize, sigma: &MixedProfile) -> (f64, f64) {
        let (mut gain, mut loss) = (0.0, 0.0);
        let u0 = self.reference[i];
        self.space.for_each(|idx, profile| {
            let w: f64 = profile.iter().enumerate().map(|(j, &a)| sigma.0[j][a]).product();
            let u = self.objective[idx * self.n + i];
            let framed = self.framed[idx * self.n + i];
            if u > u0 {
                gain += w * framed;
            } else if u < u0 {
                loss += w * framed;
            }
        });
        (gain, loss)
    }

    /// Probability under `sigma` that customer `i` lands strictly below its
    /// reference utility.
    pub fn loss_mass(&self, i: usize, sigma: &MixedProfile) -> f64 {
        let mut mass = 0.0;
        let u0 = self.reference[i];
        self.space.for_each(|idx, profile| {
            if self.objective[idx * self.n + i] < u0 {
                mass += profile.iter().enumerate().map(|(j, &a)| sigma.0[j][a]).product::<f64>();
            }
        });
        mass
    }

    /// Best total objective utility over pure profiles, with the first
    /// maximising profile in id order.
    pub fn max_total_pure_utility(&self) -> (ActionProfile, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for idx in 0..self.space.len() {
            let total: f64 = self.objective[idx * self.n..(idx + 1) * self.n].iter().sum();
            if total > best.1 {
                best = (idx, total);
            }
        }
        (ActionProfile(self.space.decode(best.0)), best.1)
    }

    /// Dumps every profile as CSV:
    /// `profile_id, a_<id>..., q_<id>..., e_<id>..., u_<id>..., upt_<id>...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["profile_id".to_owned()];
        for prefix in ["a", "q", "e", "u", "upt"] {
            header.extend(self.ids.iter().map(|id| format!("{prefix}_{id}")));
        }
        writeln!(w, "{}", header.join(","))?;
        let mut result = Ok(());
        self.space.for_each(|idx, profile| {
            if result.is_err() {
                return;
            }
            let mut cells = vec![idx.to_string()];
            cells.extend(profile.iter().map(|a| a.to_string()));
            cells.extend(profile.iter().enumerate().map(|(j, &a)| fmt_f64(self.var[j][a])));
            cells.extend((0..self.n).map(|i| fmt_f64(self.exchange_term(i, profile))));
            cells.extend((0..self.n).map(|i| fmt_f64(self.objective[idx * self.n + i])));
            cells.extend((0..self.n).map(|i| fmt_f64(self.framed[idx * self.n + i])));
            result = writeln!(w, "{}", cells.join(","));
        });
        result
    }
}
