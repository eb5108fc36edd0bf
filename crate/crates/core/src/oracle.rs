//! Brute-force equilibrium checks that do not depend on fictitious play:
//! exhaustive pure-NE enumeration, the closed-form 2x2 mixed equilibrium, and
//! the ε-NE gap of an arbitrary mixed profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::TIE_EPS;
use crate::game::{ActionProfile, MixedProfile, UtilityTables};
use crate::power::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureEquilibrium {
    pub profile: ActionProfile,
    /// Action values (power factors) of the profile.
    pub actions: Vec<f64>,
    /// Best unilateral improvement; zero up to [`TIE_EPS`] by construction.
    pub gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub mode: Option<Mode>,
    pub pure: Vec<PureEquilibrium>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_2x2: Option<MixedProfile>,
    /// ε-gaps of the 2x2 mixed candidate, one per customer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixed_gaps: Vec<f64>,
    /// Why the 2x2 solve was skipped or rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl NeReport {
    pub fn unique_pure(&self) -> Option<&PureEquilibrium> {
        match self.pure.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

/// Largest gain customer `i` can get by a unilateral pure deviation from the
/// pure profile at `idx`.
fn pure_deviation_gain(tables: &UtilityTables, idx: usize, profile: &[usize], i: usize, mode: Mode) -> f64 {
    let space = tables.space();
    let here = tables.utility_at(idx, i, mode);
    let base = idx - profile[i] * space.stride(i);
    (0..space.counts()[i])
        .map(|a| tables.utility_at(base + a * space.stride(i), i, mode) - here)
        .fold(0.0, f64::max)
}

/// Every pure profile from which no customer can strictly gain by a
/// unilateral deviation.
pub fn enumerate_pure_ne(tables: &UtilityTables, mode: Mode) -> NeReport {
    let n = tables.n_customers();
    let mut pure = Vec::new();
    tables.space().for_each(|idx, profile| {
        let gap = (0..n)
            .map(|i| pure_deviation_gain(tables, idx, profile, i, mode))
            .fold(0.0, f64::max);
        if gap <= TIE_EPS {
            pure.push(PureEquilibrium {
                profile: ActionProfile(profile.to_vec()),
                actions: profile
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| tables.action_values(j)[a])
                    .collect(),
                gap,
            });
        }
    });
    NeReport {
        mode: Some(mode),
        pure,
        ..NeReport::default()
    }
}

/// Fully mixed equilibrium of a two-customer, two-action game from the
/// indifference conditions: each customer's mix makes the other indifferent
/// between its two actions.
pub fn solve_2x2_mixed(tables: &UtilityTables, mode: Mode) -> Result<NeReport> {
    if tables.n_customers() != 2 || tables.action_counts() != [2, 2] {
        return Err(Error::InvalidArgument(format!(
            "2x2 solver needs two customers with two actions each, got {:?}",
            tables.action_counts()
        )));
    }
    let u = |i: usize, a: usize, b: usize| tables.utility(i, &[a, b], mode);

    // Customer 2's probability y on its first action equalises customer 1's rows.
    let den_y = u(0, 0, 0) - u(0, 0, 1) - u(0, 1, 0) + u(0, 1, 1);
    // Customer 1's probability x on its first action equalises customer 2's columns.
    let den_x = u(1, 0, 0) - u(1, 1, 0) - u(1, 0, 1) + u(1, 1, 1);
    if den_x.abs() <= TIE_EPS || den_y.abs() <= TIE_EPS {
        return Err(Error::Degenerate(
            "indifference equation has zero determinant; see pure enumeration".into(),
        ));
    }
    let y = (u(0, 1, 1) - u(0, 0, 1)) / den_y;
    let x = (u(1, 1, 1) - u(1, 1, 0)) / den_x;
    for (who, p) in [(1, x), (2, y)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Degenerate(format!(
                "customer {who}'s indifference probability {p} is outside (0, 1); see pure enumeration"
            )));
        }
    }
    let sigma = MixedProfile(vec![vec![x, 1.0 - x], vec![y, 1.0 - y]]);
    let check = verify_epsilon_ne(&sigma, tables, mode, 0.0);
    Ok(NeReport {
        mode: Some(mode),
        pure: Vec::new(),
        mixed_2x2: Some(sigma),
        mixed_gaps: check.gaps,
        note: None,
    })
}

/// Pure enumeration plus, for 2x2 games, the analytic mixed equilibrium.
pub fn full_report(tables: &UtilityTables, mode: Mode) -> NeReport {
    let mut report = enumerate_pure_ne(tables, mode);
    if tables.n_customers() == 2 && tables.action_counts() == [2, 2] {
        match solve_2x2_mixed(tables, mode) {
            Ok(mixed) => {
                report.mixed_2x2 = mixed.mixed_2x2;
                report.mixed_gaps = mixed.mixed_gaps;
            }
            Err(e) => report.note = Some(e.to_string()),
        }
    } else {
        report.note = Some("mixed-equilibrium solving is limited to 2x2 games".into());
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCheck {
    pub gaps: Vec<f64>,
    pub epsilon: f64,
    pub is_epsilon_ne: bool,
}

impl EpsilonCheck {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-customer gap between the best pure deviation and the utility of
/// `sigma`. Expected utility is linear in a customer's own mix, so the best
/// deviation is always pure.
pub fn verify_epsilon_ne(sigma: &MixedProfile, tables: &UtilityTables, mode: Mode, epsilon: f64) -> EpsilonCheck {
    let gaps: Vec<f64> = (0..tables.n_customers())
        .map(|i| {
            let best = tables
                .action_utilities(i, sigma, mode)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            (best - tables.expected_utility(i, sigma, mode)).max(0.0)
        })
        .collect();
    let is_epsilon_ne = gaps.iter().all(|&g| g <= epsilon);
    EpsilonCheck {
        gaps,
        epsilon,
        is_epsilon_ne,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_tables;
    use crate::power::PowerFactor;
    use crate::scenarios;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn all_below_standard_has_unique_minimum_equilibrium() {
        let t = build_tables(&scenarios::all_below()).unwrap();
        for mode in [Mode::Eut, Mode::Pt] {
            let r = enumerate_pure_ne(&t, mode);
            let ne = r.unique_pure().expect("unique pure NE");
            assert_eq!(ne.profile.0, vec![0, 0]);
        }
    }

    #[test]
    fn all_above_with_low_penalty_has_unique_maximum_equilibrium() {
        let t = build_tables(&scenarios::seven_customer(0.5)).unwrap();
        for mode in [Mode::Eut, Mode::Pt] {
            let r = enumerate_pure_ne(&t, mode);
            assert_eq!(r.unique_pure().unwrap().profile.0, vec![2; 7]);
        }
        let t = build_tables(&scenarios::seven_customer(0.9)).unwrap();
        assert_eq!(
            enumerate_pure_ne(&t, Mode::Eut).unique_pure().unwrap().profile.0,
            vec![0; 7]
        );
    }

    #[test]
    fn knife_edge_penalty_makes_every_profile_an_equilibrium() {
        let t = build_tables(&scenarios::seven_customer(6.0 / 7.0)).unwrap();
        assert_eq!(enumerate_pure_ne(&t, Mode::Eut).pure.len(), 2187);
    }

    #[test]
    fn two_customer_game_has_no_pure_equilibrium() {
        let t = build_tables(&scenarios::two_customer()).unwrap();
        assert!(enumerate_pure_ne(&t, Mode::Eut).pure.is_empty());
        assert!(enumerate_pure_ne(&t, Mode::Pt).pure.is_empty());
    }

    #[test]
    fn two_customer_mixed_equilibrium() {
        let t = build_tables(&scenarios::two_customer()).unwrap();
        let r = solve_2x2_mixed(&t, Mode::Eut).unwrap();
        let sigma = r.mixed_2x2.unwrap();
        assert_abs_diff_eq!(sigma.customer(0)[0], 0.4246, epsilon = 5e-5);
        assert_abs_diff_eq!(sigma.customer(1)[0], 0.1253, epsilon = 5e-5);
        assert!(r.mixed_gaps.iter().all(|&g| g <= 1e-9));
    }

    #[test]
    fn pt_mixed_equilibrium_shifts_customer_one_up() {
        let t = build_tables(&scenarios::two_customer()).unwrap();
        let eut = solve_2x2_mixed(&t, Mode::Eut).unwrap().mixed_2x2.unwrap();
        let pt = solve_2x2_mixed(&t, Mode::Pt).unwrap().mixed_2x2.unwrap();
        // Independently solved from the framed payoffs: x = 0.30972, y = 0.13306.
        assert_abs_diff_eq!(pt.customer(0)[0], 0.30972316621156054, epsilon = 1e-9);
        assert_abs_diff_eq!(pt.customer(1)[0], 0.13305891636941614, epsilon = 1e-9);
        assert!(pt.customer(0)[1] > eut.customer(0)[1]);
    }

    #[test]
    fn own_action_independent_payoffs_are_degenerate() {
        // Both customers above standard with tau = (N-1)/N: each customer's
        // utility ignores its own action, so every profile is an equilibrium.
        let s = scenarios::two_customer().map_customers(|c| {
            c.actions = vec![PowerFactor::new(0.86).unwrap(), PowerFactor::new(0.87).unwrap()];
            c.tau = 0.5;
        });
        let t = build_tables(&s).unwrap();
        assert!(matches!(solve_2x2_mixed(&t, Mode::Eut), Err(Error::Degenerate(_))));
        assert_eq!(enumerate_pure_ne(&t, Mode::Eut).pure.len(), 4);
    }

    #[test]
    fn non_2x2_games_are_rejected() {
        let t = build_tables(&scenarios::three_customer()).unwrap();
        assert!(matches!(solve_2x2_mixed(&t, Mode::Eut), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pure_equilibrium_has_zero_gap() {
        let t = build_tables(&scenarios::seven_customer(0.5)).unwrap();
        let sigma = MixedProfile::pure(t.action_counts(), &[2; 7]);
        let check = verify_epsilon_ne(&sigma, &t, Mode::Pt, 0.0);
        assert!(check.is_epsilon_ne);
        assert!(check.gaps.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dominated_action_gap_equals_margin() {
        // In the all-below game the lowest action strictly dominates.
        let t = build_tables(&scenarios::all_below()).unwrap();
        let profile = [1usize, 0];
        let sigma = MixedProfile::pure(t.action_counts(), &profile);
        let check = verify_epsilon_ne(&sigma, &t, Mode::Eut, 1e-3);
        let margin = t.utility(0, &[0, 0], Mode::Eut) - t.utility(0, &profile, Mode::Eut);
        assert!(margin > 0.0);
        assert_abs_diff_eq!(check.gaps[0], margin, epsilon = 1e-15);
        assert_eq!(check.gaps[1], 0.0);
        assert!(!check.is_epsilon_ne);
    }

    proptest! {
        #[test]
        fn pure_deviation_gap_bounds_mixed_deviations(
            raw in proptest::collection::vec(0.001f64..1.0, 18),
            dev in proptest::collection::vec(0.0f64..1.0, 6),
            i in 0usize..3,
        ) {
            let t = build_tables(&scenarios::three_customer()).unwrap();
            let mut k = 0;
            let sigma = MixedProfile(t.action_counts().iter().map(|&n| {
                let v: Vec<f64> = (0..n).map(|_| { k += 1; raw[k - 1] }).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            }).collect());
            let total: f64 = dev.iter().sum::<f64>() + 1e-9;
            let deviation: Vec<f64> = dev.iter().map(|d| (d + 1e-9 / 6.0) / total).collect();
            let deviated = sigma.with_customer(i, deviation);
            for mode in [Mode::Eut, Mode::Pt] {
                let gap = verify_epsilon_ne(&sigma, &t, mode, 0.0).gaps[i];
                let mixed_gain = t.expected_utility(i, &deviated, mode) - t.expected_utility(i, &sigma, mode);
                prop_assert!(mixed_gain <= gap + 1e-9);
            }
        }
    }
}
