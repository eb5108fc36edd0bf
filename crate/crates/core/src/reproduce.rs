//! Bundled experiments. Each writes the CSV data behind one figure or table
//! plus a `checks.csv` with the expected qualitative outcomes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{classify_regime, k_threshold, sweep, Scope, SweepParam, SweepSpec, SweepTable};
use crate::error::{Error, Result};
use crate::format::{fmt_f64, fmt_vec};
use crate::fp::{run_fp_on, run_fp_traced, write_trace_csv, EquilibriumResult};
use crate::game::{build_tables, UtilityTables};
use crate::oracle::{enumerate_pure_ne, solve_2x2_mixed};
use crate::power::{Mode, ModeSet, ReferenceMode, Scenario};
use crate::scenarios;

pub const EXPERIMENTS: &[&str] = &["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "table3", "corollaries"];

pub const CHECKS_HEADER: &str = "check,passed,detail";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub id: String,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Bundle {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn sweep(&mut self, name: &str, table: &SweepTable) -> Result<()> {
        self.write(name, |w| table.write_csv(w))
    }
}

/// Runs experiment `id`, writing its files into `out_dir`.
pub fn reproduce(id: &str, out_dir: impl AsRef<Path>) -> Result<Bundle> {
    if !EXPERIMENTS.contains(&id) {
        return Err(Error::UnknownExperiment(id.to_string()));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Writer { dir, files: Vec::new() };
    let checks = match id {
        "fig2" => fig2(&mut out)?,
        "fig3" => fig3(&mut out)?,
        "fig4" => fig4(&mut out)?,
        "fig5" => fig5(&mut out)?,
        "fig6" => fig6(&mut out)?,
        "fig7" => fig7(&mut out)?,
        "table3" => table3(&mut out)?,
        "corollaries" => corollaries(&mut out)?,
        _ => unreachable!(),
    };
    out.write("checks.csv", |w| {
        writeln!(w, "{CHECKS_HEADER}")?;
        for c in &checks {
            writeln!(w, "{},{},{}", c.name, c.passed, c.detail.replace(',', ";"))?;
        }
        Ok(())
    })?;
    Ok(Bundle {
        id: id.to_string(),
        files: out.files,
        checks,
    })
}

fn solve_both(s: &Scenario) -> Result<(UtilityTables, EquilibriumResult, EquilibriumResult)> {
    let t = build_tables(s)?;
    let eut = run_fp_on(&t, s, Mode::Eut);
    let pt = run_fp_on(&t, s, Mode::Pt);
    Ok((t, eut, pt))
}

fn write_strategies(w: &mut dyn Write, t: &UtilityTables, results: &[&EquilibriumResult]) -> std::io::Result<()> {
    writeln!(w, "mode,customer,action_pf,probability")?;
    for r in results {
        for (i, id) in t.customer_ids().iter().enumerate() {
            for (a, &pf) in t.action_values(i).iter().enumerate() {
                writeln!(
                    w,
                    "{},{id},{},{}",
                    r.mode,
                    fmt_f64(pf),
                    fmt_f64(r.profile.customer(i)[a])
                )?;
            }
        }
    }
    Ok(())
}

fn fig2(out: &mut Writer) -> Result<Vec<Check>> {
    let s = scenarios::two_customer();
    let (t, eut, pt) = solve_both(&s)?;
    out.write("fig2_strategies.csv", |w| write_strategies(w, &t, &[&eut, &pt]))?;

    let mut checks = Vec::new();
    let analytic = solve_2x2_mixed(&t, Mode::Eut)?.mixed_2x2.expect("2x2 solution");
    let dev = eut.profile.max_abs_diff(&analytic);
    checks.push(Check::new(
        "eut_matches_indifference_solution",
        dev <= 0.02 && eut.ne_gap <= 1e-3,
        format!("max deviation {} ne_gap {}", fmt_f64(dev), fmt_f64(eut.ne_gap)),
    ));
    let high = |r: &EquilibriumResult, i: usize| r.profile.customer(i)[1];
    let rise: Vec<f64> = (0..2).map(|i| high(&pt, i) - high(&eut, i)).collect();
    checks.push(Check::new(
        "pt_raises_high_pf_for_both",
        rise.iter().all(|&d| d > 0.0),
        format!("increase on 0.9: {}", fmt_vec(&rise)),
    ));
    checks.push(Check::new(
        "customer1_increase_near_0.29",
        (rise[0] - 0.29).abs() <= 0.10,
        format!("customer 1 increase {}", fmt_f64(rise[0])),
    ));
    Ok(checks)
}

fn fig3(out: &mut Writer) -> Result<Vec<Check>> {
    let s = scenarios::two_customer();
    let t = build_tables(&s)?;
    let mut checks = Vec::new();
    for mode in [Mode::Eut, Mode::Pt] {
        let (r, rows) = run_fp_traced(&t, &s, mode);
        out.write(&format!("fig3_trace_{mode}.csv"), |w| {
            write_trace_csv(&rows, t.customer_ids(), w)
        })?;
        checks.push(Check::new(
            &format!("{mode}_converged"),
            r.converged && rows.len() as u64 == r.iterations * t.n_customers() as u64,
            format!("{} iterations", r.iterations),
        ));
    }
    Ok(checks)
}

fn identity_gain_base() -> Scenario {
    scenarios::two_customer().map_customers(|c| {
        c.alpha = 1.0;
        c.k = 1.0;
        c.reference = ReferenceMode::Zero;
    })
}

fn fig4(out: &mut Writer) -> Result<Vec<Check>> {
    let spec = SweepSpec {
        param: SweepParam::Beta,
        grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
        base: identity_gain_base(),
        modes: ModeSet::Both,
    };
    let table = sweep(&spec)?;
    out.sweep("fig4_beta_sweep.csv", &table)?;

    let pt_u = |row: usize, i: usize| table.rows[row].result(Mode::Pt).unwrap().expected_utilities[i];
    let eut_u = |row: usize, i: usize| table.rows[row].result(Mode::Eut).unwrap().expected_utilities[i];
    let last = table.rows.len() - 1;
    let monotone = (0..2).all(|i| (1..=last).all(|r| pt_u(r, i) >= pt_u(r - 1, i)));
    let identity = (0..2).all(|i| (pt_u(last, i) - eut_u(last, i)).abs() <= 1e-12);
    let gap = |i: usize| (pt_u(0, i) - eut_u(0, i)).abs();
    Ok(vec![
        Check::new("pt_utility_nondecreasing_in_beta", monotone, String::new()),
        Check::new("beta_one_equals_eut", identity, String::new()),
        Check::new(
            "customer2_gap_exceeds_customer1_at_low_beta",
            gap(1) > gap(0),
            format!("gaps {} {}", fmt_f64(gap(0)), fmt_f64(gap(1))),
        ),
    ])
}

/// PT expected utilities of `sigma` when every reference is `u0`.
fn framed_at_reference(base: &Scenario, sigma: &crate::game::MixedProfile, u0: f64) -> Result<Vec<f64>> {
    let s = base.map_customers(|c| c.reference = ReferenceMode::Explicit(u0));
    let t = build_tables(&s)?;
    Ok((0..t.n_customers())
        .map(|i| t.expected_utility(i, sigma, Mode::Pt))
        .collect())
}

fn fig5(out: &mut Writer) -> Result<Vec<Check>> {
    let refs: Vec<f64> = (0..=5).map(|i| i as f64 / 10.0).collect();
    let mut lines = Vec::new();
    let mut monotone = true;
    for beta in [0.6, 1.0] {
        let base = identity_gain_base().map_customers(|c| c.beta = beta);
        let (_, _, pt) = solve_both(&base)?;
        let spec = SweepSpec {
            param: SweepParam::Reference,
            grid: refs.clone(),
            base: base.clone(),
            modes: ModeSet::Pt,
        };
        let resolved = sweep(&spec)?;
        let mut prev: Option<Vec<f64>> = None;
        for (row, &u0) in resolved.rows.iter().zip(&refs) {
            let fixed = framed_at_reference(&base, &pt.profile, u0)?;
            if let Some(p) = &prev {
                monotone &= fixed.iter().zip(p).all(|(now, before)| now <= before);
            }
            let solved = row
                .result(Mode::Pt)
                .map(|r| r.expected_utilities.clone())
                .unwrap_or_default();
            for (i, id) in row.customer_ids.iter().enumerate() {
                lines.push(format!(
                    "{},{},{id},{},{}",
                    fmt_f64(beta),
                    fmt_f64(u0),
                    fmt_f64(fixed[i]),
                    fmt_f64(solved[i])
                ));
            }
            prev = Some(fixed);
        }
    }
    out.write("fig5_reference_sweep.csv", |w| {
        writeln!(
            w,
            "beta,reference,customer,fixed_profile_pt_utility,resolved_pt_utility"
        )?;
        lines.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?;
    Ok(vec![Check::new(
        "fixed_profile_pt_utility_nonincreasing_in_reference",
        monotone,
        String::new(),
    )])
}

fn fig6(out: &mut Writer) -> Result<Vec<Check>> {
    let base = scenarios::three_customer();
    let spec = SweepSpec {
        param: SweepParam::K,
        grid: (5..=20).map(|i| i as f64 / 10.0).collect(),
        base: base.clone(),
        modes: ModeSet::Both,
    };
    out.sweep("fig6_k_sweep.csv", &sweep(&spec)?)?;

    let t = build_tables(&base)?;
    let (best, total) = t.max_total_pure_utility();
    out.write("fig6_optimum.csv", |w| {
        writeln!(w, "profile,total_utility")?;
        let pfs: Vec<f64> = best.iter().enumerate().map(|(i, &a)| t.action_values(i)[a]).collect();
        writeln!(w, "{},{}", fmt_vec(&pfs), fmt_f64(total))
    })?;

    let mut checks = Vec::new();
    match k_threshold(&base, 0.9, 1.2, 1e-3, Scope::Total) {
        Ok(r) => {
            out.write("fig6_threshold.csv", |w| {
                writeln!(w, "k,pt_minus_eut")?;
                r.evaluations
                    .iter()
                    .try_for_each(|(k, g)| writeln!(w, "{},{}", fmt_f64(*k), fmt_f64(*g)))
            })?;
            checks.push(Check::new(
                "threshold_near_1.04",
                (r.k0 - 1.04).abs() <= 0.10,
                format!("k0 {}", fmt_f64(r.k0)),
            ));
        }
        Err(e) => checks.push(Check::new("threshold_near_1.04", false, e.to_string())),
    }
    Ok(checks)
}

fn fig7(out: &mut Writer) -> Result<Vec<Check>> {
    let spec = SweepSpec {
        param: SweepParam::NCustomers,
        grid: (2..=7).map(f64::from).collect(),
        base: scenarios::fig7_base(),
        modes: ModeSet::Both,
    };
    let table = sweep(&spec)?;
    out.sweep("fig7_n_sweep.csv", &table)?;
    let avg = |row: usize, mode: Mode| {
        let row = &table.rows[row];
        row.result(mode)
            .map(|r| r.total_utility() / row.customer_ids.len() as f64)
    };
    Ok([Mode::Eut, Mode::Pt]
        .into_iter()
        .map(|mode| {
            let (two, seven) = (avg(0, mode), avg(5, mode));
            Check::new(
                &format!("{mode}_average_lower_at_seven_than_two"),
                matches!((two, seven), (Some(a), Some(b)) if b < a),
                format!("{:?} -> {:?}", two, seven),
            )
        })
        .collect())
}

fn table3(out: &mut Writer) -> Result<Vec<Check>> {
    let s = scenarios::seven_customer(6.0 / 7.0);
    let (t, eut, pt) = solve_both(&s)?;
    out.write("table3_strategies.csv", |w| write_strategies(w, &t, &[&eut, &pt]))?;
    Ok([&eut, &pt]
        .into_iter()
        .map(|r| {
            let mixed = (0..t.n_customers()).all(|i| r.profile.customer(i).iter().filter(|&&p| p >= 0.25).count() >= 2);
            Check::new(
                &format!("{}_every_customer_mixed", r.mode),
                mixed,
                format!("customer 1 strategy {}", fmt_vec(r.profile.customer(0))),
            )
        })
        .collect())
}

fn corollaries(out: &mut Writer) -> Result<Vec<Check>> {
    let instances = [
        ("all_below", scenarios::all_below()),
        ("all_above_tau_0.5", scenarios::seven_customer(0.5)),
        ("all_above_tau_0.9", scenarios::seven_customer(0.9)),
        ("two_by_two_straddle", scenarios::two_customer()),
    ];
    let mut lines = Vec::new();
    let mut checks = Vec::new();
    for (name, s) in instances {
        let regime = classify_regime(&s);
        let predicted = regime.predicted_pure_profile(&s);
        let t = build_tables(&s)?;
        let pf = |i: usize, a: usize| t.action_values(i)[a];
        let render = |p: &[usize]| fmt_vec(&p.iter().enumerate().map(|(i, &a)| pf(i, a)).collect::<Vec<_>>());
        for mode in [Mode::Eut, Mode::Pt] {
            let oracle = enumerate_pure_ne(&t, mode);
            let fp = run_fp_on(&t, &s, mode);
            let modal: Vec<usize> = (0..t.n_customers()).map(|i| fp.modal_action(i)).collect();
            let agree = match &predicted {
                Some(p) => {
                    let pure = (0..t.n_customers()).all(|i| fp.profile.customer(i)[p[i]] >= 0.99);
                    oracle.unique_pure().map(|e| &e.profile.0) == Some(p) && pure
                }
                None => oracle.pure.is_empty() && solve_2x2_mixed(&t, mode).is_ok() && fp.ne_gap <= 1e-3,
            };
            lines.push(format!(
                "{name},{regime},{mode},{},{},{},{agree}",
                predicted.as_deref().map(render).unwrap_or_default(),
                oracle
                    .pure
                    .iter()
                    .map(|e| render(&e.profile))
                    .collect::<Vec<_>>()
                    .join(" "),
                render(&modal),
            ));
            checks.push(Check::new(&format!("{name}_{mode}"), agree, regime.to_string()));
        }
    }
    out.write("corollaries.csv", |w| {
        writeln!(w, "instance,regime,mode,predicted,oracle_pure,fp_modal,agree")?;
        lines.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?;
    Ok(checks)
}
