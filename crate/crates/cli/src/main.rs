use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vargame_core::analysis::{classify_regime, k_threshold, parse_grid, sweep, Scope, SweepParam, SweepSpec};
use vargame_core::fp::{run_fp_traced, write_trace_csv};
use vargame_core::game::build_tables;
use vargame_core::io::resolve_scenario;
use vargame_core::oracle::full_report;
use vargame_core::reproduce::{reproduce, EXPERIMENTS};
use vargame_core::summary::RunSummary;
use vargame_core::{Error, ModeSet, ReferenceMode, Scenario};

#[derive(Parser)]
#[command(name = "vargame", version, about = "Reactive-power compensation game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn equilibria by fictitious play and print a run summary.
    Solve(SolveArgs),
    /// Re-solve the game over a grid of one parameter; writes long-format CSV.
    Sweep(SweepArgs),
    /// Bisect for the loss-aversion level where PT and EUT utilities cross.
    Threshold(ThresholdArgs),
    /// Enumerate pure equilibria and solve 2x2 mixed equilibria exactly.
    Oracle(OracleArgs),
    /// Regenerate the data behind one experiment.
    Reproduce(ReproduceArgs),
    /// Check a scenario file and report every violation.
    Validate { scenario: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Eut,
    Pt,
    Both,
}

impl From<ModeArg> for ModeSet {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Eut => ModeSet::Eut,
            ModeArg::Pt => ModeSet::Pt,
            ModeArg::Both => ModeSet::Both,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file, or the name of a bundled scenario such as `two_customer`.
    scenario: String,
    /// Penalty factor applied to every customer.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// `standard_profile`, `zero` or a number.
    #[arg(long)]
    reference: Option<String>,
    /// Directory for output files. Without it results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Assert that no random source is consulted (always true for this engine).
    #[arg(long)]
    seedless: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Also write a per-iteration trace CSV for each mode.
    #[arg(long)]
    trace: bool,
    /// Exit with status 3 if any run fails to converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// beta, reference, k, tau or n_customers.
    #[arg(long)]
    param: String,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    grid: String,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0.5)]
    k_min: f64,
    #[arg(long, default_value_t = 2.0)]
    k_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// `total` or a customer id.
    #[arg(long, default_value = "total")]
    scope: String,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of fig2, fig3, fig4, fig5, fig6, fig7, table3, corollaries.
    id: String,
    #[arg(long, default_value = "reproduce")]
    out: PathBuf,
}

enum Failure {
    Engine(Error),
    NonConvergence(String),
    Io(PathBuf, io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Engine(Error::Validation(_) | Error::Parse { .. }) => 2,
            Failure::Engine(Error::Capacity { .. }) => 4,
            Failure::NonConvergence(_) => 3,
            _ => 1,
        }
    }
}

type CliResult = Result<(), Failure>;

fn parse_reference(text: &str) -> Result<ReferenceMode, Error> {
    match text {
        "standard_profile" | "standard" => Ok(ReferenceMode::StandardProfile),
        "zero" => Ok(ReferenceMode::Zero),
        other => other
            .parse()
            .map(ReferenceMode::Explicit)
            .map_err(|_| Error::InvalidArgument(format!("bad reference `{other}`"))),
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Error> {
    let base = resolve_scenario(&args.scenario)?;
    let reference = args.reference.as_deref().map(parse_reference).transpose()?;
    let s = base.map_customers(|c| {
        if let Some(v) = args.tau {
            c.tau = v;
        }
        if let Some(v) = args.alpha {
            c.alpha = v;
        }
        if let Some(v) = args.beta {
            c.beta = v;
        }
        if let Some(v) = args.k {
            c.k = v;
        }
        if let Some(r) = reference {
            c.reference = r;
        }
    });
    s.ensure_valid()?;
    Ok(s)
}

/// Writes to `dir/name` when an output directory is given, else to stdout.
fn emit(dir: Option<&Path>, name: &str, body: &[u8]) -> CliResult {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Failure::Io(path.clone(), e))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => io::stdout()
            .write_all(body)
            .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn json_line(value: &impl serde::Serialize) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text.into_bytes()
}

fn solve(args: SolveArgs) -> CliResult {
    let s = load(&args.scenario)?;
    let modes = args.mode.map(ModeSet::from).unwrap_or(s.mode);
    let summary = RunSummary::solve(&s, modes, args.scenario.seedless)?;
    let out = args.scenario.out.as_deref();
    if args.trace {
        let tables = build_tables(&s)?;
        let dir = out.unwrap_or(Path::new("."));
        for &mode in modes.modes() {
            let (_, rows) = run_fp_traced(&tables, &s, mode);
            let mut buf = Vec::new();
            write_trace_csv(&rows, tables.customer_ids(), &mut buf).expect("in-memory write");
            emit(Some(dir), &format!("trace_{mode}.csv"), &buf)?;
        }
    }
    emit(out, "summary.json", &json_line(&summary))?;
    if args.strict && !summary.all_converged() {
        let stalled: Vec<String> = summary
            .runs
            .iter()
            .filter(|r| !r.result.converged)
            .map(|r| format!("{} after {} iterations", r.result.mode, r.result.iterations))
            .collect();
        return Err(Failure::NonConvergence(stalled.join(", ")));
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> CliResult {
    let s = load(&args.scenario)?;
    let spec = SweepSpec {
        param: SweepParam::parse(&args.param)?,
        grid: parse_grid(&args.grid)?,
        modes: args.mode.map(ModeSet::from).unwrap_or(s.mode),
        base: s,
    };
    let table = sweep(&spec)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).expect("in-memory write");
    emit(
        args.scenario.out.as_deref(),
        &format!("sweep_{}.csv", spec.param.as_str()),
        &buf,
    )?;
    if args.strict {
        let bad = table
            .rows
            .iter()
            .filter(|r| r.error.is_some() || r.results.iter().any(|x| !x.converged))
            .count();
        if bad > 0 {
            return Err(Failure::NonConvergence(format!(
                "{bad} grid points unsolved or not converged"
            )));
        }
    }
    Ok(())
}

fn threshold(args: ThresholdArgs) -> CliResult {
    let s = load(&args.scenario)?;
    let scope = match args.scope.as_str() {
        "total" => Scope::Total,
        id => match s.customers.iter().position(|c| c.id == id) {
            Some(i) => Scope::Customer(i),
            None => return Err(Error::InvalidArgument(format!("no customer `{id}`")).into()),
        },
    };
    let result = k_threshold(&s, args.k_min, args.k_max, args.tol, scope)?;
    eprintln!("k0 = {}", result.k0);
    let mut summary = RunSummary::solve(&s, ModeSet::Both, args.scenario.seedless)?;
    summary.threshold = Some(result);
    emit(args.scenario.out.as_deref(), "threshold.json", &json_line(&summary))
}

fn oracle(args: OracleArgs) -> CliResult {
    let s = load(&args.scenario)?;
    let tables = build_tables(&s)?;
    let modes = args.mode.map(ModeSet::from).unwrap_or(s.mode);
    let reports: Vec<_> = modes.modes().iter().map(|&m| full_report(&tables, m)).collect();
    let body = serde_json::json!({
        "regime": classify_regime(&s),
        "reference_points": tables.reference_points(),
        "reports": reports,
    });
    emit(args.scenario.out.as_deref(), "oracle.json", &json_line(&body))
}

fn run_reproduce(args: ReproduceArgs) -> CliResult {
    if !EXPERIMENTS.contains(&args.id.as_str()) {
        return Err(Error::UnknownExperiment(format!("{} (known: {})", args.id, EXPERIMENTS.join(", "))).into());
    }
    let bundle = reproduce(&args.id, &args.out)?;
    for f in &bundle.files {
        println!("wrote {}", f.display());
    }
    for c in &bundle.checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}

fn validate(scenario: &str) -> CliResult {
    let s = resolve_scenario(scenario)?;
    let profiles: usize = s.action_counts().iter().product();
    println!("valid: {} customers, {profiles} joint profiles", s.n_customers());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Threshold(a) => threshold(a),
        Command::Oracle(a) => oracle(a),
        Command::Reproduce(a) => run_reproduce(a),
        Command::Validate { scenario } => validate(&scenario),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Engine(e) => eprintln!("error: {e}"),
                Failure::NonConvergence(what) => eprintln!("error: no convergence: {what}"),
                Failure::Io(path, e) => eprintln!("error: writing {}: {e}", path.display()),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
