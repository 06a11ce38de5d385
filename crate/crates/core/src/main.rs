use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netzero::data::{data_dir, Bundle, TABLE_SCENARIOS};
use netzero::pipeline::{run_many, ScenarioRun};
use netzero::report::{self, OutputOptions};
use netzero::scenario::{load_scenario, PolicyMode, ScenarioSpec};
use netzero::Error;

/// Coal phase-out, electrification and carbon-budget scenarios.
#[derive(Parser)]
#[command(name = "netzero", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve scenarios and write CSV tables per scenario.
    Run(RunArgs),
    /// Print and write parity years only.
    Parity(RunArgs),
    /// Compare the bundled scenarios with the reference tables.
    Validate(ValidateArgs),
    /// Run every scenario under each `--mode` and summarise.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario files; defaults to the four bundled pathways.
    #[arg(long = "scenario", num_args = 1..)]
    scenarios: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Solve scenarios on a thread pool.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// `netzero` or `netzero:<year>` or `budget:<Gt>`; defaults to each file's own mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PolicyMode>,
    /// Also write SVG charts.
    #[arg(long)]
    plots: bool,
    /// Interpolate emissions and electrification to every year.
    #[arg(long)]
    annual: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Write the emitted table here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Modes to sweep; defaults to `netzero` and `budget:167`.
    #[arg(long = "mode", value_parser = parse_mode, num_args = 1..)]
    modes: Vec<PolicyMode>,
}

fn parse_mode(s: &str) -> Result<PolicyMode, String> {
    if s == "netzero" {
        return Ok(PolicyMode::NetZeroYear(2060));
    }
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure with its exit code.
struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn config(e: impl std::fmt::Display) -> Self {
        Fail {
            code: 1,
            message: e.to_string(),
        }
    }

    fn scenario(name: &str, e: Error) -> Self {
        let code = if matches!(e, Error::Infeasible(_)) { 2 } else { 1 };
        Fail {
            code,
            message: format!("scenario `{name}`: {e}"),
        }
    }
}

fn load_bundle() -> Result<Bundle, Fail> {
    Bundle::load(data_dir()).map_err(Fail::config)
}

fn scenarios(bundle: &Bundle, paths: &[PathBuf]) -> Result<Vec<ScenarioSpec>, Fail> {
    let specs: Vec<ScenarioSpec> = if paths.is_empty() {
        TABLE_SCENARIOS
            .iter()
            .map(|n| bundle.scenario(n))
            .collect::<netzero::Result<_>>()
            .map_err(Fail::config)?
    } else {
        paths
            .iter()
            .map(load_scenario)
            .collect::<netzero::Result<_>>()
            .map_err(Fail::config)?
    };
    for (i, s) in specs.iter().enumerate() {
        let problems = s.validate();
        if let Some(v) = problems.first() {
            return Err(Fail::config(format!("scenario `{}`: {v}", s.name)));
        }
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(Fail::config(format!("scenario `{}` given twice", s.name)));
        }
    }
    Ok(specs)
}

fn solve(bundle: &Bundle, specs: &[ScenarioSpec], mode: Option<PolicyMode>, parallel: bool) -> Result<Vec<ScenarioRun>, Fail> {
    run_many(bundle, specs, mode, parallel)
        .into_iter()
        .map(|r| r.map_err(|(name, e)| Fail::scenario(&name, e)))
        .collect()
}

fn write_all(out: &Path, runs: &[ScenarioRun], bundle: &Bundle, opts: OutputOptions) -> Result<(), Fail> {
    for r in runs {
        report::write_scenario(&out.join(&r.scenario.name), r, bundle, opts).map_err(Fail::config)?;
    }
    report::write_summary(out, runs, bundle, opts).map_err(Fail::config)
}

fn run(args: RunArgs) -> Result<(), Fail> {
    let bundle = load_bundle()?;
    let specs = scenarios(&bundle, &args.common.scenarios)?;
    let runs = solve(&bundle, &specs, args.mode, args.common.parallel)?;
    let opts = OutputOptions {
        plots: args.plots,
        annual: args.annual,
    };
    write_all(&args.common.out, &runs, &bundle, opts)?;
    for r in &runs {
        if !r.plan.converged {
            eprintln!(
                "warning: scenario `{}`: learning iterations stopped after {} without converging",
                r.scenario.name, r.plan.iterations
            );
        }
    }
    println!("wrote {} scenario(s) to {}", runs.len(), args.common.out.display());
    Ok(())
}

fn parity(args: RunArgs) -> Result<(), Fail> {
    let bundle = load_bundle()?;
    let specs = scenarios(&bundle, &args.common.scenarios)?;
    let runs = solve(&bundle, &specs, args.mode, args.common.parallel)?;
    let mut all = Vec::new();
    for r in &runs {
        all.extend(r.parity(&bundle, 2023).map_err(|e| Fail::scenario(&r.scenario.name, e))?);
    }
    let table = report::parity_table(&all);
    std::fs::create_dir_all(&args.common.out).map_err(Fail::config)?;
    table.write(args.common.out.join("parity.csv")).map_err(Fail::config)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Fail> {
    let bundle = load_bundle()?;
    let specs = scenarios(&bundle, &[])?;
    let runs = solve(&bundle, &specs, None, false)?;
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(Fail::config)?;
        report::emit_table1(&runs, &TABLE_SCENARIOS)
            .and_then(|t| t.write(out.join("table1.csv")))
            .map_err(Fail::config)?;
    }
    let rep = report::validate(&runs, bundle.dir.join("reference")).map_err(Fail::config)?;
    for c in rep.failures() {
        println!(
            "FAIL {}/{}/{}/{}: expected {} got {:.3} (error {:.4} > {})",
            c.table, c.scenario, c.year, c.field, c.expected, c.actual, c.error, c.tolerance
        );
    }
    let excepted: Vec<String> = rep.known_exceptions.iter().map(|(s, y)| format!("{s}/{y}")).collect();
    println!(
        "{} cells compared, {} failed; known exceptions: {}",
        rep.cells.len(),
        rep.failures().count(),
        excepted.join(", ")
    );
    if rep.pass {
        println!("validation passed");
        Ok(())
    } else {
        Err(Fail {
            code: 3,
            message: "validation failed".into(),
        })
    }
}

fn sweep(args: SweepArgs) -> Result<(), Fail> {
    let bundle = load_bundle()?;
    let specs = scenarios(&bundle, &args.common.scenarios)?;
    let modes = if args.modes.is_empty() {
        vec![PolicyMode::NetZeroYear(2060), PolicyMode::FixedBudget(167.0)]
    } else {
        args.modes
    };
    let mut all = Vec::new();
    for mode in modes {
        let runs = solve(&bundle, &specs, Some(mode), args.common.parallel)?;
        let slug = mode.to_string().replace(':', "-");
        for r in &runs {
            let dir = args.common.out.join(&r.scenario.name).join(&slug);
            report::write_scenario(&dir, r, &bundle, OutputOptions::default()).map_err(Fail::config)?;
        }
        all.extend(runs);
    }
    std::fs::create_dir_all(&args.common.out).map_err(Fail::config)?;
    let table = report::sweep_table(&all).map_err(Fail::config)?;
    table.write(args.common.out.join("sweep.csv")).map_err(Fail::config)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn main() -> ExitCode {
    // usage errors are configuration errors; 2 is reserved for infeasible runs
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Parity(a) => parity(a),
        Command::Validate(a) => validate(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
