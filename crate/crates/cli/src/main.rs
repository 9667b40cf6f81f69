use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use aquaquad::allocation::MixerVariant;
use aquaquad::designkit::{
    gear_ratio_sweep, peak_efficiency, static_test_curves, write_static_csv, write_sweep_csv, DiskPropeller,
    SweepRange, AIR_DENSITY, REFERENCE, WATER_DENSITY,
};
use aquaquad::propulsion::{PropulsionMode, PropulsionParams, PropulsionUnit};
use aquaquad::scenarios::runner::{report_dir, ExperimentOutput};
use aquaquad::scenarios::{
    all_builtins, builtin, evaluate_checks, parse_config, run_experiment, run_suite, Experiment, MetricsReport,
    Overrides, BUILTIN_NAMES,
};
use aquaquad::{ConfigError, RunError};

const EXIT_CONFIG: u8 = 2;
const EXIT_FAULT: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "aquaquad", version, about = "Aerial-aquatic tilt-rotor quadrotor simulator")]
struct Cli {
    /// Output root directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Physics time step override (s).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Duration override (s).
    #[arg(long, global = true)]
    duration: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mixer_variant: Option<VariantArg>,
    /// Accepted for interface stability; the dynamics are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    PaperLiteral,
    FullRange,
}

#[derive(Clone, Copy, ValueEnum)]
enum MediumArg {
    Air,
    Water,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a builtin experiment by name.
    Run { config: String },
    /// Run every builtin experiment and print the metrics table.
    Suite {
        /// Exit with status 4 if an acceptance check fails.
        #[arg(long)]
        check: bool,
        /// Restrict to these builtins.
        #[arg(long = "only", value_name = "NAME")]
        only: Vec<String>,
    },
    /// Bench-test curves over duty 0.30 to 1.00 in both gears.
    StaticTest {
        #[arg(long, default_value_t = 70)]
        steps: usize,
    },
    /// Sweep the gear ratio for one medium.
    GearSweep {
        #[arg(long, value_enum, default_value = "water")]
        medium: MediumArg,
        /// Electrical power cap (W).
        #[arg(long)]
        power_budget: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        min: f64,
        #[arg(long, default_value_t = 30.0)]
        max: f64,
        #[arg(long, default_value_t = 291)]
        points: usize,
    },
    /// Recompute metrics from a run or experiment directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let _ = cli.seed;
    let overrides = Overrides {
        dt: cli.dt,
        duration: cli.duration,
        mixer_variant: cli.mixer_variant.map(|v| match v {
            VariantArg::PaperLiteral => MixerVariant::PaperLiteral,
            VariantArg::FullRange => MixerVariant::FullRange,
        }),
    };
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config, &cli.out, &overrides),
        Command::Suite { check, only } => cmd_suite(*check, only, &cli.out, &overrides),
        Command::StaticTest { steps } => cmd_static(*steps, &cli.out),
        Command::GearSweep { medium, power_budget, min, max, points } => {
            cmd_sweep(*medium, *power_budget, SweepRange { min: *min, max: *max, points: *points }, &cli.out)
        }
        Command::Report { dir } => cmd_report(dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RunError::Config(_) => EXIT_CONFIG,
                RunError::Sim(_) => EXIT_FAULT,
                _ => 1,
            })
        }
    }
}

fn load_experiment(arg: &str) -> Result<Experiment, RunError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(e) = builtin(arg) {
            return Ok(e);
        }
        return Err(ConfigError {
            line: None,
            key: arg.to_string(),
            reason: format!("no such file or builtin (builtins: {})", BUILTIN_NAMES.join(", ")),
        }
        .into());
    }
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let config =
        parse_config(&text).map_err(|e| ConfigError { reason: format!("{}: {}", path.display(), e.reason), ..e })?;
    Ok(Experiment::single(config))
}

fn print_experiment(o: &ExperimentOutput) {
    print!("{}", o.report.sidecar());
}

fn fault_code(outputs: &[ExperimentOutput]) -> Option<ExitCode> {
    let mut faulted = false;
    for o in outputs {
        for (run, fault) in o.faults() {
            eprintln!("error: {run}: simulation fault: {fault}");
            faulted = true;
        }
    }
    faulted.then(|| ExitCode::from(EXIT_FAULT))
}

fn cmd_run(arg: &str, out: &Path, overrides: &Overrides) -> Result<ExitCode, RunError> {
    let exp = load_experiment(arg)?;
    for c in &exp.runs {
        let mut c = c.clone();
        overrides.apply(&mut c);
        c.setup()?;
    }
    let output = run_experiment(&exp, Some(out), overrides)?;
    print_experiment(&output);
    println!("# output in {}", out.join(&exp.name).display());
    Ok(fault_code(std::slice::from_ref(&output)).unwrap_or(ExitCode::SUCCESS))
}

fn cmd_suite(check: bool, only: &[String], out: &Path, overrides: &Overrides) -> Result<ExitCode, RunError> {
    let experiments: Vec<Experiment> = if only.is_empty() {
        all_builtins()
    } else {
        only.iter()
            .map(|n| {
                builtin(n).ok_or_else(|| {
                    RunError::from(ConfigError { line: None, key: n.clone(), reason: "unknown builtin".into() })
                })
            })
            .collect::<Result<_, _>>()?
    };
    let outputs = run_suite(&experiments, Some(out), overrides)?;
    println!(
        "{:<26} {:<20} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "experiment", "run", "yaw_rate", "z_drift", "speed", "lag_deg", "sat"
    );
    for o in &outputs {
        for r in &o.runs {
            let m = &r.metrics;
            let lag = m.phase_lag_deg.map_or("-".to_string(), |l| format!("{l:.1}"));
            println!(
                "{:<26} {:<20} {:>10.4} {:>10.4} {:>10.4} {:>10} {:>8}",
                o.name, m.scenario, m.max_yaw_rate, m.z_drift, m.peak_speed, lag, m.saturations
            );
        }
    }
    println!();
    let checks = evaluate_checks(&outputs);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(code) = fault_code(&outputs) {
        return Ok(code);
    }
    if check && checks.iter().any(|c| !c.passed) {
        return Ok(ExitCode::from(EXIT_CHECK));
    }
    Ok(ExitCode::SUCCESS)
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

fn cmd_static(steps: usize, out: &Path) -> Result<ExitCode, RunError> {
    let unit = PropulsionUnit::new(PropulsionParams::default()).map_err(|e| RunError::Telemetry(e.to_string()))?;
    let curves: Vec<_> = [PropulsionMode::Aerial, PropulsionMode::Aquatic]
        .into_iter()
        .map(|m| (m, static_test_curves(&unit, m, steps)))
        .collect();
    for (mode, pts) in &curves {
        let reference = match mode {
            PropulsionMode::Aerial => REFERENCE.aerial_efficiency,
            PropulsionMode::Aquatic => REFERENCE.aquatic_efficiency,
        };
        if let Some(p) = peak_efficiency(pts) {
            println!(
                "{:<8} peak efficiency {:.3} at duty {:.2} (reference {:.3}), full-duty thrust {:.2} N",
                mode.name(),
                p.efficiency,
                p.duty,
                reference,
                pts.last().map_or(0.0, |p| p.thrust)
            );
        }
    }
    create_dir(out)?;
    let path = out.join("static_test.csv");
    let file = fs::File::create(&path).map_err(|e| RunError::io(&path, e))?;
    write_static_csv(file, &curves)?;
    println!("# wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(medium: MediumArg, budget: Option<f64>, range: SweepRange, out: &Path) -> Result<ExitCode, RunError> {
    let p = PropulsionParams::default();
    let (density, mode, name) = match medium {
        MediumArg::Air => (AIR_DENSITY, PropulsionMode::Aerial, "air"),
        MediumArg::Water => (WATER_DENSITY, PropulsionMode::Aquatic, "water"),
    };
    let sweep = gear_ratio_sweep(&p.motor, &p.gearbox, mode, &DiskPropeller::default(), density, &range, budget)
        .map_err(|e| RunError::Config(ConfigError { line: None, key: "gear-sweep".into(), reason: e.to_string() }))?;
    let best = sweep.best_result();
    println!(
        "{name}: r_best {:.2}, thrust {:.2} N, efficiency {:.3}, {:.1} W (reference aquatic ratio {})",
        sweep.best.ratio, best.thrust, best.efficiency, best.electrical_power, REFERENCE.aquatic_gear_ratio
    );
    create_dir(out)?;
    let path = out.join(format!("gear_sweep_{name}.csv"));
    let file = fs::File::create(&path).map_err(|e| RunError::io(&path, e))?;
    write_sweep_csv(file, &sweep)?;
    println!("# wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(dir: &Path) -> Result<ExitCode, RunError> {
    let report: MetricsReport = report_dir(dir)?;
    print!("{}", report.sidecar());
    println!(
        "# reference: aerial efficiency {:.3}, aquatic efficiency {:.3}, aquatic specific thrust {:.3} N/W, aquatic thrust {} N",
        REFERENCE.aerial_efficiency, REFERENCE.aquatic_efficiency, REFERENCE.max_aquatic_specific_thrust, REFERENCE.max_aquatic_thrust
    );
    Ok(ExitCode::SUCCESS)
}
