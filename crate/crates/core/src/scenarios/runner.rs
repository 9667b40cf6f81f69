//! Runs scenarios and experiments and writes their output directories.
//!
//! Layout: `<out>/<experiment>/<run>/{telemetry.csv, metrics.txt, config.toml}`
//! plus `<out>/<experiment>/metrics.txt` with the paired comparisons.

use std::fs;
use std::path::{Path, PathBuf};

use crate::allocation::MixerVariant;
use crate::dynamics::{simulate, Trajectory};
use crate::error::{RunError, SimError};

use super::builtin::Experiment;
use super::config::{parse_config, serialize_config, Role, ScenarioConfig, VariantName};
use super::metrics::{parse_sidecar, MetricsReport, RunMetrics};
use super::telemetry::{write_csv, TelemetryTable};

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const CONFIG_FILE: &str = "config.toml";

/// Command-line overrides applied on top of each config.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub mixer_variant: Option<MixerVariant>,
}

impl Overrides {
    pub fn apply(&self, c: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            c.sim.dt = dt;
        }
        if let Some(d) = self.duration {
            c.duration = d;
        }
        if let Some(v) = self.mixer_variant {
            c.allocation.variant = match v {
                MixerVariant::PaperLiteral => VariantName::PaperLiteral,
                MixerVariant::FullRange => VariantName::FullRange,
            };
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub trajectory: Trajectory,
    pub telemetry: TelemetryTable,
    pub metrics: RunMetrics,
}

impl RunOutput {
    pub fn fault(&self) -> Option<&SimError> {
        self.trajectory.fault.as_ref()
    }
}

fn write(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|e| RunError::io(path, e))
}

/// Simulates one config. With `dir`, writes the run's files there; a
/// faulted run still writes its partial telemetry.
pub fn run_scenario(config: &ScenarioConfig, dir: Option<&Path>) -> Result<RunOutput, RunError> {
    let setup = config.setup()?;
    let mut controller = setup.controller.clone();
    let (trace, map) = (&setup.trace, setup.channel_map);
    let trajectory = simulate(&setup.plant, &mut controller, setup.initial, &setup.sim, setup.settle_actuators, |t| {
        trace.commands(t, &map)
    });
    let telemetry = TelemetryTable::from_samples(&trajectory.samples);
    let metrics = RunMetrics::compute(config, &telemetry, trajectory.saturations);
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        let mut csv = Vec::new();
        write_csv(&mut csv, &trajectory.samples)?;
        write(&dir.join(TELEMETRY_FILE), &csv)?;
        write(&dir.join(METRICS_FILE), metrics.sidecar().as_bytes())?;
        write(&dir.join(CONFIG_FILE), serialize_config(config).as_bytes())?;
    }
    Ok(RunOutput { config: config.clone(), trajectory, telemetry, metrics })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub name: String,
    pub runs: Vec<RunOutput>,
    pub report: MetricsReport,
}

impl ExperimentOutput {
    pub fn faults(&self) -> impl Iterator<Item = (&str, &SimError)> {
        self.runs.iter().filter_map(|r| Some((r.config.name.as_str(), r.fault()?)))
    }
}

/// Runs every config of an experiment, one thread per run.
pub fn run_experiment(
    exp: &Experiment,
    out: Option<&Path>,
    overrides: &Overrides,
) -> Result<ExperimentOutput, RunError> {
    let root = out.map(|o| o.join(&exp.name));
    let configs: Vec<ScenarioConfig> = exp
        .runs
        .iter()
        .map(|c| {
            let mut c = c.clone();
            overrides.apply(&mut c);
            c
        })
        .collect();
    let results: Vec<Result<RunOutput, RunError>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let dir = root.as_ref().map(|r| {
                    if exp.runs.len() == 1 && c.name == exp.name {
                        r.clone()
                    } else {
                        r.join(&c.name)
                    }
                });
                s.spawn(move || run_scenario(c, dir.as_deref()))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = MetricsReport::from_runs(&exp.name, runs.iter().map(|r| r.metrics.clone()).collect());
    if let Some(root) = &root {
        if runs.len() > 1 || runs[0].config.name != exp.name {
            fs::create_dir_all(root).map_err(|e| RunError::io(root, e))?;
            write(&root.join(METRICS_FILE), report.sidecar().as_bytes())?;
        }
    }
    Ok(ExperimentOutput { name: exp.name.clone(), runs, report })
}

/// Runs experiments side by side.
pub fn run_suite(
    experiments: &[Experiment],
    out: Option<&Path>,
    overrides: &Overrides,
) -> Result<Vec<ExperimentOutput>, RunError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = experiments.iter().map(|e| s.spawn(move || run_experiment(e, out, overrides))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    })
}

/// Outcome of one suite acceptance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub const YAW_RATIO_MIN: f64 = 3.0;
pub const Z_DRIFT_RATIO_MAX: f64 = 0.2;
pub const PHASE_RATIO_MAX: f64 = 0.6;
pub const HOVER_TOLERANCE: f64 = 0.05;
pub const IDLE_DRIFT_MAX: f64 = 1e-3;
pub const DIVE_DESCENT_MIN: f64 = 0.3;

fn check(name: &str, value: Option<f64>, pass: impl Fn(f64) -> bool, bound: &str) -> Check {
    match value {
        Some(v) => Check { name: name.into(), passed: pass(v), detail: format!("{v:.4} (need {bound})") },
        None => Check { name: name.into(), passed: false, detail: "metric absent".into() },
    }
}

/// Suite-level acceptance checks over whichever experiments are present.
pub fn evaluate_checks(outputs: &[ExperimentOutput]) -> Vec<Check> {
    let mut checks = Vec::new();
    for o in outputs {
        for (run, fault) in o.faults() {
            checks.push(Check { name: format!("{run} runs to completion"), passed: false, detail: fault.to_string() });
        }
        let run = |role: Role, name: &str| {
            o.runs.iter().find(|r| r.metrics.role == role && (name.is_empty() || r.config.name == name))
        };
        match o.name.as_str() {
            "yaw_torque_vs_tilt" => {
                checks.push(check("yaw_rate_gain_ratio", o.report.yaw_rate_gain_ratio, |v| v >= YAW_RATIO_MIN, ">= 3"));
                checks.push(check("z_drift_ratio", o.report.z_drift_ratio(), |v| v <= Z_DRIFT_RATIO_MAX, "<= 0.2"));
            }
            "horizontal_pitch_vs_tilt" => {
                checks.push(check("phase_lag_ratio", o.report.phase_lag_ratio(), |v| v <= PHASE_RATIO_MAX, "<= 0.6"));
            }
            "hover_air" => {
                let dev = run(Role::None, "hover_air").map(|r| r.metrics.max_depth_deviation);
                checks.push(check("hover_altitude_deviation", dev, |v| v <= HOVER_TOLERANCE, "<= 0.05 m"));
            }
            "neutral_idle" => {
                let dev = run(Role::None, "neutral_idle").map(|r| r.metrics.max_depth_deviation);
                checks.push(check("neutral_idle_drift", dev, |v| v < IDLE_DRIFT_MAX, "< 0.001 m"));
            }
            "dive_mode" => {
                let descent = run(Role::None, "dive").and_then(|r| {
                    let z = r.telemetry.column("z")?;
                    let beta = r.telemetry.column("beta1")?;
                    let descent = z.last()? - z.first()?;
                    (*beta.last()? < 0.0).then_some(descent)
                });
                checks.push(check(
                    "dive_descent",
                    descent,
                    |v| v >= DIVE_DESCENT_MIN,
                    ">= 0.3 m with rotors in the dive band",
                ));
            }
            _ => {}
        }
    }
    checks
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::io(path, e))
}

/// Metrics for a run directory written by [`run_scenario`].
pub fn report_run(dir: &Path) -> Result<RunMetrics, RunError> {
    let config = parse_config(&read(&dir.join(CONFIG_FILE))?)?;
    let csv = fs::File::open(dir.join(TELEMETRY_FILE)).map_err(|e| RunError::io(dir.join(TELEMETRY_FILE), e))?;
    let table = TelemetryTable::read(csv)?;
    let saturations = fs::read_to_string(dir.join(METRICS_FILE))
        .ok()
        .and_then(|t| parse_sidecar(&t).get("saturations")?.parse().ok())
        .unwrap_or(0);
    Ok(RunMetrics::compute(&config, &table, saturations))
}

/// Recomputes metrics from a run directory or an experiment directory.
pub fn report_dir(dir: &Path) -> Result<MetricsReport, RunError> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if dir.join(CONFIG_FILE).is_file() {
        return Ok(MetricsReport::from_runs(&name, vec![report_run(dir)?]));
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| RunError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CONFIG_FILE).is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(RunError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no run directories found")));
    }
    let runs = subdirs.iter().map(|d| report_run(d)).collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport::from_runs(&name, runs))
}
