//! Scenario configs, telemetry output, metrics and the experiment runner.

pub mod builtin;
pub mod config;
pub mod metrics;
pub mod runner;
pub mod telemetry;
pub mod trace;

pub use builtin::{all_builtins, builtin, Experiment, BUILTIN_NAMES};
pub use config::{parse_config, serialize_config, Role, ScenarioConfig, ScenarioSetup};
pub use metrics::{MetricsReport, RunMetrics};
pub use runner::{evaluate_checks, run_experiment, run_scenario, run_suite, Check, Overrides};
pub use trace::{ChannelTrace, CommandTrace, SineTrace};
