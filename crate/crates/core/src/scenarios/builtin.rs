//! Builtin experiments.
//!
//! The yaw pair holds depth by a scripted throttle instead of a pilot: the
//! tilt run raises collective so the vertical thrust component at the
//! commanded tilt still matches the hover trim.

use crate::allocation::Zone;
use crate::control::{manual_throttle, HoverTrim};
use crate::dynamics::GRAVITY;
use crate::propulsion::{PropulsionParams, PropulsionUnit};

use super::config::{MediumPreset, ResponseSignal, Role, ScenarioConfig, ZoneName};
use super::trace::{ChannelTrace, SineTrace};

/// A named group of runs whose metrics are compared together.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub description: String,
    pub runs: Vec<ScenarioConfig>,
}

impl Experiment {
    fn new(name: &str, description: &str, runs: Vec<ScenarioConfig>) -> Self {
        Experiment { name: name.into(), description: description.into(), runs }
    }

    /// A single config as its own experiment.
    pub fn single(config: ScenarioConfig) -> Self {
        Experiment { name: config.name.clone(), description: config.description.clone(), runs: vec![config] }
    }
}

pub const BUILTIN_NAMES: [&str; 6] = [
    "hover_air",
    "yaw_torque_vs_tilt",
    "horizontal_pitch_vs_tilt",
    "dive_mode",
    "air_tilt_translation",
    "neutral_idle",
];

pub fn builtin(name: &str) -> Option<Experiment> {
    Some(match name {
        "hover_air" => hover_air(),
        "yaw_torque_vs_tilt" => yaw_torque_vs_tilt(),
        "horizontal_pitch_vs_tilt" => horizontal_pitch_vs_tilt(),
        "dive_mode" => dive_mode(),
        "air_tilt_translation" => air_tilt_translation(),
        "neutral_idle" => neutral_idle(),
        _ => return None,
    })
}

pub fn all_builtins() -> Vec<Experiment> {
    BUILTIN_NAMES.iter().filter_map(|n| builtin(n)).collect()
}

/// Zero before `t0`, `value` on `[t0, t1]`, zero again after, with 10 ms edges.
fn pulse(value: f64, t0: f64, t1: f64) -> ChannelTrace {
    ChannelTrace::Keyframes {
        keyframes: vec![[0.0, 0.0], [t0, 0.0], [t0 + 0.01, value], [t1, value], [t1 + 0.01, 0.0]],
    }
}

fn sine(amplitude: f64, frequency: f64, start: f64) -> ChannelTrace {
    ChannelTrace::Sine { sine: SineTrace { amplitude, frequency, offset: 0.0, start, stop: None } }
}

fn scenario(name: &str, description: &str, duration: f64, z0: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::minimal(name, duration);
    c.description = description.into();
    c.initial.position = [0.0, 0.0, z0];
    c
}

fn default_trim() -> HoverTrim {
    let c = ScenarioConfig::minimal("trim", 1.0);
    let g = c.geometry().expect("default geometry is valid");
    let unit = PropulsionUnit::new(PropulsionParams::default()).expect("default propulsion is valid");
    HoverTrim::compute(&g, &unit, 1000.0, GRAVITY, Zone::Upper)
}

pub fn hover_air() -> Experiment {
    let mut c = scenario("hover_air", "Altitude-held hover 2 m above the surface", 10.0, -2.0);
    c.control.altitude_hold = true;
    c.metrics.role = Role::None;
    Experiment::new("hover_air", "Aerial hover", vec![c])
}

pub fn yaw_torque_vs_tilt() -> Experiment {
    const YAW_START: f64 = 2.0;
    const YAW_STOP: f64 = 8.0;
    let mut torque = scenario("yaw_torque", "Full yaw stick through differential rotor torque, 1 m deep", 10.0, 1.0);
    torque.trace.yaw1 = Some(pulse(1.0, YAW_START, YAW_STOP));
    torque.metrics.role = Role::YawTorque;
    torque.metrics.window = Some([YAW_START, YAW_STOP]);

    // At full yaw2 stick the mixer tilts each unit to 30° off the arm
    // tangent, so sin β = 1/2 and the duty needs a factor √2.
    let trim = default_trim().water;
    let target = trim * std::f64::consts::SQRT_2;
    let stick = (target - trim) / (1.0 - trim);
    debug_assert!((manual_throttle(stick, trim) - target).abs() < 1e-12);
    let mut tilt = scenario("yaw_tilt", "Full yaw stick through thrust vectoring, 1 m deep", 10.0, 1.0);
    tilt.trace.yaw2 = Some(pulse(1.0, YAW_START, YAW_STOP));
    tilt.trace.throttle = Some(pulse(stick, YAW_START, YAW_STOP));
    tilt.metrics.role = Role::YawTilt;
    tilt.metrics.window = Some([YAW_START, YAW_STOP]);

    Experiment::new(
        "yaw_torque_vs_tilt",
        "Underwater yaw by rotor torque versus by thrust vectoring",
        vec![torque, tilt],
    )
}

pub fn horizontal_pitch_vs_tilt() -> Experiment {
    const F: f64 = 0.2;
    let mut pitch = scenario("pitch_translation", "Sinusoidal pitch stick, 1 m deep", 22.0, 1.0);
    pitch.trace.pitch = Some(sine(1.0, F, 2.0));
    pitch.metrics.role = Role::PitchTranslation;
    pitch.metrics.phase_channel = Some("pitch".into());
    // Pitch stick forward (negative) noses down and drives +x.
    pitch.metrics.phase_sign = -1.0;

    let mut tilt = scenario("tilt_translation", "Sinusoidal surge stick through thrust vectoring, 1 m deep", 22.0, 1.0);
    tilt.trace.surge = Some(sine(1.0, F, 2.0));
    tilt.metrics.role = Role::TiltTranslation;
    tilt.metrics.phase_channel = Some("surge".into());

    for c in [&mut pitch, &mut tilt] {
        c.control.altitude_hold = true;
        c.metrics.phase_response = ResponseSignal::Vx;
        c.metrics.phase_discard_periods = 1.0;
    }
    Experiment::new(
        "horizontal_pitch_vs_tilt",
        "Underwater horizontal translation by pitching versus by tilting",
        vec![pitch, tilt],
    )
}

pub fn dive_mode() -> Experiment {
    let mut c = scenario("dive", "Lower-zone dive with the thrust pointing down against extra buoyancy", 12.0, 0.5);
    c.vehicle.buoyancy_ratio = 1.05;
    c.allocation.zone = ZoneName::Lower;
    c.control.altitude_hold = true;
    // Negative throttle commands descent in depth hold.
    c.trace.throttle = Some(pulse(-0.5, 2.0, 6.0));
    Experiment::new("dive_mode", "Underwater dive mode", vec![c])
}

pub fn air_tilt_translation() -> Experiment {
    let mut c = scenario("air_tilt_translation", "Level aerial translation by tilting the rotors", 16.0, -2.0);
    c.control.altitude_hold = true;
    c.trace.surge = Some(sine(0.1, 0.2, 2.0));
    c.metrics.phase_channel = Some("surge".into());
    Experiment::new("air_tilt_translation", "Aerial thrust-vectoring translation", vec![c])
}

pub fn neutral_idle() -> Experiment {
    let mut c = scenario("neutral_idle", "Neutrally buoyant and level with zero commands", 10.0, 1.0);
    c.vehicle.buoyancy_ratio = 1.0;
    c.medium.preset = MediumPreset::Standard;
    Experiment::new("neutral_idle", "Zero-command neutral equilibrium", vec![c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates() {
        for e in all_builtins() {
            assert!(!e.runs.is_empty());
            for r in &e.runs {
                r.setup().unwrap_or_else(|err| panic!("{}: {err}", r.name));
            }
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn builtins_round_trip_as_toml() {
        for e in all_builtins() {
            for r in &e.runs {
                let text = super::super::serialize_config(r);
                assert_eq!(&super::super::parse_config(&text).unwrap(), r);
            }
        }
    }
}
