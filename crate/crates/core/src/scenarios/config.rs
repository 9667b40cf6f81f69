//! Scenario configuration in TOML.
//!
//! Every section and key is optional except `name` and `duration`; missing
//! values take the library defaults. Unknown keys are rejected. Angles are
//! in degrees, everything else in SI units.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::allocation::{MixerSettings, MixerVariant, TiltInterval, Zone, DEFAULT_MIXER_GAIN};
use crate::control::{
    CascadeController, CascadeGains, ChannelMap, ControlFlags, GainSchedule, HoverTrim, CHANNEL_NAMES,
};
use crate::dynamics::{ActuatorParams, Environment, Integrator, Plant, SimParams, DEFAULT_DT, GRAVITY};
use crate::error::ConfigError;
use crate::frames::{
    two_box_inertia, GeometryParams, Rotation, Vec3, VehicleState, DEFAULT_ARM_HEIGHT, DEFAULT_ARM_LENGTH,
    DEFAULT_BUOYANCY_RATIO, DEFAULT_DELTA, DEFAULT_MASS, DEFAULT_TORQUE_DIR,
};
use crate::hydro::{BuoyancyModel, Medium};
use crate::propulsion::{Gearbox, MotorModel, PropellerCoeffs, PropulsionParams, PropulsionUnit, RPM_PER_VOLT_TO_RAD};

use super::trace::CommandTrace;

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Simulated time (s).
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub vehicle: VehicleSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub propulsion: PropulsionSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub medium: MediumSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub allocation: AllocationSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub control: ControlSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub trace: CommandTrace,
    #[serde(default, skip_serializing_if = "is_default")]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    #[default]
    Rk4,
    SemiImplicitEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub gravity: f64,
    pub integrator: IntegratorName,
    pub control_divider: usize,
    pub telemetry_decimation: usize,
    /// Start motors and servos at the first controller output.
    pub settle_actuators: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor_depth: Option<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        let p = SimParams::default();
        SimSection {
            dt: DEFAULT_DT,
            gravity: GRAVITY,
            integrator: IntegratorName::Rk4,
            control_divider: p.control_divider,
            telemetry_decimation: p.telemetry_decimation,
            settle_actuators: true,
            floor_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// NED position (m).
    pub position: [f64; 3],
    /// Body-frame velocity (m/s).
    pub velocity: [f64; 3],
    /// Roll, pitch, yaw (deg).
    pub attitude_deg: [f64; 3],
    /// Body rates (rad/s).
    pub body_rates: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt_deg: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motor_speed: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub mass: f64,
    pub delta_deg: [f64; 4],
    pub arm_length: f64,
    pub arm_height: f64,
    pub torque_dir: [i8; 4],
    /// Full inertia tensor; defaults to a two-box estimate from the mass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[[f64; 3]; 3]>,
    /// Buoyancy as a fraction of weight, ignored when `displaced_volume` is set.
    pub buoyancy_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displaced_volume: Option<f64>,
    pub cob_offset: [f64; 3],
}

impl Default for VehicleSection {
    fn default() -> Self {
        let g = GeometryParams::default();
        VehicleSection {
            mass: DEFAULT_MASS,
            delta_deg: DEFAULT_DELTA.map(f64::to_degrees),
            arm_length: DEFAULT_ARM_LENGTH,
            arm_height: DEFAULT_ARM_HEIGHT,
            torque_dir: DEFAULT_TORQUE_DIR,
            inertia: None,
            buoyancy_ratio: DEFAULT_BUOYANCY_RATIO,
            displaced_volume: None,
            cob_offset: g.cob_offset.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropulsionSection {
    pub k_t_aerial: f64,
    pub k_m_aerial: f64,
    pub k_t_aquatic: f64,
    pub k_m_aquatic: f64,
    pub ratio_aerial: f64,
    pub ratio_aquatic: f64,
    pub loss_aerial: f64,
    pub loss_aquatic: f64,
    pub kv_rpm_per_volt: f64,
    pub resistance: f64,
    pub idle_current: f64,
    pub v_max: f64,
    pub duty_min_useful: f64,
    pub motor_time_constant: f64,
    pub servo_time_constant: f64,
}

impl Default for PropulsionSection {
    fn default() -> Self {
        let (p, g, m, a) =
            (PropellerCoeffs::default(), Gearbox::default(), MotorModel::default(), ActuatorParams::default());
        PropulsionSection {
            k_t_aerial: p.k_t_aerial,
            k_m_aerial: p.k_m_aerial,
            k_t_aquatic: p.k_t_aquatic,
            k_m_aquatic: p.k_m_aquatic,
            ratio_aerial: g.ratio_aerial,
            ratio_aquatic: g.ratio_aquatic,
            loss_aerial: g.loss_aerial,
            loss_aquatic: g.loss_aquatic,
            kv_rpm_per_volt: (m.kv / RPM_PER_VOLT_TO_RAD * 1e9).round() / 1e9,
            resistance: m.resistance,
            idle_current: m.idle_current,
            v_max: m.v_max,
            duty_min_useful: m.duty_min_useful,
            motor_time_constant: a.motor_time_constant,
            servo_time_constant: a.servo_time_constant,
        }
    }
}

/// Medium overrides; unset entries keep the preset value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drag_linear: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drag_quadratic: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rot_drag_quadratic: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub added_mass: Option<[f64; 6]>,
}

impl MediumSpec {
    fn resolve(&self, base: Medium) -> Medium {
        Medium {
            density: self.density.unwrap_or(base.density),
            drag_linear: self.drag_linear.map_or(base.drag_linear, Vec3::from),
            drag_quadratic: self.drag_quadratic.map_or(base.drag_quadratic, Vec3::from),
            rot_drag_quadratic: self.rot_drag_quadratic.map_or(base.rot_drag_quadratic, Vec3::from),
            added_mass: self.added_mass.unwrap_or(base.added_mass),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediumPreset {
    /// Air above the surface, water below.
    #[default]
    Standard,
    /// Drag-free, buoyancy-free space everywhere.
    Vacuum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSection {
    pub preset: MediumPreset,
    pub submersion_band: f64,
    #[serde(skip_serializing_if = "is_default")]
    pub air: MediumSpec,
    #[serde(skip_serializing_if = "is_default")]
    pub water: MediumSpec,
}

impl Default for MediumSection {
    fn default() -> Self {
        MediumSection {
            preset: MediumPreset::Standard,
            submersion_band: 0.1,
            air: MediumSpec::default(),
            water: MediumSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    PaperLiteral,
    #[default]
    FullRange,
}

impl From<VariantName> for MixerVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::PaperLiteral => MixerVariant::PaperLiteral,
            VariantName::FullRange => MixerVariant::FullRange,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneName {
    #[default]
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationSection {
    pub variant: VariantName,
    pub zone: ZoneName,
    pub gain: f64,
    /// Clamp tilt setpoints; the interval defaults to the zone's 30°–150° band.
    pub clamp: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_deg: Option<[f64; 2]>,
}

impl Default for AllocationSection {
    fn default() -> Self {
        AllocationSection {
            variant: VariantName::FullRange,
            zone: ZoneName::Upper,
            gain: DEFAULT_MIXER_GAIN,
            clamp: true,
            clamp_deg: None,
        }
    }
}

/// Gain overrides; unset entries keep the medium's default set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_p: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_p: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_i: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_d: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_integral_limit: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_limit: Option<[f64; 3]>,
    /// Rate setpoint limits (deg/s).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rate_dps: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tilt_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vz_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vz_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vz_integral_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_vz: Option<f64>,
}

impl GainsSpec {
    fn resolve(&self, b: CascadeGains) -> CascadeGains {
        CascadeGains {
            angle_p: self.angle_p.unwrap_or(b.angle_p),
            rate_p: self.rate_p.unwrap_or(b.rate_p),
            rate_i: self.rate_i.unwrap_or(b.rate_i),
            rate_d: self.rate_d.unwrap_or(b.rate_d),
            rate_integral_limit: self.rate_integral_limit.unwrap_or(b.rate_integral_limit),
            output_limit: self.output_limit.unwrap_or(b.output_limit),
            max_rate: self.max_rate_dps.map_or(b.max_rate, |r| r.map(f64::to_radians)),
            max_tilt: self.max_tilt_deg.map_or(b.max_tilt, f64::to_radians),
            depth_p: self.depth_p.unwrap_or(b.depth_p),
            vz_p: self.vz_p.unwrap_or(b.vz_p),
            vz_i: self.vz_i.unwrap_or(b.vz_i),
            vz_integral_limit: self.vz_integral_limit.unwrap_or(b.vz_integral_limit),
            max_vz: self.max_vz.unwrap_or(b.max_vz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub altitude_hold: bool,
    /// Use the air gains underwater too.
    pub single_gain_set: bool,
    pub deadband: f64,
    /// Channel names whose sign is flipped.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub invert: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hover_trim_air: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hover_trim_water: Option<f64>,
    #[serde(skip_serializing_if = "is_default")]
    pub air: GainsSpec,
    #[serde(skip_serializing_if = "is_default")]
    pub water: GainsSpec,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            altitude_hold: false,
            single_gain_set: false,
            deadband: crate::control::DEFAULT_DEADBAND,
            invert: Vec::new(),
            hover_trim_air: None,
            hover_trim_water: None,
            air: GainsSpec::default(),
            water: GainsSpec::default(),
        }
    }
}

/// Which half of a paired experiment a run provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    None,
    YawTorque,
    YawTilt,
    PitchTranslation,
    TiltTranslation,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::None => "none",
            Role::YawTorque => "yaw_torque",
            Role::YawTilt => "yaw_tilt",
            Role::PitchTranslation => "pitch_translation",
            Role::TiltTranslation => "tilt_translation",
        }
    }

    pub fn from_name(s: &str) -> Option<Role> {
        [Role::None, Role::YawTorque, Role::YawTilt, Role::PitchTranslation, Role::TiltTranslation]
            .into_iter()
            .find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSignal {
    /// North velocity.
    #[default]
    Vx,
    /// East velocity.
    Vy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub role: Role,
    /// Evaluation window `[t0, t1]` (s); defaults to the whole run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Channel whose sine command the phase lag is measured against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_channel: Option<String>,
    pub phase_response: ResponseSignal,
    /// Sign relating a positive command to a positive response.
    pub phase_sign: f64,
    /// Command periods skipped before fitting.
    pub phase_discard_periods: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            role: Role::None,
            window: None,
            phase_channel: None,
            phase_response: ResponseSignal::Vx,
            phase_sign: 1.0,
            phase_discard_periods: 1.0,
        }
    }
}

/// Ready-to-run objects built from a validated config.
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    pub plant: Plant,
    pub controller: CascadeController,
    pub initial: VehicleState,
    pub sim: SimParams,
    pub settle_actuators: bool,
    pub trace: CommandTrace,
    pub channel_map: ChannelMap,
}

/// One-based line of the first occurrence of `key` (a dotted path) in `text`.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let header = format!("[{key}]");
    if let Some(i) = text.lines().position(|l| l.trim() == header) {
        return Some(i + 1);
    }
    let (section, leaf) = match key.rsplit_once('.') {
        Some((s, l)) => (Some(format!("[{s}]")), l),
        None => (None, key),
    };
    let mut in_section = section.is_none();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            in_section = section.as_deref() == Some(l);
            continue;
        }
        if in_section && l.strip_prefix(leaf).is_some_and(|rest| rest.trim_start().starts_with('=')) {
            return Some(i + 1);
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        let message = e.message().to_string();
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
            .unwrap_or("")
            .to_string();
        ConfigError { line, key, reason: message }
    })?;
    config.setup().map_err(|mut e| {
        if e.line.is_none() {
            e.line = locate_key(text, &e.key);
        }
        e
    })?;
    Ok(config)
}

pub fn serialize_config(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("scenario config always serializes")
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError { line: None, key: key.to_string(), reason: reason.into() }
}

fn param(section: &str) -> impl Fn(crate::error::ParamError) -> ConfigError + '_ {
    move |e| invalid(&format!("{section}.{}", e.key), e.reason)
}

impl ScenarioConfig {
    pub fn minimal(name: &str, duration: f64) -> Self {
        ScenarioConfig {
            name: name.to_string(),
            description: String::new(),
            duration,
            output_dir: None,
            sim: SimSection::default(),
            initial: InitialSection::default(),
            vehicle: VehicleSection::default(),
            propulsion: PropulsionSection::default(),
            medium: MediumSection::default(),
            allocation: AllocationSection::default(),
            control: ControlSection::default(),
            trace: CommandTrace::default(),
            metrics: MetricsSection::default(),
        }
    }

    pub fn geometry(&self) -> Result<GeometryParams, ConfigError> {
        let v = &self.vehicle;
        let delta = v.delta_deg.map(f64::to_radians);
        if !(v.mass > 0.0) {
            return Err(invalid("vehicle.mass", "must be positive"));
        }
        let inertia = match v.inertia {
            Some(rows) => Matrix3::from_fn(|r, c| rows[r][c]),
            None => two_box_inertia(v.mass, v.arm_length, v.arm_height, &delta),
        };
        let displaced_volume = match v.displaced_volume {
            Some(vol) => vol,
            None => {
                let density = self.medium.water.density.unwrap_or(1000.0);
                if !(v.buoyancy_ratio >= 0.0) {
                    return Err(invalid("vehicle.buoyancy_ratio", "must not be negative"));
                }
                v.buoyancy_ratio * v.mass / density
            }
        };
        let g = GeometryParams {
            delta,
            arm_length: v.arm_length,
            arm_height: v.arm_height,
            torque_dir: v.torque_dir,
            mass: v.mass,
            inertia,
            displaced_volume,
            cob_offset: Vec3::from(v.cob_offset),
        };
        g.validate().map_err(param("vehicle"))?;
        Ok(g)
    }

    pub fn propulsion_params(&self) -> PropulsionParams {
        let p = &self.propulsion;
        PropulsionParams {
            propeller: PropellerCoeffs {
                k_t_aerial: p.k_t_aerial,
                k_m_aerial: p.k_m_aerial,
                k_t_aquatic: p.k_t_aquatic,
                k_m_aquatic: p.k_m_aquatic,
            },
            gearbox: Gearbox {
                ratio_aerial: p.ratio_aerial,
                ratio_aquatic: p.ratio_aquatic,
                loss_aerial: p.loss_aerial,
                loss_aquatic: p.loss_aquatic,
            },
            motor: MotorModel {
                kv: p.kv_rpm_per_volt * RPM_PER_VOLT_TO_RAD,
                resistance: p.resistance,
                idle_current: p.idle_current,
                v_max: p.v_max,
                duty_min_useful: p.duty_min_useful,
            },
        }
    }

    pub fn mixer_settings(&self) -> Result<MixerSettings, ConfigError> {
        let a = &self.allocation;
        let zone = match a.zone {
            ZoneName::Upper => Zone::Upper,
            ZoneName::Lower => Zone::Lower,
        };
        if !(a.gain > 0.0 && a.gain.is_finite()) {
            return Err(invalid("allocation.gain", "must be positive"));
        }
        let clamp = match (a.clamp, a.clamp_deg) {
            (false, _) => None,
            (true, None) => Some(zone.default_clamp()),
            (true, Some([lo, hi])) => Some(
                TiltInterval::new(lo.to_radians(), hi.to_radians())
                    .ok_or_else(|| invalid("allocation.clamp_deg", "lower bound must be below upper bound"))?,
            ),
        };
        Ok(MixerSettings { zone, variant: a.variant.into(), gain: a.gain, clamp })
    }

    fn environment(&self, g: &GeometryParams) -> Result<Environment, ConfigError> {
        let m = &self.medium;
        if !(m.submersion_band > 0.0) {
            return Err(invalid("medium.submersion_band", "must be positive"));
        }
        let mut env = match m.preset {
            MediumPreset::Standard => Environment::standard(g),
            MediumPreset::Vacuum => Environment::uniform(Medium::vacuum()),
        };
        env.air = m.air.resolve(env.air);
        env.water = m.water.resolve(env.water);
        if m.preset == MediumPreset::Standard {
            env.buoyancy = BuoyancyModel::from_geometry(g, m.submersion_band);
        }
        env.buoyancy.submersion_band = m.submersion_band;
        env.floor_depth = self.sim.floor_depth;
        env.air.validate().map_err(param("medium.air"))?;
        env.water.validate().map_err(param("medium.water"))?;
        Ok(env)
    }

    pub fn sim_params(&self) -> Result<SimParams, ConfigError> {
        let s = &self.sim;
        let p = SimParams {
            dt: s.dt,
            duration: self.duration,
            gravity: s.gravity,
            integrator: match s.integrator {
                IntegratorName::Rk4 => Integrator::Rk4,
                IntegratorName::SemiImplicitEuler => Integrator::SemiImplicitEuler,
            },
            control_divider: s.control_divider,
            telemetry_decimation: s.telemetry_decimation,
        };
        p.validate().map_err(|e| {
            let key = if e.key == "duration" { "duration".to_string() } else { format!("sim.{}", e.key) };
            invalid(&key, e.reason)
        })?;
        Ok(p)
    }

    fn channel_map(&self) -> Result<ChannelMap, ConfigError> {
        let c = &self.control;
        if !(0.0..1.0).contains(&c.deadband) {
            return Err(invalid("control.deadband", "must lie in [0, 1)"));
        }
        let mut map = ChannelMap { invert: [false; 7], deadband: c.deadband };
        for name in &c.invert {
            let i = CHANNEL_NAMES
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| invalid("control.invert", format!("unknown channel `{name}`")))?;
            map.invert[i] = true;
        }
        Ok(map)
    }

    fn initial_state(&self, mixer: &MixerSettings) -> VehicleState {
        let i = &self.initial;
        let [roll, pitch, yaw] = i.attitude_deg.map(f64::to_radians);
        VehicleState {
            position: Vec3::from(i.position),
            velocity: Vec3::from(i.velocity),
            attitude: Rotation::from_euler(roll, pitch, yaw),
            body_rates: Vec3::from(i.body_rates),
            tilt: i.tilt_deg.map_or([mixer.zone.neutral_tilt(); 4], |t| t.map(f64::to_radians)),
            motor_speed: i.motor_speed.unwrap_or([0.0; 4]),
        }
    }

    /// Validates every section and builds the runnable objects.
    pub fn setup(&self) -> Result<ScenarioSetup, ConfigError> {
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name", "must be a non-empty name without path separators"));
        }
        let sim = self.sim_params()?;
        let geometry = self.geometry()?;
        let params = self.propulsion_params();
        let unit = PropulsionUnit::new(params).map_err(|e| match e {
            crate::error::PropulsionError::Param(p) => param("propulsion")(p),
            other => invalid("propulsion", other.to_string()),
        })?;
        let p = &self.propulsion;
        let actuators =
            ActuatorParams { motor_time_constant: p.motor_time_constant, servo_time_constant: p.servo_time_constant };
        actuators.validate().map_err(|e| invalid("propulsion.motor_time_constant", e.reason))?;
        let env = self.environment(&geometry)?;
        let mixer = self.mixer_settings()?;

        let c = &self.control;
        let schedule = GainSchedule {
            air: c.air.resolve(CascadeGains::air()),
            water: c.water.resolve(CascadeGains::water()),
            single_set: c.single_gain_set,
        };
        schedule.air.validate().map_err(param("control.air"))?;
        schedule.water.validate().map_err(param("control.water"))?;
        let mut trim = HoverTrim::compute(&geometry, &unit, env.water.density, sim.gravity, mixer.zone);
        for (value, key) in
            [(c.hover_trim_air, "control.hover_trim_air"), (c.hover_trim_water, "control.hover_trim_water")]
        {
            if value.is_some_and(|v| !(0.0..=1.0).contains(&v)) {
                return Err(invalid(key, "must lie in [0, 1]"));
            }
        }
        trim.air = c.hover_trim_air.unwrap_or(trim.air);
        trim.water = c.hover_trim_water.unwrap_or(trim.water);
        let channel_map = self.channel_map()?;

        self.trace.check().map_err(|(key, reason)| invalid(&key, reason))?;
        self.check_metrics()?;

        let initial = self.initial_state(&mixer);
        let controller =
            CascadeController::new(schedule, mixer, ControlFlags { altitude_hold: c.altitude_hold }, trim, &geometry);
        let plant = Plant::new(geometry, unit, actuators, env, sim.gravity).map_err(|e| invalid(&e.key, e.reason))?;
        Ok(ScenarioSetup {
            plant,
            controller,
            initial,
            sim,
            settle_actuators: self.sim.settle_actuators,
            trace: self.trace.clone(),
            channel_map,
        })
    }

    fn check_metrics(&self) -> Result<(), ConfigError> {
        let m = &self.metrics;
        if let Some([t0, t1]) = m.window {
            if !(t0 >= 0.0 && t1 > t0) {
                return Err(invalid("metrics.window", "must satisfy 0 <= t0 < t1"));
            }
        }
        if let Some(ch) = &m.phase_channel {
            let trace = self
                .trace
                .channel(ch)
                .ok_or_else(|| invalid("metrics.phase_channel", format!("channel `{ch}` has no trace")))?;
            if trace.sine().is_none() {
                return Err(invalid("metrics.phase_channel", format!("channel `{ch}` must be driven by a sine")));
            }
        }
        if !(m.phase_sign == 1.0 || m.phase_sign == -1.0) {
            return Err(invalid("metrics.phase_sign", "must be 1 or -1"));
        }
        if !(m.phase_discard_periods >= 0.0) {
            return Err(invalid("metrics.phase_discard_periods", "must not be negative"));
        }
        Ok(())
    }
}
