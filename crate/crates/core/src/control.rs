//! Cascade attitude controller with the six-channel command interface.
//!
//! Roll, pitch and yaw1 run angle → rate → torque loops mapped onto duty
//! differentials. Surge, sway and yaw2 bypass the attitude loops and drive
//! the tilt servos through the mixer.

use crate::allocation::{mixer, JoystickInput, MixerSettings, TiltConfig, Zone};
use crate::error::ParamError;
use crate::frames::{GeometryParams, Vec3, VehicleState};
use crate::propulsion::{PropulsionMode, PropulsionUnit};

pub const CHANNEL_NAMES: [&str; 7] = ["roll", "pitch", "yaw1", "throttle", "surge", "sway", "yaw2"];
pub const DEFAULT_DEADBAND: f64 = 0.02;
/// Upper output bound tolerated while desaturating yaw.
const YAW_HEADROOM: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelCommands {
    pub roll: f64,
    pub pitch: f64,
    pub yaw1: f64,
    pub throttle: f64,
    pub surge: f64,
    pub sway: f64,
    pub yaw2: f64,
}

impl ChannelCommands {
    pub fn from_array(v: [f64; 7]) -> Self {
        let c = v.map(|x| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) });
        ChannelCommands { roll: c[0], pitch: c[1], yaw1: c[2], throttle: c[3], surge: c[4], sway: c[5], yaw2: c[6] }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.roll, self.pitch, self.yaw1, self.throttle, self.surge, self.sway, self.yaw2]
    }

    fn vectoring(&self) -> bool {
        self.surge != 0.0 || self.sway != 0.0 || self.yaw2 != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMap {
    pub invert: [bool; 7],
    pub deadband: f64,
}

impl Default for ChannelMap {
    fn default() -> Self {
        ChannelMap { invert: [false; 7], deadband: DEFAULT_DEADBAND }
    }
}

/// Applies inversion and deadband to a raw transmitter frame.
pub fn channel_map(raw: &[f64; 7], map: &ChannelMap) -> ChannelCommands {
    let mut out = [0.0; 7];
    for i in 0..7 {
        let v = if map.invert[i] { -raw[i] } else { raw[i] };
        out[i] = if v.abs() < map.deadband { 0.0 } else { v };
    }
    ChannelCommands::from_array(out)
}

/// Gains for one medium. Arrays are indexed roll, pitch, yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeGains {
    pub angle_p: [f64; 3],
    pub rate_p: [f64; 3],
    pub rate_i: [f64; 3],
    pub rate_d: [f64; 3],
    pub rate_integral_limit: [f64; 3],
    /// Limit on the normalized torque command per axis.
    pub output_limit: [f64; 3],
    /// Rate setpoint limit; the yaw entry is the full-stick yaw rate (rad/s).
    pub max_rate: [f64; 3],
    /// Full-stick roll/pitch angle setpoint (rad).
    pub max_tilt: f64,
    pub depth_p: f64,
    pub vz_p: f64,
    pub vz_i: f64,
    pub vz_integral_limit: f64,
    /// Full-stick climb/descent rate in depth hold (m/s).
    pub max_vz: f64,
}

impl CascadeGains {
    pub fn air() -> Self {
        CascadeGains {
            angle_p: [6.5, 6.5, 2.8],
            rate_p: [0.08, 0.08, 0.2],
            rate_i: [0.1, 0.1, 0.1],
            rate_d: [0.002, 0.002, 0.0],
            rate_integral_limit: [0.3, 0.3, 0.3],
            output_limit: [1.0, 1.0, 1.0],
            max_rate: [3.8, 3.8, 150f64.to_radians()],
            max_tilt: 35f64.to_radians(),
            depth_p: 1.0,
            vz_p: 0.25,
            vz_i: 0.1,
            vz_integral_limit: 0.3,
            max_vz: 1.0,
        }
    }

    pub fn water() -> Self {
        CascadeGains {
            angle_p: [1.5, 1.5, 2.0],
            rate_p: [0.15, 0.15, 0.3],
            rate_i: [0.1, 0.1, 0.3],
            rate_d: [0.0, 0.0, 0.0],
            rate_integral_limit: [0.3, 0.3, 0.5],
            output_limit: [1.0, 1.0, 1.0],
            max_rate: [2.0, 2.0, 150f64.to_radians()],
            max_tilt: 35f64.to_radians(),
            depth_p: 1.0,
            vz_p: 0.3,
            vz_i: 0.1,
            vz_integral_limit: 0.3,
            max_vz: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let non_negative = self.angle_p.iter().chain(&self.rate_p).chain(&self.rate_i).chain(&self.rate_d).chain([
            &self.depth_p,
            &self.vz_p,
            &self.vz_i,
        ]);
        for g in non_negative {
            if !(*g >= 0.0 && g.is_finite()) {
                return Err(ParamError::new("gains", "gains must be finite and non-negative"));
            }
        }
        let positive = self.rate_integral_limit.iter().chain(&self.output_limit).chain(&self.max_rate).chain([
            &self.max_tilt,
            &self.vz_integral_limit,
            &self.max_vz,
        ]);
        for l in positive {
            if !(*l > 0.0 && l.is_finite()) {
                return Err(ParamError::new("limits", "limits must be positive"));
            }
        }
        Ok(())
    }
}

/// Air and water gain sets, switched at half submersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule {
    pub air: CascadeGains,
    pub water: CascadeGains,
    /// Use the air set everywhere, like an unmodified flight stack.
    pub single_set: bool,
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule { air: CascadeGains::air(), water: CascadeGains::water(), single_set: false }
    }
}

impl GainSchedule {
    pub fn select(&self, submerged: bool) -> &CascadeGains {
        if submerged && !self.single_set {
            &self.water
        } else {
            &self.air
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlFlags {
    /// Throttle stick commands climb rate and centered stick holds depth.
    pub altitude_hold: bool,
}

/// Collective duty that balances weight and buoyancy with upright units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoverTrim {
    pub air: f64,
    pub water: f64,
}

impl HoverTrim {
    pub fn compute(g: &GeometryParams, unit: &PropulsionUnit, water_density: f64, gravity: f64, zone: Zone) -> Self {
        let weight = g.mass * gravity;
        let lift = water_density * gravity * g.displaced_volume;
        // Upper-zone thrust points up and must cover the weight in excess of
        // buoyancy; lower-zone thrust covers the excess buoyancy.
        let up = -zone.sign();
        let duty = |deficit: f64, mode: PropulsionMode| {
            let needed = (up * deficit).max(0.0) / 4.0;
            let t_max = unit.unit_output(unit.omega_max(mode), mode).thrust;
            (needed / t_max).sqrt().min(1.0)
        };
        HoverTrim { air: duty(weight, PropulsionMode::Aerial), water: duty(weight - lift, PropulsionMode::Aquatic) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Signed duty per unit; the sign selects the gear.
    pub duty: [f64; 4],
    pub tilt: TiltConfig,
    pub mode: PropulsionMode,
    /// Mixer had to reduce a command to stay within limits.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct LoopState {
    rate_integral: Vec3,
    prev_rates: Option<Vec3>,
    vz_integral: f64,
    depth_setpoint: Option<f64>,
    submerged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeController {
    pub schedule: GainSchedule,
    pub mixer: MixerSettings,
    pub flags: ControlFlags,
    pub trim: HoverTrim,
    /// Per-unit roll, pitch and yaw effectiveness for upward thrust.
    pattern: [[f64; 3]; 4],
    loops: LoopState,
    saturations: u64,
}

impl CascadeController {
    pub fn new(
        schedule: GainSchedule,
        mixer: MixerSettings,
        flags: ControlFlags,
        trim: HoverTrim,
        g: &GeometryParams,
    ) -> Self {
        let max_sin = g.delta.iter().map(|d| d.sin().abs()).fold(0.0, f64::max);
        let max_cos = g.delta.iter().map(|d| d.cos().abs()).fold(0.0, f64::max);
        let mut pattern = [[0.0; 3]; 4];
        for (i, p) in pattern.iter_mut().enumerate() {
            let (s, c) = g.delta[i].sin_cos();
            *p = [-s / max_sin, c / max_cos, -g.torque_sign(i)];
        }
        CascadeController { schedule, mixer, flags, trim, pattern, loops: LoopState::default(), saturations: 0 }
    }

    pub fn reset(&mut self) {
        self.loops = LoopState::default();
    }

    pub fn saturation_count(&self) -> u64 {
        self.saturations
    }

    pub fn rate_integral(&self) -> Vec3 {
        self.loops.rate_integral
    }

    pub fn control_step(
        &mut self,
        state: &VehicleState,
        cmd: &ChannelCommands,
        submerged_fraction: f64,
        dt: f64,
    ) -> ControlOutput {
        let submerged = submerged_fraction > 0.5;
        if self.loops.submerged.is_some_and(|s| s != submerged) {
            self.loops.rate_integral = Vec3::zeros();
            self.loops.vz_integral = 0.0;
        }
        self.loops.submerged = Some(submerged);
        let gains = *self.schedule.select(submerged);
        let mode = if submerged { PropulsionMode::Aquatic } else { PropulsionMode::Aerial };
        let trim = if submerged { self.trim.water } else { self.trim.air };

        let tilt = mixer(&JoystickInput::new(cmd.surge, cmd.sway, cmd.yaw2), &self.mixer);

        let vectoring = cmd.vectoring();
        let (roll_sp, pitch_sp) =
            if vectoring { (0.0, 0.0) } else { (cmd.roll * gains.max_tilt, cmd.pitch * gains.max_tilt) };
        let yaw_engaged = !vectoring || cmd.yaw1 != 0.0;
        let (roll, pitch, _) = state.attitude.euler();
        let rate_sp = Vec3::new(
            (gains.angle_p[0] * (roll_sp - roll)).clamp(-gains.max_rate[0], gains.max_rate[0]),
            (gains.angle_p[1] * (pitch_sp - pitch)).clamp(-gains.max_rate[1], gains.max_rate[1]),
            cmd.yaw1 * gains.max_rate[2],
        );
        let mut torque = self.rate_loop(state.body_rates, rate_sp, &gains, dt);
        if !yaw_engaged {
            torque.z = 0.0;
            self.loops.rate_integral.z = 0.0;
        }

        let collective = if self.flags.altitude_hold {
            self.depth_loop(state, cmd.throttle, trim, &gains, dt)
        } else {
            self.loops.depth_setpoint = None;
            manual_throttle(cmd.throttle, trim)
        };

        let effect: [[f64; 3]; 4] = std::array::from_fn(|i| {
            let s = if tilt.beta[i].sin() < 0.0 { -1.0 } else { 1.0 };
            self.pattern[i].map(|k| k * s)
        });
        let (duty, saturated) = mix(collective, &torque, &effect);
        if saturated {
            self.saturations += 1;
        }
        ControlOutput { duty: duty.map(|d| mode.sign() * d), tilt, mode, saturated }
    }

    fn rate_loop(&mut self, rates: Vec3, sp: Vec3, g: &CascadeGains, dt: f64) -> Vec3 {
        let err = sp - rates;
        let rate_change = match self.loops.prev_rates {
            Some(prev) if dt > 0.0 => (rates - prev) / dt,
            _ => Vec3::zeros(),
        };
        self.loops.prev_rates = Some(rates);
        let mut out = Vec3::zeros();
        for k in 0..3 {
            let i = &mut self.loops.rate_integral[k];
            let unlimited = g.rate_p[k] * err[k] + *i - g.rate_d[k] * rate_change[k];
            let winding = unlimited.abs() >= g.output_limit[k] && unlimited.signum() == err[k].signum();
            if !winding {
                *i = (*i + g.rate_i[k] * err[k] * dt).clamp(-g.rate_integral_limit[k], g.rate_integral_limit[k]);
            }
            out[k] =
                (g.rate_p[k] * err[k] + *i - g.rate_d[k] * rate_change[k]).clamp(-g.output_limit[k], g.output_limit[k]);
        }
        out
    }

    fn depth_loop(&mut self, state: &VehicleState, stick: f64, trim: f64, g: &CascadeGains, dt: f64) -> f64 {
        let z = state.position.z;
        let vz = state.world_velocity().z;
        let vz_sp = if stick == 0.0 {
            let target = *self.loops.depth_setpoint.get_or_insert(z);
            (g.depth_p * (target - z)).clamp(-g.max_vz, g.max_vz)
        } else {
            self.loops.depth_setpoint = None;
            -stick * g.max_vz
        };
        // Positive error asks for more collective.
        let err = (vz - vz_sp) * -self.mixer.zone.sign();
        self.loops.vz_integral =
            (self.loops.vz_integral + g.vz_i * err * dt).clamp(-g.vz_integral_limit, g.vz_integral_limit);
        (trim + g.vz_p * err + self.loops.vz_integral).clamp(0.0, 1.0)
    }
}

/// Stick to collective duty, with centered stick at hover trim.
pub fn manual_throttle(stick: f64, trim: f64) -> f64 {
    if stick >= 0.0 {
        trim + stick * (1.0 - trim)
    } else {
        trim * (1.0 + stick)
    }
}

/// Gain that brings the saturated outputs back in range along `desat`.
fn desaturation_gain(desat: &[f64; 4], out: &[f64; 4], min: f64, max: f64) -> f64 {
    let (mut k_min, mut k_max) = (0.0f64, 0.0f64);
    for i in 0..4 {
        if desat[i].abs() < 1e-6 {
            continue;
        }
        if out[i] < min {
            let k = (min - out[i]) / desat[i];
            k_min = k_min.min(k);
            k_max = k_max.max(k);
        }
        if out[i] > max {
            let k = (max - out[i]) / desat[i];
            k_min = k_min.min(k);
            k_max = k_max.max(k);
        }
    }
    k_min + k_max
}

fn minimize_saturation(desat: &[f64; 4], out: &mut [f64; 4], min: f64, max: f64, reduce_only: bool) -> bool {
    let k1 = desaturation_gain(desat, out, min, max);
    if reduce_only && k1 > 0.0 {
        return false;
    }
    for i in 0..4 {
        out[i] += k1 * desat[i];
    }
    let k2 = 0.5 * desaturation_gain(desat, out, min, max);
    for i in 0..4 {
        out[i] += k2 * desat[i];
    }
    k1 != 0.0 || k2 != 0.0
}

/// Collective plus torque commands to unit duties in `[0, 1]`, reducing
/// yaw first when the units cannot deliver everything.
fn mix(collective: f64, torque: &Vec3, effect: &[[f64; 3]; 4]) -> ([f64; 4], bool) {
    let mut out = [0.0; 4];
    let mut roll_pitch = [0.0; 4];
    let mut yaw = [0.0; 4];
    for i in 0..4 {
        roll_pitch[i] = torque.x * effect[i][0] + torque.y * effect[i][1];
        yaw[i] = effect[i][2];
        out[i] = collective + roll_pitch[i];
    }
    let ones = [1.0; 4];
    let mut saturated = minimize_saturation(&ones, &mut out, 0.0, 1.0, true);
    saturated |= minimize_saturation(&roll_pitch, &mut out, 0.0, 1.0, false);
    for i in 0..4 {
        out[i] += torque.z * yaw[i];
    }
    saturated |= minimize_saturation(&yaw.map(|y| y * torque.z), &mut out, 0.0, YAW_HEADROOM, false);
    saturated |= minimize_saturation(&ones, &mut out, 0.0, 1.0, true);
    (out.map(|d| d.clamp(0.0, 1.0)), saturated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::total_wrench;
    use crate::frames::Rotation;
    use crate::propulsion::PropulsionParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn setup() -> (GeometryParams, PropulsionUnit, CascadeController) {
        let g = GeometryParams::default();
        let unit = PropulsionUnit::new(PropulsionParams::default()).unwrap();
        let trim = HoverTrim::compute(&g, &unit, 1000.0, 9.81, Zone::Upper);
        let c = CascadeController::new(
            GainSchedule::default(),
            MixerSettings::default(),
            ControlFlags::default(),
            trim,
            &g,
        );
        (g, unit, c)
    }

    fn hover() -> VehicleState {
        VehicleState::at_rest(Vec3::new(0.0, 0.0, -2.0))
    }

    #[test]
    fn channel_map_cases() {
        let map = ChannelMap::default();
        assert_eq!(channel_map(&[0.0; 7], &map), ChannelCommands::default());
        let mut raw = [0.0; 7];
        raw[0] = 0.015;
        assert_eq!(channel_map(&raw, &map).roll, 0.0);
        let mut inv = map;
        inv.invert[4] = true;
        raw[4] = -0.7;
        assert_eq!(channel_map(&raw, &inv).surge, 0.7);
    }

    #[test]
    fn hover_trim_balances_weight() {
        let (g, unit, c) = setup();
        let t = unit.unit_output(c.trim.air * unit.omega_max(PropulsionMode::Aerial), PropulsionMode::Aerial).thrust;
        assert_relative_eq!(4.0 * t, g.mass * 9.81, max_relative = 1e-9);
        assert!(c.trim.water > 0.0 && c.trim.water < 0.1);
    }

    #[test]
    fn zero_error_hover_is_uniform_trim() {
        let (_, _, mut c) = setup();
        let out = c.control_step(&hover(), &ChannelCommands::default(), 0.0, 0.004);
        for i in 0..4 {
            assert_relative_eq!(out.duty[i], c.trim.air, epsilon = 1e-12);
            assert_relative_eq!(out.tilt.beta[i], FRAC_PI_2, epsilon = 1e-12);
        }
        assert_eq!(out.mode, PropulsionMode::Aerial);
    }

    #[test]
    fn roll_command_produces_positive_roll_moment() {
        let (g, unit, mut c) = setup();
        let cmd = ChannelCommands { roll: 0.5, ..Default::default() };
        let out = c.control_step(&hover(), &cmd, 0.0, 0.004);
        let w = total_wrench(&out.duty, &out.tilt, &g, &unit);
        assert!(w.moment.x > 0.0);
        assert!(w.moment.y.abs() < 1e-9 * w.moment.x);
    }

    #[test]
    fn pitch_and_yaw_signs() {
        let (g, unit, mut c) = setup();
        let out = c.control_step(&hover(), &ChannelCommands { pitch: 0.5, ..Default::default() }, 0.0, 0.004);
        assert!(total_wrench(&out.duty, &out.tilt, &g, &unit).moment.y > 0.0);
        c.reset();
        let out = c.control_step(&hover(), &ChannelCommands { yaw1: 0.5, ..Default::default() }, 0.0, 0.004);
        assert!(total_wrench(&out.duty, &out.tilt, &g, &unit).moment.z > 0.0);
    }

    #[test]
    fn yaw2_uses_mixer_column_with_uniform_duty() {
        let (_, _, mut c) = setup();
        let cmd = ChannelCommands { yaw2: 1.0, ..Default::default() };
        let out = c.control_step(&hover(), &cmd, 0.0, 0.004);
        let expected = mixer(&JoystickInput::new(0.0, 0.0, 1.0), &c.mixer);
        assert_eq!(out.tilt, expected);
        for d in out.duty {
            assert_relative_eq!(d, out.duty[0], epsilon = 1e-15);
        }
    }

    #[test]
    fn underwater_duties_select_aquatic_gear() {
        let (_, _, mut c) = setup();
        let s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let out = c.control_step(&s, &ChannelCommands { throttle: 0.3, ..Default::default() }, 1.0, 0.004);
        assert_eq!(out.mode, PropulsionMode::Aquatic);
        assert!(out.duty.iter().all(|d| *d < 0.0));
    }

    #[test]
    fn yaw_desaturation_preserves_low_collective() {
        let effect = [[0.0, 0.0, -1.0], [0.0, 0.0, -1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        let (out, saturated) = mix(0.05, &Vec3::new(0.0, 0.0, 0.3), &effect);
        assert!(saturated);
        assert_relative_eq!(out[2], 0.1, epsilon = 1e-12);
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn manual_throttle_endpoints() {
        assert_eq!(manual_throttle(0.0, 0.4), 0.4);
        assert_eq!(manual_throttle(1.0, 0.4), 1.0);
        assert_eq!(manual_throttle(-1.0, 0.4), 0.0);
    }

    #[test]
    fn integrators_stay_bounded_under_saturation() {
        let (_, _, mut c) = setup();
        let mut s = hover();
        s.attitude = Rotation::from_euler(0.0, 0.0, 0.0);
        let cmd = ChannelCommands { roll: 1.0, yaw1: 1.0, ..Default::default() };
        for _ in 0..10_000 {
            c.control_step(&s, &cmd, 0.0, 0.004);
        }
        let lim = c.schedule.air.rate_integral_limit;
        let i = c.rate_integral();
        for k in 0..3 {
            assert!(i[k].abs() <= lim[k]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn outputs_within_limits(
            raw in prop::array::uniform7(-1.0..1.0f64),
            roll in -0.8..0.8f64, pitch in -0.8..0.8f64,
            rates in prop::array::uniform3(-3.0..3.0f64),
            depth in -1.0..1.0f64,
        ) {
            let (_, _, mut c) = setup();
            let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, depth));
            s.attitude = Rotation::from_euler(roll, pitch, 0.3);
            s.body_rates = Vec3::from(rates);
            let fraction = crate::hydro::submerged_fraction(depth, 0.1);
            let out = c.control_step(&s, &ChannelCommands::from_array(raw), fraction, 0.004);
            let interval = c.mixer.clamp.unwrap();
            for i in 0..4 {
                prop_assert!(out.duty[i].abs() <= 1.0);
                prop_assert!(out.duty[i] * out.mode.sign() >= 0.0);
                prop_assert!(out.tilt.beta[i] >= interval.lo && out.tilt.beta[i] <= interval.hi);
            }
        }
    }
}
