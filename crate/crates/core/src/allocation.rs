//! Thrust-vectoring allocation: per-unit wrench models, the tilt mixer and
//! the thrust/yaw coupling analysis.
//!
//! Each unit rotates about its mount arm. With the arm along
//! `a = (cos d, sin d, 0)` and the horizontal tangent `t = (-sin d, cos d, 0)`,
//! a tilt `b` points the thrust along `n = cos(b) t - sin(b) z`. Hover is
//! `b = pi/2` (thrust up), dive is `-pi/2`, and `0`/`pi` are purely
//! tangential, which is what turns thrust into yaw moment about the CoG.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

use crate::frames::{unit_mount_frame, BodyWrench, GeometryParams, MountFrame, Vec3};
use crate::propulsion::{EquivalentCoeffs, PropulsionUnit};

/// Surge, sway and yaw columns of the tilt mixer, one row per unit.
pub const MIXER_MATRIX: [[f64; 3]; 4] = [[-1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [1.0, 1.0, -1.0], [-1.0, -1.0, -1.0]];

pub const DEFAULT_MIXER_GAIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltConfig {
    pub beta: [f64; 4],
}

impl TiltConfig {
    pub fn uniform(beta: f64) -> Self {
        TiltConfig { beta: [beta; 4] }
    }

    pub fn is_valid(&self) -> bool {
        self.beta.iter().all(|b| b.is_finite() && b.abs() <= PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JoystickInput {
    pub surge: f64,
    pub sway: f64,
    pub yaw: f64,
}

impl JoystickInput {
    pub fn new(surge: f64, sway: f64, yaw: f64) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        JoystickInput { surge: c(surge), sway: c(sway), yaw: c(yaw) }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.surge, self.sway, self.yaw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixerVariant {
    /// Coefficient `a pi / 2`, as printed.
    PaperLiteral,
    /// Coefficient `a pi`, spanning a full half-turn per zone.
    FullRange,
}

/// Working zone of the tilt mixer. `Upper` (`a = -1`) keeps `b` in
/// `(0, pi)` around hover; `Lower` (`a = +1`) keeps it in `(-pi, 0)` around dive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    Upper,
    Lower,
}

impl Zone {
    pub fn from_sign(a: i8) -> Option<Zone> {
        match a {
            -1 => Some(Zone::Upper),
            1 => Some(Zone::Lower),
            _ => None,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Zone::Upper => -1.0,
            Zone::Lower => 1.0,
        }
    }

    /// Tilt clamp used in the maneuvering experiments, mirrored per zone.
    pub fn default_clamp(self) -> TiltInterval {
        match self {
            Zone::Upper => TiltInterval { lo: FRAC_PI_6, hi: 5.0 * FRAC_PI_6 },
            Zone::Lower => TiltInterval { lo: -5.0 * FRAC_PI_6, hi: -FRAC_PI_6 },
        }
    }

    /// Neutral tilt for the zone: hover for `Upper`, dive for `Lower`.
    pub fn neutral_tilt(self) -> f64 {
        -self.sign() * FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TiltInterval {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo < hi).then_some(TiltInterval { lo, hi })
    }

    pub fn clamp(&self, beta: f64) -> f64 {
        beta.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerSettings {
    pub zone: Zone,
    pub variant: MixerVariant,
    /// Gain applied to the mixed joystick value inside the sigmoid.
    pub gain: f64,
    pub clamp: Option<TiltInterval>,
}

impl MixerSettings {
    pub fn for_zone(zone: Zone) -> Self {
        MixerSettings {
            zone,
            variant: MixerVariant::FullRange,
            gain: DEFAULT_MIXER_GAIN,
            clamp: Some(zone.default_clamp()),
        }
    }
}

impl Default for MixerSettings {
    fn default() -> Self {
        Self::for_zone(Zone::Upper)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps surge/sway/yaw joystick volumes to the four tilt angles.
pub fn mixer(j: &JoystickInput, s: &MixerSettings) -> TiltConfig {
    let a = s.zone.sign();
    let scale = match s.variant {
        MixerVariant::PaperLiteral => a * FRAC_PI_2,
        MixerVariant::FullRange => a * PI,
    };
    let input = j.as_array();
    let mut beta = [0.0; 4];
    for (b, row) in beta.iter_mut().zip(MIXER_MATRIX.iter()) {
        let mixed: f64 = row.iter().zip(input.iter()).map(|(r, v)| r * v).sum();
        *b = scale * (sigmoid(s.gain * mixed) - 1.0);
    }
    let tilt = TiltConfig { beta };
    match s.clamp {
        Some(interval) => clamp_tilt(&tilt, &interval),
        None => tilt,
    }
}

pub fn clamp_tilt(t: &TiltConfig, interval: &TiltInterval) -> TiltConfig {
    TiltConfig { beta: t.beta.map(|b| interval.clamp(b)) }
}

/// Unit wrench exactly as the closed-form component expressions are printed.
/// Kept for cross-checking; the horizontal thrust it yields is radial.
pub fn wrench_paper_literal(
    thrust: f64,
    torque: f64,
    beta: f64,
    delta: f64,
    b: f64,
    arm_length: f64,
    arm_height: f64,
) -> BodyWrench {
    let (sb, cb) = beta.sin_cos();
    let (sd, cd) = delta.sin_cos();
    let (t, m, l, h) = (thrust, torque, arm_length, arm_height);
    BodyWrench {
        force: Vec3::new(-t * cb * cd, -t * cb * sd, t * sb),
        moment: Vec3::new(
            b * m * cd * cb + t * l * cd * sb - t * h * sd * cb,
            b * m * sd * cb + t * l * sd * sb + t * h * cd * cb,
            -b * m * sb + t * l * cb,
        ),
    }
}

/// Thrust direction of a unit tilted by `beta` about its arm.
pub fn thrust_direction(beta: f64, frame: &MountFrame) -> Vec3 {
    let (s, c) = beta.sin_cos();
    frame.tangent * c - Vec3::z() * s
}

/// Unit wrench for rotation about the mount arm; the simulator's model.
pub fn wrench_arm_axis(thrust: f64, torque: f64, beta: f64, frame: &MountFrame, b: f64) -> BodyWrench {
    let n = thrust_direction(beta, frame);
    let force = n * thrust;
    BodyWrench { force, moment: frame.origin.cross(&force) + n * (b * torque) }
}

/// Propulsion wrench for signed motor speeds and current tilts.
pub fn propulsion_wrench(
    speeds: &[f64; 4],
    tilt: &TiltConfig,
    g: &GeometryParams,
    unit: &PropulsionUnit,
) -> BodyWrench {
    (0..4)
        .map(|i| {
            let out = unit.signed_output(speeds[i]);
            wrench_arm_axis(out.thrust, out.torque, tilt.beta[i], &unit_mount_frame(g, i), g.torque_sign(i))
        })
        .sum()
}

/// Steady-state propulsion wrench for signed duties.
pub fn total_wrench(duties: &[f64; 4], tilt: &TiltConfig, g: &GeometryParams, unit: &PropulsionUnit) -> BodyWrench {
    let speeds = duties.map(|d| {
        let (mode, w) = unit.command_to_mode(d);
        mode.sign() * w
    });
    propulsion_wrench(&speeds, tilt, g, unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum YawPathway {
    /// Differential reaction torque with all units upright.
    ConventionalTorque,
    /// Tilted units converting thrust into yaw moment.
    ThrustVectoring,
}

/// Linear map from squared motor speeds to `(T_z, M_yaw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingMap {
    pub k_z: [f64; 4],
    pub k_yaw: [f64; 4],
}

impl CouplingMap {
    pub fn new(pathway: YawPathway, beta: f64, coeffs: &EquivalentCoeffs, arm_length: f64) -> Self {
        match pathway {
            YawPathway::ConventionalTorque => {
                CouplingMap { k_z: [coeffs.k_t; 4], k_yaw: [coeffs.k_m, -coeffs.k_m, coeffs.k_m, -coeffs.k_m] }
            }
            YawPathway::ThrustVectoring => {
                let (s, c) = beta.sin_cos();
                // Each unit's tilt direction follows its spin pattern, so every
                // unit contributes yaw moment with the same sign.
                CouplingMap { k_z: [coeffs.k_t * s; 4], k_yaw: [coeffs.k_m * s + coeffs.k_t * arm_length * c; 4] }
            }
        }
    }

    pub fn apply(&self, omega_sq: &[f64; 4]) -> (f64, f64) {
        let dot = |k: &[f64; 4]| k.iter().zip(omega_sq).map(|(k, w)| k * w).sum::<f64>();
        (dot(&self.k_z), dot(&self.k_yaw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingResult {
    pub t_z: f64,
    pub m_yaw: f64,
}

/// Vertical thrust and yaw moment for the differential speed pattern
/// `((w + dw)^2, w^2, (w + dw)^2, w^2)`.
pub fn yaw_coupling_analysis(
    pathway: YawPathway,
    omega_bar: f64,
    delta_omega: f64,
    beta: f64,
    coeffs: &EquivalentCoeffs,
    arm_length: f64,
) -> CouplingResult {
    let high = (omega_bar + delta_omega).powi(2);
    let low = omega_bar * omega_bar;
    let (t_z, m_yaw) = CouplingMap::new(pathway, beta, coeffs, arm_length).apply(&[high, low, high, low]);
    CouplingResult { t_z, m_yaw }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn no_clamp(zone: Zone, variant: MixerVariant) -> MixerSettings {
        MixerSettings { zone, variant, gain: DEFAULT_MIXER_GAIN, clamp: None }
    }

    #[test]
    fn neutral_stick_hovers() {
        let t = mixer(&JoystickInput::default(), &no_clamp(Zone::Upper, MixerVariant::FullRange));
        for b in t.beta {
            assert_relative_eq!(b, FRAC_PI_2, epsilon = 1e-15);
        }
        let t = mixer(&JoystickInput::default(), &no_clamp(Zone::Lower, MixerVariant::PaperLiteral));
        for b in t.beta {
            assert_relative_eq!(b, -PI / 4.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn saturated_surge_pattern() {
        let s = MixerSettings { gain: 60.0, ..no_clamp(Zone::Upper, MixerVariant::FullRange) };
        let t = mixer(&JoystickInput::new(1.0, 0.0, 0.0), &s);
        let expected = [PI, 0.0, 0.0, PI];
        for (b, e) in t.beta.iter().zip(expected) {
            assert_relative_eq!(*b, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn joystick_is_clamped() {
        let j = JoystickInput::new(2.0, -3.0, f64::NAN);
        assert_eq!(j, JoystickInput { surge: 1.0, sway: -1.0, yaw: 0.0 });
    }

    #[test]
    fn clamp_endpoints() {
        let c = Zone::Upper.default_clamp();
        let t = clamp_tilt(&TiltConfig { beta: [PI, FRAC_PI_2, 0.0, -1.0] }, &c);
        assert_relative_eq!(t.beta[0], 5.0 * PI / 6.0);
        assert_eq!(t.beta[1], FRAC_PI_2);
        assert_relative_eq!(t.beta[2], PI / 6.0);
        assert!(TiltInterval::new(1.0, 1.0).is_none());
    }

    #[test]
    fn literal_wrench_cases() {
        let w = wrench_paper_literal(0.0, 0.0, 0.3, 0.2, 1.0, 0.19, 0.02);
        assert_eq!(w, BodyWrench::zero());
        let w = wrench_paper_literal(1.0, 0.0, FRAC_PI_2, 0.0, 1.0, 0.19, 0.02);
        assert_relative_eq!(w.force, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        let w = wrench_paper_literal(1.0, 0.0, 0.0, 0.0, 1.0, 0.19, 0.02);
        assert_relative_eq!(w.force, Vec3::new(-1.0, 0.0, 0.0));
        assert_relative_eq!(w.moment, Vec3::new(0.0, 0.02, 0.19));
    }

    #[test]
    fn arm_axis_wrench_hover() {
        let g = GeometryParams::default();
        let frame = unit_mount_frame(&g, 0);
        let w = wrench_arm_axis(1.0, 0.0, FRAC_PI_2, &frame, 1.0);
        assert_relative_eq!(w.force, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-15);
        // r x f with r = (0.19/sqrt2, 0.19/sqrt2, 0.02), f = (0, 0, -1)
        assert_relative_eq!(w.moment, Vec3::new(-0.134_350_288_425_444, 0.134_350_288_425_444, 0.0), epsilon = 1e-12);
        assert_eq!(wrench_arm_axis(0.0, 0.0, 0.4, &frame, 1.0), BodyWrench::zero());
    }

    #[test]
    fn tangential_thrust_gives_arm_length_yaw() {
        for d in [0.0, 0.7, -2.0, 3.0] {
            let g = GeometryParams { delta: [d; 4], ..Default::default() };
            let w = wrench_arm_axis(1.0, 0.0, 0.0, &unit_mount_frame(&g, 0), 1.0);
            assert_relative_eq!(w.moment.z, 0.19, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_duty_zero_wrench() {
        let unit = PropulsionUnit::new(Default::default()).unwrap();
        let w = total_wrench(&[0.0; 4], &TiltConfig::uniform(0.3), &GeometryParams::default(), &unit);
        assert_eq!(w, BodyWrench::zero());
    }

    #[test]
    fn coupling_identities() {
        let c = EquivalentCoeffs { k_t: 1.2e-5, k_m: 1.6e-7 };
        let r = yaw_coupling_analysis(YawPathway::ConventionalTorque, 0.0, 300.0, FRAC_PI_2, &c, 0.19);
        assert_relative_eq!(r.t_z, 2.0 * c.k_t * 300.0 * 300.0, max_relative = 1e-12);
        let r = yaw_coupling_analysis(YawPathway::ThrustVectoring, 400.0, 0.0, 0.0, &c, 0.19);
        assert_eq!(r.t_z, 0.0);
        assert_relative_eq!(r.m_yaw, 4.0 * c.k_t * 0.19 * 400.0 * 400.0, max_relative = 1e-12);
        let r = yaw_coupling_analysis(YawPathway::ThrustVectoring, 0.0, 0.0, 0.3, &c, 0.19);
        assert_eq!((r.t_z, r.m_yaw), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn full_range_stays_in_zone(s in -1.0..1.0f64, w in -1.0..1.0f64, y in -1.0..1.0f64, gain in 0.1..10.0f64) {
            let j = JoystickInput::new(s, w, y);
            let up = mixer(&j, &MixerSettings { gain, ..no_clamp(Zone::Upper, MixerVariant::FullRange) });
            let low = mixer(&j, &MixerSettings { gain, ..no_clamp(Zone::Lower, MixerVariant::FullRange) });
            for b in up.beta { prop_assert!(b > 0.0 && b < PI); }
            for b in low.beta { prop_assert!(b > -PI && b < 0.0); }
        }

        #[test]
        fn mixer_monotone_in_surge(s in -1.0..0.9f64, ds in 0.01..0.1f64, w in -1.0..1.0f64, y in -1.0..1.0f64) {
            let set = no_clamp(Zone::Upper, MixerVariant::FullRange);
            let a = mixer(&JoystickInput::new(s, w, y), &set);
            let b = mixer(&JoystickInput::new(s + ds, w, y), &set);
            for i in 0..4 {
                if MIXER_MATRIX[i][0] < 0.0 {
                    prop_assert!(b.beta[i] > a.beta[i]);
                } else {
                    prop_assert!(b.beta[i] < a.beta[i]);
                }
            }
        }

        #[test]
        fn clamp_is_idempotent(x in -4.0..4.0f64, lo in -3.0..0.0f64, width in 0.01..3.0f64) {
            let c = TiltInterval::new(lo, lo + width).unwrap();
            let once = clamp_tilt(&TiltConfig::uniform(x), &c);
            prop_assert_eq!(clamp_tilt(&once, &c), once);
        }

        #[test]
        fn models_agree_on_tangential_yaw(t in 0.0..20.0f64, beta in -PI..PI, delta in -PI..PI) {
            let g = GeometryParams { delta: [delta; 4], arm_height: 0.0, ..Default::default() };
            let literal = wrench_paper_literal(t, 0.0, beta, delta, 1.0, g.arm_length, 0.0);
            let arm = wrench_arm_axis(t, 0.0, beta, &unit_mount_frame(&g, 0), 1.0);
            prop_assert!((literal.moment.z - arm.moment.z).abs() < 1e-12);
            prop_assert!((arm.moment.z - t * g.arm_length * beta.cos()).abs() < 1e-12);
        }

        #[test]
        fn conventional_yaw_needs_thrust(w in 0.0..1000.0f64, dw in 1.0..500.0f64) {
            let c = EquivalentCoeffs { k_t: 1.2e-5, k_m: 1.6e-7 };
            let r = yaw_coupling_analysis(YawPathway::ConventionalTorque, w, dw, FRAC_PI_2, &c, 0.19);
            prop_assert!(r.m_yaw != 0.0);
            prop_assert!(r.t_z > 0.0);
        }

        #[test]
        fn vectored_yaw_decoupled(w in 1.0..1000.0f64) {
            let c = EquivalentCoeffs { k_t: 1.2e-5, k_m: 1.6e-7 };
            let r = yaw_coupling_analysis(YawPathway::ThrustVectoring, w, 0.0, 0.0, &c, 0.19);
            prop_assert_eq!(r.t_z, 0.0);
            prop_assert!(r.m_yaw > 0.0);
            let r = yaw_coupling_analysis(YawPathway::ThrustVectoring, w, 0.0, PI, &c, 0.19);
            prop_assert!(r.t_z.abs() <= 1e-15 * c.k_t * w * w);
            prop_assert!(r.m_yaw < 0.0);
        }
    }
}
