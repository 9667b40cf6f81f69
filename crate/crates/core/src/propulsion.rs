//! Motor, dual-speed gearbox and propeller model of one propulsion unit.
//!
//! The motor drives a single propeller through a planetary gearbox whose
//! ratio depends on the direction of rotation: forward rotation selects the
//! low (aerial) ratio, reverse selects the high (aquatic) ratio. Thrust and
//! reaction torque follow the usual quadratic law, referred to motor speed
//! through the squared gear ratio.

use crate::error::{ParamError, PropulsionError};

pub const RPM_PER_VOLT_TO_RAD: f64 = std::f64::consts::PI / 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropulsionMode {
    Aerial,
    Aquatic,
}

impl PropulsionMode {
    /// Mode implied by a signed motor speed or duty. Zero maps to aerial.
    pub fn from_sign(value: f64) -> Self {
        if value < 0.0 {
            PropulsionMode::Aquatic
        } else {
            PropulsionMode::Aerial
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            PropulsionMode::Aerial => 1.0,
            PropulsionMode::Aquatic => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PropulsionMode::Aerial => "aerial",
            PropulsionMode::Aquatic => "aquatic",
        }
    }
}

/// Propeller-shaft coefficients per medium, `T = k_t * w_prop^2`,
/// `M = k_m * w_prop^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropellerCoeffs {
    pub k_t_aerial: f64,
    pub k_t_aquatic: f64,
    pub k_m_aerial: f64,
    pub k_m_aquatic: f64,
}

impl Default for PropellerCoeffs {
    fn default() -> Self {
        // Calibrated so that the default motor reaches ~15 N per unit in air
        // (thrust-to-weight 3.75 for the 1.63 kg airframe) and ~32 N per unit
        // in water at full duty. Torque-to-thrust ratio 0.013 m in both media.
        PropellerCoeffs {
            k_t_aerial: 9.25e-6,
            k_t_aquatic: 1.8e-3,
            k_m_aerial: 9.25e-6 * 0.013,
            k_m_aquatic: 1.8e-3 * 0.013,
        }
    }
}

impl PropellerCoeffs {
    pub fn thrust_coeff(&self, mode: PropulsionMode) -> f64 {
        match mode {
            PropulsionMode::Aerial => self.k_t_aerial,
            PropulsionMode::Aquatic => self.k_t_aquatic,
        }
    }

    pub fn torque_coeff(&self, mode: PropulsionMode) -> f64 {
        match mode {
            PropulsionMode::Aerial => self.k_m_aerial,
            PropulsionMode::Aquatic => self.k_m_aquatic,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (key, v) in [
            ("k_t_aerial", self.k_t_aerial),
            ("k_t_aquatic", self.k_t_aquatic),
            ("k_m_aerial", self.k_m_aerial),
            ("k_m_aquatic", self.k_m_aquatic),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new(key, "must be positive"));
            }
        }
        for mode in [PropulsionMode::Aerial, PropulsionMode::Aquatic] {
            let ratio = self.thrust_coeff(mode) / self.torque_coeff(mode);
            if ratio < 10.0 {
                log::warn!("{} thrust/torque coefficient ratio {ratio:.2} is below 10", mode.name());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gearbox {
    /// Motor speed over propeller speed in forward rotation.
    pub ratio_aerial: f64,
    /// Motor speed over propeller speed in reverse rotation.
    pub ratio_aquatic: f64,
    /// Fractional power lost in the gearbox per mode.
    pub loss_aerial: f64,
    pub loss_aquatic: f64,
}

impl Default for Gearbox {
    fn default() -> Self {
        Gearbox { ratio_aerial: 1.0, ratio_aquatic: 12.33, loss_aerial: 0.051, loss_aquatic: 0.213 }
    }
}

impl Gearbox {
    pub fn ratio(&self, mode: PropulsionMode) -> f64 {
        match mode {
            PropulsionMode::Aerial => self.ratio_aerial,
            PropulsionMode::Aquatic => self.ratio_aquatic,
        }
    }

    pub fn loss(&self, mode: PropulsionMode) -> f64 {
        match mode {
            PropulsionMode::Aerial => self.loss_aerial,
            PropulsionMode::Aquatic => self.loss_aquatic,
        }
    }

    /// Output shaft power for a given input power.
    pub fn transmit(&self, input_power: f64, mode: PropulsionMode) -> f64 {
        (1.0 - self.loss(mode)) * input_power
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.ratio_aerial >= 1.0) {
            return Err(ParamError::new("ratio_aerial", "must be at least 1"));
        }
        if !(self.ratio_aquatic > self.ratio_aerial) {
            return Err(ParamError::new("ratio_aquatic", "must exceed ratio_aerial"));
        }
        for (key, v) in [("loss_aerial", self.loss_aerial), ("loss_aquatic", self.loss_aquatic)] {
            if !(0.0..1.0).contains(&v) {
                return Err(ParamError::new(key, "must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// First-order brushed-equivalent DC model of the motor and ESC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorModel {
    /// Speed constant (rad/s per volt).
    pub kv: f64,
    /// Winding plus ESC resistance (ohm).
    pub resistance: f64,
    pub idle_current: f64,
    pub v_max: f64,
    /// Lowest duty at which the unit is considered usable.
    pub duty_min_useful: f64,
}

impl Default for MotorModel {
    fn default() -> Self {
        // 1150 rpm/V on a 4S pack. Resistance and idle current are
        // calibrated against the reference peak efficiencies.
        MotorModel {
            kv: 1150.0 * RPM_PER_VOLT_TO_RAD,
            resistance: 0.16,
            idle_current: 2.0,
            v_max: 14.8,
            duty_min_useful: 0.30,
        }
    }
}

impl MotorModel {
    pub fn torque_constant(&self) -> f64 {
        1.0 / self.kv
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (key, v) in [
            ("kv", self.kv),
            ("resistance", self.resistance),
            ("idle_current", self.idle_current),
            ("v_max", self.v_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new(key, "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.duty_min_useful) {
            return Err(ParamError::new("duty_min_useful", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropulsionParams {
    pub propeller: PropellerCoeffs,
    pub gearbox: Gearbox,
    pub motor: MotorModel,
}

impl PropulsionParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.propeller.validate()?;
        self.gearbox.validate()?;
        self.motor.validate()
    }
}

/// Coefficients referred to motor speed: `T = k_t * w^2`, `M = k_m * w^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentCoeffs {
    pub k_t: f64,
    pub k_m: f64,
}

pub fn equivalent_coeffs(p: &PropellerCoeffs, g: &Gearbox, mode: PropulsionMode) -> EquivalentCoeffs {
    let r2 = g.ratio(mode).powi(2);
    EquivalentCoeffs { k_t: p.thrust_coeff(mode) / r2, k_m: p.torque_coeff(mode) / r2 }
}

/// Thrust and reaction torque at motor speed `omega` (unsigned).
pub fn thrust_torque(omega: f64, coeffs: &EquivalentCoeffs) -> (f64, f64) {
    let w2 = omega * omega;
    (coeffs.k_t * w2, coeffs.k_m * w2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitOutput {
    pub thrust: f64,
    pub torque: f64,
    /// Speed actually used, after clamping to the envelope.
    pub omega: f64,
    pub saturated: bool,
}

/// Electrical and mechanical quantities at a steady operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub omega: f64,
    /// Output shaft torque referred to motor speed (N·m).
    pub shaft_torque: f64,
    pub motor_torque: f64,
    pub voltage: f64,
    pub current: f64,
    pub electrical_power: f64,
    /// Power delivered at the propeller shaft (W).
    pub shaft_power: f64,
    /// Motor plus gearbox efficiency, shaft power over electrical power.
    pub efficiency: f64,
    /// Thrust per electrical watt (N/W).
    pub specific_thrust: f64,
}

pub fn shaft_efficiency(shaft_power: f64, electrical_power: f64) -> f64 {
    if electrical_power > 0.0 {
        shaft_power / electrical_power
    } else {
        0.0
    }
}

/// Solves the DC motor at speed `omega` delivering `shaft_torque` through
/// the gearbox in `mode`. `shaft_torque` is the propeller torque divided by
/// the gear ratio, so `shaft_torque * omega` is the propeller shaft power.
pub fn motor_electrical(
    omega: f64,
    shaft_torque: f64,
    thrust: f64,
    motor: &MotorModel,
    gearbox: &Gearbox,
    mode: PropulsionMode,
) -> Result<OperatingPoint, PropulsionError> {
    let omega = omega.max(0.0);
    let shaft_torque = shaft_torque.max(0.0);
    let motor_torque = shaft_torque / (1.0 - gearbox.loss(mode));
    let current = motor_torque / motor.torque_constant() + motor.idle_current;
    let voltage = current * motor.resistance + omega / motor.kv;
    if voltage > motor.v_max * (1.0 + 1e-12) {
        return Err(PropulsionError::Infeasible { voltage, v_max: motor.v_max });
    }
    let electrical_power = voltage * current;
    let shaft_power = shaft_torque * omega;
    Ok(OperatingPoint {
        omega,
        shaft_torque,
        motor_torque,
        voltage,
        current,
        electrical_power,
        shaft_power,
        efficiency: shaft_efficiency(shaft_power, electrical_power),
        specific_thrust: if electrical_power > 0.0 { thrust / electrical_power } else { 0.0 },
    })
}

/// Highest steady motor speed at supply voltage `v_max` for a propeller load
/// `torque_coeff * (w / r)^2`.
///
/// The supply equation `R (kv k_m w^2 / (r^3 (1 - loss)) + I0) + w / kv = V`
/// is quadratic in `w`.
pub fn max_speed_at_voltage(
    voltage: f64,
    prop_torque_coeff: f64,
    ratio: f64,
    loss: f64,
    motor: &MotorModel,
) -> Option<f64> {
    let a = motor.resistance * motor.kv * prop_torque_coeff / (ratio.powi(3) * (1.0 - loss));
    let b = 1.0 / motor.kv;
    let c = motor.resistance * motor.idle_current - voltage;
    if c >= 0.0 {
        return None;
    }
    if a == 0.0 {
        return Some(-c / b);
    }
    // numerically stable root of a w^2 + b w + c = 0 with c < 0
    let disc = (b * b - 4.0 * a * c).sqrt();
    Some(-2.0 * c / (b + disc))
}

/// Parameters plus the derived per-mode speed envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropulsionUnit {
    pub params: PropulsionParams,
    omega_max_aerial: f64,
    omega_max_aquatic: f64,
}

impl PropulsionUnit {
    pub fn new(params: PropulsionParams) -> Result<Self, PropulsionError> {
        params.validate()?;
        let envelope = |mode| {
            max_speed_at_voltage(
                params.motor.v_max,
                params.propeller.torque_coeff(mode),
                params.gearbox.ratio(mode),
                params.gearbox.loss(mode),
                &params.motor,
            )
            .ok_or(PropulsionError::NoFeasiblePoint)
        };
        Ok(PropulsionUnit {
            params,
            omega_max_aerial: envelope(PropulsionMode::Aerial)?,
            omega_max_aquatic: envelope(PropulsionMode::Aquatic)?,
        })
    }

    pub fn omega_max(&self, mode: PropulsionMode) -> f64 {
        match mode {
            PropulsionMode::Aerial => self.omega_max_aerial,
            PropulsionMode::Aquatic => self.omega_max_aquatic,
        }
    }

    pub fn coeffs(&self, mode: PropulsionMode) -> EquivalentCoeffs {
        equivalent_coeffs(&self.params.propeller, &self.params.gearbox, mode)
    }

    /// Thrust and torque at unsigned motor speed `omega`; speeds beyond the
    /// envelope are clamped and flagged.
    pub fn unit_output(&self, omega: f64, mode: PropulsionMode) -> UnitOutput {
        let limit = self.omega_max(mode);
        let clamped = omega.clamp(0.0, limit);
        let saturated = omega > limit * (1.0 + 1e-9);
        let (thrust, torque) = thrust_torque(clamped, &self.coeffs(mode));
        UnitOutput { thrust, torque, omega: clamped, saturated }
    }

    /// Output for a signed motor speed; the sign selects the gear.
    pub fn signed_output(&self, signed_omega: f64) -> UnitOutput {
        self.unit_output(signed_omega.abs(), PropulsionMode::from_sign(signed_omega))
    }

    /// Maps a signed duty in [-1, 1] to the gear and a steady motor speed.
    pub fn command_to_mode(&self, signed_duty: f64) -> (PropulsionMode, f64) {
        let duty = signed_duty.clamp(-1.0, 1.0);
        let mode = PropulsionMode::from_sign(duty);
        (mode, duty.abs() * self.omega_max(mode))
    }

    /// Full operating point at motor speed `omega` in `mode`.
    pub fn operating_point(&self, omega: f64, mode: PropulsionMode) -> Result<OperatingPoint, PropulsionError> {
        let out = self.unit_output(omega, mode);
        let ratio = self.params.gearbox.ratio(mode);
        motor_electrical(out.omega, out.torque / ratio, out.thrust, &self.params.motor, &self.params.gearbox, mode)
    }

    pub fn propeller_speed(&self, omega: f64, mode: PropulsionMode) -> f64 {
        omega / self.params.gearbox.ratio(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> PropulsionUnit {
        PropulsionUnit::new(PropulsionParams::default()).unwrap()
    }

    #[test]
    fn unity_ratio_keeps_coefficients() {
        let p = PropellerCoeffs { k_t_aerial: 2.0e-5, k_m_aerial: 4.0e-7, ..Default::default() };
        let g = Gearbox { ratio_aerial: 1.0, ..Default::default() };
        let c = equivalent_coeffs(&p, &g, PropulsionMode::Aerial);
        assert_eq!(c.k_t, 2.0e-5);
        assert_eq!(c.k_m, 4.0e-7);
    }

    #[test]
    fn aquatic_ratio_scales_by_square() {
        let p = PropellerCoeffs { k_t_aquatic: 2.0e-5, k_m_aquatic: 4.0e-7, ..Default::default() };
        let c = equivalent_coeffs(&p, &Gearbox::default(), PropulsionMode::Aquatic);
        // 2.0e-5 / 12.33^2 and 4.0e-7 / 12.33^2
        assert_relative_eq!(c.k_t, 2.0e-5 / (12.33 * 12.33), max_relative = 1e-12);
        assert_relative_eq!(c.k_m, 4.0e-7 / (12.33 * 12.33), max_relative = 1e-12);
        assert_relative_eq!(c.k_t, 1.3156e-7, max_relative = 5e-5);
        assert_relative_eq!(c.k_m, 2.631e-9, max_relative = 5e-5);
    }

    #[test]
    fn quadratic_thrust_law() {
        let c = EquivalentCoeffs { k_t: 1.32e-7, k_m: 1e-9 };
        assert_eq!(thrust_torque(0.0, &c), (0.0, 0.0));
        assert_relative_eq!(thrust_torque(1000.0, &c).0, 0.132, max_relative = 1e-12);
        let (t1, _) = thrust_torque(400.0, &c);
        let (t2, _) = thrust_torque(800.0, &c);
        assert_relative_eq!(t2 / t1, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn over_envelope_is_saturated() {
        let u = unit();
        let max = u.omega_max(PropulsionMode::Aerial);
        let out = u.unit_output(2.0 * max, PropulsionMode::Aerial);
        assert!(out.saturated);
        assert_eq!(out.omega, max);
        assert!(!u.unit_output(0.5 * max, PropulsionMode::Aerial).saturated);
    }

    #[test]
    fn duty_sign_selects_mode() {
        let u = unit();
        assert_eq!(u.command_to_mode(0.0), (PropulsionMode::Aerial, 0.0));
        assert_eq!(u.command_to_mode(1.0), (PropulsionMode::Aerial, u.omega_max(PropulsionMode::Aerial)));
        let (mode, w) = u.command_to_mode(-0.5);
        assert_eq!(mode, PropulsionMode::Aquatic);
        assert_relative_eq!(w, 0.5 * u.omega_max(PropulsionMode::Aquatic));
    }

    #[test]
    fn envelope_sits_on_supply_limit() {
        let u = unit();
        for mode in [PropulsionMode::Aerial, PropulsionMode::Aquatic] {
            let op = u.operating_point(u.omega_max(mode), mode).unwrap();
            assert_relative_eq!(op.voltage, u.params.motor.v_max, max_relative = 1e-10);
        }
    }

    #[test]
    fn default_thrust_envelope_matches_airframe() {
        let u = unit();
        let aerial = u.unit_output(u.omega_max(PropulsionMode::Aerial), PropulsionMode::Aerial);
        let aquatic = u.unit_output(u.omega_max(PropulsionMode::Aquatic), PropulsionMode::Aquatic);
        // thrust-to-weight 3.75 on 1.63 kg, and 32 N underwater
        assert!((aerial.thrust - 15.0).abs() < 0.5, "{}", aerial.thrust);
        assert!((aquatic.thrust - 32.0).abs() < 1.0, "{}", aquatic.thrust);
    }

    #[test]
    fn zero_shaft_power_zero_efficiency() {
        let m = MotorModel::default();
        let op = motor_electrical(0.0, 0.0, 0.0, &m, &Gearbox::default(), PropulsionMode::Aerial).unwrap();
        assert_eq!(op.efficiency, 0.0);
        assert_eq!(shaft_efficiency(10.0, 16.0), 0.625);
    }

    #[test]
    fn over_voltage_is_infeasible() {
        let m = MotorModel::default();
        let err = motor_electrical(3000.0, 0.1, 1.0, &m, &Gearbox::default(), PropulsionMode::Aerial);
        assert!(matches!(err, Err(PropulsionError::Infeasible { .. })));
    }

    #[test]
    fn gearbox_loss_is_applied() {
        let u = unit();
        let op = u.operating_point(1000.0, PropulsionMode::Aquatic).unwrap();
        let input = op.motor_torque * op.omega;
        assert_relative_eq!(op.shaft_power, 0.787 * input, max_relative = 1e-12);
        assert_relative_eq!(Gearbox::default().transmit(100.0, PropulsionMode::Aerial), 94.9, max_relative = 1e-12);
    }

    #[test]
    fn rejects_invalid_gearbox() {
        let g = Gearbox { ratio_aquatic: 0.5, ..Default::default() };
        assert!(g.validate().is_err());
        let g = Gearbox { loss_aquatic: 1.0, ..Default::default() };
        assert!(g.validate().is_err());
    }

    /// Speed at which electrical power equals `power`, by bisection.
    fn speed_at_power(u: &PropulsionUnit, mode: PropulsionMode, power: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, u.omega_max(mode));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if u.operating_point(mid, mode).unwrap().electrical_power < power {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn aquatic_gear_trades_speed_for_torque() {
        let u = unit();
        for power in [60.0, 80.0, 100.0] {
            let w_ae = speed_at_power(&u, PropulsionMode::Aerial, power);
            let w_aq = speed_at_power(&u, PropulsionMode::Aquatic, power);
            let q_ae = u.unit_output(w_ae, PropulsionMode::Aerial).torque;
            let q_aq = u.unit_output(w_aq, PropulsionMode::Aquatic).torque;
            assert!(q_aq > q_ae);
            assert!(u.propeller_speed(w_aq, PropulsionMode::Aquatic) < u.propeller_speed(w_ae, PropulsionMode::Aerial));
        }
    }

    proptest! {
        #[test]
        fn efficiency_below_one(frac in 0.0..=1.0f64, aquatic in any::<bool>()) {
            let u = unit();
            let mode = if aquatic { PropulsionMode::Aquatic } else { PropulsionMode::Aerial };
            let op = u.operating_point(frac * u.omega_max(mode), mode).unwrap();
            prop_assert!(op.efficiency >= 0.0 && op.efficiency < 1.0);
            let thrust = u.unit_output(op.omega, mode).thrust;
            prop_assert!((op.specific_thrust * op.electrical_power - thrust).abs() <= 1e-15 * thrust.max(1e-300));
        }

        #[test]
        fn thrust_monotone_in_speed(a in 0.0..1500.0f64, b in 0.0..1500.0f64) {
            let u = unit();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(u.unit_output(lo, PropulsionMode::Aerial).thrust <= u.unit_output(hi, PropulsionMode::Aerial).thrust);
        }
    }
}
