//! Static propulsion analysis: actuator-disk propeller, gear-ratio
//! selection and bench-test curves.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::error::{ParamError, PropulsionError, RunError};
use crate::propulsion::{max_speed_at_voltage, motor_electrical, Gearbox, MotorModel, PropulsionMode, PropulsionUnit};

pub const AIR_DENSITY: f64 = 1.225;
pub const WATER_DENSITY: f64 = 1000.0;

/// Measured figures of the reference propulsion unit and its comparators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceTable {
    pub aerial_efficiency: f64,
    pub aquatic_efficiency: f64,
    /// N/W.
    pub max_aquatic_specific_thrust: f64,
    /// N.
    pub max_aquatic_thrust: f64,
    /// kg.
    pub unit_mass: f64,
    pub aquatic_gear_ratio: f64,
    pub aquatic_transmission_efficiency: f64,
}

pub const REFERENCE: ReferenceTable = ReferenceTable {
    aerial_efficiency: 0.633,
    aquatic_efficiency: 0.525,
    max_aquatic_specific_thrust: 0.265,
    max_aquatic_thrust: 32.0,
    unit_mass: 0.122,
    aquatic_gear_ratio: 12.33,
    aquatic_transmission_efficiency: 0.787,
};

/// Calibration bands for the peak static efficiency per mode.
pub const AERIAL_EFFICIENCY_BAND: (f64, f64) = (0.55, 0.70);
pub const AQUATIC_EFFICIENCY_BAND: (f64, f64) = (0.45, 0.60);

/// Fixed-pitch propeller under actuator-disk theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPropeller {
    /// m.
    pub diameter: f64,
    /// `T = c_t ρ n² D⁴` with `n` in rev/s.
    pub thrust_coeff: f64,
    /// Ideal over actual shaft power.
    pub figure_of_merit: f64,
}

impl Default for DiskPropeller {
    fn default() -> Self {
        // 9.4 inch propeller.
        DiskPropeller { diameter: 0.2388, thrust_coeff: 0.0917, figure_of_merit: 0.6 }
    }
}

impl DiskPropeller {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.diameter > 0.0) {
            return Err(ParamError::new("diameter", "must be positive"));
        }
        if !(self.thrust_coeff > 0.0) {
            return Err(ParamError::new("thrust_coeff", "must be positive"));
        }
        if !(self.figure_of_merit > 0.0 && self.figure_of_merit <= 1.0) {
            return Err(ParamError::new("figure_of_merit", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn disk_area(&self) -> f64 {
        PI * self.diameter * self.diameter / 4.0
    }

    /// `T = k_t ω²` at propeller speed ω (rad/s).
    pub fn k_t(&self, density: f64) -> f64 {
        self.thrust_coeff * density * self.diameter.powi(4) / (TAU * TAU)
    }

    /// `Q = k_q ω²`, from shaft power = ideal induced power / figure of merit.
    pub fn k_q(&self, density: f64) -> f64 {
        if density <= 0.0 {
            return 0.0;
        }
        self.k_t(density).powf(1.5) / (self.figure_of_merit * (2.0 * density * self.disk_area()).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskOutput {
    pub thrust: f64,
    pub torque: f64,
    /// Ideal induced power `T^{3/2} / sqrt(2 ρ A)` (W).
    pub ideal_power: f64,
}

pub fn momentum_thrust(prop: &DiskPropeller, omega: f64, density: f64) -> DiskOutput {
    let omega = omega.max(0.0);
    let thrust = prop.k_t(density) * omega * omega;
    let ideal_power = if density > 0.0 { thrust.powf(1.5) / (2.0 * density * prop.disk_area()).sqrt() } else { 0.0 };
    DiskOutput { thrust, torque: prop.k_q(density) * omega * omega, ideal_power }
}

/// Best feasible operating point of one gear ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub ratio: f64,
    /// None when nothing is feasible at this ratio.
    pub result: Option<SweepResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResult {
    pub motor_speed: f64,
    pub thrust: f64,
    pub electrical_power: f64,
    /// Motor and gearbox efficiency.
    pub efficiency: f64,
    /// Thrust per electrical watt (N/W).
    pub specific_thrust: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GearSweep {
    pub points: Vec<SweepPoint>,
    pub best: SweepPoint,
}

impl GearSweep {
    pub fn best_result(&self) -> SweepResult {
        self.best.result.expect("best point is feasible")
    }

    pub fn at_ratio(&self, ratio: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.ratio - ratio).abs() < 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for SweepRange {
    fn default() -> Self {
        SweepRange { min: 1.0, max: 30.0, points: 291 }
    }
}

impl SweepRange {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.min + step * i as f64).collect()
    }
}

/// Operating point at gear ratio `ratio` and motor speed `omega`.
fn geared_point(
    omega: f64,
    ratio: f64,
    k_t: f64,
    k_q: f64,
    motor: &MotorModel,
    gearbox: &Gearbox,
    mode: PropulsionMode,
) -> Result<SweepResult, PropulsionError> {
    let w_prop = omega / ratio;
    let thrust = k_t * w_prop * w_prop;
    let op = motor_electrical(omega, k_q * w_prop * w_prop / ratio, thrust, motor, gearbox, mode)?;
    Ok(SweepResult {
        motor_speed: omega,
        thrust,
        electrical_power: op.electrical_power,
        efficiency: op.efficiency,
        specific_thrust: op.specific_thrust,
    })
}

/// For each ratio, the highest-thrust steady point with `V ≤ v_max` and,
/// if given, electrical power under `power_budget`. The transmission loss
/// of `mode` applies at every ratio.
pub fn gear_ratio_sweep(
    motor: &MotorModel,
    gearbox: &Gearbox,
    mode: PropulsionMode,
    prop: &DiskPropeller,
    density: f64,
    range: &SweepRange,
    power_budget: Option<f64>,
) -> Result<GearSweep, PropulsionError> {
    prop.validate()?;
    motor.validate()?;
    if range.points == 0 || !(range.min > 0.0 && range.max >= range.min) {
        return Err(ParamError::new("range", "need at least one positive ratio, min ≤ max").into());
    }
    let (k_t, k_q) = (prop.k_t(density), prop.k_q(density));
    let loss = gearbox.loss(mode);
    let points: Vec<SweepPoint> = range
        .grid()
        .into_iter()
        .map(|ratio| {
            let result = max_speed_at_voltage(motor.v_max, k_q, ratio, loss, motor).and_then(|w_max| {
                let top = geared_point(w_max, ratio, k_t, k_q, motor, gearbox, mode).ok()?;
                match power_budget {
                    Some(budget) if top.electrical_power > budget => {
                        // Electrical power rises with speed; bisect onto the budget.
                        let at_zero = geared_point(0.0, ratio, k_t, k_q, motor, gearbox, mode).ok()?;
                        if at_zero.electrical_power > budget {
                            return None;
                        }
                        let (mut lo, mut hi) = (0.0, w_max);
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            match geared_point(mid, ratio, k_t, k_q, motor, gearbox, mode) {
                                Ok(p) if p.electrical_power <= budget => lo = mid,
                                _ => hi = mid,
                            }
                        }
                        geared_point(lo, ratio, k_t, k_q, motor, gearbox, mode).ok()
                    }
                    _ => Some(top),
                }
            });
            SweepPoint { ratio, result }
        })
        .collect();
    let best = points
        .iter()
        .filter(|p| p.result.is_some())
        .fold(None::<SweepPoint>, |acc, p| match acc {
            Some(a) if a.result.unwrap().thrust >= p.result.unwrap().thrust => Some(a),
            _ => Some(*p),
        })
        .ok_or(PropulsionError::NoFeasiblePoint)?;
    Ok(GearSweep { points, best })
}

/// One bench-test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticPoint {
    pub duty: f64,
    pub motor_speed: f64,
    pub thrust: f64,
    pub torque: f64,
    pub voltage: f64,
    pub current: f64,
    pub electrical_power: f64,
    pub efficiency: f64,
    pub specific_thrust: f64,
    pub feasible: bool,
}

pub const STATIC_DUTY_MIN: f64 = 0.30;

/// Duty grid from 0.30 to 1.00 in `steps` equal intervals, each solved with
/// the simulator's own propulsion model.
pub fn static_test_curves(unit: &PropulsionUnit, mode: PropulsionMode, steps: usize) -> Vec<StaticPoint> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let duty = STATIC_DUTY_MIN + (1.0 - STATIC_DUTY_MIN) * i as f64 / steps as f64;
            let omega = duty * unit.omega_max(mode);
            let out = unit.unit_output(omega, mode);
            match unit.operating_point(omega, mode) {
                Ok(op) => StaticPoint {
                    duty,
                    motor_speed: omega,
                    thrust: out.thrust,
                    torque: out.torque,
                    voltage: op.voltage,
                    current: op.current,
                    electrical_power: op.electrical_power,
                    efficiency: op.efficiency,
                    specific_thrust: op.specific_thrust,
                    feasible: true,
                },
                Err(_) => StaticPoint {
                    duty,
                    motor_speed: omega,
                    thrust: out.thrust,
                    torque: out.torque,
                    voltage: f64::NAN,
                    current: f64::NAN,
                    electrical_power: f64::NAN,
                    efficiency: f64::NAN,
                    specific_thrust: f64::NAN,
                    feasible: false,
                },
            }
        })
        .collect()
}

pub const STATIC_COLUMNS: [&str; 11] = [
    "mode",
    "duty",
    "omega",
    "thrust",
    "torque",
    "voltage",
    "current",
    "power",
    "efficiency",
    "specific_thrust",
    "feasible",
];

pub fn write_static_csv<W: Write>(out: W, curves: &[(PropulsionMode, Vec<StaticPoint>)]) -> Result<(), RunError> {
    let err = |e: csv::Error| RunError::Telemetry(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATIC_COLUMNS).map_err(err)?;
    for (mode, points) in curves {
        for p in points {
            let nums = [
                p.duty,
                p.motor_speed,
                p.thrust,
                p.torque,
                p.voltage,
                p.current,
                p.electrical_power,
                p.efficiency,
                p.specific_thrust,
            ];
            let mut rec = vec![mode.name().to_string()];
            rec.extend(nums.iter().map(|v| format!("{v:.8e}")));
            rec.push(u8::from(p.feasible).to_string());
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| RunError::Telemetry(e.to_string()))
}

pub const SWEEP_COLUMNS: [&str; 7] =
    ["ratio", "feasible", "motor_speed", "thrust", "power", "efficiency", "specific_thrust"];

pub fn write_sweep_csv<W: Write>(out: W, sweep: &GearSweep) -> Result<(), RunError> {
    let err = |e: csv::Error| RunError::Telemetry(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS).map_err(err)?;
    for p in &sweep.points {
        let mut rec = vec![format!("{:.8e}", p.ratio), u8::from(p.result.is_some()).to_string()];
        match p.result {
            Some(r) => rec.extend(
                [r.motor_speed, r.thrust, r.electrical_power, r.efficiency, r.specific_thrust]
                    .iter()
                    .map(|v| format!("{v:.8e}")),
            ),
            None => rec.extend(std::iter::repeat_n(String::from("nan"), 5)),
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| RunError::Telemetry(e.to_string()))
}

pub fn peak_efficiency(points: &[StaticPoint]) -> Option<&StaticPoint> {
    points.iter().filter(|p| p.feasible).max_by(|a, b| a.efficiency.total_cmp(&b.efficiency))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propulsion::PropulsionParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> PropulsionUnit {
        PropulsionUnit::new(PropulsionParams::default()).unwrap()
    }

    fn sweep(density: f64, mode: PropulsionMode, range: SweepRange, budget: Option<f64>) -> GearSweep {
        let p = PropulsionParams::default();
        gear_ratio_sweep(&p.motor, &p.gearbox, mode, &DiskPropeller::default(), density, &range, budget).unwrap()
    }

    #[test]
    fn zero_speed_gives_nothing() {
        let o = momentum_thrust(&DiskPropeller::default(), 0.0, WATER_DENSITY);
        assert_eq!((o.thrust, o.torque, o.ideal_power), (0.0, 0.0, 0.0));
    }

    #[test]
    fn thrust_proportional_to_density() {
        let p = DiskPropeller::default();
        let air = momentum_thrust(&p, 500.0, AIR_DENSITY);
        let water = momentum_thrust(&p, 500.0, AIR_DENSITY * 816.0);
        assert_relative_eq!(water.thrust / air.thrust, 816.0, max_relative = 1e-12);
    }

    #[test]
    fn matched_ideal_power_scales_thrust_by_cube_root_of_density() {
        // P_ideal ∝ ρ ω³, so matching power needs ω ∝ ρ^(-1/3).
        let p = DiskPropeller::default();
        let air = momentum_thrust(&p, 1000.0, AIR_DENSITY);
        let w_water = 1000.0 * (AIR_DENSITY / WATER_DENSITY).cbrt();
        let water = momentum_thrust(&p, w_water, WATER_DENSITY);
        assert_relative_eq!(water.ideal_power, air.ideal_power, max_relative = 1e-12);
        assert_relative_eq!(water.thrust / air.thrust, (WATER_DENSITY / AIR_DENSITY).cbrt(), max_relative = 1e-12);
    }

    #[test]
    fn shaft_power_is_ideal_over_figure_of_merit() {
        let p = DiskPropeller::default();
        let o = momentum_thrust(&p, 800.0, AIR_DENSITY);
        assert_relative_eq!(o.torque * 800.0, o.ideal_power / p.figure_of_merit, max_relative = 1e-12);
    }

    #[test]
    fn air_prefers_direct_drive() {
        let s = sweep(AIR_DENSITY, PropulsionMode::Aerial, SweepRange::default(), None);
        assert_eq!(s.best.ratio, 1.0);
    }

    #[test]
    fn water_optimum_is_interior_and_doubles_direct_drive() {
        let s = sweep(WATER_DENSITY, PropulsionMode::Aquatic, SweepRange::default(), None);
        assert!(s.best.ratio > 1.0 && s.best.ratio < 30.0, "r_best = {}", s.best.ratio);
        let direct = s.at_ratio(1.0).and_then(|p| p.result).map_or(0.0, |r| r.thrust);
        assert!(s.best_result().thrust > 2.0 * direct);
    }

    #[test]
    fn power_budget_caps_electrical_power() {
        let s = sweep(WATER_DENSITY, PropulsionMode::Aquatic, SweepRange::default(), Some(120.0));
        for p in s.points.iter().filter_map(|p| p.result) {
            assert!(p.electrical_power <= 120.0 + 1e-9);
        }
        assert!(s.best.ratio > 1.0 && s.best.ratio < 30.0);
    }

    #[test]
    fn no_supply_means_no_feasible_point() {
        let mut p = PropulsionParams::default();
        p.motor.v_max = 1e-9;
        let r = gear_ratio_sweep(
            &p.motor,
            &p.gearbox,
            PropulsionMode::Aquatic,
            &DiskPropeller::default(),
            WATER_DENSITY,
            &SweepRange::default(),
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn static_curve_spans_duty_range() {
        let pts = static_test_curves(&unit(), PropulsionMode::Aquatic, 70);
        assert_eq!(pts.first().unwrap().duty, 0.30);
        assert_relative_eq!(pts.last().unwrap().duty, 1.0, max_relative = 1e-12);
        assert!(pts.iter().all(|p| p.duty >= 0.30 && p.feasible));
        assert!(pts.iter().all(|p| p.efficiency < 1.0));
    }

    #[test]
    fn static_peaks_sit_in_calibration_bands() {
        for (mode, (lo, hi)) in
            [(PropulsionMode::Aerial, AERIAL_EFFICIENCY_BAND), (PropulsionMode::Aquatic, AQUATIC_EFFICIENCY_BAND)]
        {
            let pts = static_test_curves(&unit(), mode, 70);
            let peak = peak_efficiency(&pts).unwrap().efficiency;
            assert!(peak >= lo && peak <= hi, "{mode:?} peak {peak}");
        }
    }

    #[test]
    fn static_points_match_propulsion_model() {
        let u = unit();
        for p in static_test_curves(&u, PropulsionMode::Aerial, 7) {
            let op = u.operating_point(p.motor_speed, PropulsionMode::Aerial).unwrap();
            assert_eq!(p.efficiency, op.efficiency);
            assert_eq!(p.specific_thrust, op.specific_thrust);
        }
    }

    #[test]
    fn static_csv_has_header_and_rows() {
        let pts = static_test_curves(&unit(), PropulsionMode::Aerial, 7);
        let mut buf = Vec::new();
        write_static_csv(&mut buf, &[(PropulsionMode::Aerial, pts)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mode,duty,omega,thrust,"));
        assert_eq!(text.lines().count(), 9);
    }

    proptest! {
        #[test]
        fn finer_grid_never_worsens_best(n in 2usize..40, budget in prop::option::of(40.0..400.0f64)) {
            let coarse = SweepRange { min: 1.0, max: 30.0, points: n };
            let fine = SweepRange { points: 2 * n - 1, ..coarse };
            let a = sweep(WATER_DENSITY, PropulsionMode::Aquatic, coarse, budget).best_result().thrust;
            let b = sweep(WATER_DENSITY, PropulsionMode::Aquatic, fine, budget).best_result().thrust;
            prop_assert!(b >= a * (1.0 - 1e-12));
        }
    }
}
