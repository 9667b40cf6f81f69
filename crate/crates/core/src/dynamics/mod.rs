//! Rigid-body equations of motion with added mass, actuator lags and
//! fixed-step integration.

mod simulate;

pub use simulate::{simulate, Trajectory, TrajectorySample};

use nalgebra::{Matrix3, Quaternion};

use crate::allocation::{propulsion_wrench, TiltConfig};
use crate::error::{ParamError, SimError};
use crate::frames::{rotate_body_to_world, BodyWrench, GeometryParams, Rotation, Vec3, VehicleState};
use crate::hydro::{buoyancy_wrench, drag_wrench, gravity_wrench, medium_at_depth, BuoyancyModel, Medium};
use crate::propulsion::PropulsionUnit;

pub const DEFAULT_DT: f64 = 0.002;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub dt: f64,
    pub duration: f64,
    pub gravity: f64,
    pub integrator: Integrator,
    /// Physics ticks per controller update.
    pub control_divider: usize,
    /// Physics ticks per telemetry row.
    pub telemetry_decimation: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: DEFAULT_DT,
            duration: 10.0,
            gravity: GRAVITY,
            integrator: Integrator::Rk4,
            control_divider: 2,
            telemetry_decimation: 5,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(ParamError::new("dt", "must lie in (0, 0.01] s"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ParamError::new("duration", "must be positive"));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(ParamError::new("gravity", "must not be negative"));
        }
        if self.control_divider == 0 || self.telemetry_decimation == 0 {
            return Err(ParamError::new("decimation", "tick dividers must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorParams {
    pub motor_time_constant: f64,
    pub servo_time_constant: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        ActuatorParams { motor_time_constant: 0.05, servo_time_constant: 0.12 }
    }
}

impl ActuatorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.motor_time_constant > 0.0) || !(self.servo_time_constant > 0.0) {
            return Err(ParamError::new("time_constant", "actuator time constants must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub air: Medium,
    pub water: Medium,
    pub buoyancy: BuoyancyModel,
    /// Depth of a hard floor, if any (m, positive down).
    pub floor_depth: Option<f64>,
}

impl Environment {
    pub fn standard(g: &GeometryParams) -> Self {
        Environment {
            air: Medium::air(),
            water: Medium::water(g),
            buoyancy: BuoyancyModel::from_geometry(g, 0.1),
            floor_depth: None,
        }
    }

    /// Same medium everywhere and no buoyancy.
    pub fn uniform(medium: Medium) -> Self {
        Environment {
            air: medium,
            water: medium,
            buoyancy: BuoyancyModel { displaced_volume: 0.0, cob_offset: Vec3::zeros(), submersion_band: 0.1 },
            floor_depth: None,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.air.validate()?;
        self.water.validate()?;
        self.buoyancy.validate()
    }
}

/// Commanded signed duties and tilt angles held over a control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorCommand {
    pub duty: [f64; 4],
    pub tilt: TiltConfig,
}

impl Default for ActuatorCommand {
    fn default() -> Self {
        ActuatorCommand { duty: [0.0; 4], tilt: TiltConfig::uniform(std::f64::consts::FRAC_PI_2) }
    }
}

/// Diagonal-augmented mass and inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub mass: Vec3,
    pub inertia: Matrix3<f64>,
}

impl MassProperties {
    pub fn new(g: &GeometryParams, added: &[f64; 6]) -> Self {
        MassProperties {
            mass: Vec3::new(g.mass + added[0], g.mass + added[1], g.mass + added[2]),
            inertia: g.inertia + Matrix3::from_diagonal(&Vec3::new(added[3], added[4], added[5])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Quaternion<f64>,
    pub body_rates: Vec3,
    pub tilt: [f64; 4],
    pub motor_speed: [f64; 4],
}

/// Rigid-body part of the derivative; actuator rates are left at zero.
pub fn derivative(state: &VehicleState, wrench: &BodyWrench, mp: &MassProperties) -> Result<StateDerivative, SimError> {
    if !wrench.is_finite() {
        return Err(SimError::NonFiniteWrench { time: f64::NAN });
    }
    let v = state.velocity;
    let w = state.body_rates;
    let momentum = mp.mass.component_mul(&v);
    let v_dot = (wrench.force - w.cross(&momentum)).component_div(&mp.mass);
    let spin = mp.inertia * w;
    // The v × (Mv) term vanishes for isotropic added mass.
    let torque = wrench.moment - w.cross(&spin) - v.cross(&momentum);
    let w_dot = mp.inertia.lu().solve(&torque).ok_or_else(|| SimError::Setup("singular inertia".into()))?;
    let q = state.attitude.quaternion();
    let q_dot = q * Quaternion::new(0.0, w.x, w.y, w.z) * 0.5;
    Ok(StateDerivative {
        position: rotate_body_to_world(&state.attitude, &v),
        velocity: v_dot,
        attitude: q_dot,
        body_rates: w_dot,
        tilt: [0.0; 4],
        motor_speed: [0.0; 4],
    })
}

fn advance(s: &VehicleState, d: &StateDerivative, h: f64) -> VehicleState {
    let mut tilt = s.tilt;
    let mut motor_speed = s.motor_speed;
    for i in 0..4 {
        tilt[i] += h * d.tilt[i];
        motor_speed[i] += h * d.motor_speed[i];
    }
    VehicleState {
        position: s.position + d.position * h,
        velocity: s.velocity + d.velocity * h,
        attitude: Rotation::normalized(s.attitude.quaternion() + d.attitude * h),
        body_rates: s.body_rates + d.body_rates * h,
        tilt,
        motor_speed,
    }
}

/// Environmental, propulsion and total wrench at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchBreakdown {
    pub propulsion: BodyWrench,
    pub environment: BodyWrench,
    pub submerged_fraction: f64,
}

impl WrenchBreakdown {
    pub fn total(&self) -> BodyWrench {
        self.propulsion + self.environment
    }
}

/// The physical vehicle in its environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub geometry: GeometryParams,
    pub propulsion: PropulsionUnit,
    pub actuators: ActuatorParams,
    pub environment: Environment,
    pub gravity: f64,
}

impl Plant {
    pub fn new(
        geometry: GeometryParams,
        propulsion: PropulsionUnit,
        actuators: ActuatorParams,
        environment: Environment,
        gravity: f64,
    ) -> Result<Self, ParamError> {
        geometry.validate()?;
        actuators.validate()?;
        environment.validate()?;
        Ok(Plant { geometry, propulsion, actuators, environment, gravity })
    }

    pub fn medium(&self, z: f64) -> (Medium, f64) {
        let e = &self.environment;
        medium_at_depth(z, &e.air, &e.water, e.buoyancy.submersion_band)
    }

    pub fn wrenches(&self, state: &VehicleState) -> WrenchBreakdown {
        let (medium, fraction) = self.medium(state.position.z);
        let environment = gravity_wrench(state, self.geometry.mass, self.gravity)
            + buoyancy_wrench(
                state,
                &self.environment.buoyancy,
                self.environment.water.density,
                fraction,
                self.gravity,
            )
            + drag_wrench(state, &medium);
        let propulsion =
            propulsion_wrench(&state.motor_speed, &TiltConfig { beta: state.tilt }, &self.geometry, &self.propulsion);
        WrenchBreakdown { propulsion, environment, submerged_fraction: fraction }
    }

    /// Steady-state signed motor speed for a signed duty.
    pub fn motor_target(&self, duty: f64) -> f64 {
        let (mode, omega) = self.propulsion.command_to_mode(duty);
        mode.sign() * omega
    }

    pub fn full_derivative(&self, state: &VehicleState, cmd: &ActuatorCommand) -> Result<StateDerivative, SimError> {
        let breakdown = self.wrenches(state);
        let (medium, _) = self.medium(state.position.z);
        let mp = MassProperties::new(&self.geometry, &medium.added_mass);
        let mut d = derivative(state, &breakdown.total(), &mp)?;
        for i in 0..4 {
            d.motor_speed[i] =
                (self.motor_target(cmd.duty[i]) - state.motor_speed[i]) / self.actuators.motor_time_constant;
            d.tilt[i] = (cmd.tilt.beta[i] - state.tilt[i]) / self.actuators.servo_time_constant;
        }
        Ok(d)
    }

    /// Advances one fixed step with the command held constant.
    pub fn step(
        &self,
        state: &VehicleState,
        cmd: &ActuatorCommand,
        dt: f64,
        integrator: Integrator,
    ) -> Result<VehicleState, SimError> {
        let mut next = match integrator {
            Integrator::Rk4 => {
                let k1 = self.full_derivative(state, cmd)?;
                let k2 = self.full_derivative(&advance(state, &k1, 0.5 * dt), cmd)?;
                let k3 = self.full_derivative(&advance(state, &k2, 0.5 * dt), cmd)?;
                let k4 = self.full_derivative(&advance(state, &k3, dt), cmd)?;
                let combine = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
                let mut avg = k1;
                avg.position = (k1.position + k2.position * 2.0 + k3.position * 2.0 + k4.position) / 6.0;
                avg.velocity = (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) / 6.0;
                avg.attitude = (k1.attitude + k2.attitude * 2.0 + k3.attitude * 2.0 + k4.attitude) / 6.0;
                avg.body_rates = (k1.body_rates + k2.body_rates * 2.0 + k3.body_rates * 2.0 + k4.body_rates) / 6.0;
                for i in 0..4 {
                    avg.tilt[i] = combine(k1.tilt[i], k2.tilt[i], k3.tilt[i], k4.tilt[i]);
                    avg.motor_speed[i] =
                        combine(k1.motor_speed[i], k2.motor_speed[i], k3.motor_speed[i], k4.motor_speed[i]);
                }
                advance(state, &avg, dt)
            }
            Integrator::SemiImplicitEuler => {
                let d = self.full_derivative(state, cmd)?;
                let mut s = *state;
                s.velocity += d.velocity * dt;
                s.body_rates += d.body_rates * dt;
                let q = s.attitude.quaternion();
                let w = s.body_rates;
                s.attitude = Rotation::normalized(q + q * Quaternion::new(0.0, w.x, w.y, w.z) * (0.5 * dt));
                s.position += rotate_body_to_world(&s.attitude, &s.velocity) * dt;
                for i in 0..4 {
                    s.tilt[i] += d.tilt[i] * dt;
                    s.motor_speed[i] += d.motor_speed[i] * dt;
                }
                s
            }
        };
        if let Some(floor) = self.environment.floor_depth {
            apply_floor(&mut next, floor);
        }
        if !next.is_finite() {
            return Err(SimError::NonFiniteState { time: f64::NAN, state: Box::new(*state) });
        }
        Ok(next)
    }
}

/// Stops the vehicle at the floor, removing any downward world velocity.
fn apply_floor(s: &mut VehicleState, floor: f64) {
    if s.position.z <= floor {
        return;
    }
    s.position.z = floor;
    let mut v = s.world_velocity();
    if v.z > 0.0 {
        v.z = 0.0;
        s.velocity = crate::frames::rotate_world_to_body(&s.attitude, &v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propulsion::PropulsionParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn plant(env: Environment) -> Plant {
        let g = GeometryParams::default();
        let unit = PropulsionUnit::new(PropulsionParams::default()).unwrap();
        Plant::new(g, unit, ActuatorParams::default(), env, GRAVITY).unwrap()
    }

    fn neutral_plant() -> Plant {
        let mut g = GeometryParams::default();
        g.displaced_volume = g.mass / 1000.0;
        g.cob_offset = Vec3::new(0.0, 0.0, -0.01);
        let env = Environment::standard(&g);
        let unit = PropulsionUnit::new(PropulsionParams::default()).unwrap();
        Plant::new(g, unit, ActuatorParams::default(), env, GRAVITY).unwrap()
    }

    #[test]
    fn free_fall_accelerates_at_g() {
        let p = plant(Environment::uniform(Medium::vacuum()));
        let s = VehicleState::at_rest(Vec3::new(0.0, 0.0, -5.0));
        let d = p.full_derivative(&s, &ActuatorCommand::default()).unwrap();
        assert_relative_eq!(d.velocity.z, GRAVITY, max_relative = 1e-15);
        assert_eq!(d.velocity.x, 0.0);
        assert_eq!(d.body_rates, Vec3::zeros());
    }

    #[test]
    fn neutral_equilibrium_has_zero_derivative() {
        let p = neutral_plant();
        let s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 2.0));
        let d = p.full_derivative(&s, &ActuatorCommand::default()).unwrap();
        assert!(d.velocity.norm() < 1e-12);
        assert_eq!(d.body_rates, Vec3::zeros());
        let next = p.step(&s, &ActuatorCommand::default(), DEFAULT_DT, Integrator::Rk4).unwrap();
        assert!((next.position - s.position).norm() < 1e-12);
    }

    #[test]
    fn ballistic_arc_matches_closed_form() {
        let p = plant(Environment::uniform(Medium::vacuum()));
        let mut s = VehicleState::at_rest(Vec3::zeros());
        s.velocity = Vec3::new(3.0, 0.0, -4.0);
        for _ in 0..500 {
            s = p.step(&s, &ActuatorCommand::default(), DEFAULT_DT, Integrator::Rk4).unwrap();
        }
        assert_relative_eq!(s.position.z, -4.0 + 0.5 * GRAVITY, epsilon = 1e-6);
        assert_relative_eq!(s.position.x, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn step_is_deterministic() {
        let p = neutral_plant();
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 0.02));
        s.body_rates = Vec3::new(0.3, -0.2, 0.5);
        s.velocity = Vec3::new(0.1, 0.2, -0.3);
        let cmd = ActuatorCommand { duty: [-0.3, -0.2, -0.4, -0.1], tilt: TiltConfig { beta: [1.0, 2.0, 1.5, 0.5] } };
        let a = p.step(&s, &cmd, DEFAULT_DT, Integrator::Rk4).unwrap();
        let b = p.step(&s, &cmd, DEFAULT_DT, Integrator::Rk4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn actuators_lag_towards_command() {
        let p = plant(Environment::uniform(Medium::vacuum()));
        let s = VehicleState::at_rest(Vec3::zeros());
        let cmd = ActuatorCommand { duty: [-1.0; 4], tilt: TiltConfig::uniform(0.0) };
        let mut x = s;
        let tau = p.actuators.motor_time_constant;
        let n = (tau / DEFAULT_DT).round() as usize;
        for _ in 0..n {
            x = p.step(&x, &cmd, DEFAULT_DT, Integrator::Rk4).unwrap();
        }
        let target = p.motor_target(-1.0);
        assert!(target < 0.0);
        assert_relative_eq!(x.motor_speed[0] / target, 1.0 - (-1.0f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn floor_stops_descent() {
        let mut env = Environment::uniform(Medium::vacuum());
        env.floor_depth = Some(1.0);
        let p = plant(env);
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 0.9));
        for _ in 0..500 {
            s = p.step(&s, &ActuatorCommand::default(), DEFAULT_DT, Integrator::Rk4).unwrap();
        }
        assert_eq!(s.position.z, 1.0);
        assert!(s.world_velocity().z <= 1e-12);
    }

    #[test]
    fn non_finite_wrench_faults() {
        let s = VehicleState::at_rest(Vec3::zeros());
        let w = BodyWrench::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::zeros());
        let mp = MassProperties::new(&GeometryParams::default(), &[0.0; 6]);
        assert!(matches!(derivative(&s, &w, &mp), Err(SimError::NonFiniteWrench { .. })));
    }

    #[test]
    fn torque_free_spin_conserves_world_angular_momentum() {
        let p = plant(Environment::uniform(Medium::vacuum()));
        let mut s = VehicleState::at_rest(Vec3::zeros());
        s.body_rates = Vec3::new(1.0, 2.0, 3.0);
        let momentum = |s: &VehicleState| rotate_body_to_world(&s.attitude, &(p.geometry.inertia * s.body_rates));
        let h0 = momentum(&s);
        for _ in 0..1000 {
            s = p.step(&s, &ActuatorCommand::default(), DEFAULT_DT, Integrator::Rk4).unwrap();
        }
        assert!((momentum(&s) - h0).norm() < 1e-6 * h0.norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn drag_only_motion_loses_energy(
            v in prop::array::uniform3(-3.0..3.0f64),
            w in prop::array::uniform3(-4.0..4.0f64),
        ) {
            let g = GeometryParams::default();
            let mut env = Environment::uniform(Medium::water(&g));
            env.buoyancy.displaced_volume = 0.0;
            let mut p = plant(env);
            p.gravity = 0.0;
            let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 2.0));
            s.velocity = Vec3::from(v);
            s.body_rates = Vec3::from(w);
            let mp = MassProperties::new(&p.geometry, &p.environment.water.added_mass);
            let energy = |s: &VehicleState| {
                0.5 * s.velocity.dot(&mp.mass.component_mul(&s.velocity)) + 0.5 * s.body_rates.dot(&(mp.inertia * s.body_rates))
            };
            let mut e = energy(&s);
            for _ in 0..50 {
                s = p.step(&s, &ActuatorCommand::default(), DEFAULT_DT, Integrator::Rk4).unwrap();
                let e1 = energy(&s);
                prop_assert!(e1 <= e * (1.0 + 1e-12));
                e = e1;
            }
        }
    }
}
