use crate::control::{CascadeController, ChannelCommands};
use crate::error::SimError;
use crate::frames::{BodyWrench, VehicleState};

use super::{ActuatorCommand, Plant, SimParams};

/// One telemetry-rate snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: VehicleState,
    pub commands: ChannelCommands,
    pub duty: [f64; 4],
    pub submerged_fraction: f64,
    /// Net body wrench, propulsion plus environment.
    pub wrench: BodyWrench,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub saturations: u64,
    /// Set when the run aborted; `samples` then holds everything up to the fault.
    pub fault: Option<SimError>,
}

fn stamp(e: SimError, time: f64) -> SimError {
    match e {
        SimError::NonFiniteWrench { .. } => SimError::NonFiniteWrench { time },
        SimError::NonFiniteState { state, .. } => SimError::NonFiniteState { time, state },
        other => other,
    }
}

/// Closed-loop run: commands → controller → actuators → plant, per tick.
///
/// With `settle_actuators`, motor speeds and tilts start at the first
/// controller output instead of the values in `initial`.
pub fn simulate(
    plant: &Plant,
    controller: &mut CascadeController,
    initial: VehicleState,
    params: &SimParams,
    settle_actuators: bool,
    commands: impl Fn(f64) -> ChannelCommands,
) -> Trajectory {
    let mut traj = Trajectory::default();
    if let Err(e) = params.validate() {
        traj.fault = Some(e.into());
        return traj;
    }
    let steps = params.steps();
    let control_dt = params.dt * params.control_divider as f64;
    let mut state = initial;
    let mut cmd = ActuatorCommand::default();
    let mut channels = ChannelCommands::default();
    for k in 0..=steps {
        let t = k as f64 * params.dt;
        let breakdown = plant.wrenches(&state);
        if k % params.control_divider == 0 {
            channels = commands(t);
            let out = controller.control_step(&state, &channels, breakdown.submerged_fraction, control_dt);
            cmd = ActuatorCommand { duty: out.duty, tilt: out.tilt };
            if k == 0 && settle_actuators {
                state.tilt = out.tilt.beta;
                state.motor_speed = out.duty.map(|d| plant.motor_target(d));
            }
        }
        if k % params.telemetry_decimation == 0 || k == steps {
            let breakdown = if k == 0 && settle_actuators { plant.wrenches(&state) } else { breakdown };
            let wrench = breakdown.total();
            if !wrench.is_finite() {
                traj.fault = Some(SimError::NonFiniteWrench { time: t });
                break;
            }
            traj.samples.push(TrajectorySample {
                t,
                state,
                commands: channels,
                duty: cmd.duty,
                submerged_fraction: breakdown.submerged_fraction,
                wrench,
            });
        }
        if k == steps {
            break;
        }
        match plant.step(&state, &cmd, params.dt, params.integrator) {
            Ok(next) => state = next,
            Err(e) => {
                traj.fault = Some(stamp(e, t));
                break;
            }
        }
    }
    traj.saturations = controller.saturation_count();
    traj
}
