//! Six-degree-of-freedom simulator for an aerial-aquatic tilt-rotor
//! quadrotor with dual-speed propulsion.

// `!(x > 0.0)` is used throughout to reject NaN along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod control;
pub mod designkit;
pub mod dynamics;
pub mod error;
pub mod frames;
pub mod hydro;
pub mod propulsion;
pub mod scenarios;

pub use error::{ConfigError, ParamError, PropulsionError, RunError, SimError};
pub use frames::{BodyWrench, GeometryParams, Rotation, Vec3, VehicleState};
