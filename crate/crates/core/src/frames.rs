//! Coordinate frames, attitude, vehicle state and airframe geometry.
//!
//! World frame is NED with the water surface at `z = 0`, so a positive `z`
//! is depth. Body frame is FRD with its origin at the center of gravity.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::ParamError;

pub type Vec3 = Vector3<f64>;

/// Tolerance on the quaternion norm before a rotation is renormalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Attitude of the body frame, stored as a unit quaternion (body → world).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Quaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Quaternion::identity())
    }

    /// Builds a rotation from raw components, renormalizing when the norm is
    /// off by more than [`NORM_TOLERANCE`].
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::from_quaternion(Quaternion::new(w, x, y, z))
    }

    pub fn from_quaternion(q: Quaternion<f64>) -> Self {
        let norm = q.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            log::warn!("renormalizing attitude quaternion with norm {norm}");
        }
        if norm == 0.0 || !norm.is_finite() {
            log::warn!("degenerate attitude quaternion, resetting to identity");
            return Self::identity();
        }
        Rotation(q / norm)
    }

    /// Normalizes without logging. Integrators call this every step, where
    /// small drift is expected.
    pub fn normalized(q: Quaternion<f64>) -> Self {
        let norm = q.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Rotation(q);
        }
        Rotation(q / norm)
    }

    /// Z-Y-X (yaw, pitch, roll) Euler angles in radians.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Rotation(*UnitQuaternion::from_euler_angles(roll, pitch, yaw).quaternion())
    }

    /// Returns `(roll, pitch, yaw)`.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.unit().euler_angles()
    }

    pub fn quaternion(&self) -> Quaternion<f64> {
        self.0
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.0.w, self.0.i, self.0.j, self.0.k]
    }

    pub fn unit(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::new_unchecked(self.0)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.unit().to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.conjugate())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation::from_quaternion(self.0 * other.0)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

pub fn rotate_body_to_world(r: &Rotation, v: &Vec3) -> Vec3 {
    r.unit() * v
}

pub fn rotate_world_to_body(r: &Rotation, v: &Vec3) -> Vec3 {
    r.unit().inverse_transform_vector(v)
}

/// Full rigid-body state plus the propulsion actuator states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// NED world position (m), z positive down.
    pub position: Vec3,
    /// Linear velocity in the body frame (m/s).
    pub velocity: Vec3,
    pub attitude: Rotation,
    /// Angular velocity in the body frame (rad/s).
    pub body_rates: Vec3,
    /// Tilt angle of each unit about its arm (rad).
    pub tilt: [f64; 4],
    /// Signed motor-side speed (rad/s). Positive is forward rotation
    /// (aerial gear), negative is reverse (aquatic gear).
    pub motor_speed: [f64; 4],
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> Self {
        VehicleState {
            position,
            velocity: Vec3::zeros(),
            attitude: Rotation::identity(),
            body_rates: Vec3::zeros(),
            tilt: [FRAC_PI_2; 4],
            motor_speed: [0.0; 4],
        }
    }

    pub fn depth(&self) -> f64 {
        self.position.z
    }

    pub fn world_velocity(&self) -> Vec3 {
        rotate_body_to_world(&self.attitude, &self.velocity)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.wxyz().iter().all(|v| v.is_finite())
            && self.body_rates.iter().all(|v| v.is_finite())
            && self.tilt.iter().all(|v| v.is_finite())
            && self.motor_speed.iter().all(|v| v.is_finite())
    }
}

/// Force and moment about the CoG, both in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyWrench {
    pub force: Vec3,
    pub moment: Vec3,
}

impl BodyWrench {
    pub fn new(force: Vec3, moment: Vec3) -> Self {
        BodyWrench { force, moment }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }

    pub fn scaled(&self, k: f64) -> Self {
        BodyWrench { force: self.force * k, moment: self.moment * k }
    }
}

impl std::ops::Add for BodyWrench {
    type Output = BodyWrench;
    fn add(self, rhs: BodyWrench) -> BodyWrench {
        BodyWrench { force: self.force + rhs.force, moment: self.moment + rhs.moment }
    }
}

impl std::ops::AddAssign for BodyWrench {
    fn add_assign(&mut self, rhs: BodyWrench) {
        self.force += rhs.force;
        self.moment += rhs.moment;
    }
}

impl std::iter::Sum for BodyWrench {
    fn sum<I: Iterator<Item = BodyWrench>>(iter: I) -> Self {
        iter.fold(BodyWrench::zero(), |acc, w| acc + w)
    }
}

/// Mount frame of a propulsion unit, expressed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountFrame {
    pub origin: Vec3,
    /// Unit vector along the tilting arm (the tilt axis).
    pub arm_axis: Vec3,
    /// Horizontal unit vector perpendicular to the arm.
    pub tangent: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    /// Arm azimuth from the body x axis for units 1-4 (rad).
    pub delta: [f64; 4],
    /// Horizontal offset from the CoG to each mount origin (m).
    pub arm_length: f64,
    /// Vertical offset of the mount origins, positive below the CoG (m).
    pub arm_height: f64,
    /// Reaction-torque direction of each propeller.
    pub torque_dir: [i8; 4],
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub displaced_volume: f64,
    /// Center of buoyancy relative to the center of gravity, body frame (m).
    pub cob_offset: Vec3,
}

pub const DEFAULT_DELTA: [f64; 4] = [FRAC_PI_4, -3.0 * FRAC_PI_4, -FRAC_PI_4, 3.0 * FRAC_PI_4];
pub const DEFAULT_TORQUE_DIR: [i8; 4] = [1, 1, -1, -1];
pub const DEFAULT_MASS: f64 = 1.63;
pub const DEFAULT_ARM_LENGTH: f64 = 0.19;
pub const DEFAULT_ARM_HEIGHT: f64 = 0.02;
pub const DEFAULT_BUOYANCY_RATIO: f64 = 0.98;
pub const WATER_DENSITY: f64 = 1000.0;
/// Mass of one propulsion unit including motor, gearbox and propeller (kg).
pub const UNIT_MASS: f64 = 0.122;

/// Inertia of a central box fuselage plus four box-shaped propulsion units
/// at the arm tips. Fuselage is 0.12 x 0.12 x 0.15 m, units 0.05 x 0.05 x 0.08 m.
pub fn two_box_inertia(mass: f64, arm_length: f64, arm_height: f64, delta: &[f64; 4]) -> Matrix3<f64> {
    let box_inertia = |m: f64, a: f64, b: f64, c: f64| {
        Matrix3::from_diagonal(&Vec3::new(
            m * (b * b + c * c) / 12.0,
            m * (a * a + c * c) / 12.0,
            m * (a * a + b * b) / 12.0,
        ))
    };
    let fuselage_mass = (mass - 4.0 * UNIT_MASS).max(0.0);
    let mut inertia = box_inertia(fuselage_mass, 0.12, 0.12, 0.15);
    for d in delta {
        let r = Vec3::new(arm_length * d.cos(), arm_length * d.sin(), arm_height);
        // parallel axis: m (|r|^2 I - r r^T)
        let shift = (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * UNIT_MASS;
        inertia += box_inertia(UNIT_MASS, 0.05, 0.05, 0.08) + shift;
    }
    inertia
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            delta: DEFAULT_DELTA,
            arm_length: DEFAULT_ARM_LENGTH,
            arm_height: DEFAULT_ARM_HEIGHT,
            torque_dir: DEFAULT_TORQUE_DIR,
            mass: DEFAULT_MASS,
            inertia: two_box_inertia(DEFAULT_MASS, DEFAULT_ARM_LENGTH, DEFAULT_ARM_HEIGHT, &DEFAULT_DELTA),
            displaced_volume: DEFAULT_BUOYANCY_RATIO * DEFAULT_MASS / WATER_DENSITY,
            cob_offset: Vec3::new(0.0, 0.0, -0.005),
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.arm_length > 0.0) {
            return Err(ParamError::new("arm_length", "must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(ParamError::new("mass", "must be positive"));
        }
        if !(self.displaced_volume >= 0.0) {
            return Err(ParamError::new("displaced_volume", "must not be negative"));
        }
        if self.torque_dir.iter().any(|b| b.abs() != 1) {
            return Err(ParamError::new("torque_dir", "entries must be +1 or -1"));
        }
        let sym = (self.inertia - self.inertia.transpose()).abs().max();
        if sym > 1e-12 * self.inertia.abs().max() {
            return Err(ParamError::new("inertia", "must be symmetric"));
        }
        if self.inertia.cholesky().is_none() {
            return Err(ParamError::new("inertia", "must be positive definite"));
        }
        let finite = self.delta.iter().chain([self.arm_height].iter()).all(|v| v.is_finite())
            && self.cob_offset.iter().all(|v| v.is_finite());
        if !finite {
            return Err(ParamError::new("geometry", "non-finite value"));
        }
        Ok(())
    }

    pub fn torque_sign(&self, unit: usize) -> f64 {
        f64::from(self.torque_dir[unit])
    }
}

/// Mount frame of unit `unit` (zero-based, 0..4).
pub fn unit_mount_frame(g: &GeometryParams, unit: usize) -> MountFrame {
    let (s, c) = g.delta[unit].sin_cos();
    MountFrame {
        origin: Vec3::new(g.arm_length * c, g.arm_length * s, g.arm_height),
        arm_axis: Vec3::new(c, s, 0.0),
        tangent: Vec3::new(-s, c, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_rotation_is_noop() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(rotate_body_to_world(&Rotation::identity(), &v), v);
    }

    #[test]
    fn half_turn_yaw_flips_x() {
        let r = Rotation::from_euler(0.0, 0.0, PI);
        let out = rotate_body_to_world(&r, &Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(out, Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn non_normalized_input_is_renormalized() {
        let r = Rotation::from_wxyz(2.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(r.quaternion().norm(), 1.0, epsilon = 1e-15);
        let r = Rotation::from_wxyz(0.0, 0.0, 0.0, 0.0);
        assert_eq!(r, Rotation::identity());
    }

    #[test]
    fn mount_frame_axis_aligned() {
        let g = GeometryParams { delta: [0.0; 4], ..Default::default() };
        let f = unit_mount_frame(&g, 0);
        assert_relative_eq!(f.origin, Vec3::new(0.19, 0.0, 0.02));
        assert_relative_eq!(f.tangent, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(f.arm_axis.dot(&f.tangent), 0.0);
    }

    #[test]
    fn mount_frame_diagonal_arm() {
        let f = unit_mount_frame(&GeometryParams::default(), 0);
        // 0.19 / sqrt(2)
        assert_relative_eq!(f.origin.x, 0.134_350_288_425_444, epsilon = 1e-12);
        assert_relative_eq!(f.origin.y, 0.134_350_288_425_444, epsilon = 1e-12);
    }

    #[test]
    fn default_geometry_is_valid() {
        let g = GeometryParams::default();
        g.validate().unwrap();
        assert!(g.inertia[(2, 2)] > g.inertia[(0, 0)]);
        assert!(g.inertia[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_pattern() {
        let g = GeometryParams { torque_dir: [1, 0, -1, -1], ..Default::default() };
        assert!(g.validate().is_err());
        let g = GeometryParams { arm_length: 0.0, ..Default::default() };
        assert!(g.validate().is_err());
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Rotation::from_wxyz(w, x, y, z))
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rotation_preserves_norm(r in arb_rotation(), v in arb_vec()) {
            let out = rotate_body_to_world(&r, &v);
            prop_assert!((out.norm() - v.norm()).abs() <= 1e-12 * v.norm().max(1.0));
        }

        #[test]
        fn rotation_round_trip(r in arb_rotation(), v in arb_vec()) {
            let back = rotate_world_to_body(&r, &rotate_body_to_world(&r, &v));
            prop_assert!((back - v).norm() <= 1e-10 * v.norm().max(1.0));
        }

        #[test]
        fn mount_frame_is_right_handed(delta in -10.0..10.0f64) {
            let g = GeometryParams { delta: [delta; 4], ..Default::default() };
            let f = unit_mount_frame(&g, 2);
            prop_assert!((f.arm_axis.norm() - 1.0).abs() < 1e-15);
            prop_assert!((f.tangent.norm() - 1.0).abs() < 1e-15);
            prop_assert!((f.arm_axis.cross(&f.tangent) - Vec3::z()).norm() < 1e-15);
        }
    }
}
