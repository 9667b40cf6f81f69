//! Environmental loads: gravity, buoyancy with restoring moment, drag and
//! added mass, blended across the water surface.

use crate::error::ParamError;
use crate::frames::{rotate_world_to_body, BodyWrench, GeometryParams, Vec3, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    pub density: f64,
    /// Per-axis linear drag (N·s/m), body frame.
    pub drag_linear: Vec3,
    /// Per-axis quadratic drag (N·s²/m²), body frame.
    pub drag_quadratic: Vec3,
    /// Per-axis quadratic rotational drag (N·m·s²).
    pub rot_drag_quadratic: Vec3,
    /// Diagonal added mass: surge, sway, heave (kg), then roll, pitch, yaw (kg·m²).
    pub added_mass: [f64; 6],
}

impl Medium {
    pub fn air() -> Self {
        Medium {
            density: 1.225,
            drag_linear: Vec3::zeros(),
            drag_quadratic: Vec3::new(0.04, 0.04, 0.08),
            rot_drag_quadratic: Vec3::new(2e-4, 2e-4, 2e-4),
            added_mass: [0.0; 6],
        }
    }

    /// Water with added mass sized for `g`: 30 % of the mass in translation
    /// and 20 % of the principal inertia in rotation.
    pub fn water(g: &GeometryParams) -> Self {
        let ma = 0.3 * g.mass;
        Medium {
            density: 1000.0,
            drag_linear: Vec3::new(3.0, 3.0, 4.0),
            drag_quadratic: Vec3::new(28.0, 28.0, 60.0),
            rot_drag_quadratic: Vec3::new(0.08, 0.08, 0.06),
            added_mass: [ma, ma, ma, 0.2 * g.inertia[(0, 0)], 0.2 * g.inertia[(1, 1)], 0.2 * g.inertia[(2, 2)]],
        }
    }

    /// No drag and no added mass.
    pub fn vacuum() -> Self {
        Medium {
            density: 0.0,
            drag_linear: Vec3::zeros(),
            drag_quadratic: Vec3::zeros(),
            rot_drag_quadratic: Vec3::zeros(),
            added_mass: [0.0; 6],
        }
    }

    pub fn lerp(a: &Medium, b: &Medium, f: f64) -> Medium {
        let mix = |x: f64, y: f64| x + (y - x) * f;
        let mut added_mass = [0.0; 6];
        for (i, m) in added_mass.iter_mut().enumerate() {
            *m = mix(a.added_mass[i], b.added_mass[i]);
        }
        Medium {
            density: mix(a.density, b.density),
            drag_linear: a.drag_linear.lerp(&b.drag_linear, f),
            drag_quadratic: a.drag_quadratic.lerp(&b.drag_quadratic, f),
            rot_drag_quadratic: a.rot_drag_quadratic.lerp(&b.rot_drag_quadratic, f),
            added_mass,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(ParamError::new("density", "must not be negative"));
        }
        let coeffs = self
            .drag_linear
            .iter()
            .chain(self.drag_quadratic.iter())
            .chain(self.rot_drag_quadratic.iter())
            .chain(self.added_mass.iter());
        for c in coeffs {
            if !(*c >= 0.0 && c.is_finite()) {
                return Err(ParamError::new("medium", "drag and added-mass entries must not be negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuoyancyModel {
    pub displaced_volume: f64,
    pub cob_offset: Vec3,
    /// Vertical span over which the submerged fraction ramps from 0 to 1 (m).
    pub submersion_band: f64,
}

impl BuoyancyModel {
    pub fn from_geometry(g: &GeometryParams, submersion_band: f64) -> Self {
        BuoyancyModel { displaced_volume: g.displaced_volume, cob_offset: g.cob_offset, submersion_band }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.submersion_band > 0.0) {
            return Err(ParamError::new("submersion_band", "must be positive"));
        }
        if !(self.displaced_volume >= 0.0) {
            return Err(ParamError::new("displaced_volume", "must not be negative"));
        }
        Ok(())
    }
}

/// Submerged fraction at CoG depth `z`, linear across the band centered on
/// the surface.
pub fn submerged_fraction(z: f64, band: f64) -> f64 {
    ((z + 0.5 * band) / band).clamp(0.0, 1.0)
}

pub fn medium_at_depth(z: f64, air: &Medium, water: &Medium, band: f64) -> (Medium, f64) {
    let f = submerged_fraction(z, band);
    let medium = if f == 0.0 {
        *air
    } else if f == 1.0 {
        *water
    } else {
        Medium::lerp(air, water, f)
    };
    (medium, f)
}

pub fn gravity_wrench(state: &VehicleState, mass: f64, gravity: f64) -> BodyWrench {
    BodyWrench::new(rotate_world_to_body(&state.attitude, &Vec3::new(0.0, 0.0, mass * gravity)), Vec3::zeros())
}

/// Buoyant force acting at the center of buoyancy, in the body frame.
pub fn buoyancy_wrench(
    state: &VehicleState,
    b: &BuoyancyModel,
    water_density: f64,
    fraction: f64,
    gravity: f64,
) -> BodyWrench {
    if fraction <= 0.0 {
        return BodyWrench::zero();
    }
    let lift = water_density * gravity * b.displaced_volume * fraction;
    let force = rotate_world_to_body(&state.attitude, &Vec3::new(0.0, 0.0, -lift));
    BodyWrench::new(force, b.cob_offset.cross(&force))
}

pub fn drag_wrench(state: &VehicleState, m: &Medium) -> BodyWrench {
    let v = state.velocity;
    let w = state.body_rates;
    let force = -(m.drag_linear.component_mul(&v) + m.drag_quadratic.component_mul(&v.abs().component_mul(&v)));
    let moment = -m.rot_drag_quadratic.component_mul(&w.abs().component_mul(&w));
    BodyWrench::new(force, moment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Rotation;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn level() -> VehicleState {
        VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.0))
    }

    #[test]
    fn depth_selects_medium() {
        let g = GeometryParams::default();
        let (air, water) = (Medium::air(), Medium::water(&g));
        assert_eq!(medium_at_depth(-1.0, &air, &water, 0.2), (air, 0.0));
        assert_eq!(medium_at_depth(1.0, &air, &water, 0.2), (water, 1.0));
        let (m, f) = medium_at_depth(0.0, &air, &water, 0.2);
        assert_eq!(f, 0.5);
        assert_relative_eq!(m.density, 0.5 * (1.225 + 1000.0));
    }

    #[test]
    fn dry_vehicle_has_no_buoyancy() {
        let b = BuoyancyModel::from_geometry(&GeometryParams::default(), 0.1);
        assert_eq!(buoyancy_wrench(&level(), &b, 1000.0, 0.0, 9.81), BodyWrench::zero());
    }

    #[test]
    fn level_buoyancy_has_no_moment() {
        let g = GeometryParams { cob_offset: Vec3::new(0.0, 0.0, -0.03), ..Default::default() };
        let b = BuoyancyModel::from_geometry(&g, 0.1);
        let w = buoyancy_wrench(&level(), &b, 1000.0, 1.0, 9.81);
        assert_eq!(w.moment, Vec3::zeros());
        assert!(w.force.z < 0.0);
    }

    #[test]
    fn rolled_buoyancy_restores() {
        let b =
            BuoyancyModel { displaced_volume: 1.63e-3, cob_offset: Vec3::new(0.0, 0.0, -0.03), submersion_band: 0.1 };
        let mut s = level();
        let roll = 10f64.to_radians();
        s.attitude = Rotation::from_euler(roll, 0.0, 0.0);
        let w = buoyancy_wrench(&s, &b, 1000.0, 1.0, 9.81);
        let expected = 1000.0 * 9.81 * 1.63e-3 * 0.03 * roll.sin();
        assert_relative_eq!(w.moment.norm(), expected, max_relative = 1e-12);
        assert!(w.moment.x < 0.0, "moment must oppose the roll");
    }

    #[test]
    fn drag_cases() {
        let m = Medium::water(&GeometryParams::default());
        assert_eq!(drag_wrench(&level(), &m), BodyWrench::zero());
        let mut s = level();
        s.velocity = Vec3::new(1.0, 0.0, 0.0);
        let quad = Medium { drag_linear: Vec3::zeros(), drag_quadratic: Vec3::new(10.0, 0.0, 0.0), ..m };
        assert_eq!(drag_wrench(&s, &quad).force, Vec3::new(-10.0, 0.0, 0.0));
    }

    #[test]
    fn neutral_buoyancy_balances_weight() {
        let mut g = GeometryParams::default();
        g.displaced_volume = g.mass / 1000.0;
        let b = BuoyancyModel::from_geometry(&g, 0.1);
        let s = level();
        let net = gravity_wrench(&s, g.mass, 9.81) + buoyancy_wrench(&s, &b, 1000.0, 1.0, 9.81);
        assert!(net.force.z.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn drag_is_dissipative(
            v in prop::array::uniform3(-5.0..5.0f64),
            w in prop::array::uniform3(-10.0..10.0f64),
        ) {
            let m = Medium::water(&GeometryParams::default());
            let mut s = level();
            s.velocity = Vec3::from(v);
            s.body_rates = Vec3::from(w);
            let d = drag_wrench(&s, &m);
            prop_assert!(d.force.dot(&s.velocity) <= 0.0);
            prop_assert!(d.moment.dot(&s.body_rates) <= 0.0);
        }

        #[test]
        fn restoring_moment_vanishes_only_when_aligned(roll in -1.5..1.5f64, pitch in -1.5..1.5f64) {
            let b = BuoyancyModel { displaced_volume: 1.6e-3, cob_offset: Vec3::new(0.0, 0.0, -0.02), submersion_band: 0.1 };
            let mut s = level();
            s.attitude = Rotation::from_euler(roll, pitch, 0.0);
            let m = buoyancy_wrench(&s, &b, 1000.0, 1.0, 9.81).moment.norm();
            let tilted = roll.abs() > 1e-3 || pitch.abs() > 1e-3;
            prop_assert_eq!(m > 1e-9, tilted);
        }
    }
}
