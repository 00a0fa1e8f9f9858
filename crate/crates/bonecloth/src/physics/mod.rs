//! Cloth material, simulation state, symplectic Euler integration, energies
//! and the quasi-static drape solver. The differentiable training losses live
//! in [`losses`]; this module is the plain f64 side.

mod drape;
mod energy;
pub mod losses;

pub use drape::{drape, DrapeParams, DrapeReport};
pub use energy::{
    bend_energy, collision_energy, collision_forces, dihedral_angle, gravity_forces,
    rest_dihedrals, stretch_energy, stretch_forces,
};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::PhysicsError;

/// Cloth constitutive parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClothMaterial {
    /// Stretch stiffness (N/m per unit rest length).
    pub stretch_stiffness: f64,
    /// Dihedral bending stiffness.
    pub bend_stiffness: f64,
    /// Area density (kg/m^2).
    pub density: f64,
    /// Friction coefficient.
    pub friction: f64,
    /// Collision penalty stiffness.
    pub collision_stiffness: f64,
    /// Collision margin (m): the penalty activates inside this clearance.
    pub collision_margin: f64,
}

impl Default for ClothMaterial {
    fn default() -> Self {
        Self {
            stretch_stiffness: 50.0,
            bend_stiffness: 0.01,
            density: 0.15,
            friction: 0.5,
            collision_stiffness: 1.0e3,
            collision_margin: 4.0e-3,
        }
    }
}

/// Multipliers of the self-supervised physics loss terms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub stretch: f64,
    pub bend: f64,
    pub collision: f64,
    pub inertia: f64,
    pub friction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { stretch: 1.0, bend: 0.05, collision: 1.0e3, inertia: 1.0, friction: 0.1 }
    }
}

/// Per-cloth-vertex integration state. Velocities persist across frames; the
/// two previous integrated position frames back the inertia target.
#[derive(Debug, Clone)]
pub struct SimState {
    pub positions: Vec<Point3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub prev_positions: Vec<Point3<f64>>,
    pub prev_prev_positions: Vec<Point3<f64>>,
}

impl SimState {
    /// State at rest: zero velocity, history filled with the same frame.
    pub fn at_rest(positions: Vec<Point3<f64>>) -> Self {
        let velocities = vec![Vector3::zeros(); positions.len()];
        Self {
            prev_positions: positions.clone(),
            prev_prev_positions: positions.clone(),
            positions,
            velocities,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Symplectic Euler step: velocity first, then position with the new
/// velocity. The history window shifts by one frame.
pub fn integrate(
    state: &SimState,
    accelerations: &[Vector3<f64>],
    dt: f64,
) -> Result<SimState, PhysicsError> {
    if accelerations.len() != state.len() {
        return Err(PhysicsError::StateSizeMismatch {
            got: accelerations.len(),
            expected: state.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(PhysicsError::NonPositiveDt(dt));
    }
    for (v, a) in accelerations.iter().enumerate() {
        if !(a.x.is_finite() && a.y.is_finite() && a.z.is_finite()) {
            return Err(PhysicsError::NonFiniteAcceleration { vertex: v });
        }
    }
    let mut velocities = Vec::with_capacity(state.len());
    let mut positions = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let v = state.velocities[i] + accelerations[i] * dt;
        positions.push(state.positions[i] + v * dt);
        velocities.push(v);
    }
    Ok(SimState {
        prev_prev_positions: state.prev_positions.clone(),
        prev_positions: state.positions.clone(),
        positions,
        velocities,
    })
}

/// Per-vertex lumped mass: density times a third of incident triangle rest area.
pub fn vertex_masses(mesh: &crate::geometry::TriMesh, density: f64) -> Vec<f64> {
    mesh.vertex_areas().iter().map(|a| a * density).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_acceleration_moves_linearly() {
        let state = SimState {
            positions: vec![Point3::origin()],
            velocities: vec![Vector3::new(1.0, 0.0, 0.0)],
            prev_positions: vec![Point3::origin()],
            prev_prev_positions: vec![Point3::origin()],
        };
        let next = integrate(&state, &[Vector3::zeros()], 0.1).unwrap();
        assert_eq!(next.positions[0], Point3::new(0.1, 0.0, 0.0));
        // Exactly linear: the same displacement again next step.
        let next2 = integrate(&next, &[Vector3::zeros()], 0.1).unwrap();
        assert_eq!(next2.positions[0], Point3::new(0.2, 0.0, 0.0));
    }

    #[test]
    fn constant_gravity_first_step() {
        let state = SimState::at_rest(vec![Point3::new(0.0, 2.0, 0.0)]);
        let g = Vector3::new(0.0, -10.0, 0.0);
        let next = integrate(&state, &[g], 0.1).unwrap();
        assert_relative_eq!(next.velocities[0].y, -1.0, epsilon = 1e-15);
        assert_relative_eq!(next.positions[0].y, 2.0 - 0.1, epsilon = 1e-15);
    }

    #[test]
    fn free_fall_matches_analytic_within_first_order_bound() {
        let g = 9.81;
        let dt = 0.01;
        let mut state = SimState::at_rest(vec![Point3::new(0.0, 0.0, 0.0)]);
        let accel = vec![Vector3::new(0.0, -g, 0.0)];
        for n in 1..=100 {
            state = integrate(&state, &accel, dt).unwrap();
            let t = n as f64 * dt;
            let analytic = -0.5 * g * t * t;
            let bound = g * dt * t;
            assert!(
                (state.positions[0].y - analytic).abs() <= bound,
                "step {n}: {} vs {analytic}",
                state.positions[0].y
            );
        }
    }

    #[test]
    fn non_finite_acceleration_reports_vertex() {
        let state = SimState::at_rest(vec![Point3::origin(), Point3::origin()]);
        let err = integrate(
            &state,
            &[Vector3::zeros(), Vector3::new(f64::NAN, 0.0, 0.0)],
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, PhysicsError::NonFiniteAcceleration { vertex: 1 }));
    }
}
