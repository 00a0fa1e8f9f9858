//! Quasi-static drape: damped explicit integration of stretch, gravity and
//! collision forces until the cloth comes to rest.

use nalgebra::{Point3, Vector3};

use crate::geometry::{BodySdf, TriMesh};
use crate::physics::{collision_forces, gravity_forces, stretch_forces, ClothMaterial};

#[derive(Debug, Clone, Copy)]
pub struct DrapeParams {
    pub gravity: Vector3<f64>,
    /// Velocity damping per second.
    pub damping: f64,
    pub max_steps: usize,
    /// Rest threshold on the maximum vertex speed (m/s).
    pub rest_speed: f64,
}

impl Default for DrapeParams {
    fn default() -> Self {
        Self {
            gravity: Vector3::new(0.0, -9.81, 0.0),
            damping: 8.0,
            max_steps: 20_000,
            rest_speed: 2.0e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DrapeReport {
    pub steps: usize,
    pub final_max_speed: f64,
    pub converged: bool,
}

/// Relax `initial` positions to rest. Rest lengths come from the template
/// mesh; pinned vertices are held at their initial positions throughout.
pub fn drape(
    template: &TriMesh,
    initial: &[Point3<f64>],
    sdf: &BodySdf,
    material: &ClothMaterial,
    pinned: &[usize],
    params: &DrapeParams,
) -> (Vec<Point3<f64>>, DrapeReport) {
    let n = initial.len();
    let rest = template.edge_lengths();
    let masses = crate::physics::vertex_masses(template, material.density);
    let min_mass = masses.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-9);
    // Explicit-integration stability bound for the stiffest spring.
    let dt = 0.3 * (min_mass / material.stretch_stiffness.max(1e-9)).sqrt();

    let mut positions = initial.to_vec();
    let mut velocities = vec![Vector3::zeros(); n];
    let mut forces = vec![Vector3::zeros(); n];
    let mut is_pinned = vec![false; n];
    for &p in pinned {
        is_pinned[p] = true;
    }

    let mut steps = 0;
    let mut max_speed = f64::INFINITY;
    while steps < params.max_steps {
        forces.iter_mut().for_each(|f| *f = Vector3::zeros());
        stretch_forces(&positions, template, &rest, material.stretch_stiffness, &mut forces);
        collision_forces(
            &positions,
            sdf,
            material.collision_stiffness,
            material.collision_margin,
            &mut forces,
        );
        gravity_forces(&masses, &params.gravity, &mut forces);

        max_speed = 0.0f64;
        let decay = (-params.damping * dt).exp();
        for i in 0..n {
            if is_pinned[i] {
                velocities[i] = Vector3::zeros();
                continue;
            }
            velocities[i] = (velocities[i] + forces[i] * (dt / masses[i])) * decay;
            positions[i] += velocities[i] * dt;
            max_speed = max_speed.max(velocities[i].norm());
        }
        steps += 1;
        if max_speed < params.rest_speed {
            break;
        }
    }
    let converged = max_speed < params.rest_speed;
    if !converged {
        log::warn!("drape did not settle: max speed {max_speed:.2e} after {steps} steps");
    }
    (positions, DrapeReport { steps, final_max_speed: max_speed, converged })
}
