//! Plain f64 cloth energies and forces. The drape solver integrates these;
//! they also serve as independent value oracles for the taped losses.

use nalgebra::{Point3, Vector3};

use crate::geometry::{BodySdf, TriMesh};

/// Mass-spring stretch energy: mean over edges of `(k/2) (|e| - rest)^2`.
pub fn stretch_energy(positions: &[Point3<f64>], mesh: &TriMesh, rest: &[f64], k: f64) -> f64 {
    let mut total = 0.0;
    for (e, &r) in mesh.edges().iter().zip(rest) {
        let len = (positions[e[0]] - positions[e[1]]).norm();
        total += 0.5 * k * (len - r) * (len - r);
    }
    total / mesh.edges().len() as f64
}

/// Spring forces (negative stretch-energy gradient, unnormalized by edge count).
pub fn stretch_forces(
    positions: &[Point3<f64>],
    mesh: &TriMesh,
    rest: &[f64],
    k: f64,
    out: &mut [Vector3<f64>],
) {
    for (e, &r) in mesh.edges().iter().zip(rest) {
        let d = positions[e[0]] - positions[e[1]];
        let len = d.norm();
        if len < 1e-12 {
            continue;
        }
        let f = d * (k * (len - r) / len);
        out[e[0]] -= f;
        out[e[1]] += f;
    }
}

/// Signed dihedral angle at a hinge, measured as the deviation from flat.
/// Returns `None` when a face normal degenerates.
pub fn dihedral_angle(
    p0: &Point3<f64>,
    p1: &Point3<f64>,
    p2: &Point3<f64>,
    p3: &Point3<f64>,
) -> Option<f64> {
    let e = p1 - p0;
    let n1 = e.cross(&(p2 - p0));
    let n2 = (p3 - p0).cross(&e);
    let elen = e.norm();
    if n1.norm() < 1e-12 || n2.norm() < 1e-12 || elen < 1e-12 {
        return None;
    }
    let n1h = n1.normalize();
    let n2h = n2.normalize();
    let sin = n1h.cross(&n2h).dot(&(e / elen));
    let cos = n1h.dot(&n2h);
    Some(sin.atan2(cos))
}

/// Dihedral bending energy: mean over interior edges of
/// `(k/2) (theta - theta_rest)^2`. Degenerate hinges are skipped.
pub fn bend_energy(
    positions: &[Point3<f64>],
    mesh: &TriMesh,
    rest_angles: &[f64],
    k: f64,
) -> f64 {
    let hinges = mesh.hinges();
    if hinges.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (h, &rest) in hinges.iter().zip(rest_angles) {
        let [a, b] = h.edge;
        let [c, d] = h.opposite;
        if let Some(theta) =
            dihedral_angle(&positions[a], &positions[b], &positions[c], &positions[d])
        {
            total += 0.5 * k * (theta - rest) * (theta - rest);
        }
    }
    total / hinges.len() as f64
}

/// Rest dihedral angles of a mesh in its template configuration.
pub fn rest_dihedrals(mesh: &TriMesh) -> Vec<f64> {
    mesh.hinges()
        .iter()
        .map(|h| {
            dihedral_angle(
                &mesh.vertices()[h.edge[0]],
                &mesh.vertices()[h.edge[1]],
                &mesh.vertices()[h.opposite[0]],
                &mesh.vertices()[h.opposite[1]],
            )
            .unwrap_or(0.0)
        })
        .collect()
}

/// Cubic collision penalty: mean over vertices of `(k/3) max(0, margin - d)^3`.
pub fn collision_energy(positions: &[Point3<f64>], sdf: &BodySdf, k: f64, margin: f64) -> f64 {
    if positions.is_empty() || sdf.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for p in positions {
        let pen = (margin - sdf.signed_distance(p)).max(0.0);
        total += (k / 3.0) * pen * pen * pen;
    }
    total / positions.len() as f64
}

/// Penalty forces pushing penetrating vertices along the SDF gradient.
pub fn collision_forces(
    positions: &[Point3<f64>],
    sdf: &BodySdf,
    k: f64,
    margin: f64,
    out: &mut [Vector3<f64>],
) {
    if sdf.is_empty() {
        return;
    }
    for (i, p) in positions.iter().enumerate() {
        let (d, grad) = sdf.distance_and_gradient(p);
        let pen = margin - d;
        if pen > 0.0 {
            out[i] += grad * (k * pen * pen);
        }
    }
}

pub fn gravity_forces(masses: &[f64], g: &Vector3<f64>, out: &mut [Vector3<f64>]) {
    for (f, &m) in out.iter_mut().zip(masses) {
        *f += g * m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stretch_zero_at_rest_and_quadratic_away() {
        let (mesh, _) = crate::assets::grid_swatch(3, 3, 0.2);
        let rest = mesh.edge_lengths();
        assert_relative_eq!(
            stretch_energy(mesh.vertices(), &mesh, &rest, 25.0),
            0.0,
            epsilon = 1e-15
        );
        // A single edge of rest length 1 stretched to 2 with k = 1 gives 0.5.
        let verts =
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), Point3::new(1.0, 2.0, 0.0)];
        let tri = TriMesh::new(
            verts.clone(),
            vec![[0, 1, 2]],
            vec![[[0.0; 2]; 3]],
        )
        .unwrap();
        // Only probe the first edge: set other rest lengths to current.
        let mut rest = tri.edge_lengths();
        let first = tri.edges().iter().position(|e| *e == [0, 1]).unwrap();
        rest[first] = 1.0;
        let e = stretch_energy(&verts, &tri, &rest, 1.0);
        assert_relative_eq!(e, 0.5 / tri.edges().len() as f64, epsilon = 1e-12);
    }

    #[test]
    fn dihedral_flat_is_zero_and_right_angle_is_half_pi() {
        let p0 = Point3::new(0.0, 0.0, 0.0);
        let p1 = Point3::new(1.0, 0.0, 0.0);
        let p2 = Point3::new(0.5, 1.0, 0.0);
        let flat = Point3::new(0.5, -1.0, 0.0);
        assert_relative_eq!(dihedral_angle(&p0, &p1, &p2, &flat).unwrap(), 0.0, epsilon = 1e-12);
        let folded = Point3::new(0.5, 0.0, 1.0);
        assert_relative_eq!(
            dihedral_angle(&p0, &p1, &p2, &folded).unwrap().abs(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bend_energy_of_right_angle_fold() {
        // Two unit triangles folded to 90 degrees from a flat rest state.
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, 1.0, 0.0),
            Point3::new(0.5, 0.0, 1.0),
        ];
        let mesh = TriMesh::new(
            verts.clone(),
            vec![[0, 1, 2], [1, 0, 3]],
            vec![[[0.0; 2]; 3]; 2],
        )
        .unwrap();
        let rest = vec![0.0; mesh.hinges().len()];
        let e = bend_energy(&verts, &mesh, &rest, 1.0);
        let expected = 0.5 * (std::f64::consts::FRAC_PI_2).powi(2);
        assert_relative_eq!(e, expected, epsilon = 1e-12);
    }

    #[test]
    fn collision_energy_matches_hand_value() {
        let sdf = BodySdf::new(vec![crate::geometry::Capsule {
            a: Point3::new(-1.0, 0.0, 0.0),
            b: Point3::new(1.0, 0.0, 0.0),
            radius: 0.1,
        }])
        .unwrap();
        let margin = 0.01;
        // d = margin - 0.01 means penetration depth 0.01 under the margin.
        let d_target = margin - 0.01;
        let p = Point3::new(0.0, 0.1 + d_target, 0.0);
        let e = collision_energy(&[p], &sdf, 1.0e3, margin);
        assert_relative_eq!(e, (1.0e3 / 3.0) * 1.0e-6, epsilon = 1e-12);
        // Outside the margin: zero.
        let far = Point3::new(0.0, 1.0, 0.0);
        assert_eq!(collision_energy(&[far], &sdf, 1.0e3, margin), 0.0);
    }

    #[test]
    fn collision_force_points_along_outward_gradient() {
        let sdf = BodySdf::new(vec![crate::geometry::Capsule {
            a: Point3::new(-1.0, 0.0, 0.0),
            b: Point3::new(1.0, 0.0, 0.0),
            radius: 0.1,
        }])
        .unwrap();
        let p = Point3::new(0.0, 0.05, 0.0); // inside the capsule
        let mut f = vec![Vector3::zeros()];
        collision_forces(&[p], &sdf, 1.0e3, 0.004, &mut f);
        assert!(f[0].y > 0.0);
        assert_relative_eq!(f[0].x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn stretch_force_is_negative_gradient() {
        let (mesh, _) = crate::assets::grid_swatch(3, 3, 0.2);
        let rest = mesh.edge_lengths();
        let mut positions = mesh.vertices().to_vec();
        positions[4] += Vector3::new(0.03, -0.02, 0.05);
        let k = 25.0;
        let h = 1e-6;
        let mut forces = vec![Vector3::zeros(); positions.len()];
        stretch_forces(&positions, &mesh, &rest, k, &mut forces);
        let n_edges = mesh.edges().len() as f64;
        for axis in 0..3 {
            let mut plus = positions.clone();
            plus[4][axis] += h;
            let mut minus = positions.clone();
            minus[4][axis] -= h;
            let de = (stretch_energy(&plus, &mesh, &rest, k)
                - stretch_energy(&minus, &mesh, &rest, k))
                / (2.0 * h);
            // energy is mean-normalized; forces are raw spring forces
            assert_relative_eq!(-de * n_edges, forces[4][axis], epsilon = 1e-4);
        }
    }
}
