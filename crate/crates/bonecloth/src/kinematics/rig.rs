//! Virtual-bone rig: canonical bone placement, blend-weight construction and
//! the two skinning stages in their f64 reference form.

use nalgebra::{Isometry3, Matrix3, Point3, Vector3};

use crate::error::{GeometryError, KinematicsError};
use crate::geometry::{farthest_point_sample, geodesic_distances, TriMesh};
use crate::kinematics::{rotation_6d_to_matrix, rotation_to_6d, SkinnedBody};

/// Per-bone learned correction: a 6D rotation delta added to the blended bone
/// rotation's encoding, and a translation delta in meters.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoneCorrection {
    pub rot6_delta: [f64; 6],
    pub translation: Vector3<f64>,
}

/// `B` virtual bones sampled on the canonically draped garment.
#[derive(Debug, Clone)]
pub struct BoneRig {
    /// Canonical bone positions (positions of the sampled garment vertices).
    pub canonical_positions: Vec<Point3<f64>>,
    /// Garment vertex index each bone was sampled from.
    pub bone_vertices: Vec<usize>,
    /// B x K row-major joint weights copied from the nearest body vertex.
    pub joint_weights: Vec<f64>,
    /// |V_c| x B row-major initial garment blend weights (rows sum to 1).
    pub garment_weights: Vec<f64>,
    /// Geodesic blur scale used for the weight initialization (meters).
    pub sigma: f64,
    pub joint_count: usize,
}

impl BoneRig {
    pub fn bone_count(&self) -> usize {
        self.canonical_positions.len()
    }
}

/// Normalized geodesic weights `softmax_b(-d_vb / sigma)`.
///
/// `distances` is |V| x B row-major. Rows unreachable from every bone become
/// uniform and are reported in the returned flag list.
pub fn init_garment_weights(
    distances: &[f64],
    vertex_count: usize,
    bone_count: usize,
    sigma: f64,
) -> Result<(Vec<f64>, Vec<usize>), KinematicsError> {
    if sigma <= 0.0 {
        return Err(KinematicsError::NonPositiveSigma(sigma));
    }
    assert_eq!(distances.len(), vertex_count * bone_count);
    let mut weights = vec![0.0f64; vertex_count * bone_count];
    let mut unreachable = Vec::new();
    for v in 0..vertex_count {
        let row = &distances[v * bone_count..(v + 1) * bone_count];
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let out = &mut weights[v * bone_count..(v + 1) * bone_count];
        if !min.is_finite() {
            unreachable.push(v);
            out.fill(1.0 / bone_count as f64);
            continue;
        }
        let mut total = 0.0;
        for (o, &d) in out.iter_mut().zip(row) {
            // Shift by the row minimum for numerical stability; the softmax is
            // invariant to it.
            *o = if d.is_finite() { (-(d - min) / sigma).exp() } else { 0.0 };
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
    if !unreachable.is_empty() {
        log::warn!("{} garment vertices unreachable from all bones", unreachable.len());
    }
    Ok((weights, unreachable))
}

/// Row-wise softmax of `w0 + dw` (the learned weight correction).
pub fn correct_weights(
    w0: &[f64],
    dw: &[f64],
    vertex_count: usize,
    bone_count: usize,
) -> Result<Vec<f64>, KinematicsError> {
    if w0.len() != vertex_count * bone_count || dw.len() != w0.len() {
        return Err(KinematicsError::WeightShapeMismatch {
            got_rows: dw.len() / bone_count.max(1),
            got_cols: bone_count,
            rows: vertex_count,
            cols: bone_count,
        });
    }
    let mut out = vec![0.0f64; w0.len()];
    for v in 0..vertex_count {
        let base = v * bone_count;
        let mut max = f64::NEG_INFINITY;
        for b in 0..bone_count {
            let x = w0[base + b] + dw[base + b];
            if !x.is_finite() {
                return Err(KinematicsError::NonFiniteCorrection { row: v });
            }
            max = max.max(x);
        }
        let mut total = 0.0;
        for b in 0..bone_count {
            let e = (w0[base + b] + dw[base + b] - max).exp();
            out[base + b] = e;
            total += e;
        }
        for b in 0..bone_count {
            out[base + b] /= total;
        }
    }
    Ok(out)
}

/// Skeleton -> bones LBS: blend the skinning transforms applied to the
/// canonical bone position.
pub fn skin_bones(
    rig: &BoneRig,
    joint_transforms: &[Isometry3<f64>],
) -> Result<Vec<Point3<f64>>, KinematicsError> {
    if joint_transforms.len() != rig.joint_count {
        return Err(KinematicsError::TransformCountMismatch {
            got: joint_transforms.len(),
            expected: rig.joint_count,
        });
    }
    let k = rig.joint_count;
    let mut out = Vec::with_capacity(rig.bone_count());
    for (b, p) in rig.canonical_positions.iter().enumerate() {
        let mut acc = Vector3::zeros();
        for (j, t) in joint_transforms.iter().enumerate() {
            let w = rig.joint_weights[b * k + j];
            if w != 0.0 {
                acc += (t * p).coords * w;
            }
        }
        out.push(Point3::from(acc));
    }
    Ok(out)
}

/// Blend of the joint rotation matrices per bone, encoded as 6D. The blend is
/// generally not orthonormal; decoding re-orthonormalizes.
pub fn blended_bone_rotations_6d(
    rig: &BoneRig,
    joint_transforms: &[Isometry3<f64>],
) -> Vec<[f64; 6]> {
    let k = rig.joint_count;
    let rots: Vec<Matrix3<f64>> =
        joint_transforms.iter().map(|t| t.rotation.to_rotation_matrix().into_inner()).collect();
    (0..rig.bone_count())
        .map(|b| {
            let mut m = Matrix3::zeros();
            for (j, r) in rots.iter().enumerate() {
                m += r * rig.joint_weights[b * k + j];
            }
            rotation_to_6d(&m)
        })
        .collect()
}

/// Bones -> garment LBS with learned corrections.
///
/// Each bone's corrected rotation decodes `base_6d + rot6_delta`; its
/// corrected position is the posed bone plus the translation delta. A vertex
/// is the blend of `R_b (p_v - p_b) + q_b` over bones.
pub fn skin_garment(
    rig: &BoneRig,
    corrected_weights: &[f64],
    posed_bones: &[Point3<f64>],
    base_6d: &[[f64; 6]],
    corrections: &[BoneCorrection],
    canonical_vertices: &[Point3<f64>],
) -> Result<Vec<Point3<f64>>, KinematicsError> {
    let bcount = rig.bone_count();
    let vcount = canonical_vertices.len();
    if corrected_weights.len() != vcount * bcount {
        return Err(KinematicsError::WeightShapeMismatch {
            got_rows: corrected_weights.len() / bcount.max(1),
            got_cols: bcount,
            rows: vcount,
            cols: bcount,
        });
    }

    let mut rotations = Vec::with_capacity(bcount);
    let mut positions = Vec::with_capacity(bcount);
    for b in 0..bcount {
        let mut six = base_6d[b];
        for i in 0..6 {
            six[i] += corrections[b].rot6_delta[i];
        }
        rotations.push(rotation_6d_to_matrix(&six, Some(b))?);
        positions.push(posed_bones[b] + corrections[b].translation);
    }

    let mut out = Vec::with_capacity(vcount);
    for (v, pv) in canonical_vertices.iter().enumerate() {
        let mut acc = Vector3::zeros();
        for b in 0..bcount {
            let w = corrected_weights[v * bcount + b];
            if w != 0.0 {
                let offset = pv - rig.canonical_positions[b];
                acc += (rotations[b] * offset + positions[b].coords) * w;
            }
        }
        out.push(Point3::from(acc));
    }
    Ok(out)
}

/// Construct the rig on the canonically draped garment: farthest point
/// sampling for bone placement, nearest body vertex for joint weights, and
/// geodesic initialization for garment blend weights.
///
/// `sigma` defaults to `sigma_factor` times the mean nearest-bone geodesic
/// distance when not overridden.
pub fn build_bone_rig(
    draped: &TriMesh,
    body: &SkinnedBody,
    bone_count: usize,
    sigma_factor: f64,
    sigma_override: Option<f64>,
) -> Result<BoneRig, crate::error::Error> {
    // Seed at the lowest canonical y (the hem), ties to the lowest index.
    let seed = draped
        .vertices()
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.y.partial_cmp(&b.y).unwrap())
        .map(|(i, _)| i)
        .ok_or(GeometryError::ZeroSampleCount)?;
    let bone_vertices = farthest_point_sample(draped.vertices(), bone_count, seed)?;
    let canonical_positions: Vec<Point3<f64>> =
        bone_vertices.iter().map(|&v| draped.vertices()[v]).collect();

    // Joint weights: copy the skin weights of the nearest body vertex.
    let k = body.skeleton.joint_count();
    let mut joint_weights = vec![0.0f64; bone_count * k];
    for (b, p) in canonical_positions.iter().enumerate() {
        let nearest = body
            .mesh
            .vertices()
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| {
                (p - *x).norm().partial_cmp(&(p - *y).norm()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        joint_weights[b * k..(b + 1) * k]
            .copy_from_slice(&body.skin_weights[nearest * k..(nearest + 1) * k]);
    }

    // Geodesic distance matrix |V| x B, one Dijkstra per bone.
    let vcount = draped.vertex_count();
    let mut distances = vec![0.0f64; vcount * bone_count];
    for (b, &src) in bone_vertices.iter().enumerate() {
        let d = geodesic_distances(draped, &[src])?;
        for v in 0..vcount {
            distances[v * bone_count + b] = d[v];
        }
    }

    let sigma = match sigma_override {
        Some(s) => s,
        None => {
            let mean_nearest: f64 = (0..vcount)
                .map(|v| {
                    distances[v * bone_count..(v + 1) * bone_count]
                        .iter()
                        .cloned()
                        .filter(|d| d.is_finite())
                        .fold(f64::INFINITY, f64::min)
                })
                .filter(|d| d.is_finite())
                .sum::<f64>()
                / vcount as f64;
            (sigma_factor * mean_nearest).max(1e-6)
        }
    };

    let (garment_weights, _) = init_garment_weights(&distances, vcount, bone_count, sigma)?;
    Ok(BoneRig {
        canonical_positions,
        bone_vertices,
        joint_weights,
        garment_weights,
        sigma,
        joint_count: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Translation3, UnitQuaternion};

    fn toy_rig() -> BoneRig {
        BoneRig {
            canonical_positions: vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)],
            bone_vertices: vec![0, 1],
            joint_weights: vec![1.0, 0.0, 0.5, 0.5],
            garment_weights: vec![0.6, 0.4],
            sigma: 0.1,
            joint_count: 2,
        }
    }

    #[test]
    fn identity_transforms_keep_bones() {
        let rig = toy_rig();
        let posed = skin_bones(&rig, &[Isometry3::identity(), Isometry3::identity()]).unwrap();
        assert_eq!(posed[0], rig.canonical_positions[0]);
        assert_eq!(posed[1], rig.canonical_positions[1]);
    }

    #[test]
    fn equal_translations_translate_bones() {
        let rig = toy_rig();
        let t = Isometry3::from_parts(
            Translation3::new(0.5, -1.0, 2.0),
            UnitQuaternion::identity(),
        );
        let posed = skin_bones(&rig, &[t, t]).unwrap();
        assert_relative_eq!(posed[1].x, 1.5, epsilon = 1e-12);
        assert_relative_eq!(posed[1].y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn half_weights_average_translations() {
        let rig = toy_rig();
        let t1 = Isometry3::translation(1.0, 0.0, 0.0);
        let t2 = Isometry3::translation(0.0, 2.0, 0.0);
        let posed = skin_bones(&rig, &[t1, t2]).unwrap();
        // Bone 1 has weights (0.5, 0.5): canonical + mean translation.
        assert_relative_eq!(posed[1].x, 1.5, epsilon = 1e-12);
        assert_relative_eq!(posed[1].y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_weight_values() {
        // One bone: all weights 1.
        let (w, _) = init_garment_weights(&[0.3, 1.7], 2, 1, 0.5).unwrap();
        assert_eq!(w, vec![1.0, 1.0]);

        // Equidistant from two bones: (0.5, 0.5).
        let (w, _) = init_garment_weights(&[0.7, 0.7], 1, 2, 0.5).unwrap();
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-12);

        // d = (0, sigma): 1/(1+e^-1) vs e^-1/(1+e^-1).
        let (w, _) = init_garment_weights(&[0.0, 0.5], 1, 2, 0.5).unwrap();
        let e1 = (-1.0f64).exp();
        assert_relative_eq!(w[0], 1.0 / (1.0 + e1), epsilon = 1e-12);
        assert_relative_eq!(w[1], e1 / (1.0 + e1), epsilon = 1e-12);
        assert_relative_eq!(w[0], 0.7311, epsilon = 1e-4);
    }

    #[test]
    fn unreachable_vertex_gets_uniform_row() {
        let (w, flagged) =
            init_garment_weights(&[f64::INFINITY, f64::INFINITY], 1, 2, 0.5).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert_eq!(flagged, vec![0]);
    }

    #[test]
    fn corrected_weights_softmax_and_shift_invariance() {
        // Row (1, 0) with zero delta: softmax(1, 0).
        let w = correct_weights(&[1.0, 0.0], &[0.0, 0.0], 1, 2).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(w[0], e / (e + 1.0), epsilon = 1e-12);
        assert_relative_eq!(w[0], 0.7311, epsilon = 1e-4);

        // Adding a constant to the whole row changes nothing.
        let shifted = correct_weights(&[1.0, 0.0], &[3.25, 3.25], 1, 2).unwrap();
        assert_relative_eq!(w[0], shifted[0], epsilon = 1e-12);

        // A huge delta on one bone saturates to one-hot.
        let hot = correct_weights(&[1.0, 0.0], &[0.0, 50.0], 1, 2).unwrap();
        assert!(hot[1] > 0.999999);

        // Rows always sum to 1.
        let any = correct_weights(&[0.2, 0.8], &[-4.0, 2.5], 1, 2).unwrap();
        assert_relative_eq!(any[0] + any[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_correction_rejected() {
        let err = correct_weights(&[1.0, 0.0], &[f64::NAN, 0.0], 1, 2).unwrap_err();
        assert!(matches!(err, KinematicsError::NonFiniteCorrection { row: 0 }));
    }

    #[test]
    fn zero_corrections_identity_pose_reproduces_canonical() {
        let rig = toy_rig();
        let verts = vec![
            Point3::new(0.3, 0.2, -0.1),
            Point3::new(0.9, -0.4, 0.5),
            Point3::new(0.5, 0.5, 0.5),
        ];
        let ident = vec![Isometry3::identity(); 2];
        let posed = skin_bones(&rig, &ident).unwrap();
        let base = blended_bone_rotations_6d(&rig, &ident);
        let weights = vec![0.5, 0.5, 0.2, 0.8, 1.0, 0.0];
        let out = skin_garment(
            &rig,
            &weights,
            &posed,
            &base,
            &[BoneCorrection::default(); 2],
            &verts,
        )
        .unwrap();
        for (o, v) in out.iter().zip(&verts) {
            assert!((o - v).norm() <= 1e-12);
        }
    }

    #[test]
    fn rigid_transform_applied_to_all_joints_is_equivariant() {
        let rig = toy_rig();
        let verts =
            vec![Point3::new(0.3, 0.2, -0.1), Point3::new(0.9, -0.4, 0.5)];
        let weights = vec![0.5, 0.5, 0.2, 0.8];
        let rot = Rotation3::from_euler_angles(0.4, -0.2, 1.1);
        let iso = Isometry3::from_parts(
            Translation3::new(0.3, 1.0, -0.7),
            UnitQuaternion::from_rotation_matrix(&rot),
        );
        let posed = skin_bones(&rig, &[iso, iso]).unwrap();
        let base = blended_bone_rotations_6d(&rig, &[iso, iso]);
        let out = skin_garment(
            &rig,
            &weights,
            &posed,
            &base,
            &[BoneCorrection::default(); 2],
            &verts,
        )
        .unwrap();
        for (o, v) in out.iter().zip(&verts) {
            let expected = iso * v;
            assert!((o - expected).norm() <= 1e-6, "{o:?} vs {expected:?}");
        }
    }

    #[test]
    fn single_bone_translation_correction_translates_everything() {
        let rig = BoneRig {
            canonical_positions: vec![Point3::new(0.0, 0.0, 0.0)],
            bone_vertices: vec![0],
            joint_weights: vec![1.0],
            garment_weights: vec![1.0, 1.0],
            sigma: 0.1,
            joint_count: 1,
        };
        let verts = vec![Point3::new(0.5, 0.0, 0.0), Point3::new(0.0, 0.5, 0.0)];
        let ident = vec![Isometry3::identity()];
        let posed = skin_bones(&rig, &ident).unwrap();
        let base = blended_bone_rotations_6d(&rig, &ident);
        let corr = BoneCorrection {
            rot6_delta: [0.0; 6],
            translation: Vector3::new(0.0, 0.0, 0.25),
        };
        let out =
            skin_garment(&rig, &[1.0, 1.0], &posed, &base, &[corr], &verts).unwrap();
        for (o, v) in out.iter().zip(&verts) {
            assert_relative_eq!((o - v - Vector3::new(0.0, 0.0, 0.25)).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
