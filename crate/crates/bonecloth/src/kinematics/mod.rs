//! Skeleton forward kinematics, 6D rotations, virtual-bone rigs and the two
//! linear-blend-skinning stages (skeleton -> bones, bones -> garment).

mod body;
mod pose_file;
mod rig;
mod rot6;

pub use body::{BodyCapsuleDef, JointDef, SkinnedBody};
pub use pose_file::{read_pose_sequence, write_pose_sequence, PoseSequence};
pub use rig::{
    blended_bone_rotations_6d, build_bone_rig, correct_weights, init_garment_weights, skin_bones,
    skin_garment,
    BoneCorrection, BoneRig,
};
pub use rot6::{rotation_6d_to_matrix, rotation_to_6d};

use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion};

use crate::error::KinematicsError;

/// Articulated skeleton with topologically sorted joints.
///
/// Rest transforms are local offsets relative to the parent joint.
#[derive(Debug, Clone)]
pub struct Skeleton {
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    rest_local: Vec<Isometry3<f64>>,
    rest_world: Vec<Isometry3<f64>>,
}

impl Skeleton {
    pub fn new(
        names: Vec<String>,
        parents: Vec<Option<usize>>,
        rest_rotations: Vec<Rotation3<f64>>,
        rest_translations: Vec<nalgebra::Vector3<f64>>,
    ) -> Result<Self, KinematicsError> {
        let k = parents.len();
        for (j, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                if *p >= j {
                    return Err(KinematicsError::UnsortedParent { joint: j, parent: *p });
                }
            }
        }
        let mut rest_local = Vec::with_capacity(k);
        for j in 0..k {
            let r = rest_rotations[j];
            let m = r.matrix();
            let orth = (m.transpose() * m - nalgebra::Matrix3::identity()).norm();
            if orth > 1e-6 {
                return Err(KinematicsError::NonRigidRest { joint: j });
            }
            rest_local.push(Isometry3::from_parts(
                Translation3::from(rest_translations[j]),
                UnitQuaternion::from_rotation_matrix(&r),
            ));
        }
        let mut rest_world = vec![Isometry3::identity(); k];
        for j in 0..k {
            rest_world[j] = match parents[j] {
                Some(p) => rest_world[p] * rest_local[j],
                None => rest_local[j],
            };
        }
        Ok(Self { names, parents, rest_local, rest_world })
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn rest_local(&self) -> &[Isometry3<f64>] {
        &self.rest_local
    }

    /// World transforms of every joint in the rest pose.
    pub fn rest_world(&self) -> &[Isometry3<f64>] {
        &self.rest_world
    }

    /// Forward kinematics: world transform of joint k is
    /// `parent_world * rest_local_k * pose_k`; the root uses an identity parent.
    pub fn pose_skeleton(
        &self,
        pose: &[Rotation3<f64>],
    ) -> Result<Vec<Isometry3<f64>>, KinematicsError> {
        if pose.len() != self.joint_count() {
            return Err(KinematicsError::PoseLengthMismatch {
                got: pose.len(),
                expected: self.joint_count(),
            });
        }
        let mut world = vec![Isometry3::identity(); self.joint_count()];
        for j in 0..self.joint_count() {
            let local = self.rest_local[j]
                * Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_rotation_matrix(&pose[j]),
                );
            world[j] = match self.parents[j] {
                Some(p) => world[p] * local,
                None => local,
            };
        }
        Ok(world)
    }

    /// Rest-relative skinning transforms: `world_k * rest_world_k^-1`.
    /// Identity pose yields identities, so skinning canonical geometry with
    /// these reproduces it exactly.
    pub fn skinning_transforms(&self, world: &[Isometry3<f64>]) -> Vec<Isometry3<f64>> {
        world
            .iter()
            .zip(&self.rest_world)
            .map(|(w, r)| w * r.inverse())
            .collect()
    }
}
