//! Skinned body asset: skeleton, surface mesh, per-vertex skin weights and
//! the capsule set its distance field is built from. Serialized as JSON.

use std::path::Path;

use nalgebra::{Isometry3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError};
use crate::geometry::{BodySdf, Capsule, TriMesh};
use crate::kinematics::{rotation_6d_to_matrix, rotation_to_6d, Skeleton};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointDef {
    pub name: String,
    /// Parent joint index; null for the root. Must precede this joint.
    pub parent: Option<usize>,
    pub rest_rotation_6d: [f64; 6],
    pub rest_translation: [f64; 3],
}

/// Capsule attached to one joint, endpoints in that joint's local frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodyCapsuleDef {
    pub joint: usize,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyAssetFile {
    joints: Vec<JointDef>,
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    /// Row-major |V| x K skin-weight matrix; each row sums to 1.
    skin_weights: Vec<f64>,
    capsules: Vec<BodyCapsuleDef>,
}

#[derive(Debug, Clone)]
pub struct SkinnedBody {
    pub skeleton: Skeleton,
    pub mesh: TriMesh,
    /// Row-major |V| x K.
    pub skin_weights: Vec<f64>,
    pub capsules: Vec<BodyCapsuleDef>,
}

impl SkinnedBody {
    pub fn new(
        skeleton: Skeleton,
        mesh: TriMesh,
        skin_weights: Vec<f64>,
        capsules: Vec<BodyCapsuleDef>,
    ) -> Result<Self, Error> {
        let k = skeleton.joint_count();
        if skin_weights.len() != mesh.vertex_count() * k {
            return Err(Error::Invalid(format!(
                "skin weight matrix has {} entries, expected {} x {}",
                skin_weights.len(),
                mesh.vertex_count(),
                k
            )));
        }
        for (v, row) in skin_weights.chunks(k).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&w| w < 0.0) {
                return Err(Error::Invalid(format!("skin weights of vertex {v} sum to {sum}")));
            }
        }
        for c in &capsules {
            if c.joint >= k {
                return Err(Error::Invalid(format!("capsule joint {} out of range", c.joint)));
            }
        }
        Ok(Self { skeleton, mesh, skin_weights, capsules })
    }

    /// LBS of the body surface with rest-relative skinning transforms.
    pub fn posed_vertices(&self, skinning: &[Isometry3<f64>]) -> Vec<Point3<f64>> {
        let k = self.skeleton.joint_count();
        self.mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(v, p)| {
                let mut acc = Vector3::zeros();
                for (j, t) in skinning.iter().enumerate() {
                    let w = self.skin_weights[v * k + j];
                    if w != 0.0 {
                        acc += (t * p).coords * w;
                    }
                }
                Point3::from(acc)
            })
            .collect()
    }

    /// Capsule distance field regenerated from world joint transforms.
    pub fn posed_sdf(&self, world: &[Isometry3<f64>]) -> BodySdf {
        let caps = self
            .capsules
            .iter()
            .map(|c| Capsule {
                a: world[c.joint] * Point3::from(Vector3::from(c.a)),
                b: world[c.joint] * Point3::from(Vector3::from(c.b)),
                radius: c.radius,
            })
            .collect();
        BodySdf::new(caps).expect("capsule radii validated at load")
    }

    /// Distance field in the rest pose.
    pub fn rest_sdf(&self) -> BodySdf {
        self.posed_sdf(self.skeleton.rest_world())
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let joints = (0..self.skeleton.joint_count())
            .map(|j| JointDef {
                name: self.skeleton.names()[j].clone(),
                parent: self.skeleton.parents()[j],
                rest_rotation_6d: rotation_to_6d(
                    self.skeleton.rest_local()[j].rotation.to_rotation_matrix().matrix(),
                ),
                rest_translation: self.skeleton.rest_local()[j].translation.vector.into(),
            })
            .collect();
        let file = BodyAssetFile {
            joints,
            vertices: self.mesh.vertices().iter().map(|p| [p.x, p.y, p.z]).collect(),
            faces: self.mesh.faces().to_vec(),
            skin_weights: self.skin_weights.clone(),
            capsules: self.capsules.clone(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| FormatError::Malformed(e.to_string()))?;
        crate::io::write_atomic(path, text.as_bytes()).map_err(FormatError::Io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(FormatError::Io)?;
        let file: BodyAssetFile =
            serde_json::from_str(&text).map_err(|e| FormatError::Malformed(e.to_string()))?;
        let mut names = Vec::new();
        let mut parents = Vec::new();
        let mut rots = Vec::new();
        let mut trans = Vec::new();
        for j in &file.joints {
            names.push(j.name.clone());
            parents.push(j.parent);
            rots.push(Rotation3::from_matrix_unchecked(rotation_6d_to_matrix(
                &j.rest_rotation_6d,
                None,
            )?));
            trans.push(Vector3::from(j.rest_translation));
        }
        let skeleton = Skeleton::new(names, parents, rots, trans)?;
        let vertices: Vec<Point3<f64>> =
            file.vertices.iter().map(|v| Point3::from(Vector3::from(*v))).collect();
        // The body mesh carries no atlas; UVs are zeroed placeholders.
        let uv = vec![[[0.0f64; 2]; 3]; file.faces.len()];
        let mesh = TriMesh::new(vertices, file.faces, uv)?;
        Self::new(skeleton, mesh, file.skin_weights, file.capsules)
    }
}
