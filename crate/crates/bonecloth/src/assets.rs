//! Procedural bodies, garments and scripted pose sequences for desk-scale
//! experiments, plus the canonical drape that bone sampling runs on.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError};
use crate::geometry::{read_obj, write_obj, Capsule, TriMesh};
use crate::kinematics::{BodyCapsuleDef, PoseSequence, Skeleton, SkinnedBody};
use crate::physics::{collision_energy, drape, ClothMaterial, DrapeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RigKind {
    CapsuleBiped,
    SwingArm,
    HangingSwatch,
    SkirtTube,
}

impl RigKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "capsule-biped" => Some(Self::CapsuleBiped),
            "swing-arm" => Some(Self::SwingArm),
            "hanging-swatch" => Some(Self::HangingSwatch),
            "skirt-tube" => Some(Self::SkirtTube),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CapsuleBiped => "capsule-biped",
            Self::SwingArm => "swing-arm",
            Self::HangingSwatch => "hanging-swatch",
            Self::SkirtTube => "skirt-tube",
        }
    }
}

/// Garment vertex welded to a joint; its position is prescribed by that
/// joint's motion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pin {
    pub vertex: usize,
    pub joint: usize,
}

/// A complete body-garment identity: skinned body, garment template, its
/// canonical drape, and any pins.
#[derive(Debug, Clone)]
pub struct Rig {
    pub kind: RigKind,
    pub body: SkinnedBody,
    /// Rest template: the pattern shape that defines rest lengths and areas.
    pub garment: TriMesh,
    /// Canonically draped garment (same topology, settled positions).
    pub draped: TriMesh,
    pub pins: Vec<Pin>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigManifest {
    kind: RigKind,
    pins: Vec<Pin>,
}

/// Flat grid swatch in the XY plane, hanging downwards from y = 0.
/// Returns the mesh and the top-row vertex indices.
pub fn grid_swatch(rows: usize, cols: usize, spacing: f64) -> (TriMesh, Vec<usize>) {
    let mut vertices = Vec::with_capacity(rows * cols);
    let half_w = (cols - 1) as f64 * spacing / 2.0;
    for r in 0..rows {
        for c in 0..cols {
            vertices.push(Point3::new(c as f64 * spacing - half_w, -(r as f64) * spacing, 0.0));
        }
    }
    let uv_at = |r: usize, c: usize| -> [f64; 2] {
        [c as f64 / (cols - 1) as f64, r as f64 / (rows - 1) as f64]
    };
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let i = r * cols + c;
            faces.push([i, i + 1, i + cols]);
            uvs.push([uv_at(r, c), uv_at(r, c + 1), uv_at(r + 1, c)]);
            faces.push([i + 1, i + cols + 1, i + cols]);
            uvs.push([uv_at(r, c + 1), uv_at(r + 1, c + 1), uv_at(r + 1, c)]);
        }
    }
    let top_row = (0..cols).collect();
    (TriMesh::new(vertices, faces, uvs).expect("grid construction"), top_row)
}

/// Open tube (skirt) around the y axis: `segs` around, `rings` down.
/// Returns the mesh and the top-ring vertex indices. The UV seam duplicates
/// the first column in chart space only.
pub fn tube_skirt(segs: usize, rings: usize, radius: f64, top_y: f64, length: f64) -> (TriMesh, Vec<usize>) {
    let mut vertices = Vec::with_capacity(segs * rings);
    for r in 0..rings {
        let y = top_y - length * r as f64 / (rings - 1) as f64;
        for s in 0..segs {
            let ang = 2.0 * PI * s as f64 / segs as f64;
            vertices.push(Point3::new(radius * ang.cos(), y, radius * ang.sin()));
        }
    }
    let uv_at = |r: usize, s: usize| -> [f64; 2] {
        [s as f64 / segs as f64, r as f64 / (rings - 1) as f64]
    };
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    for r in 0..rings - 1 {
        for s in 0..segs {
            let s1 = (s + 1) % segs;
            let a = r * segs + s;
            let b = r * segs + s1;
            let c = (r + 1) * segs + s;
            let d = (r + 1) * segs + s1;
            // chart-space u of the wrapped column is s+1, not 0
            let ua = uv_at(r, s);
            let ub = [(s + 1) as f64 / segs as f64, ua[1]];
            let uc = uv_at(r + 1, s);
            let ud = [(s + 1) as f64 / segs as f64, uc[1]];
            faces.push([a, b, c]);
            uvs.push([ua, ub, uc]);
            faces.push([b, d, c]);
            uvs.push([ub, ud, uc]);
        }
    }
    let top_ring = (0..segs).collect();
    (TriMesh::new(vertices, faces, uvs).expect("tube construction"), top_ring)
}

/// Triangulate a capsule: `segs` around the axis, `rings` per section (each
/// hemisphere and the cylinder body).
pub fn tessellate_capsule(
    cap: &Capsule,
    segs: usize,
    rings: usize,
) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let axis_vec = cap.b - cap.a;
    let len = axis_vec.norm();
    let axis = if len > 1e-12 { axis_vec / len } else { Vector3::y() };
    let ortho = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = axis.cross(&ortho).normalize();
    let v = axis.cross(&u);
    let r = cap.radius;

    let mut verts: Vec<Point3<f64>> = Vec::new();
    let mut ring_starts: Vec<(usize, bool)> = Vec::new(); // (start index, is single point)

    let push_ring = |center: Point3<f64>, radius: f64, verts: &mut Vec<Point3<f64>>| -> usize {
        let start = verts.len();
        for s in 0..segs {
            let ang = 2.0 * PI * s as f64 / segs as f64;
            verts.push(center + (u * ang.cos() + v * ang.sin()) * radius);
        }
        start
    };

    // Bottom pole.
    verts.push(cap.a - axis * r);
    ring_starts.push((0, true));
    // Bottom hemisphere (excluding the pole, including the equator).
    for i in 1..=rings {
        let phi = -PI / 2.0 + (PI / 2.0) * i as f64 / rings as f64;
        let start = push_ring(cap.a + axis * (r * phi.sin()), r * phi.cos(), &mut verts);
        ring_starts.push((start, false));
    }
    // Cylinder rings (excluding both equators).
    for i in 1..rings {
        let t = i as f64 / rings as f64;
        let start = push_ring(cap.a + axis_vec * t, r, &mut verts);
        ring_starts.push((start, false));
    }
    // Top hemisphere (including the equator, excluding the pole).
    for i in 0..rings {
        let phi = (PI / 2.0) * i as f64 / rings as f64;
        let start = push_ring(cap.b + axis * (r * phi.sin()), r * phi.cos(), &mut verts);
        ring_starts.push((start, false));
    }
    // Top pole.
    let top_pole = verts.len();
    verts.push(cap.b + axis * r);
    ring_starts.push((top_pole, true));

    let mut faces = Vec::new();
    for w in ring_starts.windows(2) {
        let (a_start, a_single) = w[0];
        let (b_start, b_single) = w[1];
        match (a_single, b_single) {
            (true, false) => {
                for s in 0..segs {
                    faces.push([a_start, b_start + s, b_start + (s + 1) % segs]);
                }
            }
            (false, true) => {
                for s in 0..segs {
                    faces.push([a_start + s, b_start, a_start + (s + 1) % segs]);
                }
            }
            (false, false) => {
                for s in 0..segs {
                    let s1 = (s + 1) % segs;
                    faces.push([a_start + s, b_start + s, b_start + s1]);
                    faces.push([a_start + s, b_start + s1, a_start + s1]);
                }
            }
            (true, true) => unreachable!("adjacent poles"),
        }
    }
    (verts, faces)
}

/// Build a skinned body from joint definitions and per-joint capsules: the
/// surface is the union of coarsely tessellated capsules, each vertex bound
/// rigidly to its capsule's joint.
fn build_body(
    names: Vec<&str>,
    parents: Vec<Option<usize>>,
    translations: Vec<Vector3<f64>>,
    capsules: Vec<BodyCapsuleDef>,
    segs: usize,
    rings: usize,
) -> Result<SkinnedBody, Error> {
    let k = parents.len();
    let skeleton = Skeleton::new(
        names.into_iter().map(String::from).collect(),
        parents,
        vec![Rotation3::identity(); k],
        translations,
    )?;
    let rest_world = skeleton.rest_world().to_vec();

    let mut verts = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for c in &capsules {
        let world = &rest_world[c.joint];
        let cap = Capsule {
            a: world * Point3::from(Vector3::from(c.a)),
            b: world * Point3::from(Vector3::from(c.b)),
            radius: c.radius,
        };
        let (cv, cf) = tessellate_capsule(&cap, segs, rings);
        let base = verts.len();
        for f in cf {
            faces.push([f[0] + base, f[1] + base, f[2] + base]);
        }
        for p in cv {
            verts.push(p);
            let mut row = vec![0.0; k];
            row[c.joint] = 1.0;
            weights.extend(row);
        }
    }
    let uv = vec![[[0.0f64; 2]; 3]; faces.len()];
    let mesh = TriMesh::new(verts, faces, uv)?;
    SkinnedBody::new(skeleton, mesh, weights, capsules)
}

/// Generate a complete rig: body, garment template, canonical drape, pins.
/// Deterministic for a given (kind, seed).
pub fn generate_rig(kind: RigKind, _seed: u64) -> Result<Rig, Error> {
    let material = ClothMaterial::default();
    match kind {
        RigKind::HangingSwatch => {
            let body = build_body(
                vec!["bar"],
                vec![None],
                vec![Vector3::new(0.0, 1.0, 0.0)],
                vec![BodyCapsuleDef {
                    joint: 0,
                    a: [-0.38, 0.0, 0.0],
                    b: [0.38, 0.0, 0.0],
                    radius: 0.04,
                }],
                10,
                3,
            )?;
            // 20x20 swatch hanging in front of the bar, top row pinned.
            let (template, top_row) = grid_swatch(20, 20, 0.6 / 19.0);
            let offset = Vector3::new(0.0, 1.0, 0.055);
            let initial: Vec<Point3<f64>> =
                template.vertices().iter().map(|p| p + offset).collect();
            let pins: Vec<Pin> = top_row.iter().map(|&v| Pin { vertex: v, joint: 0 }).collect();
            let draped = settle(&template, initial, &body, &pins, &material)?;
            Ok(Rig { kind, body, garment: template, draped, pins })
        }
        RigKind::SwingArm => {
            let body = build_body(
                vec!["shoulder", "elbow"],
                vec![None, Some(0)],
                vec![Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.5, 0.0, 0.0)],
                vec![
                    BodyCapsuleDef {
                        joint: 0,
                        a: [0.0, 0.0, 0.0],
                        b: [0.5, 0.0, 0.0],
                        radius: 0.06,
                    },
                    BodyCapsuleDef {
                        joint: 1,
                        a: [0.0, 0.0, 0.0],
                        b: [0.4, 0.0, 0.0],
                        radius: 0.05,
                    },
                ],
                10,
                3,
            )?;
            // Towel over the upper arm: wrap the swatch across the capsule.
            let rows = 20;
            let cols = 20;
            let spacing = 0.6 / 19.0;
            let (template, _) = grid_swatch(rows, cols, spacing);
            let wrap_r = 0.06 + 0.006;
            let total = (rows - 1) as f64 * spacing;
            let arc = PI * wrap_r;
            let hang = (total - arc) / 2.0;
            let bar_y = 1.0;
            let mut initial = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let s = r as f64 * spacing;
                for c in 0..cols {
                    let x = c as f64 * spacing - (cols - 1) as f64 * spacing / 2.0 + 0.25;
                    let p = if s < hang {
                        // front side, rising toward the bar
                        Point3::new(x, bar_y - (hang - s), wrap_r)
                    } else if s < hang + arc {
                        let theta = (s - hang) / wrap_r;
                        Point3::new(x, bar_y + wrap_r * theta.sin(), wrap_r * theta.cos())
                    } else {
                        Point3::new(x, bar_y - (s - hang - arc), -wrap_r)
                    };
                    initial.push(p);
                }
            }
            let draped = settle(&template, initial, &body, &[], &material)?;
            Ok(Rig { kind, body, garment: template, draped, pins: vec![] })
        }
        RigKind::SkirtTube => {
            let body = build_body(
                vec!["hips", "leg"],
                vec![None, Some(0)],
                vec![Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 0.0)],
                vec![
                    BodyCapsuleDef {
                        joint: 0,
                        a: [0.0, 0.0, 0.0],
                        b: [0.0, 0.35, 0.0],
                        radius: 0.09,
                    },
                    BodyCapsuleDef {
                        joint: 1,
                        a: [0.0, -0.02, 0.0],
                        b: [0.0, -0.5, 0.0],
                        radius: 0.07,
                    },
                ],
                10,
                3,
            )?;
            let (template, top_ring) = tube_skirt(24, 12, 0.14, 1.04, 0.42);
            let initial = template.vertices().to_vec();
            let pins: Vec<Pin> =
                top_ring.iter().map(|&v| Pin { vertex: v, joint: 0 }).collect();
            let draped = settle(&template, initial, &body, &pins, &material)?;
            Ok(Rig { kind, body, garment: template, draped, pins })
        }
        RigKind::CapsuleBiped => {
            let body = build_body(
                vec!["pelvis", "spine", "l_hip", "r_hip", "l_knee", "r_knee"],
                vec![None, Some(0), Some(0), Some(0), Some(2), Some(3)],
                vec![
                    Vector3::new(0.0, 1.0, 0.0),
                    Vector3::new(0.0, 0.05, 0.0),
                    Vector3::new(-0.08, -0.02, 0.0),
                    Vector3::new(0.08, -0.02, 0.0),
                    Vector3::new(0.0, -0.3, 0.0),
                    Vector3::new(0.0, -0.3, 0.0),
                ],
                vec![
                    BodyCapsuleDef {
                        joint: 1,
                        a: [0.0, 0.0, 0.0],
                        b: [0.0, 0.3, 0.0],
                        radius: 0.1,
                    },
                    BodyCapsuleDef {
                        joint: 2,
                        a: [0.0, 0.0, 0.0],
                        b: [0.0, -0.28, 0.0],
                        radius: 0.06,
                    },
                    BodyCapsuleDef {
                        joint: 3,
                        a: [0.0, 0.0, 0.0],
                        b: [0.0, -0.28, 0.0],
                        radius: 0.06,
                    },
                    BodyCapsuleDef {
                        joint: 4,
                        a: [0.0, 0.0, 0.0],
                        b: [0.0, -0.28, 0.0],
                        radius: 0.05,
                    },
                    BodyCapsuleDef {
                        joint: 5,
                        a: [0.0, 0.0, 0.0],
                        b: [0.0, -0.28, 0.0],
                        radius: 0.05,
                    },
                ],
                8,
                2,
            )?;
            let (template, top_ring) = tube_skirt(24, 12, 0.17, 1.04, 0.5);
            let initial = template.vertices().to_vec();
            let pins: Vec<Pin> =
                top_ring.iter().map(|&v| Pin { vertex: v, joint: 0 }).collect();
            let draped = settle(&template, initial, &body, &pins, &material)?;
            Ok(Rig { kind, body, garment: template, draped, pins })
        }
    }
}

fn settle(
    template: &TriMesh,
    initial: Vec<Point3<f64>>,
    body: &SkinnedBody,
    pins: &[Pin],
    material: &ClothMaterial,
) -> Result<TriMesh, Error> {
    let sdf = body.rest_sdf();
    let pin_indices: Vec<usize> = pins.iter().map(|p| p.vertex).collect();
    let (settled, report) =
        drape(template, &initial, &sdf, material, &pin_indices, &DrapeParams::default());
    if !report.converged {
        log::warn!("canonical drape did not fully settle ({} steps)", report.steps);
    }
    let coll = collision_energy(
        &settled,
        &sdf,
        material.collision_stiffness,
        material.collision_margin,
    );
    if coll > 0.0 {
        log::warn!("canonical drape retains collision energy {coll:.3e}");
    }
    Ok(template.with_positions(settled)?)
}

/// Prescribed world position of a pinned vertex under rest-relative skinning
/// transforms.
pub fn pinned_position(
    pin: &Pin,
    draped: &TriMesh,
    skinning: &[nalgebra::Isometry3<f64>],
) -> Point3<f64> {
    skinning[pin.joint] * draped.vertices()[pin.vertex]
}

// ---------------------------------------------------------------------------
// Scripted pose sequences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    /// Sinusoidal swing of the rig's driven joint.
    Swing,
    /// Two-frequency sinusoid across joints, loosely walk-like.
    WalkCycle,
    /// Swing for the first 60% of frames, then freeze.
    StopAndHold,
    /// The rest pose held for the whole sequence.
    HoldStill,
}

impl MotionKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Swing => "swing",
            Self::WalkCycle => "walk",
            Self::StopAndHold => "stop_hold",
            Self::HoldStill => "hold_still",
        }
    }
}

/// Joints that a motion script drives, with their swing axes.
fn driven_joints(kind: RigKind) -> Vec<(usize, Vector3<f64>)> {
    match kind {
        RigKind::HangingSwatch => vec![(0, Vector3::z())],
        RigKind::SwingArm => vec![(0, Vector3::z()), (1, Vector3::y())],
        RigKind::SkirtTube => vec![(0, Vector3::z()), (1, Vector3::x())],
        RigKind::CapsuleBiped => {
            vec![(2, Vector3::x()), (3, Vector3::x()), (4, Vector3::x()), (5, Vector3::x())]
        }
    }
}

/// Generate a scripted pose sequence. `phase` varies the script so several
/// distinct sequences can be produced per motion kind.
pub fn scripted_sequence(
    rig_kind: RigKind,
    joint_count: usize,
    motion: MotionKind,
    frames: usize,
    dt: f64,
    amplitude: f64,
    phase: f64,
) -> PoseSequence {
    let driven = driven_joints(rig_kind);
    let freq = 0.8; // Hz
    let mut rotations = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = f as f64 * dt;
        let mut frame = vec![Rotation3::identity(); joint_count];
        match motion {
            MotionKind::HoldStill => {}
            MotionKind::Swing | MotionKind::StopAndHold => {
                let hold_after = 0.6 * frames as f64 * dt;
                let tt = if motion == MotionKind::StopAndHold { t.min(hold_after) } else { t };
                for (i, (j, axis)) in driven.iter().enumerate() {
                    let a = amplitude * (2.0 * PI * freq * tt + phase + i as f64 * 0.7).sin();
                    frame[*j] = Rotation3::from_axis_angle(
                        &nalgebra::Unit::new_normalize(*axis),
                        a,
                    );
                }
            }
            MotionKind::WalkCycle => {
                for (i, (j, axis)) in driven.iter().enumerate() {
                    let a = amplitude
                        * (0.7 * (2.0 * PI * freq * t + phase + i as f64 * PI).sin()
                            + 0.3 * (2.0 * PI * 2.0 * freq * t + phase * 0.5).sin());
                    frame[*j] = Rotation3::from_axis_angle(
                        &nalgebra::Unit::new_normalize(*axis),
                        a,
                    );
                }
            }
        }
        rotations.push(frame);
    }
    PoseSequence::from_rotations(dt, &rotations)
}

// ---------------------------------------------------------------------------
// On-disk layout
// ---------------------------------------------------------------------------

impl Rig {
    /// Write body.json, garment.obj, drape.obj and rig.json into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(dir).map_err(FormatError::Io)?;
        self.body.save(&dir.join("body.json"))?;
        write_obj(&self.garment, &dir.join("garment.obj"))?;
        write_obj(&self.draped, &dir.join("drape.obj"))?;
        let manifest = RigManifest { kind: self.kind, pins: self.pins.clone() };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| FormatError::Malformed(e.to_string()))?;
        crate::io::write_atomic(&dir.join("rig.json"), text.as_bytes())
            .map_err(FormatError::Io)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, Error> {
        let manifest: RigManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.join("rig.json")).map_err(FormatError::Io)?,
        )
        .map_err(|e| FormatError::Malformed(e.to_string()))?;
        let body = SkinnedBody::load(&dir.join("body.json"))?;
        let garment = read_obj(&dir.join("garment.obj"))?;
        let draped = read_obj(&dir.join("drape.obj"))?;
        if draped.vertex_count() != garment.vertex_count()
            || draped.face_count() != garment.face_count()
        {
            return Err(Error::Invalid("drape topology differs from garment".into()));
        }
        for p in &manifest.pins {
            if p.vertex >= garment.vertex_count() || p.joint >= body.skeleton.joint_count() {
                return Err(Error::Invalid(format!("pin out of range: {p:?}")));
            }
        }
        Ok(Self { kind: manifest.kind, body, garment, draped, pins: manifest.pins })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swatch_counts_match_grid() {
        let (mesh, top) = grid_swatch(20, 20, 0.6 / 19.0);
        assert_eq!(mesh.vertex_count(), 400);
        assert_eq!(mesh.face_count(), 722);
        assert_eq!(top.len(), 20);
        // Every vertex resolves to a UV coordinate.
        assert_eq!(mesh.vertex_uvs().len(), 400);
        assert!(mesh.is_manifold());
    }

    #[test]
    fn tube_is_closed_around() {
        let (mesh, top) = tube_skirt(8, 4, 0.1, 1.0, 0.3);
        assert_eq!(mesh.vertex_count(), 32);
        assert_eq!(mesh.face_count(), 8 * 3 * 2);
        assert_eq!(top.len(), 8);
        assert!(mesh.is_manifold());
        // No boundary edges along the seam: only the two open rings.
        assert_eq!(mesh.boundary_edge_count(), 16);
    }

    #[test]
    fn capsule_tessellation_stays_on_surface() {
        let cap = Capsule {
            a: Point3::new(0.0, 0.0, 0.0),
            b: Point3::new(0.0, 0.4, 0.0),
            radius: 0.1,
        };
        let (verts, faces) = tessellate_capsule(&cap, 12, 3);
        assert!(!faces.is_empty());
        let sdf = crate::geometry::BodySdf::new(vec![cap]).unwrap();
        for v in &verts {
            assert!(sdf.signed_distance(v).abs() < 1e-9);
        }
    }

    #[test]
    fn hanging_swatch_rig_drapes_clean() {
        let rig = generate_rig(RigKind::HangingSwatch, 7).unwrap();
        let material = ClothMaterial::default();
        let sdf = rig.body.rest_sdf();
        let coll = collision_energy(
            rig.draped.vertices(),
            &sdf,
            material.collision_stiffness,
            material.collision_margin,
        );
        assert_eq!(coll, 0.0, "drape must be collision-free");
        let rest = rig.garment.edge_lengths();
        let stretch = crate::physics::stretch_energy(
            rig.draped.vertices(),
            &rig.garment,
            &rest,
            material.stretch_stiffness,
        );
        assert!(stretch < 1e-3, "drape stretch energy {stretch}");
        // Pins stay where they were constructed.
        for pin in &rig.pins {
            let d = (rig.draped.vertices()[pin.vertex].y - 1.0).abs();
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn rig_save_load_roundtrip() {
        let rig = generate_rig(RigKind::SkirtTube, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        rig.save(dir.path()).unwrap();
        let loaded = Rig::load(dir.path()).unwrap();
        assert_eq!(loaded.kind, rig.kind);
        assert_eq!(loaded.garment.vertex_count(), rig.garment.vertex_count());
        assert_eq!(loaded.pins.len(), rig.pins.len());
        // OBJ round trip preserves draped coordinates bit-exactly.
        assert_eq!(loaded.draped.vertices(), rig.draped.vertices());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_rig(RigKind::SwingArm, 11).unwrap();
        let b = generate_rig(RigKind::SwingArm, 11).unwrap();
        assert_eq!(a.draped.vertices(), b.draped.vertices());
    }

    #[test]
    fn stop_and_hold_freezes_tail() {
        let seq = scripted_sequence(RigKind::SwingArm, 2, MotionKind::StopAndHold, 50, 1.0 / 30.0, 0.5, 0.0);
        assert_eq!(seq.frame_count(), 50);
        let last = &seq.frames[49];
        let prev = &seq.frames[40];
        assert_eq!(last, prev, "held tail must be constant");
        let early = &seq.frames[5];
        assert_ne!(last, early);
    }
}
