//! `BPOS` pose sequence format: header (magic, version, joint count, frame
//! count, frame interval) followed by frames of K x 6 little-endian f32 local
//! rotations in 6D form.

use std::path::Path;

use nalgebra::Rotation3;

use crate::error::FormatError;
use crate::io::{read_file, write_atomic, Reader, Writer};
use crate::kinematics::rotation_6d_to_matrix;

const MAGIC: [u8; 4] = *b"BPOS";
const VERSION: u32 = 1;

/// A sequence of per-joint local rotations. The raw 6D f32 values are the
/// source of truth so file round trips are bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub joint_count: usize,
    pub dt: f64,
    /// frame-major, then joint-major: `frames[f][j * 6 + c]`.
    pub frames: Vec<Vec<f32>>,
}

impl PoseSequence {
    pub fn from_rotations(dt: f64, rotations: &[Vec<Rotation3<f64>>]) -> Self {
        let joint_count = rotations.first().map_or(0, |f| f.len());
        let frames = rotations
            .iter()
            .map(|frame| {
                let mut row = Vec::with_capacity(frame.len() * 6);
                for r in frame {
                    let six = crate::kinematics::rotation_to_6d(r.matrix());
                    row.extend(six.iter().map(|&x| x as f32));
                }
                row
            })
            .collect();
        Self { joint_count, dt, frames }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Decode one frame to rotation matrices.
    pub fn frame_rotations(&self, frame: usize) -> Result<Vec<Rotation3<f64>>, FormatError> {
        let row = &self.frames[frame];
        let mut out = Vec::with_capacity(self.joint_count);
        for j in 0..self.joint_count {
            let six: [f64; 6] = std::array::from_fn(|c| row[j * 6 + c] as f64);
            let m = rotation_6d_to_matrix(&six, None)
                .map_err(|e| FormatError::Malformed(e.to_string()))?;
            out.push(Rotation3::from_matrix_unchecked(m));
        }
        Ok(out)
    }
}

pub fn write_pose_sequence(seq: &PoseSequence, path: &Path) -> Result<(), FormatError> {
    let mut w = Writer::new();
    w.magic(MAGIC)
        .u32(VERSION)
        .u32(seq.joint_count as u32)
        .u32(seq.frame_count() as u32)
        .f64(seq.dt);
    for frame in &seq.frames {
        debug_assert_eq!(frame.len(), seq.joint_count * 6);
        w.f32_slice(frame);
    }
    write_atomic(path, &w.finish())?;
    Ok(())
}

pub fn read_pose_sequence(path: &Path) -> Result<PoseSequence, FormatError> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let joint_count = r.u32("joint count")? as usize;
    let frame_count = r.u32("frame count")? as usize;
    let dt = r.f64("dt")?;
    if !(dt > 0.0) {
        return Err(FormatError::Malformed(format!("non-positive dt {dt}")));
    }
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        frames.push(r.f32_vec(joint_count * 6, "pose frame")?);
    }
    if !r.is_empty() {
        return Err(FormatError::Malformed("trailing bytes after pose frames".into()));
    }
    Ok(PoseSequence { joint_count, dt, frames })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let rotations: Vec<Vec<Rotation3<f64>>> = (0..5)
            .map(|f| {
                (0..3)
                    .map(|j| {
                        Rotation3::from_euler_angles(0.1 * f as f64, 0.2 * j as f64, 0.05)
                    })
                    .collect()
            })
            .collect();
        let seq = PoseSequence::from_rotations(1.0 / 30.0, &rotations);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.bpos");
        write_pose_sequence(&seq, &path).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();
        let loaded = read_pose_sequence(&path).unwrap();
        assert_eq!(loaded, seq);
        write_pose_sequence(&loaded, &path).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bpos");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_pose_sequence(&path), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn decoded_rotations_are_orthonormal() {
        let rotations =
            vec![vec![Rotation3::from_euler_angles(0.3, -0.7, 1.2), Rotation3::identity()]];
        let seq = PoseSequence::from_rotations(0.01, &rotations);
        let decoded = seq.frame_rotations(0).unwrap();
        for r in decoded {
            let m = r.matrix();
            assert!((m.transpose() * m - nalgebra::Matrix3::identity()).norm() < 1e-6);
        }
    }
}
