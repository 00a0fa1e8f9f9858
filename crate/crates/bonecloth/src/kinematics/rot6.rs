//! 6D rotation representation: the first two matrix columns, decoded via
//! Gram-Schmidt. Continuous and safe to add deltas to.

use nalgebra::{Matrix3, Vector3};

use crate::error::KinematicsError;

/// Decode six values (two stacked column vectors) into a rotation matrix.
///
/// Column 1 is the normalized first triple; column 2 the second triple with
/// its column-1 component projected out, normalized; column 3 their cross
/// product. The result is orthonormal with determinant +1 by construction.
pub fn rotation_6d_to_matrix(
    r: &[f64; 6],
    bone: Option<usize>,
) -> Result<Matrix3<f64>, KinematicsError> {
    let a = Vector3::new(r[0], r[1], r[2]);
    let b = Vector3::new(r[3], r[4], r[5]);
    let na = a.norm();
    if na < 1e-12 {
        return Err(KinematicsError::DegenerateRotation { bone });
    }
    let c1 = a / na;
    let u = b - c1 * b.dot(&c1);
    let nu = u.norm();
    if nu < 1e-12 {
        return Err(KinematicsError::DegenerateRotation { bone });
    }
    let c2 = u / nu;
    let c3 = c1.cross(&c2);
    Ok(Matrix3::from_columns(&[c1, c2, c3]))
}

/// Encode a matrix as its first two columns. For non-orthonormal input (e.g. a
/// blend of rotations) this is still well-defined and decodes to the nearest
/// Gram-Schmidt frame.
pub fn rotation_to_6d(m: &Matrix3<f64>) -> [f64; 6] {
    [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
}
