//! Wavefront OBJ subset: `v`, `vt`, and `f v/vt` records.
//!
//! The writer emits floats through `Display`, whose shortest round-trip
//! representation makes write -> read -> write byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use crate::error::FormatError;
use crate::geometry::TriMesh;

pub fn read_obj(path: &Path) -> Result<TriMesh, FormatError> {
    parse_obj(&fs::read_to_string(path)?)
}

pub fn parse_obj(text: &str) -> Result<TriMesh, FormatError> {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();
    let mut face_uvs = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = ln + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let parse_f = |s: Option<&str>, what: &str| -> Result<f64, FormatError> {
            s.ok_or_else(|| FormatError::ObjParse {
                line: lineno,
                message: format!("missing {what}"),
            })?
            .parse::<f64>()
            .map_err(|e| FormatError::ObjParse { line: lineno, message: format!("{what}: {e}") })
        };
        match tag {
            "v" => {
                let x = parse_f(parts.next(), "x")?;
                let y = parse_f(parts.next(), "y")?;
                let z = parse_f(parts.next(), "z")?;
                vertices.push(Point3::new(x, y, z));
            }
            "vt" => {
                let u = parse_f(parts.next(), "u")?;
                let v = parse_f(parts.next(), "v")?;
                uvs.push([u, v]);
            }
            "f" => {
                let mut vs = [0usize; 3];
                let mut ts = [0usize; 3];
                for c in 0..3 {
                    let corner = parts.next().ok_or_else(|| FormatError::ObjParse {
                        line: lineno,
                        message: "face needs three corners".into(),
                    })?;
                    let mut it = corner.split('/');
                    let vi: usize = it
                        .next()
                        .unwrap()
                        .parse()
                        .map_err(|e| FormatError::ObjParse {
                            line: lineno,
                            message: format!("vertex index: {e}"),
                        })?;
                    let ti: usize = it
                        .next()
                        .ok_or_else(|| FormatError::ObjParse {
                            line: lineno,
                            message: "face corner lacks uv index (v/vt)".into(),
                        })?
                        .parse()
                        .map_err(|e| FormatError::ObjParse {
                            line: lineno,
                            message: format!("uv index: {e}"),
                        })?;
                    if vi == 0 || ti == 0 {
                        return Err(FormatError::ObjParse {
                            line: lineno,
                            message: "obj indices are 1-based".into(),
                        });
                    }
                    vs[c] = vi - 1;
                    ts[c] = ti - 1;
                }
                if parts.next().is_some() {
                    return Err(FormatError::ObjParse {
                        line: lineno,
                        message: "only triangles are supported".into(),
                    });
                }
                faces.push(vs);
                face_uvs.push(ts);
            }
            _ => {} // ignore foreign records
        }
    }

    let mut corner_uvs = Vec::with_capacity(faces.len());
    for (fi, ts) in face_uvs.iter().enumerate() {
        let mut c = [[0.0f64; 2]; 3];
        for k in 0..3 {
            c[k] = *uvs.get(ts[k]).ok_or_else(|| FormatError::ObjParse {
                line: 0,
                message: format!("face {fi} references missing vt {}", ts[k] + 1),
            })?;
        }
        corner_uvs.push(c);
    }

    TriMesh::new(vertices, faces, corner_uvs)
        .map_err(|e| FormatError::Malformed(e.to_string()))
}

/// Serialize to the OBJ subset; UVs are deduplicated exactly by bit pattern.
pub fn write_obj_to(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for p in mesh.vertices() {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z).unwrap();
    }
    // Deduplicate identical UV pairs, preserving first-seen order.
    let mut uv_list: Vec<[f64; 2]> = Vec::new();
    let uv_index = |uv: [f64; 2], list: &mut Vec<[f64; 2]>| -> usize {
        if let Some(i) = list
            .iter()
            .position(|e| e[0].to_bits() == uv[0].to_bits() && e[1].to_bits() == uv[1].to_bits())
        {
            i
        } else {
            list.push(uv);
            list.len() - 1
        }
    };
    let mut face_uv_ids = Vec::with_capacity(mesh.face_count());
    for corners in mesh.face_uvs() {
        let ids = [
            uv_index(corners[0], &mut uv_list),
            uv_index(corners[1], &mut uv_list),
            uv_index(corners[2], &mut uv_list),
        ];
        face_uv_ids.push(ids);
    }
    for uv in &uv_list {
        writeln!(out, "vt {} {}", uv[0], uv[1]).unwrap();
    }
    for (f, ts) in mesh.faces().iter().zip(&face_uv_ids) {
        writeln!(
            out,
            "f {}/{} {}/{} {}/{}",
            f[0] + 1,
            ts[0] + 1,
            f[1] + 1,
            ts[1] + 1,
            f[2] + 1,
            ts[2] + 1
        )
        .unwrap();
    }
    out
}

pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<(), FormatError> {
    crate::io::write_atomic(path, write_obj_to(mesh).as_bytes())?;
    Ok(())
}
