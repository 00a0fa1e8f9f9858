//! UV-atlas rasterization and readback.
//!
//! The texel-to-triangle assignment is computed once per (mesh, grid size) and
//! reused every frame; both directions are fixed sparse linear maps.

use crate::error::GeometryError;
use crate::geometry::TriMesh;

/// Dense H x W x C feature grid over the UV atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct UvGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Row-major H x W x C.
    pub data: Vec<f32>,
    /// True for texels whose center lies inside some UV triangle.
    pub occupancy: Vec<bool>,
}

impl UvGrid {
    pub fn zeros(height: usize, width: usize, channels: usize, occupancy: Vec<bool>) -> Self {
        assert_eq!(occupancy.len(), height * width);
        Self { height, width, channels, data: vec![0.0; height * width * channels], occupancy }
    }

    #[inline]
    pub fn texel(&self, y: usize, x: usize) -> &[f32] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }
}

/// One occupied texel: its flat index, the covering UV triangle's vertices and
/// the barycentric coordinates of the texel center.
#[derive(Debug, Clone, Copy)]
pub struct TexelEntry {
    pub texel: usize,
    pub verts: [usize; 3],
    pub bary: [f32; 3],
}

/// Bilinear readback plan for one vertex: up to four occupied texels with
/// renormalized weights.
#[derive(Debug, Clone, Copy)]
pub struct VertexSample {
    pub texels: [usize; 4],
    pub weights: [f32; 4],
    /// True when the 2x2 neighborhood was fully unoccupied and the nearest
    /// occupied texel was substituted.
    pub fallback: bool,
}

/// Precomputed texel->(face, barycentric) assignment and per-vertex readback
/// plans for a fixed mesh and grid size.
#[derive(Debug, Clone)]
pub struct TexelTable {
    pub height: usize,
    pub width: usize,
    pub occupancy: Vec<bool>,
    pub entries: Vec<TexelEntry>,
    pub vertex_samples: Vec<VertexSample>,
    pub degenerate_faces: usize,
}

fn uv_barycentric(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 3]> {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if det.abs() < 1e-14 {
        return None; // degenerate UV triangle
    }
    let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det;
    let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det;
    let l3 = 1.0 - l1 - l2;
    Some([l1, l2, l3])
}

impl TexelTable {
    pub fn build(mesh: &TriMesh, height: usize, width: usize) -> Result<Self, GeometryError> {
        if height == 0 || width == 0 {
            return Err(GeometryError::EmptyGrid { height, width });
        }
        let mut occupancy = vec![false; height * width];
        let mut entries = Vec::new();
        let degenerate_faces = mesh
            .face_uvs()
            .iter()
            .filter(|c| uv_barycentric([0.0, 0.0], c[0], c[1], c[2]).is_none())
            .count();
        if degenerate_faces > 0 {
            log::warn!("{degenerate_faces} degenerate UV triangles skipped during rasterization");
        }

        // Face order breaks ties between overlapping charts.
        for y in 0..height {
            let v = (y as f64 + 0.5) / height as f64;
            for x in 0..width {
                let u = (x as f64 + 0.5) / width as f64;
                let texel = y * width + x;
                for (fi, corners) in mesh.face_uvs().iter().enumerate() {
                    if let Some(bary) = uv_barycentric([u, v], corners[0], corners[1], corners[2])
                    {
                        if bary.iter().all(|&l| l >= -1e-12) {
                            let f = mesh.faces()[fi];
                            occupancy[texel] = true;
                            entries.push(TexelEntry {
                                texel,
                                verts: [f[0], f[1], f[2]],
                                bary: [bary[0] as f32, bary[1] as f32, bary[2] as f32],
                            });
                            break;
                        }
                    }
                }
            }
        }

        // Per-vertex bilinear readback plans against the occupancy mask.
        let uvs = mesh.vertex_uvs();
        let mut vertex_samples = Vec::with_capacity(uvs.len());
        let mut fallbacks = 0usize;
        for uv in &uvs {
            let fx = uv[0] * width as f64 - 0.5;
            let fy = uv[1] * height as f64 - 0.5;
            let x0 = fx.floor();
            let y0 = fy.floor();
            let tx = fx - x0;
            let ty = fy - y0;
            let clamp = |v: f64, hi: usize| -> usize { (v.max(0.0) as usize).min(hi - 1) };
            let xs = [clamp(x0, width), clamp(x0 + 1.0, width)];
            let ys = [clamp(y0, height), clamp(y0 + 1.0, height)];
            let mut texels = [0usize; 4];
            let mut weights = [0f64; 4];
            let corner_w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
            for k in 0..4 {
                let x = xs[k % 2];
                let y = ys[k / 2];
                texels[k] = y * width + x;
                weights[k] = if occupancy[texels[k]] { corner_w[k] } else { 0.0 };
            }
            let total: f64 = weights.iter().sum();
            let mut fallback = false;
            if total > 0.0 {
                for w in &mut weights {
                    *w /= total;
                }
            } else {
                // Nearest occupied texel, ties to the lowest flat index.
                fallback = true;
                fallbacks += 1;
                let mut best = None;
                let mut best_d = f64::INFINITY;
                for (t, &occ) in occupancy.iter().enumerate() {
                    if !occ {
                        continue;
                    }
                    let cy = (t / width) as f64 + 0.5;
                    let cx = (t % width) as f64 + 0.5;
                    let d = (cx - (fx + 0.5)).powi(2) + (cy - (fy + 0.5)).powi(2);
                    if d < best_d {
                        best_d = d;
                        best = Some(t);
                    }
                }
                let t = best.unwrap_or(0);
                texels = [t; 4];
                weights = [1.0, 0.0, 0.0, 0.0];
            }
            vertex_samples.push(VertexSample {
                texels,
                weights: [
                    weights[0] as f32,
                    weights[1] as f32,
                    weights[2] as f32,
                    weights[3] as f32,
                ],
                fallback,
            });
        }
        if fallbacks > 0 {
            log::warn!("{fallbacks} vertices fell back to nearest occupied texel");
        }

        Ok(Self { height, width, occupancy, entries, vertex_samples, degenerate_faces })
    }

    pub fn occupied_count(&self) -> usize {
        self.entries.len()
    }
}

/// Forward rasterization kernel: per-vertex values -> grid (zeroing first).
pub fn rasterize_kernel(table: &TexelTable, values: &[f32], channels: usize, out: &mut [f32]) {
    debug_assert_eq!(out.len(), table.height * table.width * channels);
    out.fill(0.0);
    for e in &table.entries {
        let base = e.texel * channels;
        let v0 = e.verts[0] * channels;
        let v1 = e.verts[1] * channels;
        let v2 = e.verts[2] * channels;
        for c in 0..channels {
            out[base + c] = e.bary[0] * values[v0 + c]
                + e.bary[1] * values[v1 + c]
                + e.bary[2] * values[v2 + c];
        }
    }
}

/// Transpose of `rasterize_kernel`: grid cotangents -> per-vertex cotangents.
pub fn rasterize_backward_kernel(
    table: &TexelTable,
    grid_grad: &[f32],
    channels: usize,
    values_grad: &mut [f32],
) {
    for e in &table.entries {
        let base = e.texel * channels;
        for c in 0..channels {
            let g = grid_grad[base + c];
            for k in 0..3 {
                values_grad[e.verts[k] * channels + c] += e.bary[k] * g;
            }
        }
    }
}

/// Forward readback kernel: grid -> per-vertex values.
pub fn sample_kernel(table: &TexelTable, grid: &[f32], channels: usize, out: &mut [f32]) {
    debug_assert_eq!(out.len(), table.vertex_samples.len() * channels);
    for (v, plan) in table.vertex_samples.iter().enumerate() {
        let base = v * channels;
        for c in 0..channels {
            let mut acc = 0.0f32;
            for k in 0..4 {
                acc += plan.weights[k] * grid[plan.texels[k] * channels + c];
            }
            out[base + c] = acc;
        }
    }
}

/// Transpose of `sample_kernel`.
pub fn sample_backward_kernel(
    table: &TexelTable,
    vertex_grad: &[f32],
    channels: usize,
    grid_grad: &mut [f32],
) {
    for (v, plan) in table.vertex_samples.iter().enumerate() {
        let base = v * channels;
        for c in 0..channels {
            let g = vertex_grad[base + c];
            for k in 0..4 {
                grid_grad[plan.texels[k] * channels + c] += plan.weights[k] * g;
            }
        }
    }
}

/// Rasterize per-vertex values onto the atlas grid.
pub fn rasterize_to_uv(
    table: &TexelTable,
    values: &[f32],
    channels: usize,
) -> Result<UvGrid, GeometryError> {
    if values.len() != table.vertex_samples.len() * channels {
        return Err(GeometryError::PositionCountMismatch {
            got: values.len(),
            expected: table.vertex_samples.len() * channels,
        });
    }
    let mut grid =
        UvGrid::zeros(table.height, table.width, channels, table.occupancy.clone());
    rasterize_kernel(table, values, channels, &mut grid.data);
    Ok(grid)
}

/// Bilinearly sample the grid back to per-vertex values.
pub fn sample_from_uv(table: &TexelTable, grid: &UvGrid) -> Result<Vec<f32>, GeometryError> {
    if grid.height != table.height || grid.width != table.width {
        return Err(GeometryError::GridMismatch {
            gh: grid.height,
            gw: grid.width,
            gc: grid.channels,
            eh: table.height,
            ew: table.width,
        });
    }
    let mut out = vec![0.0f32; table.vertex_samples.len() * grid.channels];
    sample_kernel(table, &grid.data, grid.channels, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn full_square_mesh() -> TriMesh {
        // Two triangles covering the whole unit UV square.
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        let faces = vec![[0, 1, 2], [1, 3, 2]];
        let uv = vec![
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        ];
        TriMesh::new(vertices, faces, uv).unwrap()
    }

    #[test]
    fn constant_field_rasterizes_to_constant() {
        let mesh = full_square_mesh();
        let table = TexelTable::build(&mesh, 16, 16).unwrap();
        assert_eq!(table.occupied_count(), 256);
        let values = vec![7.5f32; mesh.vertex_count()];
        let grid = rasterize_to_uv(&table, &values, 1).unwrap();
        for (t, &occ) in grid.occupancy.iter().enumerate() {
            assert!(occ);
            assert_eq!(grid.data[t], 7.5);
        }
        let back = sample_from_uv(&table, &grid).unwrap();
        for v in back {
            assert!((v - 7.5).abs() < 1e-6);
        }
    }

    #[test]
    fn corner_texel_takes_vertex_value() {
        // Single triangle whose vertex 0 sits exactly on a texel center.
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        // 2x2 grid: texel centers at 0.25/0.75. Put vertex 0's UV on (0.25, 0.25)
        // and make the triangle huge so the texel is strictly inside.
        let faces = vec![[0, 1, 2]];
        let uv = vec![[[0.25, 0.25], [0.95, 0.25], [0.25, 0.95]]];
        let mesh = TriMesh::new(vertices, faces, uv).unwrap();
        let table = TexelTable::build(&mesh, 2, 2).unwrap();
        let values = vec![3.0f32, -1.0, 5.0];
        let grid = rasterize_to_uv(&table, &values, 1).unwrap();
        // texel (0,0) center is exactly vertex 0 -> barycentric (1,0,0).
        assert!((grid.data[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn random_mesh_matches_brute_force_rasterizer() {
        let (mesh, _) = crate::assets::grid_swatch(4, 4, 0.1);
        let table = TexelTable::build(&mesh, 24, 24).unwrap();
        let values: Vec<f32> = (0..mesh.vertex_count()).map(|v| (v as f32) * 0.37 - 1.0).collect();
        let grid = rasterize_to_uv(&table, &values, 1).unwrap();

        // Independent point-in-triangle + barycentric oracle in f64.
        for y in 0..24 {
            for x in 0..24 {
                let u = (x as f64 + 0.5) / 24.0;
                let v = (y as f64 + 0.5) / 24.0;
                let mut expected = None;
                for (fi, corners) in mesh.face_uvs().iter().enumerate() {
                    if let Some(b) = uv_barycentric([u, v], corners[0], corners[1], corners[2]) {
                        if b.iter().all(|&l| l >= -1e-12) {
                            let f = mesh.faces()[fi];
                            expected = Some(
                                b[0] * values[f[0]] as f64
                                    + b[1] * values[f[1]] as f64
                                    + b[2] * values[f[2]] as f64,
                            );
                            break;
                        }
                    }
                }
                let t = y * 24 + x;
                match expected {
                    Some(e) => {
                        assert!(grid.occupancy[t]);
                        assert!((grid.data[t] as f64 - e).abs() < 1e-5);
                    }
                    None => {
                        assert!(!grid.occupancy[t]);
                        assert_eq!(grid.data[t], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn linear_field_roundtrip_within_texel_slope() {
        let mesh = full_square_mesh();
        let table = TexelTable::build(&mesh, 64, 64).unwrap();
        let uvs = mesh.vertex_uvs();
        let values: Vec<f32> = uvs.iter().map(|uv| uv[0] as f32).collect();
        let grid = rasterize_to_uv(&table, &values, 1).unwrap();
        let back = sample_from_uv(&table, &grid).unwrap();
        // f(u,v) = u has Lipschitz constant 1 in UV, so error <= one texel.
        for (v, &b) in back.iter().enumerate() {
            assert!(
                (b as f64 - uvs[v][0]).abs() <= 1.0 / 64.0 + 1e-6,
                "vertex {v}: {b} vs {}",
                uvs[v][0]
            );
        }
    }

    #[test]
    fn degenerate_uv_triangle_is_skipped() {
        let vertices =
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let faces = vec![[0, 1, 2]];
        // All three UV corners collinear: zero UV area.
        let uv = vec![[[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]]];
        let mesh = TriMesh::new(vertices, faces, uv).unwrap();
        let table = TexelTable::build(&mesh, 8, 8).unwrap();
        assert_eq!(table.occupied_count(), 0);
        // Every vertex readback plan must fall back to some texel without panicking.
        assert!(table.vertex_samples.iter().all(|p| p.fallback));
    }
}
