//! Triangle mesh representation, UV atlas operations, geodesics, sampling,
//! and the capsule-union body distance field.

mod geodesic;
mod obj;
mod sdf;
mod uv;

pub use geodesic::{farthest_point_sample, geodesic_distances};
pub use obj::{read_obj, write_obj, write_obj_to};
pub use sdf::{BodySdf, Capsule};
pub use uv::{
    rasterize_backward_kernel, rasterize_kernel, rasterize_to_uv, sample_backward_kernel,
    sample_from_uv, sample_kernel, TexelTable, UvGrid,
};

use nalgebra::{Point3, Vector3};

use crate::error::GeometryError;

/// A hinge between two triangles sharing an interior edge.
///
/// `edge` holds the shared vertices, `opposite` the remaining vertex of each
/// incident face (same order as `faces`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hinge {
    pub edge: [usize; 2],
    pub opposite: [usize; 2],
    pub faces: [usize; 2],
}

/// Garment or body surface with fixed topology and a UV atlas.
///
/// Vertices are in meters. UVs are stored per face corner so seams can map one
/// vertex to several chart locations.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    uv: Vec<[[f64; 2]; 3]>,
    edges: Vec<[usize; 2]>,
    neighbor_offsets: Vec<usize>,
    neighbor_indices: Vec<usize>,
    hinges: Vec<Hinge>,
    boundary_edges: usize,
    nonmanifold_edges: usize,
}

impl TriMesh {
    /// Build a mesh, deriving the unique edge list, one-ring adjacency and
    /// bending hinges. Every face must carry UV coordinates.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        uv: Vec<[[f64; 2]; 3]>,
    ) -> Result<Self, GeometryError> {
        if uv.len() != faces.len() {
            return Err(GeometryError::UvCountMismatch { faces: faces.len(), uvs: uv.len() });
        }
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(GeometryError::FaceIndexOutOfRange {
                        face: fi,
                        index: v,
                        count: vertices.len(),
                    });
                }
            }
        }

        // Unique undirected edges, each with the faces that use it.
        let mut edge_map: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (f[c], f[(c + 1) % 3]);
                let key = if a < b { [a, b] } else { [b, a] };
                // third vertex of this face, opposite the edge
                let opp = f[(c + 2) % 3];
                edge_map.push((key, fi, opp));
            }
        }
        edge_map.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));

        let mut edges = Vec::new();
        let mut hinges = Vec::new();
        let mut boundary_edges = 0;
        let mut nonmanifold_edges = 0;
        let mut i = 0;
        while i < edge_map.len() {
            let key = edge_map[i].0;
            let mut j = i;
            while j < edge_map.len() && edge_map[j].0 == key {
                j += 1;
            }
            edges.push(key);
            match j - i {
                1 => boundary_edges += 1,
                2 => hinges.push(Hinge {
                    edge: key,
                    opposite: [edge_map[i].2, edge_map[i + 1].2],
                    faces: [edge_map[i].1, edge_map[i + 1].1],
                }),
                _ => nonmanifold_edges += 1,
            }
            i = j;
        }

        // CSR one-ring adjacency from the edge list.
        let mut degree = vec![0usize; vertices.len()];
        for e in &edges {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let mut neighbor_offsets = vec![0usize; vertices.len() + 1];
        for v in 0..vertices.len() {
            neighbor_offsets[v + 1] = neighbor_offsets[v] + degree[v];
        }
        let mut neighbor_indices = vec![0usize; neighbor_offsets[vertices.len()]];
        let mut cursor = neighbor_offsets.clone();
        for e in &edges {
            neighbor_indices[cursor[e[0]]] = e[1];
            cursor[e[0]] += 1;
            neighbor_indices[cursor[e[1]]] = e[0];
            cursor[e[1]] += 1;
        }

        Ok(Self {
            vertices,
            faces,
            uv,
            edges,
            neighbor_offsets,
            neighbor_indices,
            hinges,
            boundary_edges,
            nonmanifold_edges,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn vertices_mut(&mut self) -> &mut [Point3<f64>] {
        &mut self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_uvs(&self) -> &[[[f64; 2]; 3]] {
        &self.uv
    }

    /// Unique undirected edges, each stored as `[min, max]`, lexicographically sorted.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// One-ring vertex neighborhood.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbor_indices[self.neighbor_offsets[v]..self.neighbor_offsets[v + 1]]
    }

    /// Interior-edge hinges used by the bending energy.
    pub fn hinges(&self) -> &[Hinge] {
        &self.hinges
    }

    pub fn is_manifold(&self) -> bool {
        self.nonmanifold_edges == 0
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edges
    }

    /// Vertices with no incident edge. Their Laplacian residual is defined as zero.
    pub fn isolated_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.neighbors(v).is_empty()).collect()
    }

    /// One UV coordinate per vertex, taken from the first face corner that
    /// references it. Seam vertices resolve to the chart of their first face.
    pub fn vertex_uvs(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0f64; 2]; self.vertex_count()];
        let mut seen = vec![false; self.vertex_count()];
        for (f, corners) in self.faces.iter().zip(&self.uv) {
            for c in 0..3 {
                let v = f[c];
                if !seen[v] {
                    seen[v] = true;
                    out[v] = corners[c];
                }
            }
        }
        out
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    /// Per-vertex lumped area: one third of each incident face's area.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0f64; self.vertex_count()];
        for (fi, f) in self.faces.iter().enumerate() {
            let third = self.face_area(fi) / 3.0;
            for &v in f {
                areas[v] += third;
            }
        }
        areas
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| (self.vertices[e[0]] - self.vertices[e[1]]).norm())
            .collect()
    }

    /// Replace vertex positions, keeping topology and UVs.
    pub fn with_positions(&self, positions: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        if positions.len() != self.vertex_count() {
            return Err(GeometryError::PositionCountMismatch {
                got: positions.len(),
                expected: self.vertex_count(),
            });
        }
        let mut out = self.clone();
        out.vertices = positions;
        Ok(out)
    }
}

pub fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Per-vertex deviation from the one-ring centroid: `p_v - mean(neighbors)`.
///
/// Isolated vertices get a zero residual.
pub fn laplacian_residual(
    mesh: &TriMesh,
    positions: &[Point3<f64>],
) -> Result<Vec<Vector3<f64>>, GeometryError> {
    if positions.len() != mesh.vertex_count() {
        return Err(GeometryError::PositionCountMismatch {
            got: positions.len(),
            expected: mesh.vertex_count(),
        });
    }
    let mut out = vec![Vector3::zeros(); positions.len()];
    for v in 0..positions.len() {
        let ring = mesh.neighbors(v);
        if ring.is_empty() {
            continue;
        }
        let mut centroid = Vector3::zeros();
        for &u in ring {
            centroid += positions[u].coords;
        }
        centroid /= ring.len() as f64;
        out[v] = positions[v].coords - centroid;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quad_mesh() -> TriMesh {
        // Two triangles sharing edge (1, 2).
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
    fn edges_are_unique_and_sorted() {
        let mesh = quad_mesh();
        assert_eq!(mesh.edges(), &[[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]]);
        assert_eq!(mesh.boundary_edge_count(), 4);
        assert!(mesh.is_manifold());
    }

    #[test]
    fn hinge_found_on_shared_edge() {
        let mesh = quad_mesh();
        assert_eq!(mesh.hinges().len(), 1);
        let h = mesh.hinges()[0];
        assert_eq!(h.edge, [1, 2]);
        assert_eq!(h.opposite, [0, 3]);
    }

    #[test]
    fn face_index_out_of_range_rejected() {
        let vertices = vec![Point3::origin(); 2];
        let err = TriMesh::new(vertices, vec![[0, 1, 2]], vec![[[0.0; 2]; 3]]).unwrap_err();
        assert!(matches!(err, GeometryError::FaceIndexOutOfRange { .. }));
    }

    #[test]
    fn laplacian_zero_at_centroid() {
        let mesh = quad_mesh();
        // Vertex 1 neighbors: 0, 2, 3. Place it at their centroid.
        let mut positions = mesh.vertices().to_vec();
        let centroid = (positions[0].coords + positions[2].coords + positions[3].coords) / 3.0;
        positions[1] = Point3::from(centroid);
        let res = laplacian_residual(&mesh, &positions).unwrap();
        assert_relative_eq!(res[1].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_chain_offset() {
        // 1D chain 0-1-2; vertex 1 at height 1, neighbors at 0.
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let faces = vec![[0, 1, 2]];
        let uv = vec![[[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]]];
        let mesh = TriMesh::new(vertices, faces, uv).unwrap();
        // Use neighbor positions both at y=0 for vertex 1.
        let positions = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
        ];
        let res = laplacian_residual(&mesh, &positions).unwrap();
        // Vertex 1 also neighbors vertex 0 and 2 through the face edges.
        assert_relative_eq!(res[1].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn laplacian_interior_flat_grid_vanishes() {
        let (mesh, _) = crate::assets::grid_swatch(5, 5, 0.1);
        let res = laplacian_residual(&mesh, mesh.vertices()).unwrap();
        for row in 1..4 {
            for col in 1..4 {
                let v = row * 5 + col;
                assert!(res[v].norm() <= 1e-12, "interior residual {} at {v}", res[v].norm());
            }
        }
    }

    #[test]
    fn laplacian_rotates_with_rigid_transform() {
        let mesh = quad_mesh();
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.8, 1.2);
        let t = Vector3::new(0.5, -2.0, 3.0);
        let moved: Vec<_> =
            mesh.vertices().iter().map(|p| Point3::from(rot * p.coords + t)).collect();
        let base = laplacian_residual(&mesh, mesh.vertices()).unwrap();
        let after = laplacian_residual(&mesh, &moved).unwrap();
        for (b, a) in base.iter().zip(&after) {
            assert_relative_eq!((rot * b - a).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
