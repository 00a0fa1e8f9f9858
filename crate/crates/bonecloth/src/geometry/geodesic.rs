//! Edge-graph geodesic distances and farthest point sampling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

use crate::error::GeometryError;
use crate::geometry::TriMesh;

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance; ties broken by vertex index for determinism.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest edge-path distance from any source to every vertex (Dijkstra with
/// Euclidean edge weights). Unreachable vertices get `f64::INFINITY`.
pub fn geodesic_distances(
    mesh: &TriMesh,
    sources: &[usize],
) -> Result<Vec<f64>, GeometryError> {
    if sources.is_empty() {
        return Err(GeometryError::EmptySources);
    }
    let n = mesh.vertex_count();
    for &s in sources {
        if s >= n {
            return Err(GeometryError::SourceOutOfRange { index: s, count: n });
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if dist[s] > 0.0 {
            dist[s] = 0.0;
            heap.push(HeapEntry { dist: 0.0, vertex: s });
        }
    }
    while let Some(HeapEntry { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        let pv = mesh.vertices()[v];
        for &u in mesh.neighbors(v) {
            let nd = d + (mesh.vertices()[u] - pv).norm();
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(HeapEntry { dist: nd, vertex: u });
            }
        }
    }
    Ok(dist)
}

/// Greedy max-min farthest point sampling.
///
/// Starts from `seed_index` and repeatedly picks the point with the largest
/// minimum Euclidean distance to the selected set; ties break to the lowest
/// index.
pub fn farthest_point_sample(
    points: &[Point3<f64>],
    count: usize,
    seed_index: usize,
) -> Result<Vec<usize>, GeometryError> {
    if count == 0 {
        return Err(GeometryError::ZeroSampleCount);
    }
    if count > points.len() {
        return Err(GeometryError::SampleCountExceedsPoints {
            requested: count,
            available: points.len(),
        });
    }
    if seed_index >= points.len() {
        return Err(GeometryError::SeedOutOfRange { index: seed_index, count: points.len() });
    }

    let mut selected = Vec::with_capacity(count);
    let mut min_dist = vec![f64::INFINITY; points.len()];
    let mut current = seed_index;
    selected.push(current);
    while selected.len() < count {
        let pc = points[current];
        let mut best = usize::MAX;
        let mut best_dist = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - pc).norm();
            if d < min_dist[i] {
                min_dist[i] = d;
            }
            if min_dist[i] > best_dist && !selected.contains(&i) {
                best_dist = min_dist[i];
                best = i;
            }
        }
        selected.push(best);
        current = best;
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TriMesh;

    fn path_mesh() -> TriMesh {
        // Path 0-1-2 with unit edges; a single degenerate-ish triangle carries
        // both edges (the third edge 0-2 is avoided by using two faces).
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.5, 1.0, 0.0),
            Point3::new(1.5, 1.0, 0.0),
        ];
        let faces = vec![[0, 1, 3], [1, 2, 4]];
        let uv = vec![[[0.0; 2]; 3], [[0.0; 2]; 3]];
        TriMesh::new(vertices, faces, uv).unwrap()
    }

    #[test]
    fn chain_of_unit_edges() {
        let mesh = path_mesh();
        let d = geodesic_distances(&mesh, &[0]).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 1.0);
        assert_eq!(d[2], 2.0);
    }

    #[test]
    fn all_sources_gives_zeros() {
        let mesh = path_mesh();
        let all: Vec<usize> = (0..mesh.vertex_count()).collect();
        let d = geodesic_distances(&mesh, &all).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_sources_rejected() {
        let mesh = path_mesh();
        assert!(matches!(
            geodesic_distances(&mesh, &[]),
            Err(GeometryError::EmptySources)
        ));
    }

    #[test]
    fn grid_matches_bellman_ford_oracle() {
        let (mesh, _) = crate::assets::grid_swatch(5, 5, 0.13);
        let d = geodesic_distances(&mesh, &[0]).unwrap();
        let oracle = brute_force_shortest(&mesh, 0);
        for (a, b) in d.iter().zip(&oracle) {
            assert_eq!(a, b, "dijkstra disagrees with bellman-ford");
        }
    }

    /// Bellman-Ford relaxation; an independent oracle for shortest paths.
    pub(crate) fn brute_force_shortest(mesh: &TriMesh, source: usize) -> Vec<f64> {
        let n = mesh.vertex_count();
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for e in mesh.edges() {
                let w = (mesh.vertices()[e[0]] - mesh.vertices()[e[1]]).norm();
                if dist[e[0]] + w < dist[e[1]] {
                    dist[e[1]] = dist[e[0]] + w;
                    changed = true;
                }
                if dist[e[1]] + w < dist[e[0]] {
                    dist[e[0]] = dist[e[1]] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    #[test]
    fn fps_unit_square() {
        let points = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        // Seed at (0,0): the farthest point is the opposite corner.
        let picks = farthest_point_sample(&points, 2, 0).unwrap();
        assert_eq!(picks, vec![0, 3]);
        // Third pick: corners 1 and 2 are tied at distance 1 from both
        // selected; the lower index wins.
        let picks = farthest_point_sample(&points, 3, 0).unwrap();
        assert_eq!(picks, vec![0, 3, 1]);
    }

    #[test]
    fn fps_full_count_returns_everything() {
        let points = vec![
            Point3::new(0.3, 0.0, 0.0),
            Point3::new(1.0, 0.5, 0.0),
            Point3::new(0.0, 1.0, 2.0),
        ];
        let mut picks = farthest_point_sample(&points, 3, 1).unwrap();
        picks.sort_unstable();
        assert_eq!(picks, vec![0, 1, 2]);
    }

    #[test]
    fn fps_count_exceeds_points_rejected() {
        let points = vec![Point3::origin()];
        assert!(matches!(
            farthest_point_sample(&points, 2, 0),
            Err(GeometryError::SampleCountExceedsPoints { .. })
        ));
    }
}
