use super::PolygonalMesh;

/// Cells sharing a vertex, with the patch skeleton split into interior and rim edges.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPatch {
    pub vertex: usize,
    pub cells: Vec<usize>,
    /// Internal mesh edges shared by two patch cells.
    pub interior_edges: Vec<usize>,
    /// Edges of patch cells on the patch boundary.
    pub rim_edges: Vec<usize>,
    pub is_boundary_vertex: bool,
}

impl VertexPatch {
    pub fn contains_cell(&self, k: usize) -> bool {
        self.cells.binary_search(&k).is_ok()
    }
}

pub(super) fn vertex_patches(mesh: &PolygonalMesh) -> Vec<VertexPatch> {
    let vc = mesh.vertex_cells();
    let bnd = mesh.boundary_vertices();
    (0..mesh.n_vertices())
        .map(|v| {
            let mut cells = vc[v].clone();
            cells.sort_unstable();
            cells.dedup();
            let mut interior_edges = Vec::new();
            let mut rim_edges = Vec::new();
            for &k in &cells {
                for ce in &mesh.cell_edges[k] {
                    let e = &mesh.edges[ce.edge];
                    let other = if e.left == k { e.right } else { Some(e.left) };
                    match other {
                        Some(o) if cells.binary_search(&o).is_ok() => {
                            // count once, from the left cell
                            if e.left == k {
                                interior_edges.push(ce.edge);
                            }
                        }
                        _ => rim_edges.push(ce.edge),
                    }
                }
            }
            interior_edges.sort_unstable();
            rim_edges.sort_unstable();
            VertexPatch {
                vertex: v,
                cells,
                interior_edges,
                rim_edges,
                is_boundary_vertex: bnd[v],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point;

    fn vertex_at(m: &PolygonalMesh, x: f64, y: f64) -> usize {
        m.vertices.iter().position(|p| (p - Point::new(x, y)).norm() < 1e-12).unwrap()
    }

    #[test]
    fn grid_patches() {
        let m = PolygonalMesh::square(2);
        let patches = m.vertex_patches();
        let c = &patches[vertex_at(&m, 0.5, 0.5)];
        assert_eq!((c.cells.len(), c.interior_edges.len()), (4, 4));
        assert!(!c.is_boundary_vertex);
        let b = &patches[vertex_at(&m, 0.5, 0.0)];
        assert_eq!((b.cells.len(), b.interior_edges.len()), (2, 1));
        assert!(b.is_boundary_vertex);
    }

    #[test]
    fn reentrant_corner_patch() {
        let m = PolygonalMesh::lshape(2);
        let p = &m.vertex_patches()[vertex_at(&m, 0.0, 0.0)];
        assert_eq!(p.cells.len(), 3);
        assert_eq!(p.interior_edges.len(), 2);
        assert!(p.is_boundary_vertex);
    }

    #[test]
    fn each_internal_edge_in_two_patches() {
        let m = PolygonalMesh::lshape(2).refine(&[0, 7]).unwrap().0;
        let patches = m.vertex_patches();
        for e in m.internal_edges() {
            let count = patches.iter().filter(|p| p.interior_edges.contains(&e)).count();
            assert_eq!(count, 2, "edge {e}");
            let [a, b] = m.edges[e].v;
            assert!(patches[a].interior_edges.contains(&e) && patches[b].interior_edges.contains(&e));
        }
        for p in &patches {
            for &k in &p.cells {
                assert!(m.cells[k].contains(&p.vertex));
            }
        }
    }
}
