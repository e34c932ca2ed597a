//! Centroid split of marked cells.
//!
//! Every geometric side (maximal run of collinear mesh edges between two
//! corners) of a marked cell is bisected and the cell is split into one child
//! per corner: corner, side midpoints and centroid. A quadrilateral therefore
//! splits into four quadrilaterals. Midpoints that land inside an edge of an
//! unmarked neighbour become hanging vertices of that neighbour.

use super::{Point, PolygonalMesh};
use crate::error::{Result, VemError};
use crate::polybasis::quadrature::{area_centroid, signed_area};
use std::collections::BTreeMap;

fn corners(pts: &[Point]) -> Vec<usize> {
    let n = pts.len();
    (0..n)
        .filter(|&i| {
            let (prev, cur, next) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            let (d0, d1) = (cur - prev, next - cur);
            let cross = d0.x * d1.y - d0.y * d1.x;
            cross.abs() > 1e-10 * d0.norm() * d1.norm() || d0.dot(&d1) < 0.0
        })
        .collect()
}

/// Positions in the loop (start index, inclusive run to the next corner).
fn sides(loop_len: usize, corner_ids: &[usize]) -> Vec<Vec<usize>> {
    let m = corner_ids.len();
    (0..m)
        .map(|j| {
            let (s, e) = (corner_ids[j], corner_ids[(j + 1) % m]);
            let mut run = vec![s];
            let mut i = s;
            while i != e {
                i = (i + 1) % loop_len;
                run.push(i);
            }
            run
        })
        .collect()
}

pub(super) fn refine(mesh: &PolygonalMesh, marked: &[usize]) -> Result<(PolygonalMesh, Vec<usize>)> {
    let mut is_marked = vec![false; mesh.n_cells()];
    for &k in marked {
        if k >= mesh.n_cells() {
            return Err(VemError::Topology(format!("marked cell {k} does not exist")));
        }
        is_marked[k] = true;
    }
    let mut vertices = mesh.vertices.clone();
    let scale = mesh.vertices.iter().map(|p| p.norm()).fold(1.0, f64::max);

    // phase 1: side midpoints, registered on the mesh edge that contains them
    let mut splits: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in (0..mesh.n_cells()).filter(|&k| is_marked[k]) {
        let cell = &mesh.cells[k];
        let pts = mesh.cell_points(k);
        let cs = corners(&pts);
        for run in sides(cell.len(), &cs) {
            let (a, b) = (pts[run[0]], pts[*run.last().unwrap()]);
            let mid = (a + b) * 0.5;
            if run.iter().any(|&i| (pts[i] - mid).norm() <= 1e-13 * scale) {
                continue;
            }
            let host = run.windows(2).position(|w| super::on_open_segment(&mid, &pts[w[0]], &pts[w[1]]));
            let Some(pos) = host else {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: "side midpoint not found on any edge".into(),
                });
            };
            let local_edge = run[pos];
            let edge = mesh.cell_edges[k][local_edge].edge;
            let list = splits.entry(edge).or_default();
            if !list.iter().any(|&v| (vertices[v] - mid).norm() <= 1e-13 * scale) {
                list.push(vertices.len());
                vertices.push(mid);
            }
        }
    }

    // phase 2: every loop picks up the new points on its edges
    let augmented: Vec<Vec<usize>> = (0..mesh.n_cells())
        .map(|k| {
            let cell = &mesh.cells[k];
            let mut out = Vec::with_capacity(cell.len() + 4);
            for (i, ce) in mesh.cell_edges[k].iter().enumerate() {
                let a = cell[i];
                out.push(a);
                if let Some(list) = splits.get(&ce.edge) {
                    let pa = vertices[a];
                    let mut extra = list.clone();
                    extra.sort_by(|&u, &v| (vertices[u] - pa).norm().partial_cmp(&(vertices[v] - pa).norm()).unwrap());
                    out.extend(extra);
                }
            }
            out
        })
        .collect();

    // phase 3: split marked cells along their augmented loops
    let mut cells = Vec::new();
    let mut parent = Vec::new();
    for k in 0..mesh.n_cells() {
        let lp = &augmented[k];
        if !is_marked[k] {
            cells.push(lp.clone());
            parent.push(k);
            continue;
        }
        let pts: Vec<Point> = lp.iter().map(|&v| vertices[v]).collect();
        let centroid = area_centroid(&pts);
        let c_id = vertices.len();
        vertices.push(centroid);
        let cs = corners(&pts);
        let runs = sides(lp.len(), &cs);
        let mid_pos: Vec<usize> = runs
            .iter()
            .map(|run| {
                let (a, b) = (pts[run[0]], pts[*run.last().unwrap()]);
                let mid = (a + b) * 0.5;
                run.iter()
                    .position(|&i| (pts[i] - mid).norm() <= 1e-13 * scale)
                    .expect("midpoint inserted in phase 2")
            })
            .collect();
        let m = runs.len();
        for j in 0..m {
            let prev = &runs[(j + m - 1) % m];
            let cur = &runs[j];
            let mut child: Vec<usize> = prev[mid_pos[(j + m - 1) % m]..prev.len() - 1].iter().map(|&i| lp[i]).collect();
            child.extend(cur[..=mid_pos[j]].iter().map(|&i| lp[i]));
            child.push(c_id);
            let cp: Vec<Point> = child.iter().map(|&v| vertices[v]).collect();
            if signed_area(&cp) <= 0.0 || !super::is_simple(&cp) {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: "refinement produced an invalid child".into(),
                });
            }
            cells.push(child);
            parent.push(k);
        }
    }
    let refined = PolygonalMesh::new(vertices, cells)?;
    let (before, after) = (mesh.total_area(), refined.total_area());
    if (before - after).abs() > 1e-12 * before {
        return Err(VemError::Topology(format!("area not preserved by refinement: {before} -> {after}")));
    }
    Ok((refined, parent))
}
