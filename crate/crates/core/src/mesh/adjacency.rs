use std::collections::{HashMap, HashSet};

use num_traits::{Signed, Zero};

use super::{orient, Point};
use crate::error::{HtvError, Result};

/// Undirected edge `vertices[0] < vertices[1]`.
///
/// `left` is the triangle traversing the edge as `v0 -> v1` (it lies to the
/// left of that direction); `right` traverses `v1 -> v0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.left.is_some() && self.right.is_some()
    }
}

/// Builds the lexicographically sorted edge table and rejects non-conforming input.
pub(super) fn build_adjacency(
    vertices: &[Point],
    coords: &[[f64; 2]],
    triangles: &[[usize; 3]],
) -> Result<(Vec<Edge>, HashMap<(usize, usize), usize>)> {
    let mut seen_points: HashMap<&Point, usize> = HashMap::with_capacity(vertices.len());
    for (i, p) in vertices.iter().enumerate() {
        if let Some(j) = seen_points.insert(p, i) {
            return Err(HtvError::Nonconforming(format!("vertices {j} and {i} coincide")));
        }
    }

    let mut seen_tris = HashSet::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut key = *tri;
        key.sort_unstable();
        if key[0] == key[1] || key[1] == key[2] {
            return Err(HtvError::Nonconforming(format!("triangle {t} repeats a vertex")));
        }
        if !seen_tris.insert(key) {
            return Err(HtvError::Nonconforming(format!("duplicate triangle {t} {tri:?}")));
        }
    }

    // (lo, hi, triangle, traverses lo -> hi)
    let mut half: Vec<(usize, usize, usize, bool)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            half.push((a.min(b), a.max(b), t, a < b));
        }
    }
    half.sort_unstable();

    let mut edges = Vec::new();
    let mut i = 0;
    while i < half.len() {
        let (lo, hi, _, _) = half[i];
        let mut j = i;
        while j < half.len() && half[j].0 == lo && half[j].1 == hi {
            j += 1;
        }
        if j - i > 2 {
            return Err(HtvError::Nonconforming(format!(
                "edge ({lo}, {hi}) has {} incident triangles",
                j - i
            )));
        }
        let mut edge = Edge { vertices: [lo, hi], left: None, right: None };
        for &(_, _, t, forward) in &half[i..j] {
            let slot = if forward { &mut edge.left } else { &mut edge.right };
            if slot.is_some() {
                return Err(HtvError::Nonconforming(format!(
                    "triangles on edge ({lo}, {hi}) overlap (same side)"
                )));
            }
            *slot = Some(t);
        }
        edges.push(edge);
        i = j;
    }

    check_hanging_vertices(vertices, coords, &edges)?;

    let lookup = edges.iter().enumerate().map(|(id, e)| ((e.vertices[0], e.vertices[1]), id)).collect();
    Ok((edges, lookup))
}

/// A vertex in the relative interior of an edge can only sit on a boundary
/// edge of a triangulation that is otherwise edge-manifold.
fn check_hanging_vertices(vertices: &[Point], coords: &[[f64; 2]], edges: &[Edge]) -> Result<()> {
    let boundary: Vec<&Edge> = edges.iter().filter(|e| !e.is_interior()).collect();
    if boundary.is_empty() || vertices.len() < 3 {
        return Ok(());
    }
    let grid = BucketGrid::new(coords);
    for e in boundary {
        let [a, b] = e.vertices;
        let (pa, pb) = (coords[a], coords[b]);
        let lo = [pa[0].min(pb[0]), pa[1].min(pb[1])];
        let hi = [pa[0].max(pb[0]), pa[1].max(pb[1])];
        for v in grid.query(lo, hi) {
            if v == a || v == b {
                continue;
            }
            if on_open_segment(&vertices[a], &vertices[b], &vertices[v]) {
                return Err(HtvError::Nonconforming(format!("hanging vertex {v} on edge ({a}, {b})")));
            }
        }
    }
    Ok(())
}

fn on_open_segment(a: &Point, b: &Point, p: &Point) -> bool {
    if !orient(a, b, p).is_zero() {
        return false;
    }
    let d1 = (&p.x - &a.x) * (&b.x - &a.x) + (&p.y - &a.y) * (&b.y - &a.y);
    let d2 = (&p.x - &b.x) * (&a.x - &b.x) + (&p.y - &b.y) * (&a.y - &b.y);
    d1.is_positive() && d2.is_positive()
}

struct BucketGrid {
    origin: [f64; 2],
    cell: [f64; 2],
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn new(coords: &[[f64; 2]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in coords {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let n = ((coords.len() as f64).sqrt().ceil() as usize).clamp(1, 4096);
        let cell = [((hi[0] - lo[0]) / n as f64).max(f64::MIN_POSITIVE), ((hi[1] - lo[1]) / n as f64).max(f64::MIN_POSITIVE)];
        let mut grid = Self { origin: lo, cell, n, buckets: vec![Vec::new(); n * n] };
        for (i, c) in coords.iter().enumerate() {
            let (cx, cy) = grid.cell_of(*c);
            grid.buckets[cy * n + cx].push(i);
        }
        grid
    }

    fn cell_of(&self, c: [f64; 2]) -> (usize, usize) {
        let f = |k: usize| {
            let r = ((c[k] - self.origin[k]) / self.cell[k]).floor();
            if r.is_nan() || r < 0.0 {
                0
            } else {
                (r as usize).min(self.n - 1)
            }
        };
        (f(0), f(1))
    }

    fn query(&self, lo: [f64; 2], hi: [f64; 2]) -> impl Iterator<Item = usize> + '_ {
        // Pad by one cell to absorb f64 rounding of rational coordinates.
        let (x0, y0) = self.cell_of(lo);
        let (x1, y1) = self.cell_of(hi);
        let (x0, y0) = (x0.saturating_sub(1), y0.saturating_sub(1));
        let (x1, y1) = ((x1 + 1).min(self.n - 1), (y1 + 1).min(self.n - 1));
        (y0..=y1).flat_map(move |y| (x0..=x1).flat_map(move |x| self.buckets[y * self.n + x].iter().copied()))
    }
}

#[cfg(test)]
mod tests {
    use crate::error::HtvError;
    use crate::mesh::{Point, Triangulation};

    #[test]
    fn hanging_vertex_rejected() {
        // Left triangle uses edge (1,0)-(1,2) whole; right side splits it at (1,1).
        let pts = vec![
            Point::from_ints(0, 0),
            Point::from_ints(2, 0),
            Point::from_ints(2, 2),
            Point::from_ints(0, 2),
            Point::from_ints(1, 1),
        ];
        let tris = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [0, 4, 3]];
        assert!(Triangulation::new(pts.clone(), tris).is_ok());
        let tris = vec![[0, 1, 4], [1, 2, 4], [0, 2, 3]];
        let err = Triangulation::new(pts, tris).unwrap_err();
        assert!(matches!(err, HtvError::Nonconforming(ref m) if m.contains("hanging")), "{err}");
    }

    #[test]
    fn too_many_triangles_on_edge() {
        let pts = vec![
            Point::from_ints(0, 0),
            Point::from_ints(1, 0),
            Point::from_ints(0, 1),
            Point::from_ints(0, -1),
            Point::from_ints(1, 1),
        ];
        let tris = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(matches!(Triangulation::new(pts, tris), Err(HtvError::Nonconforming(_))));
    }

    #[test]
    fn duplicate_triangle_rejected() {
        let pts = vec![Point::from_ints(0, 0), Point::from_ints(1, 0), Point::from_ints(0, 1)];
        let err = Triangulation::new(pts, vec![[0, 1, 2], [1, 2, 0]]).unwrap_err();
        assert!(matches!(err, HtvError::Nonconforming(ref m) if m.contains("duplicate")));
    }

    #[test]
    fn interior_edge_sides() {
        let sq = Triangulation::uniform_grid(1, true);
        let (_, e) = sq.interior_edges().next().unwrap();
        assert_eq!(e.vertices, [0, 3]);
        assert!(e.left.is_some() && e.right.is_some());
        assert_ne!(e.left, e.right);
    }
}
