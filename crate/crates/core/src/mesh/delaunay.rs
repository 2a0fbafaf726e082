//! Exact Delaunay triangulation of small rational point sets.
//!
//! A lexicographic sweep builds some triangulation of the convex hull, then
//! Lawson flips with an exact in-circle test turn it into a Delaunay one.
//! Quadratic in the worst case; meant for template cells and test meshes of
//! a few hundred points.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use super::{orient, Point, Rational};
use crate::error::{HtvError, Result};

/// Positive when `d` lies strictly inside the circumcircle of the counterclockwise `(a, b, c)`.
pub fn incircle(a: &Point, b: &Point, c: &Point, d: &Point) -> Rational {
    let row = |p: &Point| {
        let dx = &p.x - &d.x;
        let dy = &p.y - &d.y;
        let w = &dx * &dx + &dy * &dy;
        (dx, dy, w)
    };
    let (ax, ay, aw) = row(a);
    let (bx, by, bw) = row(b);
    let (cx, cy, cw) = row(c);
    &ax * (&by * &cw - &bw * &cy) - &ay * (&bx * &cw - &bw * &cx) + &aw * (&bx * &cy - &by * &cx)
}

/// Delaunay triangulation (counterclockwise triangles) of `points`.
///
/// Cocircular configurations are resolved by whatever the sweep produced,
/// which is deterministic for a given input order.
pub fn triangulate(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].cmp(&points[j]));
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(HtvError::Nonconforming(format!("duplicate points {} and {}", w[0], w[1])));
        }
    }
    let mut triangles = sweep(points, &order)?;
    lawson_flips(points, &mut triangles);
    Ok(triangles)
}

fn sweep(points: &[Point], order: &[usize]) -> Result<Vec<[usize; 3]>> {
    if order.len() < 3 {
        return Err(HtvError::InvalidParameter("need at least three points".into()));
    }
    let p = |i: usize| &points[order[i]];
    let k = (2..order.len())
        .find(|&k| !orient(p(0), p(1), p(k)).is_zero())
        .ok_or_else(|| HtvError::InvalidParameter("all points are collinear".into()))?;
    let ccw = orient(p(0), p(1), p(k)).is_positive();

    let mut triangles = Vec::new();
    for i in 0..k - 1 {
        let (a, b, c) = (order[i], order[i + 1], order[k]);
        triangles.push(if ccw { [a, b, c] } else { [b, a, c] });
    }
    let mut hull: Vec<usize> = if ccw {
        order[..=k].to_vec()
    } else {
        let mut h = vec![order[0], order[k]];
        h.extend(order[1..k].iter().rev());
        h
    };

    for &v in &order[k + 1..] {
        let n = hull.len();
        let visible: Vec<bool> = (0..n)
            .map(|i| orient(&points[hull[i]], &points[hull[(i + 1) % n]], &points[v]).is_negative())
            .collect();
        // first visible edge whose predecessor is not visible
        let start = (0..n)
            .find(|&i| visible[i] && !visible[(i + n - 1) % n])
            .ok_or_else(|| HtvError::InvalidParameter("sweep found no visible hull edge".into()))?;
        let mut end = start;
        while visible[end % n] {
            let (a, b) = (hull[end % n], hull[(end + 1) % n]);
            triangles.push([b, a, v]);
            end += 1;
        }
        // hull[start] .. hull[end] (cyclic) gets replaced by hull[start], v, hull[end]
        let mut next = Vec::with_capacity(n + 1);
        let first = start;
        let last = end % n;
        let mut i = last;
        loop {
            next.push(hull[i]);
            if i == first {
                break;
            }
            i = (i + 1) % n;
        }
        next.push(v);
        hull = next;
    }
    Ok(triangles)
}

fn lawson_flips(points: &[Point], triangles: &mut [[usize; 3]]) {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            directed.insert((tri[k], tri[(k + 1) % 3]), t);
        }
    }
    let mut stack: Vec<(usize, usize)> = directed.keys().filter(|(a, b)| a < b).copied().collect();
    stack.sort_unstable();

    while let Some((a, b)) = stack.pop() {
        let (Some(&t1), Some(&t2)) = (directed.get(&(a, b)), directed.get(&(b, a))) else {
            continue;
        };
        let c = third(&triangles[t1], a, b);
        let d = third(&triangles[t2], b, a);
        if !incircle(&points[a], &points[b], &points[c], &points[d]).is_positive() {
            continue;
        }
        for t in [t1, t2] {
            let tri = triangles[t];
            for k in 0..3 {
                directed.remove(&(tri[k], tri[(k + 1) % 3]));
            }
        }
        triangles[t1] = [a, d, c];
        triangles[t2] = [d, b, c];
        for t in [t1, t2] {
            let tri = triangles[t];
            for k in 0..3 {
                directed.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        for (u, w) in [(a, d), (d, b), (b, c), (c, a)] {
            stack.push((u.min(w), u.max(w)));
        }
    }
}

/// Vertex of `tri` completing the directed edge `a -> b`.
fn third(tri: &[usize; 3], a: usize, b: usize) -> usize {
    for k in 0..3 {
        if tri[k] == a && tri[(k + 1) % 3] == b {
            return tri[(k + 2) % 3];
        }
    }
    unreachable!("directed edge ({a}, {b}) not in triangle {tri:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{rat, Triangulation};

    fn is_delaunay(points: &[Point], tris: &[[usize; 3]]) -> bool {
        tris.iter().all(|t| {
            (0..points.len())
                .filter(|v| !t.contains(v))
                .all(|v| !incircle(&points[t[0]], &points[t[1]], &points[t[2]], &points[v]).is_positive())
        })
    }

    #[test]
    fn square_with_center() {
        let pts = vec![
            Point::from_ints(0, 0),
            Point::from_ints(2, 0),
            Point::from_ints(2, 2),
            Point::from_ints(0, 2),
            Point::from_ints(1, 1),
        ];
        let tris = triangulate(&pts).unwrap();
        assert_eq!(tris.len(), 4);
        assert!(is_delaunay(&pts, &tris));
        Triangulation::new(pts, tris).unwrap();
    }

    #[test]
    fn collinear_prefix_and_boundary_points() {
        // Right triangle with points along every side, no interior points.
        let mut pts = Vec::new();
        for i in 0..=4 {
            pts.push(Point::new(rat(i, 4), rat(0, 1)));
        }
        for i in 1..=4 {
            pts.push(Point::new(rat(0, 1), rat(i, 4)));
        }
        for i in 1..4 {
            pts.push(Point::new(rat(i, 4), rat(4 - i, 4)));
        }
        let tris = triangulate(&pts).unwrap();
        // n boundary points on a convex polygon, all on the hull: n - 2 triangles
        assert_eq!(tris.len(), pts.len() - 2);
        assert!(is_delaunay(&pts, &tris));
        Triangulation::new(pts, tris).unwrap();
    }

    #[test]
    fn random_points_are_delaunay() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut pts: Vec<Point> = vec![
                Point::from_ints(0, 0),
                Point::from_ints(1, 0),
                Point::from_ints(1, 1),
                Point::from_ints(0, 1),
            ];
            while pts.len() < 30 {
                let p = Point::new(rat(rng.gen_range(1..1000), 1000), rat(rng.gen_range(1..1000), 1000));
                if !pts.contains(&p) {
                    pts.push(p);
                }
            }
            let tris = triangulate(&pts).unwrap();
            assert!(is_delaunay(&pts, &tris));
            let mesh = Triangulation::new(pts, tris).unwrap();
            mesh.check_covers_unit_square().unwrap();
        }
    }

    #[test]
    fn rejects_collinear_and_duplicates() {
        let pts = vec![Point::from_ints(0, 0), Point::from_ints(1, 1), Point::from_ints(2, 2)];
        assert!(triangulate(&pts).is_err());
        let pts = vec![Point::from_ints(0, 0), Point::from_ints(0, 0), Point::from_ints(2, 1)];
        assert!(triangulate(&pts).is_err());
    }
}
