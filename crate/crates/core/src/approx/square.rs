//! Triangulation of a single dyadic square.
//!
//! Work happens in integer coordinates `(X, Y)` on `[0, W]^2`, in units of
//! `side / W`, with `W = 2 * 2^K * F * q * (p^2 + q^2)` for the canonical pair
//! `p < q`. In these units the grid steps are `2q (p, q)` and `2q (-q, p)`,
//! the boundary spacing is `2 (p^2 + q^2)` and the centre of the square is
//! `(W/2, W/2)`, so the quarter turn `(X, Y) -> (Y, W - X)` and the
//! reflection `(X, Y) -> (W - Y, W - X)` stay integral.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::{square_multiplier, MeshPlan, SquareFrame};
use crate::error::{HtvError, Result};
use crate::mesh::delaunay::triangulate;
use crate::mesh::{orient, Point, Rational, Triangulation};

/// Grid cells allowed in a single square.
const MAX_CELLS_PER_SQUARE: i64 = 4_000_000;

pub(crate) struct RawSquare {
    pub verts: Vec<(i64, i64)>,
    pub tris: Vec<[usize; 3]>,
    pub band: Vec<bool>,
    pub w: i64,
}

/// A square's triangulation with the transition-band triangles flagged.
#[derive(Debug, Clone)]
pub struct SquareMesh {
    pub triangulation: Triangulation,
    pub band: Vec<bool>,
}

impl SquareMesh {
    pub fn band_triangles(&self) -> usize {
        self.band.iter().filter(|&&b| b).count()
    }

    /// Exact total area of the transition bands.
    pub fn band_area(&self) -> Rational {
        let v = self.triangulation.vertices();
        let twice = self
            .triangulation
            .triangles()
            .iter()
            .zip(&self.band)
            .filter(|(_, &b)| b)
            .fold(Rational::zero(), |acc, (t, _)| acc + orient(&v[t[0]], &v[t[1]], &v[t[2]]));
        twice / BigInt::from(2)
    }
}

fn orient_i(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> i128 {
    (b.0 - a.0) as i128 * (c.1 - a.1) as i128 - (b.1 - a.1) as i128 * (c.0 - a.0) as i128
}

/// Band triangle `A E B` relative to `A`, triangulated once.
fn template(p: i64, q: i64, f: i64) -> Result<(Vec<(i64, i64)>, Vec<[usize; 3]>)> {
    let r2 = p * p + q * q;
    let mut pts = Vec::new();
    for i in 0..=q * f {
        pts.push((i * 2 * r2, 0));
    }
    for i in 1..=q * f {
        pts.push((2 * q * q * i, -2 * q * p * i));
    }
    let e = (2 * q * q * q * f, -2 * q * p * q * f);
    for i in 1..p * f {
        pts.push((e.0 + 2 * q * p * i, e.1 + 2 * q * q * i));
    }
    let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::from_ints(x, y)).collect();
    Ok((pts, triangulate(&points)?))
}

struct Builder {
    verts: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
    tris: Vec<[usize; 3]>,
    band: Vec<bool>,
}

impl Builder {
    fn vertex(&mut self, v: (i64, i64)) -> usize {
        *self.index.entry(v).or_insert_with(|| {
            self.verts.push(v);
            self.verts.len() - 1
        })
    }

    fn triangle(&mut self, t: [(i64, i64); 3], band: bool) {
        let t = [self.vertex(t[0]), self.vertex(t[1]), self.vertex(t[2])];
        self.tris.push(t);
        self.band.push(band);
    }
}

pub(crate) fn check_frame(frame: &SquareFrame, plan: &MeshPlan) -> Result<()> {
    match plan.frames.get(frame.id) {
        Some(planned) if planned == frame => Ok(()),
        _ => Err(HtvError::PlanMismatch { square: frame.id, reason: "frame differs from the planned one".into() }),
    }
}

pub(crate) fn build_raw(frame: &SquareFrame, plan: &MeshPlan) -> Result<RawSquare> {
    check_frame(frame, plan)?;
    let f = square_multiplier(plan, frame.id)?;
    let (p, q) = frame.angle.canonical();
    let (p, q) = (p as i64, q as i64);
    let r2 = p * p + q * q;
    let copies = 1i64 << plan.k;
    let cells = (copies * f).checked_mul(copies * f).and_then(|c| c.checked_mul(r2));
    if cells.is_none_or(|c| c > MAX_CELLS_PER_SQUARE) {
        return Err(HtvError::InvalidParameter(format!(
            "square {} would need about (2^{} * {f})^2 * {r2} grid cells; reduce K or N",
            frame.id, plan.k
        )));
    }
    let period = 2 * f * q * r2;
    let w = period * copies;
    let rot = |(x, y): (i64, i64)| (y, w - x);
    let unrot = |(x, y): (i64, i64)| (w - y, x);

    let (tpl_pts, tpl_tris) = template(p, q, f)?;
    let mut b = Builder { verts: Vec::new(), index: HashMap::new(), tris: Vec::new(), band: Vec::new() };
    for side in 0..4 {
        for j in 0..copies {
            let place = |(tx, ty): (i64, i64)| {
                let mut v = (j * period + tx, w + ty);
                for _ in 0..side {
                    v = rot(v);
                }
                v
            };
            for t in &tpl_tris {
                b.triangle([place(tpl_pts[t[0]]), place(tpl_pts[t[1]]), place(tpl_pts[t[2]])], true);
            }
        }
    }

    let e_off = (2 * q * q * q * f, -2 * q * p * q * f);
    let in_top_band = |(x, y): (i64, i64)| {
        let j0 = x / period;
        (j0 - 1..=j0 + 1).filter(|&j| (0..copies).contains(&j)).any(|j| {
            let a = (j * period, w);
            let e = (a.0 + e_off.0, a.1 + e_off.1);
            let bb = ((j + 1) * period, w);
            orient_i(a, e, (x, y)) > 0 && orient_i(e, bb, (x, y)) > 0 && orient_i(bb, a, (x, y)) > 0
        })
    };
    let in_band = |c: (i64, i64)| {
        let mut v = c;
        for _ in 0..4 {
            if in_top_band(v) {
                return true;
            }
            v = unrot(v);
        }
        false
    };
    let lattice = |a: i64, bb: i64| (2 * q * (a * p - bb * q), w + 2 * q * (a * q + bb * p));
    let rising = !frame.angle.is_steep();
    let span = f * copies;
    for a in -q * span..p * span {
        for bb in -(p + q) * span..0 {
            let cx = q * ((2 * a + 1) * p - (2 * bb + 1) * q);
            let cy = w + q * ((2 * a + 1) * q + (2 * bb + 1) * p);
            if cx <= 0 || cx >= w || cy <= 0 || cy >= w || in_band((cx, cy)) {
                continue;
            }
            let (v00, v10, v11, v01) = (lattice(a, bb), lattice(a + 1, bb), lattice(a + 1, bb + 1), lattice(a, bb + 1));
            if rising {
                b.triangle([v00, v10, v11], false);
                b.triangle([v00, v11, v01], false);
            } else {
                b.triangle([v00, v10, v01], false);
                b.triangle([v10, v11, v01], false);
            }
        }
    }

    let mut raw = RawSquare { verts: b.verts, tris: b.tris, band: b.band, w };
    if rising {
        for v in &mut raw.verts {
            *v = (w - v.1, w - v.0);
        }
        for t in &mut raw.tris {
            t.swap(1, 2);
        }
    }
    Ok(raw)
}

pub(crate) fn raw_points(raw: &RawSquare, frame: &SquareFrame) -> Vec<Point> {
    let den = BigInt::from(raw.w) << frame.level;
    let (ox, oy) = (BigInt::from(frame.column) * raw.w, BigInt::from(frame.row) * raw.w);
    raw.verts
        .iter()
        .map(|&(x, y)| {
            Point::new(Rational::new(&ox + x, den.clone()), Rational::new(&oy + y, den.clone()))
        })
        .collect()
}

/// Conforming triangulation of the closed square of `frame`.
pub fn triangulate_square(frame: &SquareFrame, plan: &MeshPlan) -> Result<Triangulation> {
    Ok(triangulate_square_detailed(frame, plan)?.triangulation)
}

pub fn triangulate_square_detailed(frame: &SquareFrame, plan: &MeshPlan) -> Result<SquareMesh> {
    let raw = build_raw(frame, plan)?;
    let points = raw_points(&raw, frame);
    let triangulation = Triangulation::new(points, raw.tris)?;
    Ok(SquareMesh { triangulation, band: raw.band })
}

/// Checks exactly that the vertices of `mesh` on the boundary of the square
/// are the multiples of the plan's boundary spacing, all of them and no others.
pub fn check_square_alignment(frame: &SquareFrame, plan: &MeshPlan, mesh: &Triangulation) -> Result<()> {
    let (x0, y0) = frame.origin();
    let side = frame.side();
    let (x1, y1) = (&x0 + &side, &y0 + &side);
    let s = &plan.boundary_spacing;
    let mismatch = |reason: String| HtvError::PlanMismatch { square: frame.id, reason };
    let mut count = 0usize;
    for v in mesh.vertices() {
        let on_vertical = v.x == x0 || v.x == x1;
        let on_horizontal = v.y == y0 || v.y == y1;
        if !(on_vertical || on_horizontal) {
            continue;
        }
        count += 1;
        let offsets = [(&v.x - &x0) / s, (&v.y - &y0) / s];
        if offsets.iter().any(|o| !o.is_integer() || o.is_negative()) {
            return Err(mismatch(format!("boundary vertex ({}, {}) is off the spacing grid", v.x, v.y)));
        }
    }
    let per_side = &side / s;
    let expected = per_side.to_integer() * 4;
    if !per_side.is_integer() || BigInt::from(count) != expected {
        return Err(mismatch(format!("{count} boundary vertices, expected {expected}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{build_frames, plan_mesh, PlanMode, RationalAngle};
    use crate::field::BuiltinField;
    use crate::schatten::Mat2;

    fn single(p: u64, q: u64, k: u32) -> (SquareFrame, MeshPlan) {
        let frame = SquareFrame {
            id: 0,
            column: 0,
            row: 0,
            level: 0,
            center: [0.5, 0.5],
            diagonal: Mat2::identity(),
            theta_hat: 0.0,
            angle: RationalAngle::new(p, q).unwrap(),
            deviation: 0.0,
        };
        let plan = plan_mesh(std::slice::from_ref(&frame), 0, k, PlanMode::Lcm).unwrap();
        (frame, plan)
    }

    #[test]
    fn single_square_covers() {
        for (p, q) in [(1, 2), (2, 1), (1, 3), (3, 2), (2, 5), (5, 3), (1, 7)] {
            for k in 0..3 {
                let (frame, plan) = single(p, q, k);
                let m = triangulate_square_detailed(&frame, &plan).unwrap();
                m.triangulation.check_covers_unit_square().unwrap();
                check_square_alignment(&frame, &plan, &m.triangulation).unwrap();
                assert!(m.band_triangles() > 0 && m.band_triangles() < m.band.len());
            }
        }
    }

    #[test]
    fn bands_are_self_similar() {
        for (p, q) in [(1, 2), (3, 1), (2, 3)] {
            let mut prev: Option<(usize, Rational, f64)> = None;
            for k in 0..4 {
                let (frame, plan) = single(p, q, k);
                let m = triangulate_square_detailed(&frame, &plan).unwrap();
                let cur = (m.band_triangles(), m.band_area(), m.triangulation.min_angle());
                if let Some((count, area, angle)) = prev {
                    assert_eq!(cur.0, 2 * count);
                    assert_eq!(cur.1, area / BigInt::from(2));
                    assert_eq!(cur.2.to_bits(), angle.to_bits());
                }
                prev = Some(cur);
            }
        }
    }

    #[test]
    fn inner_diagonal_direction() {
        // inner edges that are not grid lines point along v - w
        for (p, q) in [(1, 2), (2, 1)] {
            let (frame, plan) = single(p, q, 1);
            let m = triangulate_square_detailed(&frame, &plan).unwrap();
            let u = frame.angle.rotation();
            let (v, w) = ([u.m11, u.m21], [u.m12, u.m22]);
            let diag = [v[0] - w[0], v[1] - w[1]];
            let c = m.triangulation.coords();
            let mut diagonals = 0;
            for (t, tri) in m.triangulation.triangles().iter().enumerate() {
                if m.band[t] {
                    continue;
                }
                for k in 0..3 {
                    let (a, b) = (c[tri[k]], c[tri[(k + 1) % 3]]);
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let along = |e: [f64; 2]| (d[0] * e[1] - d[1] * e[0]).abs() < 1e-12;
                    if !along(v) && !along(w) {
                        assert!(along(diag), "edge {d:?} for angle ({p}, {q})");
                        diagonals += 1;
                    }
                }
            }
            assert!(diagonals > 0);
        }
    }

    #[test]
    fn plan_mismatch_detected() {
        let (frame, mut plan) = single(1, 2, 1);
        plan.scaled_pitch[0] = &plan.scaled_pitch[0] * BigInt::from(3);
        assert!(matches!(triangulate_square(&frame, &plan), Err(HtvError::PlanMismatch { .. })));
        let (mut other, plan) = single(1, 2, 1);
        other.angle = RationalAngle::new(1, 3).unwrap();
        assert!(matches!(triangulate_square(&other, &plan), Err(HtvError::PlanMismatch { .. })));
    }

    #[test]
    fn four_transition_families_at_level_zero() {
        let (frame, plan) = single(2, 1, 0);
        let m = triangulate_square_detailed(&frame, &plan).unwrap();
        // template A E B with legs 2 and 1 steps: 2*2 + 1 = 5 points, 3 triangles
        assert_eq!(m.band_triangles(), 4 * 3);
        let inner = m.band.len() - m.band_triangles();
        assert!(inner >= 2 && inner.is_multiple_of(2));
    }

    #[test]
    fn frames_from_field_triangulate() {
        let f = BuiltinField::GaussianBump { sigma: 0.3, center: [0.3, 0.6] };
        let frames = build_frames(&f, 1, 9).unwrap();
        let plan = plan_mesh(&frames, 1, 1, PlanMode::Lcm).unwrap();
        for fr in &frames {
            let t = triangulate_square(fr, &plan).unwrap();
            check_square_alignment(fr, &plan, &t).unwrap();
        }
    }
}
