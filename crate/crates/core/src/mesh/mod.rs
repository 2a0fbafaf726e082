//! Conforming triangle meshes with exact rational vertices, and CPWL functions on them.

mod adjacency;
pub mod delaunay;
mod io;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{HtvError, Result};

pub use adjacency::Edge;
pub use io::{load_mesh, mesh_from_json, mesh_to_json, render_svg, save_mesh, SvgOptions};

/// Exact coordinate type; reduced, positive denominator.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Huge numerators/denominators: shift both until they fit.
        let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
        let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: Rational,
    pub y: Rational,
}

impl Point {
    pub fn new(x: Rational, y: Rational) -> Self {
        Self { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Self::new(rat_int(x), rat_int(y))
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [rat_to_f64(&self.x), rat_to_f64(&self.y)]
    }
}

/// Twice the signed area of `(a, b, c)`; positive for counterclockwise order.
pub fn orient(a: &Point, b: &Point, c: &Point) -> Rational {
    (&b.x - &a.x) * (&c.y - &a.y) - (&b.y - &a.y) * (&c.x - &a.x)
}

/// Conforming, counterclockwise triangulation.
#[derive(Debug)]
pub struct Triangulation {
    vertices: Vec<Point>,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<(usize, usize), usize>,
    coverage: OnceLock<std::result::Result<(), String>>,
}

impl Clone for Triangulation {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            coords: self.coords.clone(),
            triangles: self.triangles.clone(),
            edges: self.edges.clone(),
            edge_lookup: self.edge_lookup.clone(),
            coverage: OnceLock::new(),
        }
    }
}

impl PartialEq for Triangulation {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

impl Triangulation {
    /// Validates orientation, positive area and conformity, then builds the edge table.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(HtvError::Nonconforming(format!("triangle {t} references a missing vertex")));
            }
            let twice = orient(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if !twice.is_positive() {
                return Err(HtvError::DegenerateTriangle { index: t, twice_area: rat_to_f64(&twice) });
            }
        }
        let coords: Vec<[f64; 2]> = vertices.iter().map(Point::to_f64).collect();
        let (edges, edge_lookup) = adjacency::build_adjacency(&vertices, &coords, &triangles)?;
        Ok(Self { vertices, coords, triangles, edges, edge_lookup, coverage: OnceLock::new() })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Edges sorted lexicographically by vertex pair; the position is the edge id.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_interior())
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_interior()).count()
    }

    pub fn edge_length(&self, e: &Edge) -> f64 {
        let [a, b] = e.vertices;
        let (pa, pb) = (self.coords[a], self.coords[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    /// Coefficients `c_i` with `grad = sum_i c_i * value(tri[i])`.
    pub fn gradient_stencil(&self, t: usize) -> Result<[[f64; 2]; 3]> {
        let [i, j, k] = self.triangles[t];
        let (a, b, c) = (self.coords[i], self.coords[j], self.coords[k]);
        let twice = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if twice <= 0.0 || !twice.is_finite() {
            return Err(HtvError::DegenerateTriangle { index: t, twice_area: twice });
        }
        let inv = 1.0 / twice;
        Ok([
            [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
            [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
            [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
        ])
    }

    /// Minimum interior angle over all triangles, in radians.
    ///
    /// The comparison runs on exact `sin^2` of each triangle's smallest angle,
    /// so similar triangles at different scales give bit-identical results.
    pub fn min_angle(&self) -> f64 {
        match self.min_angle_sin2() {
            Some(s2) => rat_to_f64(&s2).sqrt().min(1.0).asin(),
            None => 0.0,
        }
    }

    /// Exact `sin^2` of the smallest angle in the mesh.
    pub fn min_angle_sin2(&self) -> Option<Rational> {
        let approx: Vec<f64> = self.triangles.par_iter().map(|t| self.sin2_f64(t)).collect();
        let lowest = approx.iter().cloned().fold(f64::INFINITY, f64::min);
        let cut = lowest * (1.0 + 1e-9);
        self.triangles
            .iter()
            .zip(&approx)
            .filter(|(_, &a)| a <= cut)
            .map(|(t, _)| self.sin2_exact(t))
            .min()
    }

    fn sin2_f64(&self, tri: &[usize; 3]) -> f64 {
        let c = [self.coords[tri[0]], self.coords[tri[1]], self.coords[tri[2]]];
        let len2 = |u: [f64; 2], v: [f64; 2]| (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2);
        let sides = [len2(c[1], c[2]), len2(c[2], c[0]), len2(c[0], c[1])];
        let apex = (0..3).min_by(|&i, &j| sides[i].total_cmp(&sides[j])).unwrap_or(0);
        let cross = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[1][1] - c[0][1]) * (c[2][0] - c[0][0]);
        cross * cross / (sides[(apex + 1) % 3] * sides[(apex + 2) % 3])
    }

    fn sin2_exact(&self, tri: &[usize; 3]) -> Rational {
        let p = [&self.vertices[tri[0]], &self.vertices[tri[1]], &self.vertices[tri[2]]];
        let len2 = |u: &Point, v: &Point| {
            let dx = &v.x - &u.x;
            let dy = &v.y - &u.y;
            &dx * &dx + &dy * &dy
        };
        // side i is opposite vertex i
        let sides = [len2(p[1], p[2]), len2(p[2], p[0]), len2(p[0], p[1])];
        let mut apex = 0;
        for i in 1..3 {
            if sides[i] < sides[apex] {
                apex = i;
            }
        }
        let cross = orient(p[0], p[1], p[2]);
        &cross * &cross / (&sides[(apex + 1) % 3] * &sides[(apex + 2) % 3])
    }

    /// Checks that the mesh tiles the closed unit square exactly.
    pub fn check_covers_unit_square(&self) -> Result<()> {
        self.coverage
            .get_or_init(|| self.compute_coverage())
            .clone()
            .map_err(HtvError::NotCovering)
    }

    fn compute_coverage(&self) -> std::result::Result<(), String> {
        let zero = Rational::zero();
        let one = Rational::one();
        if let Some(v) = self
            .vertices
            .iter()
            .position(|p| p.x < zero || p.x > one || p.y < zero || p.y > one)
        {
            return Err(format!("vertex {v} lies outside [0,1]^2"));
        }
        let on_side = |a: &Point, b: &Point| {
            (a.x == zero && b.x == zero)
                || (a.x == one && b.x == one)
                || (a.y == zero && b.y == zero)
                || (a.y == one && b.y == one)
        };
        for e in self.edges.iter().filter(|e| !e.is_interior()) {
            let [a, b] = e.vertices;
            if !on_side(&self.vertices[a], &self.vertices[b]) {
                return Err(format!("boundary edge ({a}, {b}) is not on the square's boundary"));
            }
        }
        let twice_area: Rational = self
            .triangles
            .iter()
            .map(|t| orient(&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]))
            .fold(Rational::zero(), |acc, a| acc + a);
        if twice_area != rat_int(2) {
            return Err(format!("total area is {} instead of 1", rat_to_f64(&twice_area) / 2.0));
        }
        Ok(())
    }

    /// Axis-aligned uniform grid of `n x n` squares on `[0,1]^2`, each split along one diagonal.
    ///
    /// `rising = true` uses the diagonal from lower-left to upper-right.
    pub fn uniform_grid(n: usize, rising: bool) -> Self {
        let n = n.max(1);
        let den = n as i64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Point::new(rat(i as i64, den), rat(j as i64, den)));
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if rising {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Self::new(vertices, triangles).expect("uniform grid is conforming")
    }

    /// Delaunay mesh of the four corners plus `interior` distinct random points
    /// of the open square, drawn from the lattice `(1/1024) Z^2`.
    pub fn random_delaunay(interior: usize, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        if interior > 1023 * 1023 {
            return Err(HtvError::InvalidParameter(format!("too many interior points: {interior}")));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = vec![Point::from_ints(0, 0), Point::from_ints(1, 0), Point::from_ints(1, 1), Point::from_ints(0, 1)];
        let mut seen: std::collections::HashSet<(i64, i64)> = std::collections::HashSet::new();
        while seen.len() < interior {
            let (i, j) = (rng.gen_range(1..1024), rng.gen_range(1..1024));
            if seen.insert((i, j)) {
                vertices.push(Point::new(rat(i, 1024), rat(j, 1024)));
            }
        }
        let triangles = delaunay::triangulate(&vertices)?;
        Self::new(vertices, triangles)
    }
}

/// Continuous piecewise-linear function: one value per mesh vertex.
#[derive(Debug, Clone)]
pub struct CpwlFunction {
    mesh: Arc<Triangulation>,
    values: Vec<f64>,
}

impl PartialEq for CpwlFunction {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh) && self.values == other.values
    }
}

impl CpwlFunction {
    pub fn new(mesh: Arc<Triangulation>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(HtvError::InvalidParameter(format!(
                "{} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HtvError::InvalidParameter(format!("value at vertex {i} is not finite")));
        }
        Ok(Self { mesh, values })
    }

    /// Interpolates `f` at the mesh vertices.
    pub fn from_fn(mesh: Arc<Triangulation>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.coords().iter().map(|&[x, y]| f(x, y)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.mesh.clone(), values)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Pointwise `self + s * other`; both must live on the same mesh.
    pub fn axpy(&self, s: f64, other: &CpwlFunction) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Self { mesh: self.mesh.clone(), values }
    }

    /// Constant gradient on triangle `t`.
    pub fn triangle_gradient(&self, t: usize) -> Result<[f64; 2]> {
        let stencil = self.mesh.gradient_stencil(t)?;
        let tri = self.mesh.triangles()[t];
        // Differences against the first vertex, so constants give exactly zero.
        let v0 = self.values[tri[0]];
        let (d1, d2) = (self.values[tri[1]] - v0, self.values[tri[2]] - v0);
        Ok([stencil[1][0] * d1 + stencil[2][0] * d2, stencil[1][1] * d1 + stencil[2][1] * d2])
    }

    pub fn gradients(&self) -> Result<Vec<[f64; 2]>> {
        (0..self.mesh.num_triangles()).map(|t| self.triangle_gradient(t)).collect()
    }

    /// Barycentric evaluation on triangle `t` (no containment check).
    pub fn eval_on_triangle(&self, t: usize, x: f64, y: f64) -> f64 {
        let tri = self.mesh.triangles()[t];
        let c = self.mesh.coords();
        let (a, b, cc) = (c[tri[0]], c[tri[1]], c[tri[2]]);
        let det = (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
        let l1 = ((x - a[0]) * (cc[1] - a[1]) - (y - a[1]) * (cc[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])) / det;
        let l0 = 1.0 - l1 - l2;
        l0 * self.values[tri[0]] + l1 * self.values[tri[1]] + l2 * self.values[tri[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn unit_right_triangle() -> Triangulation {
        Triangulation::new(
            vec![Point::from_ints(0, 0), Point::from_ints(1, 0), Point::from_ints(0, 1)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn gradient_examples() {
        let mesh = Arc::new(unit_right_triangle());
        let g = CpwlFunction::new(mesh.clone(), vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.triangle_gradient(0).unwrap(), [1.0, 0.0]);
        let g = CpwlFunction::new(mesh.clone(), vec![4.0; 3]).unwrap();
        assert_eq!(g.triangle_gradient(0).unwrap(), [0.0, 0.0]);

        let tri = Arc::new(
            Triangulation::new(
                vec![
                    Point::new(rat(1, 3), rat(1, 7)),
                    Point::new(rat(5, 4), rat(2, 5)),
                    Point::new(rat(-1, 2), rat(9, 8)),
                ],
                vec![[0, 1, 2]],
            )
            .unwrap(),
        );
        let g = CpwlFunction::from_fn(tri, |x, y| 3.0 * x + 2.0 * y - 1.0);
        let a = g.triangle_gradient(0).unwrap();
        assert_relative_eq!(a[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(a[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn adjacency_counts() {
        let sq = Triangulation::uniform_grid(1, true);
        assert_eq!(sq.edges().len(), 5);
        assert_eq!(sq.num_interior_edges(), 1);

        let single = unit_right_triangle();
        assert_eq!(single.edges().len(), 3);
        assert_eq!(single.num_interior_edges(), 0);

        let bowtie = Triangulation::new(
            vec![
                Point::from_ints(0, 0),
                Point::from_ints(1, 0),
                Point::from_ints(0, 1),
                Point::from_ints(-1, 0),
                Point::from_ints(0, -1),
            ],
            vec![[0, 1, 2], [0, 3, 4]],
        )
        .unwrap();
        assert_eq!(bowtie.edges().len(), 6);
        assert_eq!(bowtie.num_interior_edges(), 0);
    }

    #[test]
    fn rejects_degenerate_and_clockwise() {
        let pts = vec![Point::from_ints(0, 0), Point::from_ints(1, 0), Point::from_ints(2, 0)];
        assert!(matches!(
            Triangulation::new(pts, vec![[0, 1, 2]]),
            Err(HtvError::DegenerateTriangle { .. })
        ));
        let pts = vec![Point::from_ints(0, 0), Point::from_ints(1, 0), Point::from_ints(0, 1)];
        assert!(Triangulation::new(pts, vec![[0, 2, 1]]).is_err());
    }

    #[test]
    fn min_angle_examples() {
        assert_relative_eq!(Triangulation::uniform_grid(1, true).min_angle(), FRAC_PI_4, epsilon = 1e-15);
        // Equilateral triangles are not rational; a rational near-equilateral
        // triangle converges to pi/3.
        let h = rat(866_025_403_784, 1_000_000_000_000);
        let tri = Triangulation::new(
            vec![Point::from_ints(0, 0), Point::from_ints(1, 0), Point::new(rat(1, 2), h)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_relative_eq!(tri.min_angle(), FRAC_PI_3, epsilon = 1e-9);
    }

    #[test]
    fn min_angle_is_scale_invariant_bitwise() {
        let pts = |s: i64| {
            vec![Point::new(rat(0, 1), rat(0, 1)), Point::new(rat(3, s), rat(1, s)), Point::new(rat(1, s), rat(2, s))]
        };
        let a = Triangulation::new(pts(7), vec![[0, 1, 2]]).unwrap().min_angle();
        let b = Triangulation::new(pts(7 * 1024), vec![[0, 1, 2]]).unwrap().min_angle();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn coverage_check() {
        assert!(Triangulation::uniform_grid(3, false).check_covers_unit_square().is_ok());
        assert!(unit_right_triangle().check_covers_unit_square().is_err());
    }

    #[test]
    fn evaluation_reproduces_affine() {
        let mesh = Arc::new(Triangulation::uniform_grid(4, true));
        let g = CpwlFunction::from_fn(mesh, |x, y| 2.0 * x - y + 0.5);
        for t in 0..g.mesh().num_triangles() {
            let c = g.mesh().coords();
            let tri = g.mesh().triangles()[t];
            let cx = (c[tri[0]][0] + c[tri[1]][0] + c[tri[2]][0]) / 3.0;
            let cy = (c[tri[0]][1] + c[tri[1]][1] + c[tri[2]][1]) / 3.0;
            assert_relative_eq!(g.eval_on_triangle(t, cx, cy), 2.0 * cx - cy + 0.5, epsilon = 1e-12);
        }
    }
}
