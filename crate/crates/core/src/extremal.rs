//! Extreme points of the HTV unit ball among CPWL functions modulo affine maps.
//!
//! A CPWL `g` is extremal iff every `h` whose Hessian support lies inside that
//! of `g` is a multiple of `g` (modulo affine maps). In the plane a gradient
//! jump across an edge is always a multiple of the edge normal, so jumps are
//! handled as signed scalars `(grad_right - grad_left) . n`.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{HtvError, Result};
use crate::htv::{edge_normal, htv, htv_cpwl, EdgeSupport};
use crate::linalg::{nnls, nullspace};
use crate::mesh::{CpwlFunction, Triangulation};
use crate::schatten::SchattenP;
use crate::sum::pairwise;

/// Relative threshold below which a jump counts as zero.
pub const SUPPORT_REL_TOL: f64 = 1e-9;
/// Relative singular-value threshold of the nullspace computation.
pub const NULLSPACE_REL_TOL: f64 = 1e-10;

/// A function modulo affine maps: the representative has values orthogonal
/// to `1, x, y` over the vertices, and `affine = (a0, a1, a2)` holds the
/// removed part `a0 + a1 x + a2 y`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientRep {
    pub function: CpwlFunction,
    pub affine: [f64; 3],
}

impl QuotientRep {
    pub fn values(&self) -> &[f64] {
        self.function.values()
    }

    pub fn mesh_arc(&self) -> &Arc<Triangulation> {
        self.function.mesh_arc()
    }

    pub fn htv(&self) -> Result<f64> {
        htv(&self.function)
    }

    /// Representative plus its affine part.
    pub fn reconstruct(&self) -> CpwlFunction {
        let [a0, a1, a2] = self.affine;
        let vals = self
            .function
            .values()
            .iter()
            .zip(self.function.mesh().coords())
            .map(|(v, c)| v + a0 + a1 * c[0] + a2 * c[1])
            .collect();
        CpwlFunction::new(self.function.mesh_arc().clone(), vals).expect("same mesh, finite values")
    }
}

fn affine_design(mesh: &Triangulation) -> DMatrix<f64> {
    DMatrix::from_fn(mesh.num_vertices(), 3, |i, j| match j {
        0 => 1.0,
        1 => mesh.coords()[i][0],
        _ => mesh.coords()[i][1],
    })
}

/// Removes the least-squares affine fit of the vertex values.
pub fn normalize_mod_affine(g: &CpwlFunction) -> Result<QuotientRep> {
    let a = affine_design(g.mesh());
    let b = DVector::from_column_slice(g.values());
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| HtvError::Precondition(e.to_string()))?;
    let rest = &b - &a * &coef;
    let function = g.with_values(rest.iter().copied().collect())?;
    Ok(QuotientRep { function, affine: [coef[0], coef[1], coef[2]] })
}

/// Linear map from vertex values to signed jumps on the interior edges.
struct JumpOperator {
    edges: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl JumpOperator {
    fn new(mesh: &Triangulation) -> Result<Self> {
        let mut edges = Vec::new();
        let mut rows = Vec::new();
        for (id, e) in mesh.interior_edges() {
            let n = edge_normal(mesh, e);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(6);
            for (t, sign) in [(e.right.unwrap(), 1.0), (e.left.unwrap(), -1.0)] {
                let stencil = mesh.gradient_stencil(t)?;
                for (k, &v) in mesh.triangles()[t].iter().enumerate() {
                    let c = sign * (stencil[k][0] * n[0] + stencil[k][1] * n[1]);
                    match row.iter_mut().find(|(u, _)| *u == v) {
                        Some(entry) => entry.1 += c,
                        None => row.push((v, c)),
                    }
                }
            }
            edges.push(id);
            rows.push(row);
        }
        Ok(Self { edges, rows })
    }
}

/// Signed jump of `g` across every interior edge, in interior-edge order.
fn signed_jumps(g: &CpwlFunction) -> Result<(Vec<usize>, Vec<f64>)> {
    let mesh = g.mesh();
    let grads = g.gradients()?;
    let mut ids = Vec::new();
    let mut jumps = Vec::new();
    for (id, e) in mesh.interior_edges() {
        let n = edge_normal(mesh, e);
        let (l, r) = (grads[e.left.unwrap()], grads[e.right.unwrap()]);
        ids.push(id);
        jumps.push((r[0] - l[0]) * n[0] + (r[1] - l[1]) * n[1]);
    }
    Ok((ids, jumps))
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn support_mask(jumps: &[f64]) -> Vec<bool> {
    let max = max_abs(jumps);
    jumps.iter().map(|j| max > 0.0 && j.abs() > SUPPORT_REL_TOL * max).collect()
}

fn support_of(g: &CpwlFunction, ids: &[usize], mask: &[bool]) -> EdgeSupport {
    let mesh = g.mesh();
    let kept: Vec<usize> = ids.iter().zip(mask).filter(|(_, &m)| m).map(|(&id, _)| id).collect();
    let total_length = pairwise(&kept.iter().map(|&id| mesh.edge_length(&mesh.edges()[id])).collect::<Vec<_>>());
    EdgeSupport { edges: kept.into_iter().collect::<BTreeSet<_>>(), total_length }
}

/// Hessian support of `g` with the module's relative jump threshold.
pub fn jump_support(g: &CpwlFunction) -> Result<EdgeSupport> {
    let (ids, jumps) = signed_jumps(g)?;
    Ok(support_of(g, &ids, &support_mask(&jumps)))
}

/// Zero modulo affine maps, relative to the size of its gradients.
fn gradient_scale(g: &CpwlFunction) -> Result<f64> {
    Ok(g.gradients()?.iter().fold(0.0_f64, |m, d| m.max(d[0].hypot(d[1]))))
}

/// Jumps at rounding level relative to the gradients of the original function.
fn is_negligible(jumps: &[f64], scale: f64) -> bool {
    scale == 0.0 || max_abs(jumps) <= 1e-10 * scale
}

/// Basis of the functions, modulo affine maps, whose jumps vanish off a given edge set.
#[derive(Debug, Clone, Serialize)]
pub struct JumpSpaceBasis {
    pub support: EdgeSupport,
    /// Orthonormal vertex-value vectors, each orthogonal to `1, x, y`.
    pub basis: Vec<Vec<f64>>,
    pub dim: usize,
}

pub fn constrained_space(mesh: &Triangulation, support: &EdgeSupport) -> Result<JumpSpaceBasis> {
    constrained_space_with(mesh, support, NULLSPACE_REL_TOL)
}

pub fn constrained_space_with(mesh: &Triangulation, support: &EdgeSupport, rel_tol: f64) -> Result<JumpSpaceBasis> {
    if let Some(&bad) = support.edges.iter().find(|&&e| !mesh.edges().get(e).is_some_and(|e| e.is_interior())) {
        return Err(HtvError::InvalidParameter(format!("edge {bad} is not an interior edge")));
    }
    let op = JumpOperator::new(mesh)?;
    let nv = mesh.num_vertices();
    let excluded: Vec<&Vec<(usize, f64)>> =
        op.edges.iter().zip(&op.rows).filter(|(id, _)| !support.contains(**id)).map(|(_, r)| r).collect();
    let mut a = DMatrix::zeros(excluded.len() + 3, nv);
    for (i, row) in excluded.iter().enumerate() {
        let norm = row.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
        for &(v, c) in row.iter() {
            a[(i, v)] = c / norm;
        }
    }
    let aff = affine_design(mesh);
    for j in 0..3 {
        let col = aff.column(j);
        let norm = col.norm();
        for v in 0..nv {
            a[(excluded.len() + j, v)] = col[v] / norm;
        }
    }
    let ns = nullspace(&a, rel_tol);
    let basis: Vec<Vec<f64>> = ns.column_iter().map(|c| c.iter().copied().collect()).collect();
    Ok(JumpSpaceBasis { support: support.clone(), dim: basis.len(), basis })
}

/// Outcome of [`is_extremal`]; `witness` is a member of the space that is
/// not a multiple of the input whenever `dim > 1`.
#[derive(Debug, Clone)]
pub struct Extremality {
    pub extremal: bool,
    pub dim: usize,
    pub space: JumpSpaceBasis,
    pub witness: Option<CpwlFunction>,
}

pub fn is_extremal(g: &CpwlFunction, rel_tol: f64) -> Result<Extremality> {
    let rep = normalize_mod_affine(g)?;
    let (ids, jumps) = signed_jumps(&rep.function)?;
    if is_negligible(&jumps, gradient_scale(g)?) {
        return Err(HtvError::ZeroFunction);
    }
    let support = support_of(&rep.function, &ids, &support_mask(&jumps));
    let space = constrained_space_with(g.mesh(), &support, rel_tol)?;
    let witness = if space.dim > 1 {
        let gv = DVector::from_column_slice(rep.values());
        let gn = gv.normalize();
        let best = space
            .basis
            .iter()
            .map(|b| {
                let bv = DVector::from_column_slice(b);
                let r = &bv - &gn * gn.dot(&bv);
                (r.norm(), r)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, r)| r.normalize());
        best.map(|r| rep.function.with_values(r.iter().copied().collect())).transpose()?
    } else {
        None
    };
    Ok(Extremality { extremal: space.dim == 1, dim: space.dim, space, witness })
}

fn same_mesh(a: &CpwlFunction, b: &CpwlFunction) -> Result<()> {
    if Arc::ptr_eq(a.mesh_arc(), b.mesh_arc()) || a.mesh() == b.mesh() {
        Ok(())
    } else {
        Err(HtvError::Precondition("functions must share a mesh".into()))
    }
}

/// `|htv(g + e h) + htv(g - e h) - 2 htv(g)|` with `e = min |jump g| / max |jump h|`,
/// which vanishes whenever the jumps of `h` live inside the support of `g`.
pub fn perturbation_identity_check(g: &CpwlFunction, h: &CpwlFunction) -> Result<f64> {
    same_mesh(g, h)?;
    let (_, jg) = signed_jumps(g)?;
    let (_, jh) = signed_jumps(h)?;
    let big_delta = max_abs(&jh);
    if big_delta == 0.0 {
        return Ok(0.0);
    }
    let mask = support_mask(&jg);
    if jh.iter().zip(&mask).any(|(j, &m)| !m && j.abs() > 1e-7 * big_delta) {
        return Err(HtvError::Precondition("h has jumps outside the support of g".into()));
    }
    let delta = jg.iter().zip(&mask).filter(|(_, &m)| m).map(|(j, _)| j.abs()).fold(f64::INFINITY, f64::min);
    if !delta.is_finite() {
        return Err(HtvError::ZeroFunction);
    }
    let eps = delta / big_delta;
    let plus = htv(&g.axpy(eps, h))?;
    let minus = htv(&g.axpy(-eps, h))?;
    Ok((plus + minus - 2.0 * htv(g)?).abs())
}

/// One greedy step: `g_next = g - lambda h` loses at least one support edge.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub h: CpwlFunction,
    pub lambda: f64,
    pub next: QuotientRep,
}

pub fn support_reduce(g: &QuotientRep) -> Result<Reduction> {
    let cert = is_extremal(&g.function, NULLSPACE_REL_TOL)?;
    reduce_with(g, cert)
}

fn reduce_with(g: &QuotientRep, cert: Extremality) -> Result<Reduction> {
    if cert.extremal {
        return Err(HtvError::AlreadyExtremal);
    }
    let h = cert.witness.ok_or_else(|| HtvError::Precondition("space has dimension 0".into()))?;
    let (_, jg) = signed_jumps(&g.function)?;
    let (_, jh) = signed_jumps(&h)?;
    let gmask = support_mask(&jg);
    let hmax = max_abs(&jh);
    let lambda = jg
        .iter()
        .zip(&jh)
        .zip(&gmask)
        .filter(|((_, h), &m)| m && h.abs() > SUPPORT_REL_TOL * hmax)
        .map(|((g, h), _)| g / h)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or_else(|| HtvError::Precondition("witness has no jumps on the support".into()))?;
    let next = normalize_mod_affine(&g.function.axpy(-lambda, &h))?;
    Ok(Reduction { h, lambda, next })
}

/// An extremal `t` with `htv(t) = 1` whose support lies inside that of `g`
/// and whose jumps carry the same signs as those of `g`.
pub fn find_extremal_in_support(g: &CpwlFunction) -> Result<QuotientRep> {
    let mut cur = normalize_mod_affine(g)?;
    let cap = g.mesh().num_interior_edges() + 2;
    for _ in 0..cap {
        let cert = is_extremal(&cur.function, NULLSPACE_REL_TOL)?;
        if cert.extremal {
            let total = cur.htv()?;
            return Ok(QuotientRep { function: cur.function.scaled(1.0 / total), affine: [0.0; 3] });
        }
        cur = reduce_with(&cur, cert)?.next;
    }
    Err(HtvError::Precondition("support reduction did not terminate".into()))
}

/// `g = sum c_i t_i` modulo affine maps, with extremal unit-HTV `t_i` and `c_i > 0`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub components: Vec<(QuotientRep, f64)>,
    /// Largest vertex deviation of `sum c_i t_i` from the representative of `g`.
    pub residual: f64,
}

impl Decomposition {
    pub fn coefficient_sum(&self) -> f64 {
        pairwise(&self.components.iter().map(|c| c.1).collect::<Vec<_>>())
    }
}

/// Greedy extraction of sign-conformal extremal directions, then a
/// nonnegative least-squares fit over `{t_i, -t_i}`.
pub fn decompose(g: &CpwlFunction, tol: f64) -> Result<Decomposition> {
    let target = normalize_mod_affine(g)?;
    let (_, j0) = signed_jumps(&target.function)?;
    let scale = gradient_scale(g)?;
    if is_negligible(&j0, scale) {
        return Err(HtvError::ZeroFunction);
    }
    let total = target.htv()?;
    let mut residual = target.clone();
    let mut directions: Vec<QuotientRep> = Vec::new();
    let cap = g.mesh().num_interior_edges() + 2;
    for _ in 0..cap {
        let (_, jr) = signed_jumps(&residual.function)?;
        if residual.htv()? <= 1e-12 * total || is_negligible(&jr, scale) {
            break;
        }
        let t = find_extremal_in_support(&residual.function)?;
        let (_, jt) = signed_jumps(&t.function)?;
        let tmask = support_mask(&jt);
        let lambda = jr
            .iter()
            .zip(&jt)
            .zip(&tmask)
            .filter(|(_, &m)| m)
            .map(|((r, t), _)| r / t)
            .filter(|l| *l > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !lambda.is_finite() {
            break;
        }
        residual = normalize_mod_affine(&residual.function.axpy(-lambda, &t.function))?;
        directions.push(t);
    }

    let nv = g.mesh().num_vertices();
    let m = directions.len();
    let mut a = DMatrix::zeros(nv, 2 * m);
    for (i, t) in directions.iter().enumerate() {
        for (v, &x) in t.values().iter().enumerate() {
            a[(v, i)] = x;
            a[(v, m + i)] = -x;
        }
    }
    let b = DVector::from_column_slice(target.values());
    let c = nnls(&a, &b);
    let fit = &a * &c;
    let residual_norm = (&fit - &b).amax();
    let mut components = Vec::new();
    for (i, t) in directions.into_iter().enumerate() {
        let net = c[i] - c[m + i];
        if net > 0.0 {
            components.push((t, net));
        } else if net < 0.0 {
            let flipped = QuotientRep { function: t.function.scaled(-1.0), affine: [0.0; 3] };
            components.push((flipped, -net));
        }
    }
    if residual_norm > tol {
        return Err(HtvError::DecompositionFailed { residual: residual_norm, tol });
    }
    Ok(Decomposition { components, residual: residual_norm })
}

/// Checks that `htv(f + g) = htv(f) + htv(g)` holds edge by edge.
///
/// Fails with a precondition error unless the totals are additive to `1e-10`.
pub fn rigidity_check(f: &CpwlFunction, g: &CpwlFunction) -> Result<bool> {
    same_mesh(f, g)?;
    let sum = f.axpy(1.0, g);
    let p = SchattenP::One;
    let (rf, rg, rs) = (htv_cpwl(f, p)?, htv_cpwl(g, p)?, htv_cpwl(&sum, p)?);
    if (rs.total - rf.total - rg.total).abs() > 1e-10 {
        return Err(HtvError::Precondition(format!(
            "htv(f + g) = {} differs from htv(f) + htv(g) = {}",
            rs.total,
            rf.total + rg.total
        )));
    }
    Ok(rs
        .per_edge
        .iter()
        .zip(&rf.per_edge)
        .zip(&rg.per_edge)
        .all(|((s, a), b)| (s.contribution - a.contribution - b.contribution).abs() <= 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{rat, Point};
    use proptest::prelude::*;

    fn grid_hat(n: usize, centers: &[(usize, usize, f64)]) -> CpwlFunction {
        let mesh = Arc::new(Triangulation::uniform_grid(n, true));
        let mut vals = vec![0.0; mesh.num_vertices()];
        for &(i, j, a) in centers {
            vals[j * (n + 1) + i] = a;
        }
        CpwlFunction::new(mesh, vals).unwrap()
    }

    fn random_function(seed: u64) -> CpwlFunction {
        use rand::{Rng, SeedableRng};
        let mesh = Arc::new(Triangulation::random_delaunay(8, seed).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 1);
        let vals = (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        CpwlFunction::new(mesh, vals).unwrap()
    }

    #[test]
    fn normalization() {
        let g = random_function(1);
        let rep = normalize_mod_affine(&g).unwrap();
        let aff = affine_design(g.mesh());
        let moments = aff.transpose() * DVector::from_column_slice(rep.values());
        assert!(moments.amax() < 1e-12);
        assert!((rep.htv().unwrap() - htv(&g).unwrap()).abs() < 1e-12);
        let shifted = CpwlFunction::from_fn(g.mesh_arc().clone(), |x, y| 2.0 - x + 3.0 * y).axpy(1.0, &g);
        let rep2 = normalize_mod_affine(&shifted).unwrap();
        for (a, b) in rep.values().iter().zip(rep2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = rep.reconstruct();
        for (a, b) in back.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let affine = CpwlFunction::from_fn(g.mesh_arc().clone(), |x, y| 1.0 + x - y);
        assert!(normalize_mod_affine(&affine).unwrap().values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn space_dimensions() {
        let mesh = Triangulation::random_delaunay(9, 4).unwrap();
        let all: BTreeSet<usize> = mesh.interior_edges().map(|(id, _)| id).collect();
        let full = constrained_space(&mesh, &EdgeSupport { edges: all, total_length: 0.0 }).unwrap();
        assert_eq!(full.dim, mesh.num_vertices() - 3);
        let empty = constrained_space(&mesh, &EdgeSupport { edges: BTreeSet::new(), total_length: 0.0 }).unwrap();
        assert_eq!(empty.dim, 0);
        let boundary = mesh.edges().iter().position(|e| !e.is_interior()).unwrap();
        let bad = EdgeSupport { edges: [boundary].into_iter().collect(), total_length: 0.0 };
        assert!(constrained_space(&mesh, &bad).is_err());
    }

    #[test]
    fn grid_hat_is_extremal() {
        let g = grid_hat(4, &[(2, 2, 1.0)]);
        let cert = is_extremal(&g, NULLSPACE_REL_TOL).unwrap();
        assert!(cert.extremal && cert.dim == 1);
        assert!(is_extremal(&g.scaled(-2.0), NULLSPACE_REL_TOL).unwrap().extremal);
        let h = g.with_values(cert.space.basis[0].clone()).unwrap();
        assert!(perturbation_identity_check(&g, &h).unwrap() <= 1e-10);
    }

    #[test]
    fn pyramid_hat_is_not_extremal() {
        let pts = vec![
            Point::from_ints(0, 0),
            Point::from_ints(1, 0),
            Point::from_ints(1, 1),
            Point::from_ints(0, 1),
            Point::new(rat(1, 2), rat(1, 2)),
        ];
        let mesh = Arc::new(Triangulation::new(pts, vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]).unwrap());
        let g = CpwlFunction::new(mesh, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let cert = is_extremal(&g, NULLSPACE_REL_TOL).unwrap();
        assert_eq!(cert.dim, 2);
        assert!(!cert.extremal);
    }

    #[test]
    fn two_hats() {
        let g = grid_hat(8, &[(2, 2, 1.0), (6, 6, 1.0)]);
        let a = grid_hat(8, &[(2, 2, 1.0)]);
        let cert = is_extremal(&g, NULLSPACE_REL_TOL).unwrap();
        assert!(!cert.extremal);
        let w = cert.witness.unwrap();
        assert!(jump_support(&w).unwrap().is_subset(&jump_support(&g).unwrap()));
        assert!(perturbation_identity_check(&g, &a).unwrap() <= 1e-10);
        assert!(perturbation_identity_check(&g, &w).unwrap() <= 1e-10);

        let rep = normalize_mod_affine(&g).unwrap();
        let red = support_reduce(&rep).unwrap();
        assert!(is_extremal(&red.next.function, NULLSPACE_REL_TOL).unwrap().extremal);
        let t = find_extremal_in_support(&g).unwrap();
        assert!((t.htv().unwrap() - 1.0).abs() < 1e-12);
        let ta = normalize_mod_affine(&a).unwrap();
        let tb = normalize_mod_affine(&grid_hat(8, &[(6, 6, 1.0)])).unwrap();
        let parallel = |x: &QuotientRep, y: &QuotientRep| {
            let (u, v) = (DVector::from_column_slice(x.values()), DVector::from_column_slice(y.values()));
            (u.dot(&v).abs() - u.norm() * v.norm()).abs() < 1e-9 * u.norm() * v.norm()
        };
        assert!(parallel(&t, &ta) || parallel(&t, &tb));
    }

    #[test]
    fn reduce_rejects_extremal() {
        let rep = normalize_mod_affine(&grid_hat(4, &[(2, 2, 1.0)])).unwrap();
        assert!(matches!(support_reduce(&rep), Err(HtvError::AlreadyExtremal)));
    }

    #[test]
    fn affine_is_rejected() {
        let mesh = Arc::new(Triangulation::uniform_grid(3, true));
        let g = CpwlFunction::from_fn(mesh, |x, y| 3.0 * x + y);
        assert!(matches!(is_extremal(&g, NULLSPACE_REL_TOL), Err(HtvError::ZeroFunction)));
        assert!(matches!(decompose(&g, 1e-8), Err(HtvError::ZeroFunction)));
    }

    #[test]
    fn decompose_single_and_double_hat() {
        let hat = grid_hat(4, &[(2, 2, 1.0)]);
        let scale = 3.0 / htv(&hat).unwrap();
        let d = decompose(&hat.scaled(scale), 1e-8).unwrap();
        assert_eq!(d.components.len(), 1);
        assert!((d.components[0].1 - 3.0).abs() < 1e-9);

        let (ha, hb) = (grid_hat(8, &[(2, 2, 1.0)]), grid_hat(8, &[(6, 6, 1.0)]));
        let g = ha.scaled(2.0).axpy(5.0, &hb);
        let d = decompose(&g, 1e-8).unwrap();
        let mut cs: Vec<f64> = d.components.iter().map(|c| c.1).collect();
        cs.sort_by(f64::total_cmp);
        let mut expected = vec![2.0 * htv(&ha).unwrap(), 5.0 * htv(&hb).unwrap()];
        expected.sort_by(f64::total_cmp);
        assert_eq!(cs.len(), 2);
        for (c, e) in cs.iter().zip(&expected) {
            assert!((c - e).abs() < 1e-8);
        }
    }

    #[test]
    fn random_support_reduction_terminates() {
        let g = random_function(9);
        let mut cur = normalize_mod_affine(&g).unwrap();
        let mut len = jump_support(&cur.function).unwrap().total_length;
        let mut steps = 0;
        loop {
            match support_reduce(&cur) {
                Ok(r) => {
                    let next_len = jump_support(&r.next.function).unwrap().total_length;
                    assert!(next_len < len);
                    len = next_len;
                    cur = r.next;
                    steps += 1;
                }
                Err(HtvError::AlreadyExtremal) => break,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(steps <= g.mesh().num_interior_edges());
    }

    #[test]
    fn rigidity() {
        let f = random_function(3);
        assert!(rigidity_check(&f, &f.scaled(2.0)).unwrap());
        let (a, b) = (grid_hat(8, &[(2, 2, 1.0)]), grid_hat(8, &[(6, 6, 2.0)]));
        assert!(rigidity_check(&a, &b).unwrap());
        assert!(matches!(rigidity_check(&f, &f.scaled(-1.0)), Err(HtvError::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_decompositions(seed in 0u64..100_000) {
            let g = random_function(seed);
            let d = decompose(&g, 1e-8).unwrap();
            prop_assert!(d.residual <= 1e-8);
            prop_assert!((d.coefficient_sum() - htv(&g).unwrap()).abs() <= 1e-8);
            for (t, c) in &d.components {
                prop_assert!(*c > 0.0);
                prop_assert!((t.htv().unwrap() - 1.0).abs() < 1e-9);
                prop_assert!(is_extremal(&t.function, NULLSPACE_REL_TOL).unwrap().extremal);
            }
        }

        #[test]
        fn extremality_is_sign_invariant(seed in 0u64..100_000) {
            let g = random_function(seed);
            let a = is_extremal(&g, NULLSPACE_REL_TOL).unwrap();
            let b = is_extremal(&g.scaled(-1.0), NULLSPACE_REL_TOL).unwrap();
            prop_assert_eq!(a.extremal, b.extremal);
            prop_assert_eq!(a.dim, b.dim);
        }
    }
}
