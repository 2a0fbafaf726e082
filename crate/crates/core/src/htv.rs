//! Exact HTV of CPWL functions.
//!
//! Across an interior edge the gradient jumps by a vector normal to the edge,
//! so the Hessian measure there is rank one and every Schatten norm of it is
//! `|jump| * length`. Edges on the boundary of the square do not count.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::mesh::{CpwlFunction, Edge, Triangulation};
use crate::schatten::{schatten_norm, Mat2, SchattenP};
use crate::sum::pairwise;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeContribution {
    pub edge: usize,
    /// Gradient on the right triangle minus gradient on the left one.
    pub jump: [f64; 2],
    pub length: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HtvReport {
    pub total: f64,
    /// Interior edges in increasing id order.
    pub per_edge: Vec<EdgeContribution>,
    pub p: SchattenP,
}

/// Unit normal of `e` pointing from its left triangle into its right one.
pub fn edge_normal(mesh: &Triangulation, e: &Edge) -> [f64; 2] {
    let [a, b] = e.vertices;
    let (pa, pb) = (mesh.coords()[a], mesh.coords()[b]);
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let n = d[0].hypot(d[1]);
    [d[1] / n, -d[0] / n]
}

/// HTV of `g` on the open unit square. The value is the same for every `p`.
pub fn htv_cpwl(g: &CpwlFunction, p: SchattenP) -> Result<HtvReport> {
    let mesh = g.mesh();
    mesh.check_covers_unit_square()?;
    let grads = g.gradients()?;
    let interior: Vec<(usize, &Edge)> = mesh.interior_edges().collect();
    let per_edge: Vec<EdgeContribution> = interior
        .par_iter()
        .map(|&(id, e)| {
            let (l, r) = (grads[e.left.unwrap()], grads[e.right.unwrap()]);
            let jump = [r[0] - l[0], r[1] - l[1]];
            let length = mesh.edge_length(e);
            EdgeContribution { edge: id, jump, length, contribution: jump[0].hypot(jump[1]) * length }
        })
        .collect();
    let total = pairwise(&per_edge.iter().map(|c| c.contribution).collect::<Vec<_>>());
    Ok(HtvReport { total, per_edge, p })
}

/// Shorthand for `htv_cpwl(g, SchattenP::One)?.total`.
pub fn htv(g: &CpwlFunction) -> Result<f64> {
    Ok(htv_cpwl(g, SchattenP::One)?.total)
}

/// Interior edges carrying part of `|D^2 g|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSupport {
    pub edges: BTreeSet<usize>,
    pub total_length: f64,
}

impl EdgeSupport {
    fn from_report(report: &HtvReport, keep: impl Fn(&EdgeContribution) -> bool) -> Self {
        let kept: Vec<&EdgeContribution> = report.per_edge.iter().filter(|c| keep(c)).collect();
        let total_length = pairwise(&kept.iter().map(|c| c.length).collect::<Vec<_>>());
        Self { edges: kept.iter().map(|c| c.edge).collect(), total_length }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.edges.contains(&edge)
    }

    pub fn is_subset(&self, other: &EdgeSupport) -> bool {
        self.edges.is_subset(&other.edges)
    }
}

/// Edges whose contribution exceeds `tol`; `tol = 0` keeps every nonzero one.
pub fn htv_support(g: &CpwlFunction, tol: f64) -> Result<EdgeSupport> {
    let report = htv_cpwl(g, SchattenP::One)?;
    Ok(EdgeSupport::from_report(&report, |c| c.contribution > tol.max(0.0)))
}

/// Edges whose jump norm exceeds `rel` times the largest jump norm.
pub fn htv_support_relative(g: &CpwlFunction, rel: f64) -> Result<EdgeSupport> {
    let report = htv_cpwl(g, SchattenP::One)?;
    let norm = |c: &EdgeContribution| c.jump[0].hypot(c.jump[1]);
    let max = report.per_edge.iter().map(norm).fold(0.0, f64::max);
    Ok(EdgeSupport::from_report(&report, |c| max > 0.0 && norm(c) > rel * max))
}

/// Largest relative spread of `sum_e |jump_e (x) n_e|_p * length_e` over
/// `p in {1, 2, inf}`, forming the rank-one jump matrices explicitly.
/// Returns 0 when `g` is affine.
pub fn p_independence_check(g: &CpwlFunction) -> Result<f64> {
    let report = htv_cpwl(g, SchattenP::One)?;
    let mesh = g.mesh();
    let mut totals = Vec::with_capacity(3);
    for p in [SchattenP::One, SchattenP::Two, SchattenP::Inf] {
        let terms = report
            .per_edge
            .iter()
            .map(|c| {
                let n = edge_normal(mesh, &mesh.edges()[c.edge]);
                Ok(schatten_norm(&Mat2::outer(c.jump, n), p)? * c.length)
            })
            .collect::<Result<Vec<f64>>>()?;
        totals.push(pairwise(&terms));
    }
    let hi = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = report.total.max(hi);
    Ok(if scale > 0.0 { (hi - lo) / scale } else { 0.0 })
}
