use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::square::{build_raw, raw_points, RawSquare};
use super::{build_frames, plan_mesh, MeshPlan, PlanMode, DEFAULT_FRAME_SAMPLES};
use crate::error::{HtvError, Result};
use crate::field::{htv_quadrature, SmoothField, DEFAULT_QUADRATURE_RESOLUTION};
use crate::htv::htv_cpwl;
use crate::mesh::{CpwlFunction, Point, Triangulation};
use crate::schatten::SchattenP;

const MAX_TRIANGLES: usize = 12_000_000;

/// Joins the per-square triangulations of `plan` into one mesh of the unit square.
///
/// Every side shared by two squares must carry the same vertices from both.
pub fn assemble_global(plan: &MeshPlan) -> Result<Triangulation> {
    let raws: Vec<RawSquare> = plan.frames.par_iter().map(|fr| build_raw(fr, plan)).collect::<Result<_>>()?;
    let total: usize = raws.iter().map(|r| r.tris.len()).sum();
    if total > MAX_TRIANGLES {
        return Err(HtvError::InvalidParameter(format!("mesh would have {total} triangles (limit {MAX_TRIANGLES})")));
    }
    let points: Vec<Vec<Point>> = plan.frames.par_iter().zip(&raws).map(|(fr, raw)| raw_points(raw, fr)).collect();

    let m = 1u64 << plan.n;
    let side_points = |sq: usize, pick: &dyn Fn((i64, i64), i64) -> bool| -> BTreeSet<&Point> {
        let raw = &raws[sq];
        raw.verts.iter().zip(&points[sq]).filter(|(v, _)| pick(**v, raw.w)).map(|(_, p)| p).collect()
    };
    for fr in &plan.frames {
        let neighbours = [
            (fr.column + 1 < m).then(|| fr.id + 1),
            (fr.row + 1 < m).then(|| fr.id + m as usize),
        ];
        for (dir, other) in neighbours.into_iter().enumerate() {
            let Some(other) = other else { continue };
            let (mine, theirs) = if dir == 0 {
                (side_points(fr.id, &|v, w| v.0 == w), side_points(other, &|v, _| v.0 == 0))
            } else {
                (side_points(fr.id, &|v, w| v.1 == w), side_points(other, &|v, _| v.1 == 0))
            };
            if mine != theirs {
                let stray = mine.symmetric_difference(&theirs).next().map(|p| p.to_f64());
                return Err(HtvError::VertexMismatch(format!(
                    "squares {} and {other} disagree on their shared side ({} vs {} vertices, first stray at {stray:?})",
                    fr.id,
                    mine.len(),
                    theirs.len()
                )));
            }
        }
    }

    let mut index: HashMap<&Point, usize> = HashMap::with_capacity(total);
    let mut vertices: Vec<Point> = Vec::with_capacity(total / 2 + 16);
    let mut triangles = Vec::with_capacity(total);
    for (raw, pts) in raws.iter().zip(&points) {
        let ids: Vec<usize> = pts
            .iter()
            .map(|p| {
                *index.entry(p).or_insert_with(|| {
                    vertices.push(p.clone());
                    vertices.len() - 1
                })
            })
            .collect();
        triangles.extend(raw.tris.iter().map(|t| [ids[t[0]], ids[t[1]], ids[t[2]]]));
    }
    drop(index);
    let mesh = Triangulation::new(vertices, triangles)?;
    mesh.check_covers_unit_square()?;
    Ok(mesh)
}

/// CPWL interpolant of `f` on `mesh`.
pub fn interpolate<F: SmoothField + ?Sized>(f: &F, mesh: Arc<Triangulation>) -> Result<CpwlFunction> {
    mesh.check_covers_unit_square()?;
    let values: Vec<f64> = mesh.coords().par_iter().map(|c| f.eval(c[0], c[1])).collect();
    CpwlFunction::new(mesh, values)
}

pub const DEFAULT_PROBE_RESOLUTION: usize = 512;

/// `max |g - f|` over the cell centres of a `resolution x resolution` grid.
pub fn sup_error<F: SmoothField + ?Sized>(f: &F, g: &CpwlFunction, resolution: usize) -> Result<f64> {
    if resolution == 0 {
        return Err(HtvError::InvalidParameter("probe resolution must be positive".into()));
    }
    let mesh = g.mesh();
    let c = mesh.coords();
    let n = resolution as f64;
    let probe = |i: usize| (i as f64 + 0.5) / n;
    let per_triangle = |t: usize| -> f64 {
        let tri = mesh.triangles()[t];
        let (a, b, d) = (c[tri[0]], c[tri[1]], c[tri[2]]);
        let (xmin, xmax) = (a[0].min(b[0]).min(d[0]), a[0].max(b[0]).max(d[0]));
        let (ymin, ymax) = (a[1].min(b[1]).min(d[1]), a[1].max(b[1]).max(d[1]));
        let lo = |v: f64| ((v * n - 0.5).floor().max(0.0)) as usize;
        let hi = |v: f64| ((v * n - 0.5).ceil().max(0.0) as usize).min(resolution - 1);
        let det = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]);
        let slack = -1e-12 * det.abs();
        let mut worst = 0.0_f64;
        for j in lo(ymin)..=hi(ymax) {
            let y = probe(j);
            for i in lo(xmin)..=hi(xmax) {
                let x = probe(i);
                let l1 = (b[0] - x) * (d[1] - y) - (b[1] - y) * (d[0] - x);
                let l2 = (d[0] - x) * (a[1] - y) - (d[1] - y) * (a[0] - x);
                let l3 = det - l1 - l2;
                if l1 >= slack && l2 >= slack && l3 >= slack {
                    worst = worst.max((g.eval_on_triangle(t, x, y) - f.eval(x, y)).abs());
                }
            }
        }
        worst
    };
    Ok((0..mesh.num_triangles()).into_par_iter().map(per_triangle).reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "K")]
    pub k: u32,
    pub vertices: usize,
    pub triangles: usize,
    pub min_angle: f64,
    pub sup_error: f64,
    pub htv_cpwl: f64,
    pub htv_reference: f64,
}

pub fn convergence_experiment<F: SmoothField + ?Sized>(
    f: &F,
    n: u32,
    ks: &[u32],
    p: SchattenP,
    mode: PlanMode,
) -> Result<Vec<ConvergenceRow>> {
    convergence_experiment_with(f, n, ks, p, mode, |_, _| Ok(()))
}

/// Like [`convergence_experiment`], handing every interpolant to `on_level` as it is built.
pub fn convergence_experiment_with<F: SmoothField + ?Sized>(
    f: &F,
    n: u32,
    ks: &[u32],
    p: SchattenP,
    mode: PlanMode,
    mut on_level: impl FnMut(&ConvergenceRow, &CpwlFunction) -> Result<()>,
) -> Result<Vec<ConvergenceRow>> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HtvError::InvalidParameter(format!("K values must be nonempty and ascending, got {ks:?}")));
    }
    let frames = build_frames(f, n, DEFAULT_FRAME_SAMPLES)?;
    let reference = htv_quadrature(f, p, DEFAULT_QUADRATURE_RESOLUTION)?;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let plan = plan_mesh(&frames, n, k, mode)?;
        let mesh = Arc::new(assemble_global(&plan)?);
        let g = interpolate(f, mesh.clone())?;
        let row = ConvergenceRow {
            k,
            vertices: mesh.num_vertices(),
            triangles: mesh.num_triangles(),
            min_angle: mesh.min_angle(),
            sup_error: sup_error(f, &g, DEFAULT_PROBE_RESOLUTION)?,
            htv_cpwl: htv_cpwl(&g, p)?.total,
            htv_reference: reference,
        };
        on_level(&row, &g)?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{frames_from_angles, RationalAngle, SquareFrame};
    use crate::field::BuiltinField;
    use crate::htv::htv;
    use num_bigint::BigInt;

    fn frames_with(angles: &[(u64, u64)]) -> Vec<SquareFrame> {
        let n = ((angles.len() as f64).sqrt() as u64).trailing_zeros();
        let angles: Vec<RationalAngle> = angles.iter().map(|&(p, q)| RationalAngle::new(p, q).unwrap()).collect();
        frames_from_angles(n, &angles).unwrap()
    }

    #[test]
    fn equal_angles_conform() {
        let plan = plan_mesh(&frames_with(&[(2, 1); 4]), 1, 1, PlanMode::Lcm).unwrap();
        let mesh = assemble_global(&plan).unwrap();
        assert!(mesh.num_triangles() > 0);
    }

    #[test]
    fn mixed_angles_conform_in_both_modes() {
        let frames = frames_with(&[(1, 2), (3, 1), (2, 3), (2, 1)]);
        for mode in [PlanMode::Lcm, PlanMode::Product] {
            let plan = plan_mesh(&frames, 1, 0, mode).unwrap();
            assemble_global(&plan).unwrap();
        }
    }

    #[test]
    fn corrupted_pitch_is_caught() {
        let frames = frames_with(&[(1, 2), (3, 1), (2, 3), (2, 1)]);
        let mut plan = plan_mesh(&frames, 1, 1, PlanMode::Lcm).unwrap();
        plan.scaled_pitch[2] = &plan.scaled_pitch[2] / BigInt::from(2);
        assert!(matches!(assemble_global(&plan), Err(HtvError::VertexMismatch(_))));
    }

    #[test]
    fn affine_interpolant_is_free() {
        let f = BuiltinField::affine([1.5, -0.5], 2.0);
        let plan = plan_mesh(&frames_with(&[(1, 3), (2, 1), (3, 2), (1, 2)]), 1, 1, PlanMode::Lcm).unwrap();
        let g = interpolate(&f, Arc::new(assemble_global(&plan).unwrap())).unwrap();
        assert!(htv(&g).unwrap() < 1e-9);
        assert!(sup_error(&f, &g, 64).unwrap() < 1e-12);
    }

    #[test]
    fn quadratic_values_at_vertices() {
        let f = BuiltinField::isotropic_quadratic();
        let plan = plan_mesh(&frames_with(&[(2, 1)]), 0, 1, PlanMode::Lcm).unwrap();
        let g = interpolate(&f, Arc::new(assemble_global(&plan).unwrap())).unwrap();
        for (c, v) in g.mesh().coords().iter().zip(g.values()) {
            assert_eq!(*v, 0.5 * (c[0] * c[0] + c[1] * c[1]));
        }
    }

    #[test]
    fn interpolation_error_rate() {
        let f = BuiltinField::isotropic_quadratic();
        let rows = convergence_experiment(&f, 0, &[1, 2, 3], SchattenP::One, PlanMode::Lcm).unwrap();
        for w in rows.windows(2) {
            let ratio = w[0].sup_error / w[1].sup_error;
            assert!(ratio > 3.0 && ratio < 5.0, "{rows:?}");
            assert_eq!(w[0].min_angle.to_bits(), w[1].min_angle.to_bits());
        }
    }

    #[test]
    fn experiment_rejects_bad_range() {
        let f = BuiltinField::isotropic_quadratic();
        assert!(convergence_experiment(&f, 0, &[], SchattenP::One, PlanMode::Lcm).is_err());
        assert!(convergence_experiment(&f, 0, &[2, 1], SchattenP::One, PlanMode::Lcm).is_err());
    }
}
