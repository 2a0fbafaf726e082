//! End-to-end numerical checks, each reported as one pass/fail line.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{
    assemble_global, check_square_alignment, convergence_experiment_with, frames_from_angles, interpolate, plan_mesh,
    triangulate_square, PlanMode, RationalAngle,
};
use crate::error::Result;
use crate::extremal::{decompose, is_extremal, perturbation_identity_check, NULLSPACE_REL_TOL};
use crate::field::{
    htv_quadrature, kernel_reach, mollified_energy_pair, BuiltinField, GridSample,
    ReflectedExtension, SmoothField, Window, DEFAULT_QUADRATURE_RESOLUTION,
};
use crate::htv::{htv, htv_cpwl, p_independence_check};
use crate::mesh::{CpwlFunction, Triangulation};
use crate::schatten::{dual_norm_estimate, schatten_norm, sym_eigen_frame, Mat2, SchattenP};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(serialize_with = "secs")]
    pub elapsed: Duration,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn report(id: u32, name: &'static str, start: Instant, outcome: Result<(bool, String)>) -> CriterionReport {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionReport { id, name, passed, detail, elapsed: start.elapsed() }
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionReport> {
    let mut out = isotropic_density();
    out.push(anisotropic_quadratic());
    out.push(alignment_exactness());
    out.push(extremality_suite());
    out.push(schatten_properties());
    out.push(field_calculus());
    out
}

pub const ISOTROPIC_LEVELS: [u32; 6] = [1, 2, 3, 4, 5, 6];

/// Criteria 1 and 2: density for the isotropic quadratic and the gap to the Frobenius seminorm.
pub fn isotropic_density() -> Vec<CriterionReport> {
    let start = Instant::now();
    let f = BuiltinField::isotropic_quadratic();
    let mut p_gaps = Vec::new();
    let run = convergence_experiment_with(&f, 1, &ISOTROPIC_LEVELS, SchattenP::One, PlanMode::Lcm, |row, g| {
        let two = htv_cpwl(g, SchattenP::Two)?.total;
        p_gaps.push((row.k, two, (two - row.htv_cpwl).abs(), p_independence_check(g)?));
        Ok(())
    });
    let elapsed = start.elapsed();
    let rows = match run {
        Ok(rows) => rows,
        Err(e) => {
            let failed = |id, name| CriterionReport { id, name, passed: false, detail: format!("error: {e}"), elapsed };
            return vec![failed(1, "isotropic quadratic density"), failed(2, "seminorm gap")];
        }
    };

    let in_band = rows.iter().filter(|r| r.k >= 4).all(|r| (1.9..=2.1).contains(&r.htv_cpwl));
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].sup_error / w[1].sup_error).collect();
    let mean_ratio = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    let mean_ratio = mean_ratio.exp();
    let fast = elapsed <= Duration::from_secs(60);
    let last = rows.last().expect("levels are nonempty");
    let first = CriterionReport {
        id: 1,
        name: "isotropic quadratic density",
        passed: in_band && mean_ratio >= 3.0 && fast,
        detail: format!(
            "htv(K) = [{}], mean sup-error ratio {mean_ratio:.3}, final sup error {:.3e}, {} vertices at K = {}",
            rows.iter().map(|r| format!("{:.5}", r.htv_cpwl)).collect::<Vec<_>>().join(", "),
            last.sup_error,
            last.vertices,
            last.k
        ),
        elapsed,
    };

    let start = Instant::now();
    let second = report(2, "seminorm gap", start, (|| {
        let frob = htv_quadrature(&f, SchattenP::Two, DEFAULT_QUADRATURE_RESOLUTION)?;
        let frob_ok = (frob - SQRT_2).abs() <= 1e-4;
        let worst_gap = p_gaps.iter().map(|g| g.2).fold(0.0, f64::max);
        let worst_spread = p_gaps.iter().map(|g| g.3).fold(0.0, f64::max);
        let above = p_gaps.iter().filter(|g| g.0 >= 4).all(|g| g.1 >= 1.9 && g.1 > frob);
        Ok((
            frob_ok && worst_gap <= 1e-12 && worst_spread <= 1e-12 && above,
            format!(
                "smooth p=2 value {frob:.6}, CPWL p=2 at K = {} is {:.5}, max |p=2 - p=1| {worst_gap:.1e}, \
                 max explicit spread {worst_spread:.1e}",
                last.k,
                p_gaps.last().map(|g| g.1).unwrap_or(f64::NAN)
            ),
        ))
    })());
    vec![first, second]
}

/// Criterion 3: eigenframe alignment for a rotated anisotropic quadratic.
pub fn anisotropic_quadratic() -> CriterionReport {
    let start = Instant::now();
    report(3, "anisotropic rotated quadratic", start, (|| {
        let f = BuiltinField::RotatedQuadratic { l1: 2.0, l2: 1.0, theta: (0.5f64).atan() };
        let reference = htv_quadrature(&f, SchattenP::One, DEFAULT_QUADRATURE_RESOLUTION)?;
        let mut axis = None;
        let rows = convergence_experiment_with(&f, 1, &ISOTROPIC_LEVELS, SchattenP::One, PlanMode::Lcm, |row, _| {
            if row.k == 4 {
                let n = ((row.vertices as f64).sqrt().round() as usize).saturating_sub(1).max(1);
                let rising = interpolate(&f, Arc::new(Triangulation::uniform_grid(n, true)))?;
                let falling = interpolate(&f, Arc::new(Triangulation::uniform_grid(n, false)))?;
                axis = Some((n, row.vertices, row.htv_cpwl, htv(&rising)?, htv(&falling)?));
            }
            Ok(())
        })?;
        let (n, vertices, aligned, rising, falling) = axis.expect("K = 4 is among the levels");
        let ref_ok = (reference - 3.0).abs() <= 1e-6;
        let close = rows.iter().filter(|r| r.k >= 4).all(|r| (r.htv_cpwl - 3.0).abs() <= 0.05 * 3.0);
        let margin = rising / aligned - 1.0;
        Ok((
            ref_ok && close && margin >= 0.02,
            format!(
                "reference {reference:.8}, aligned htv(K) = [{}]; {}x{} axis grid ({} vertices vs {vertices}): \
                 rising diagonal {rising:.4} ({:+.1}%), falling diagonal {falling:.4}",
                rows.iter().map(|r| format!("{:.5}", r.htv_cpwl)).collect::<Vec<_>>().join(", "),
                n,
                n,
                (n + 1) * (n + 1),
                100.0 * margin
            ),
        ))
    })())
}

/// Angles with `max(p, q) <= 3`.
pub fn small_angles() -> Vec<RationalAngle> {
    let mut out = Vec::new();
    for p in 1..=3u64 {
        for q in 1..=3u64 {
            if let Ok(a) = RationalAngle::new(p, q) {
                out.push(a);
            }
        }
    }
    out
}

/// Criterion 4: exact conformity and K-independent angles for random angle sets.
pub fn alignment_exactness() -> CriterionReport {
    let start = Instant::now();
    report(4, "alignment exactness", start, (|| {
        let pool = small_angles();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut checked = 0;
        let mut failures = Vec::new();
        for n in [1u32, 2] {
            for _ in 0..3 {
                let m = 1usize << (2 * n);
                let angles: Vec<RationalAngle> = (0..m).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
                let frames = frames_from_angles(n, &angles)?;
                let mut angles_seen = Vec::new();
                for k in 0..=3 {
                    let plan = plan_mesh(&frames, n, k, PlanMode::Lcm)?;
                    let mesh = match assemble_global(&plan) {
                        Ok(mesh) => mesh,
                        Err(e) => {
                            failures.push(format!("N={n} K={k}: {e}"));
                            continue;
                        }
                    };
                    let square_errors: Vec<String> = frames
                        .par_iter()
                        .filter_map(|fr| {
                            triangulate_square(fr, &plan)
                                .and_then(|sq| check_square_alignment(fr, &plan, &sq))
                                .err()
                                .map(|e| format!("N={n} K={k} square {}: {e}", fr.id))
                        })
                        .collect();
                    failures.extend(square_errors);
                    angles_seen.push((mesh.min_angle_sin2(), mesh.min_angle().to_bits()));
                    checked += 1;
                }
                if angles_seen.windows(2).any(|w| w[0] != w[1]) {
                    failures.push(format!("N={n}: minimum angle varies with K for {angles:?}"));
                }
            }
        }
        Ok((
            failures.is_empty(),
            if failures.is_empty() {
                format!("{checked} global meshes conform exactly, minimum angle constant in K")
            } else {
                failures.join("; ")
            },
        ))
    })())
}

fn random_function(seed: u64) -> Result<CpwlFunction> {
    let mesh = Arc::new(Triangulation::random_delaunay(8, seed)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let vals = (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    CpwlFunction::new(mesh, vals)
}

fn grid_hats(n: usize, centres: &[(usize, usize)]) -> Result<CpwlFunction> {
    let mesh = Arc::new(Triangulation::uniform_grid(n, true));
    let mut vals = vec![0.0; mesh.num_vertices()];
    for &(i, j) in centres {
        vals[j * (n + 1) + i] = 1.0;
    }
    CpwlFunction::new(mesh, vals)
}

/// Criterion 5: extremality certificates and decompositions.
pub fn extremality_suite() -> CriterionReport {
    let start = Instant::now();
    let mut out = report(5, "extremality suite", start, (|| {
        let mut problems = Vec::new();
        let hat = grid_hats(8, &[(4, 4)])?;
        let cert = is_extremal(&hat, NULLSPACE_REL_TOL)?;
        if !(cert.extremal && cert.dim == 1) {
            problems.push(format!("hat has dimension {}", cert.dim));
        }
        let two = grid_hats(8, &[(2, 2), (6, 6)])?;
        let cert = is_extremal(&two, NULLSPACE_REL_TOL)?;
        let witness_ok = cert.witness.as_ref().map_or(Ok(false), |w| {
            let bound = perturbation_identity_check(&two, w)?;
            let (u, v) = (w.values(), crate::extremal::normalize_mod_affine(&two)?);
            let dot: f64 = u.iter().zip(v.values()).map(|(a, b)| a * b).sum();
            let nv: f64 = v.values().iter().map(|a| a * a).sum::<f64>().sqrt();
            Ok::<_, crate::HtvError>(bound <= 1e-10 && (dot.abs() / nv) < 1.0 - 1e-6)
        })?;
        if cert.extremal || !witness_ok {
            problems.push(format!("two hats: dimension {}, witness valid {witness_ok}", cert.dim));
        }

        let mut components = 0;
        let (mut worst_res, mut worst_sum, mut worst_pert) = (0.0_f64, 0.0_f64, 0.0_f64);
        for seed in 0..100u64 {
            let g = random_function(seed)?;
            let d = decompose(&g, 1e-8)?;
            worst_res = worst_res.max(d.residual);
            worst_sum = worst_sum.max((d.coefficient_sum() - htv(&g)?).abs());
            for (t, _) in &d.components {
                components += 1;
                if !is_extremal(&t.function, NULLSPACE_REL_TOL)?.extremal {
                    problems.push(format!("seed {seed}: component is not extremal"));
                }
                worst_pert = worst_pert.max(perturbation_identity_check(&g, &t.function)?);
            }
        }
        let ok = problems.is_empty() && worst_res <= 1e-8 && worst_sum <= 1e-8 && worst_pert <= 1e-10;
        let mut detail = format!(
            "hat extremal, two hats split; 100 random functions into {components} extremal components, \
             max residual {worst_res:.1e}, max |sum c - htv| {worst_sum:.1e}, max perturbation defect {worst_pert:.1e}"
        );
        if !problems.is_empty() {
            detail = problems.join("; ");
        }
        Ok((ok, detail))
    })());
    if out.elapsed > Duration::from_secs(30) {
        out.passed = false;
        out.detail.push_str(" (over the 30 s budget)");
    }
    out
}

fn random_mat(rng: &mut ChaCha8Rng) -> Mat2 {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    Mat2::new(
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
    )
    .expect("finite entries")
}

fn random_orthogonal(rng: &mut ChaCha8Rng) -> Mat2 {
    let r = Mat2::rotation(rng.gen_range(0.0..2.0 * PI));
    if rng.gen_bool(0.5) { r * Mat2::diag(1.0, -1.0) } else { r }
}

pub const SCHATTEN_SAMPLES: usize = 10_000;

/// Criterion 6: Schatten-norm identities on random matrices.
pub fn schatten_properties() -> CriterionReport {
    let start = Instant::now();
    report(6, "Schatten property suite", start, (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ps = [SchattenP::One, SchattenP::Two, SchattenP::Inf, SchattenP::general(3.0)?];
        let tol = 1e-10;
        let mut worst = [0.0_f64; 5];
        for _ in 0..SCHATTEN_SAMPLES {
            let (a, b) = (random_mat(&mut rng), random_mat(&mut rng));
            let (u, v) = (random_orthogonal(&mut rng), random_orthogonal(&mut rng));
            for &p in &ps {
                let na = schatten_norm(&a, p)?;
                let nb = schatten_norm(&b, p)?;
                let rel = |x: f64, s: f64| x / s.max(f64::MIN_POSITIVE);
                worst[0] = worst[0].max(rel((schatten_norm(&(u * a * v), p)? - na).abs(), na));
                worst[1] = worst[1].max(rel(schatten_norm(&(a * b), p)? - na * nb, na * nb));
                worst[2] = worst[2].max(rel(dual_norm_estimate(&a, p, 8) - na, na));
            }
            let (x, y) = ([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let outer = Mat2::outer(x, y);
            let expect = (x[0].hypot(x[1])) * (y[0].hypot(y[1]));
            for &p in &ps {
                worst[3] = worst[3].max(rel_err(schatten_norm(&outer, p)?, expect));
            }
            let s = Mat2::new(a.m11, a.m12, a.m12, a.m22)?;
            let frame = sym_eigen_frame(&s, 0.0)?;
            let r = Mat2::rotation(frame.theta);
            let back = r * frame.diagonal * r.transpose();
            let nuclear = frame.diagonal.m11.abs() + frame.diagonal.m22.abs();
            let scale = s.max_abs();
            worst[4] = worst[4]
                .max(rel_err(schatten_norm(&s, SchattenP::One)?, nuclear))
                .max((back - s).max_abs() / scale.max(f64::MIN_POSITIVE));
        }
        Ok((
            worst.iter().all(|w| *w <= tol),
            format!(
                "{SCHATTEN_SAMPLES} matrices, worst relative defects: unitary invariance {:.1e}, \
                 submultiplicativity {:.1e}, duality {:.1e}, rank one {:.1e}, eigenvalues {:.1e}",
                worst[0], worst[1], worst[2], worst[3], worst[4]
            ),
        ))
    })())
}

fn rel_err(x: f64, expect: f64) -> f64 {
    (x - expect).abs() / expect.abs().max(f64::MIN_POSITIVE)
}

/// Criterion 7: C^1 reflection across `x = 0` and the mollification energy inequality.
pub fn field_calculus() -> CriterionReport {
    let start = Instant::now();
    report(7, "field calculus", start, (|| {
        let fields = [
            BuiltinField::GaussianBump { sigma: 0.3, center: [0.2, 0.5] },
            BuiltinField::ProductSine { omega: 3.0 },
            BuiltinField::RotatedQuadratic { l1: 2.0, l2: -1.0, theta: 0.4 },
        ];
        let h = 1e-6;
        let mut c1 = 0.0_f64;
        for f in fields {
            let e = ReflectedExtension::new(f);
            for j in 0..=10 {
                let y = 0.05 + 0.09 * j as f64;
                let left = (3.0 * e.eval(0.0, y) - 4.0 * e.eval(-h, y) + e.eval(-2.0 * h, y)) / (2.0 * h);
                let right = (-3.0 * e.eval(0.0, y) + 4.0 * e.eval(h, y) - e.eval(2.0 * h, y)) / (2.0 * h);
                let dy = |x: f64| (e.eval(x, y + h) - e.eval(x, y - h)) / (2.0 * h);
                let dy_left = 2.0 * dy(-h) - dy(-2.0 * h);
                let dy_right = 2.0 * dy(h) - dy(2.0 * h);
                let value_left = 2.0 * e.eval(-h, y) - e.eval(-2.0 * h, y);
                c1 = c1
                    .max((value_left - e.eval(0.0, y)).abs())
                    .max((left - right).abs())
                    .max((dy_left - dy_right).abs());
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = f64::NEG_INFINITY;
        for trial in 0..20 {
            let n = rng.gen_range(24..40);
            let spacing = 1.0 / (n - 1) as f64;
            let samples: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = GridSample::new([0.0, 0.0], spacing, n, n, samples)?;
            let radius = spacing * rng.gen_range(1.5..4.0);
            let window = Window::inset(&u, kernel_reach(spacing, radius) + 2).expect("grid is large enough");
            let p = [SchattenP::One, SchattenP::Two, SchattenP::Inf][trial % 3];
            let (lhs, rhs) = mollified_energy_pair(&u, radius, window, p)?;
            worst = worst.max(lhs - rhs);
        }
        Ok((
            c1 <= 1e-5 && worst <= 1e-6,
            format!("max C^1 mismatch {c1:.1e}; 20 random grids, max mollified minus original energy {worst:.3e}"),
        ))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_angle_pool() {
        let pool = small_angles();
        assert_eq!(pool.len(), 6);
        assert!(pool.iter().all(|a| a.canonical().1 <= 3));
    }

    #[test]
    fn report_line() {
        let r = CriterionReport { id: 9, name: "demo", passed: false, detail: "x".into(), elapsed: Duration::from_millis(1500) };
        assert_eq!(r.to_string(), "[FAIL] 9 demo (1.50 s): x");
    }
}
