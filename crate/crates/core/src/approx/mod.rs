//! Eigenframe-aligned CPWL approximation of smooth fields.
//!
//! The unit square is cut into `4^N` dyadic squares. Each square gets a
//! rational rotation close to the eigenframe of the Hessian at its centre,
//! and is triangulated by a grid aligned with that rotation, glued to the
//! square's sides by four self-similar transition bands. All squares share
//! the same boundary vertex spacing, so the pieces join conformingly.

mod global;
mod square;

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{HtvError, Result};
use crate::field::SmoothField;
use crate::mesh::{rat_to_f64, Rational};
use crate::schatten::{schatten_norm, sym_eigen_frame, Mat2, SchattenP};

pub use global::{
    assemble_global, convergence_experiment, convergence_experiment_with, interpolate, sup_error, ConvergenceRow,
    DEFAULT_PROBE_RESOLUTION,
};
pub use square::{check_square_alignment, triangulate_square, triangulate_square_detailed, SquareMesh};

/// Rotation angle `theta = atan(q / p)` with `p, q` coprime positive integers and `(p, q) != (1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RationalAngle {
    p: u64,
    q: u64,
}

impl RationalAngle {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p == 0 || q == 0 || p.gcd(&q) != 1 || (p, q) == (1, 1) {
            return Err(HtvError::InvalidParameter(format!(
                "({p}, {q}) is not a coprime pair of positive integers other than (1, 1)"
            )));
        }
        if p.max(q) > 1 << 31 {
            return Err(HtvError::InvalidParameter(format!("angle ({p}, {q}) has entries beyond 2^31")));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn theta(&self) -> f64 {
        (self.q as f64).atan2(self.p as f64)
    }

    /// `p^2 + q^2`.
    pub fn norm_sq(&self) -> u64 {
        self.p * self.p + self.q * self.q
    }

    /// `theta > pi/4`.
    pub fn is_steep(&self) -> bool {
        self.q > self.p
    }

    /// `(min(p, q), max(p, q))`.
    pub fn canonical(&self) -> (u64, u64) {
        (self.p.min(self.q), self.p.max(self.q))
    }

    /// `[[p, -q], [q, p]] / sqrt(p^2 + q^2)`.
    pub fn rotation(&self) -> Mat2 {
        let r = (self.norm_sq() as f64).sqrt();
        let (c, s) = (self.p as f64 / r, self.q as f64 / r);
        Mat2::from_entries(c, -s, s, c)
    }
}

impl fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.p, self.q)
    }
}

/// `|R(a) - R(b)|_1` for plane rotations.
fn rotation_gap(a: f64, b: f64) -> f64 {
    4.0 * ((a - b) / 2.0).sin().abs()
}

/// Simplest rational angle within `eps` of `theta_hat` in the nuclear norm of
/// the rotation difference.
///
/// Walks the Stern-Brocot tree of `q / p` towards `tan(theta_hat)` and
/// returns the first node inside the admissible band, skipping `1/1`. Runs of
/// moves in one direction are taken in a single exponential search.
pub fn rational_angle_approx(theta_hat: f64, eps: f64) -> Result<RationalAngle> {
    if !(0.0..FRAC_PI_2).contains(&theta_hat) {
        return Err(HtvError::InvalidParameter(format!("angle {theta_hat} is outside [0, pi/2)")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(HtvError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    // Ordering::Less: the node lies below the band, walk right.
    let side = |(q, p): (u64, u64)| -> Ordering {
        let theta = (q as f64).atan2(p as f64);
        let inside = rotation_gap(theta, theta_hat) <= eps;
        if (q, p) == (1, 1) {
            if theta_hat > FRAC_PI_4 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        } else if inside {
            Ordering::Equal
        } else if theta < theta_hat {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    };
    let add = |a: (u64, u64), b: (u64, u64), k: u64| -> Option<(u64, u64)> {
        Some((a.0.checked_add(b.0.checked_mul(k)?)?, a.1.checked_add(b.1.checked_mul(k)?)?))
    };
    let too_fine = || HtvError::InvalidParameter(format!("eps = {eps:e} is below the resolvable precision"));

    let (mut lo, mut hi) = ((0u64, 1u64), (1u64, 0u64));
    loop {
        let node = add(lo, hi, 1).ok_or_else(too_fine)?;
        let dir = side(node);
        if dir == Ordering::Equal {
            return RationalAngle::new(node.1, node.0);
        }
        let (base, step) = if dir == Ordering::Less { (lo, hi) } else { (hi, lo) };
        // nodes base + j * step for j >= 1; find the last j still on the same side
        let same = |j: u64| add(base, step, j).is_some_and(|n| side(n) == dir);
        let mut good = 1u64;
        let mut bad = 2u64;
        while same(bad) {
            good = bad;
            bad = bad.checked_mul(2).ok_or_else(too_fine)?;
        }
        while bad - good > 1 {
            let mid = good + (bad - good) / 2;
            if same(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        let moved = add(base, step, good).ok_or_else(too_fine)?;
        if dir == Ordering::Less {
            lo = moved;
        } else {
            hi = moved;
        }
        if lo.0.max(lo.1).max(hi.0).max(hi.1) > 1 << 31 {
            return Err(too_fine());
        }
    }
}

/// Per-square data: eigenframe of the Hessian at the centre and its rational rotation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareFrame {
    pub id: usize,
    /// Column and row of the square among the `2^N x 2^N`.
    pub column: u64,
    pub row: u64,
    pub level: u32,
    pub center: [f64; 2],
    /// `R(theta_hat)^T hess f(center) R(theta_hat)`.
    pub diagonal: Mat2,
    pub theta_hat: f64,
    pub angle: RationalAngle,
    /// Largest `|U^T hess f(x) U - D|_1` over the sample lattice, `U` the rational rotation.
    pub deviation: f64,
}

impl SquareFrame {
    pub fn side(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::one() << self.level)
    }

    /// Lower-left corner.
    pub fn origin(&self) -> (Rational, Rational) {
        let s = self.side();
        (&s * BigInt::from(self.column), &s * BigInt::from(self.row))
    }
}

pub const DEFAULT_FRAME_SAMPLES: usize = 9;

/// The angle used where the Hessian is isotropic and every frame diagonalises it.
pub fn isotropic_angle() -> RationalAngle {
    RationalAngle { p: 2, q: 1 }
}

/// One frame per dyadic square of level `n`, ordered row by row from the bottom.
pub fn build_frames<F: SmoothField + ?Sized>(f: &F, n: u32, samples_per_square: usize) -> Result<Vec<SquareFrame>> {
    if n > 12 {
        return Err(HtvError::InvalidParameter(format!("N = {n} exceeds the supported maximum 12")));
    }
    let samples = samples_per_square.max(2);
    let m = 1u64 << n;
    let side = 1.0 / m as f64;
    let eps = 1.0 / (n.max(1) as f64);
    let mut frames = Vec::with_capacity((m * m) as usize);
    for row in 0..m {
        for column in 0..m {
            let (x0, y0) = (column as f64 * side, row as f64 * side);
            let center = [x0 + 0.5 * side, y0 + 0.5 * side];
            let hess = f.hess(center[0], center[1]);
            let frame = sym_eigen_frame(&hess, 1e-9 * (1.0 + hess.max_abs()))?;
            let (d1, d2) = (frame.diagonal.m11, frame.diagonal.m22);
            let isotropic = (d1 - d2).abs() <= 1e-12 * d1.abs().max(d2.abs()).max(1e-300);
            let angle = if isotropic { isotropic_angle() } else { rational_angle_approx(frame.theta, eps)? };
            let u = angle.rotation();
            let mut deviation = 0.0_f64;
            for a in 0..samples {
                for b in 0..samples {
                    let x = x0 + side * a as f64 / (samples - 1) as f64;
                    let y = y0 + side * b as f64 / (samples - 1) as f64;
                    let rotated = u.transpose() * f.hess(x, y) * u;
                    deviation = deviation.max(schatten_norm(&(rotated - frame.diagonal), SchattenP::One)?);
                }
            }
            frames.push(SquareFrame {
                id: frames.len(),
                column,
                row,
                level: n,
                center,
                diagonal: frame.diagonal,
                theta_hat: frame.theta,
                angle,
                deviation,
            });
        }
    }
    Ok(frames)
}

/// Frames for prescribed rational angles, one per square of level `n` in
/// row-major order from the bottom. The diagonal and deviation are left trivial.
pub fn frames_from_angles(n: u32, angles: &[RationalAngle]) -> Result<Vec<SquareFrame>> {
    if n > 12 {
        return Err(HtvError::InvalidParameter(format!("N = {n} exceeds the supported maximum 12")));
    }
    let m = 1u64 << n;
    if angles.len() as u64 != m * m {
        return Err(HtvError::InvalidParameter(format!("level {n} needs {} angles, got {}", m * m, angles.len())));
    }
    let side = 1.0 / m as f64;
    Ok(angles
        .iter()
        .enumerate()
        .map(|(id, &angle)| {
            let (column, row) = (id as u64 % m, id as u64 / m);
            SquareFrame {
                id,
                column,
                row,
                level: n,
                center: [(column as f64 + 0.5) * side, (row as f64 + 0.5) * side],
                diagonal: Mat2::identity(),
                theta_hat: angle.theta(),
                angle,
                deviation: 0.0,
            }
        })
        .collect())
}

/// Smallest `N` with `2^-N <= eps`, or a check that a given `N` satisfies it.
pub fn resolve_level(n: Option<u32>, eps: Option<f64>) -> Result<u32> {
    let needed = |e: f64| -> Result<u32> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(HtvError::InvalidParameter(format!("eps must be positive, got {e}")));
        }
        Ok((1.0 / e).log2().ceil().max(0.0) as u32)
    };
    match (n, eps) {
        (Some(n), None) => Ok(n),
        (None, Some(e)) => needed(e),
        (Some(n), Some(e)) => {
            let k = needed(e)?;
            if n < k {
                Err(HtvError::InvalidParameter(format!("N = {n} is too coarse for eps = {e}; need N >= {k}")))
            } else {
                Ok(n)
            }
        }
        (None, None) => Err(HtvError::InvalidParameter("need N or eps".into())),
    }
}

/// How the per-square pitches are made commensurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    /// Common boundary denominator `prod_h q_h`.
    Product,
    /// Common boundary denominator `lcm_h q_h`.
    #[default]
    Lcm,
}

impl FromStr for PlanMode {
    type Err = HtvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" | "product" => Ok(PlanMode::Product),
            "lcm" => Ok(PlanMode::Lcm),
            other => Err(HtvError::InvalidParameter(format!("unknown mode `{other}` (expected lcm or product)"))),
        }
    }
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::Product => "product",
            PlanMode::Lcm => "lcm",
        })
    }
}

/// Grid parameters of every square for one refinement level `K`.
///
/// With `q~_k = max(p_k, q_k)` and common denominator `G` (product or lcm of
/// the `q~_k`), square `k` uses the multiplier `F_k = G / q~_k` and the grid
/// pitch `h_k = 2^-N 2^-K / (F_k sqrt(p_k^2 + q_k^2))`. The boundary spacing
/// `s = h_k sqrt(p_k^2 + q_k^2) / q~_k = 2^-N 2^-K / G` is the same for all `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshPlan {
    pub n: u32,
    pub k: u32,
    pub mode: PlanMode,
    pub frames: Vec<SquareFrame>,
    #[serde(serialize_with = "ser_rational")]
    pub boundary_spacing: Rational,
    /// `h_k sqrt(p_k^2 + q_k^2)`, which is rational.
    #[serde(serialize_with = "ser_rationals")]
    pub scaled_pitch: Vec<Rational>,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_rationals<S: serde::Serializer>(rs: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(|r| r.to_string()))
}

impl MeshPlan {
    /// Grid pitch of square `k`.
    pub fn pitch(&self, k: usize) -> f64 {
        rat_to_f64(&self.scaled_pitch[k]) / (self.frames[k].angle.norm_sq() as f64).sqrt()
    }

    pub fn spacing_f64(&self) -> f64 {
        rat_to_f64(&self.boundary_spacing)
    }
}

/// Smallest admissible boundary spacing.
pub const MIN_BOUNDARY_SPACING_LOG2: u32 = 40;

pub fn plan_mesh(frames: &[SquareFrame], n: u32, k: u32, mode: PlanMode) -> Result<MeshPlan> {
    if frames.is_empty() {
        return Err(HtvError::InvalidParameter("no frames to plan".into()));
    }
    let expected = 1usize << (2 * n);
    if frames.len() != expected || frames.iter().enumerate().any(|(i, f)| f.level != n || f.id != i) {
        return Err(HtvError::InvalidParameter(format!(
            "expected {expected} frames of level {n} in order, got {}",
            frames.len()
        )));
    }
    if k > 30 {
        return Err(HtvError::InvalidParameter(format!("K = {k} exceeds the supported maximum 30")));
    }
    let qs: Vec<BigInt> = frames.iter().map(|f| BigInt::from(f.angle.canonical().1)).collect();
    let common: BigInt = match mode {
        PlanMode::Lcm => qs.iter().fold(BigInt::one(), |acc, q| acc.lcm(q)),
        PlanMode::Product => qs.iter().product(),
    };
    let denominator = (BigInt::one() << (n + k)) * &common;
    let boundary_spacing = Rational::new(BigInt::one(), denominator);
    let floor = Rational::new(BigInt::one(), BigInt::one() << MIN_BOUNDARY_SPACING_LOG2);
    if boundary_spacing < floor {
        return Err(HtvError::SpacingUnderflow {
            spacing: rat_to_f64(&boundary_spacing),
            factor: format!("{mode} of max(p, q) over {} squares = {common}", frames.len()),
        });
    }
    let scaled_pitch = qs
        .iter()
        .map(|q| {
            let f = &common / q;
            Rational::new(BigInt::one(), (BigInt::one() << (n + k)) * f)
        })
        .collect();
    Ok(MeshPlan { n, k, mode, frames: frames.to_vec(), boundary_spacing, scaled_pitch })
}

/// Integer multiplier `F_k` of square `k`, checked against the plan's invariants.
pub(crate) fn square_multiplier(plan: &MeshPlan, square: usize) -> Result<i64> {
    let frame = plan.frames.get(square).ok_or_else(|| HtvError::PlanMismatch {
        square,
        reason: "no such square in the plan".into(),
    })?;
    if frame.id != square || frame.level != plan.n {
        return Err(HtvError::PlanMismatch { square, reason: "frame does not belong to this plan".into() });
    }
    let c = plan.scaled_pitch.get(square).ok_or_else(|| HtvError::PlanMismatch {
        square,
        reason: "missing pitch".into(),
    })?;
    // c = 2^-N 2^-K / F
    let f = Rational::new(BigInt::one(), BigInt::one() << (plan.n + plan.k)) / c;
    if !f.is_integer() || f < Rational::one() {
        return Err(HtvError::PlanMismatch {
            square,
            reason: format!("pitch {c} does not divide the square side into a whole number of cells"),
        });
    }
    f.to_integer().to_i64().filter(|&f| f <= 1 << 40).ok_or_else(|| HtvError::PlanMismatch {
        square,
        reason: "multiplier too large".into(),
    })
}
