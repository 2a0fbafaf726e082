//! Schatten norms of 2x2 matrices.
//!
//! Singular values come from the closed-form 2x2 decomposition, so every
//! routine here is branch-light and allocation free.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HtvError, Result};

/// A real 2x2 matrix `[[m11, m12], [m21, m22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    /// Checked constructor; rejects NaN and infinite entries.
    pub fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Result<Self> {
        let m = Self::from_entries(m11, m12, m21, m22);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(HtvError::NonFinite)
        }
    }

    pub(crate) const fn from_entries(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub const fn identity() -> Self {
        Self::from_entries(1.0, 0.0, 0.0, 1.0)
    }

    pub const fn zero() -> Self {
        Self::from_entries(0.0, 0.0, 0.0, 0.0)
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::from_entries(d1, 0.0, 0.0, d2)
    }

    /// Counterclockwise rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::from_entries(c, -s, s, c)
    }

    /// The rank-one matrix `u v^T`.
    pub fn outer(u: [f64; 2], v: [f64; 2]) -> Self {
        Self::from_entries(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    pub fn transpose(&self) -> Self {
        Self::from_entries(self.m11, self.m21, self.m12, self.m22)
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Entrywise (Frobenius) inner product `tr(self^T other)`.
    pub fn dot(&self, other: &Mat2) -> f64 {
        self.m11 * other.m11 + self.m12 * other.m12 + self.m21 * other.m21 + self.m22 * other.m22
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_entries(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.m11 * v[0] + self.m12 * v[1], self.m21 * v[0] + self.m22 * v[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.m11.abs().max(self.m12.abs()).max(self.m21.abs()).max(self.m22.abs())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::from_entries(self.m11 + o.m11, self.m12 + o.m12, self.m21 + o.m21, self.m22 + o.m22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::from_entries(self.m11 - o.m11, self.m12 - o.m12, self.m21 - o.m21, self.m22 - o.m22)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::from_entries(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

/// Schatten exponent. `General(p)` must satisfy `1 < p < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchattenP {
    One,
    Two,
    Inf,
    General(f64),
}

impl SchattenP {
    pub fn general(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(HtvError::InvalidParameter(format!("Schatten exponent must be >= 1, got {p}")));
        }
        Ok(if p == 1.0 {
            SchattenP::One
        } else if p == 2.0 {
            SchattenP::Two
        } else if p.is_infinite() {
            SchattenP::Inf
        } else {
            SchattenP::General(p)
        })
    }

    pub fn value(&self) -> f64 {
        match *self {
            SchattenP::One => 1.0,
            SchattenP::Two => 2.0,
            SchattenP::Inf => f64::INFINITY,
            SchattenP::General(p) => p,
        }
    }

    /// The Hölder conjugate `p*` with `1/p + 1/p* = 1`.
    pub fn conjugate(&self) -> SchattenP {
        match *self {
            SchattenP::One => SchattenP::Inf,
            SchattenP::Two => SchattenP::Two,
            SchattenP::Inf => SchattenP::One,
            SchattenP::General(p) => SchattenP::General(p / (p - 1.0)),
        }
    }

    /// `l^p` norm of a nonnegative pair with `a >= b`.
    fn pair_norm(&self, a: f64, b: f64) -> f64 {
        match *self {
            SchattenP::One => a + b,
            SchattenP::Two => a.hypot(b),
            SchattenP::Inf => a,
            SchattenP::General(p) => {
                if a == 0.0 {
                    0.0
                } else {
                    a * (1.0 + (b / a).powf(p)).powf(1.0 / p)
                }
            }
        }
    }
}

impl fmt::Display for SchattenP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenP::One => write!(f, "1"),
            SchattenP::Two => write!(f, "2"),
            SchattenP::Inf => write!(f, "inf"),
            SchattenP::General(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for SchattenP {
    type Err = HtvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(SchattenP::Inf),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| HtvError::InvalidParameter(format!("cannot parse Schatten exponent `{s}`")))?;
                SchattenP::general(p)
            }
        }
    }
}

/// Singular values `(s1, s2)` with `s1 >= s2 >= 0`.
pub fn singular_values(m: &Mat2) -> Result<(f64, f64)> {
    if !m.is_finite() {
        return Err(HtvError::NonFinite);
    }
    // M = [[e + f, g - h], [g + h, e - f]] splits into a similarity part (e, h)
    // and a reflection part (f, g); the singular values are |q ± r|.
    let e = 0.5 * (m.m11 + m.m22);
    let f = 0.5 * (m.m11 - m.m22);
    let g = 0.5 * (m.m21 + m.m12);
    let h = 0.5 * (m.m21 - m.m12);
    let q = e.hypot(h);
    let r = f.hypot(g);
    Ok((q + r, (q - r).abs()))
}

pub fn schatten_norm(m: &Mat2, p: SchattenP) -> Result<f64> {
    let (s1, s2) = singular_values(m)?;
    Ok(p.pair_norm(s1, s2))
}

/// Eigenframe of a symmetric matrix, normalised so the rotation angle lies in `[0, pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame {
    /// `R(theta)^T M R(theta)`, exactly diagonal.
    pub diagonal: Mat2,
    pub theta: f64,
}

/// Diagonalise a symmetric `m` by a rotation `R(theta)`, `theta in [0, pi/2)`.
///
/// The raw eigenvector angle is only defined modulo `pi/2` once column
/// swaps and sign flips are allowed; reducing it into `[0, pi/2)` picks the
/// representative and permutes the diagonal accordingly. Isotropic matrices
/// return `theta = 0`.
pub fn sym_eigen_frame(m: &Mat2, tol: f64) -> Result<EigenFrame> {
    if !m.is_finite() {
        return Err(HtvError::NonFinite);
    }
    let gap = (m.m12 - m.m21).abs();
    if gap > tol {
        return Err(HtvError::Asymmetric { gap, tol });
    }
    let off = 0.5 * (m.m12 + m.m21);
    let half_diff = 0.5 * (m.m11 - m.m22);
    let spread = half_diff.hypot(off);
    let scale = m.m11.abs().max(m.m22.abs()).max(off.abs());
    if spread <= 1e-14 * scale || spread == 0.0 {
        return Ok(EigenFrame { diagonal: Mat2::diag(m.m11, m.m22), theta: 0.0 });
    }
    let phi = 0.5 * off.atan2(half_diff);
    let mut theta = phi.rem_euclid(FRAC_PI_2);
    if theta >= FRAC_PI_2 {
        theta = 0.0;
    }
    let r = Mat2::rotation(theta);
    let sym = Mat2::from_entries(m.m11, off, off, m.m22);
    let d = r.transpose() * sym * r;
    Ok(EigenFrame { diagonal: Mat2::diag(d.m11, d.m22), theta })
}

/// Lower bound on `|M|_p` via `sup { M : N  :  |N|_{p*} <= 1 }` over a sampled family.
///
/// Each sample is `R(a) diag(s1, ±s2) R(b)` with `(s1, s2)` on the unit
/// `l^{p*}` sphere, so it never overshoots. Only used to cross-check
/// `schatten_norm`.
pub fn dual_norm_estimate(m: &Mat2, p: SchattenP, samples: usize) -> f64 {
    let samples = samples.max(1);
    let dual = p.conjugate();
    let angles: Vec<Mat2> = (0..samples)
        .map(|i| Mat2::rotation(2.0 * PI * i as f64 / samples as f64))
        .collect();
    let spectra: Vec<(f64, f64)> = (0..samples)
        .map(|k| {
            let t = if samples == 1 { 0.0 } else { FRAC_PI_2 * k as f64 / (samples - 1) as f64 };
            let (a, b) = (t.cos().abs(), t.sin().abs());
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            let n = dual.pair_norm(hi, lo);
            (a / n, b / n)
        })
        .collect();
    let mut best = 0.0_f64;
    for left in &angles {
        for right in &angles {
            // M : (L S R) = (L^T M R^T) : S, so only the diagonal of L^T M R^T matters.
            let core = left.transpose() * *m * right.transpose();
            for &(s1, s2) in &spectra {
                let base = core.m11 * s1;
                best = best.max(base + core.m22 * s2).max(base - core.m22 * s2);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn singular_values_of_simple_matrices() {
        let (a, b) = singular_values(&Mat2::diag(3.0, -4.0)).unwrap();
        assert_relative_eq!(a, 4.0, epsilon = 1e-14);
        assert_relative_eq!(b, 3.0, epsilon = 1e-14);
        assert_eq!(singular_values(&Mat2::identity()).unwrap(), (1.0, 1.0));
        let rank_one = Mat2::new(3.0, 0.0, 6.0, 0.0).unwrap();
        let (a, b) = singular_values(&rank_one).unwrap();
        assert_relative_eq!(a, 45f64.sqrt(), max_relative = 1e-12);
        assert!(b.abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Mat2::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
        let m = Mat2::from_entries(f64::INFINITY, 0.0, 0.0, 1.0);
        assert!(matches!(singular_values(&m), Err(HtvError::NonFinite)));
        assert!(schatten_norm(&m, SchattenP::One).is_err());
    }

    #[test]
    fn norms_of_diag() {
        let m = Mat2::diag(3.0, -4.0);
        assert_relative_eq!(schatten_norm(&m, SchattenP::One).unwrap(), 7.0);
        assert_relative_eq!(schatten_norm(&m, SchattenP::Two).unwrap(), 5.0);
        assert_relative_eq!(schatten_norm(&m, SchattenP::Inf).unwrap(), 4.0);
        let p3 = schatten_norm(&m, SchattenP::general(3.0).unwrap()).unwrap();
        assert_relative_eq!(p3, (27.0f64 + 64.0).cbrt(), max_relative = 1e-14);
    }

    #[test]
    fn frobenius_identity() {
        let m = Mat2::new(1.5, -2.0, 0.25, 7.0).unwrap();
        let fro = (m.m11 * m.m11 + m.m12 * m.m12 + m.m21 * m.m21 + m.m22 * m.m22).sqrt();
        assert_relative_eq!(schatten_norm(&m, SchattenP::Two).unwrap(), fro, max_relative = 1e-14);
    }

    #[test]
    fn parse_exponent() {
        assert_eq!("inf".parse::<SchattenP>().unwrap(), SchattenP::Inf);
        assert_eq!("1".parse::<SchattenP>().unwrap(), SchattenP::One);
        assert_eq!("2".parse::<SchattenP>().unwrap(), SchattenP::Two);
        assert_eq!("1.5".parse::<SchattenP>().unwrap(), SchattenP::General(1.5));
        assert!("0.5".parse::<SchattenP>().is_err());
        assert!("abc".parse::<SchattenP>().is_err());
        assert_eq!(SchattenP::General(3.0).conjugate(), SchattenP::General(1.5));
    }

    #[test]
    fn eigen_frame_examples() {
        let f = sym_eigen_frame(&Mat2::diag(2.0, -1.0), 1e-12).unwrap();
        assert_eq!(f.theta, 0.0);
        assert_eq!(f.diagonal, Mat2::diag(2.0, -1.0));

        let f = sym_eigen_frame(&Mat2::new(0.0, 1.0, 1.0, 0.0).unwrap(), 1e-12).unwrap();
        assert_relative_eq!(f.theta, std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        assert_relative_eq!(f.diagonal.m11.abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.diagonal.m11 + f.diagonal.m22, 0.0, epsilon = 1e-14);

        // M = R D R^T assembled numerically, then recovered.
        let angle = 0.5f64.atan();
        let r = Mat2::rotation(angle);
        let m = r * Mat2::diag(2.0, 1.0) * r.transpose();
        let f = sym_eigen_frame(&m, 1e-12).unwrap();
        assert_relative_eq!(f.theta, angle, epsilon = 1e-12);
        assert_relative_eq!(f.diagonal.m11, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.diagonal.m22, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_frame_rejects_asymmetric_and_handles_ties() {
        let m = Mat2::new(1.0, 0.5, 0.0, 1.0).unwrap();
        assert!(matches!(sym_eigen_frame(&m, 1e-9), Err(HtvError::Asymmetric { .. })));
        let f = sym_eigen_frame(&Mat2::diag(3.0, 3.0), 1e-12).unwrap();
        assert_eq!(f.theta, 0.0);
    }

    #[test]
    fn eigen_frame_wraps_into_quarter_turn() {
        // Eigenvector of the larger eigenvalue at 120 degrees.
        let r = Mat2::rotation(2.0 * PI / 3.0);
        let m = r * Mat2::diag(5.0, -1.0) * r.transpose();
        let f = sym_eigen_frame(&m, 1e-12).unwrap();
        assert!((0.0..FRAC_PI_2).contains(&f.theta));
        assert_relative_eq!(f.theta, PI / 6.0, epsilon = 1e-12);
        let back = Mat2::rotation(f.theta).transpose() * m * Mat2::rotation(f.theta);
        assert!((back - f.diagonal).max_abs() < 1e-10);
    }

    #[test]
    fn dual_estimate_examples() {
        assert!(dual_norm_estimate(&Mat2::identity(), SchattenP::One, 37) >= 1.99);
        assert_eq!(dual_norm_estimate(&Mat2::zero(), SchattenP::Two, 11), 0.0);
        assert!(dual_norm_estimate(&Mat2::diag(3.0, -4.0), SchattenP::Inf, 37) >= 3.99);
    }
}
