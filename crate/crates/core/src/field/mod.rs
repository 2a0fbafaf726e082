//! Smooth scalar fields with analytic derivatives, and the midpoint-rule HTV oracle.

mod extension;
mod grid;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{HtvError, Result};
use crate::schatten::{schatten_norm, Mat2, SchattenP};
use crate::sum::pairwise;

pub use extension::{ReflectedExtension, Swapped};
pub use grid::{discrete_hessian_energy, extend_reflection_grid, mollified_energy_pair, mollify, GridSample, Window};
pub(crate) use grid::kernel_reach;

/// Scalar field on (a subset of) the plane with exact first and second derivatives.
pub trait SmoothField: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> [f64; 2];
    /// Symmetric Hessian.
    fn hess(&self, x: f64, y: f64) -> Mat2;
    fn descriptor(&self) -> String;

    fn contains(&self, _x: f64, _y: f64) -> bool {
        true
    }

    fn checked_eval(&self, x: f64, y: f64) -> Result<f64> {
        self.ensure_contains(x, y)?;
        Ok(self.eval(x, y))
    }

    fn checked_grad(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        self.ensure_contains(x, y)?;
        Ok(self.grad(x, y))
    }

    fn checked_hess(&self, x: f64, y: f64) -> Result<Mat2> {
        self.ensure_contains(x, y)?;
        Ok(self.hess(x, y))
    }

    fn ensure_contains(&self, x: f64, y: f64) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(HtvError::OutsideDomain { x, y })
        }
    }
}

impl<F: SmoothField + ?Sized> SmoothField for &F {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (**self).eval(x, y)
    }
    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        (**self).grad(x, y)
    }
    fn hess(&self, x: f64, y: f64) -> Mat2 {
        (**self).hess(x, y)
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn contains(&self, x: f64, y: f64) -> bool {
        (**self).contains(x, y)
    }
}

impl<F: SmoothField + ?Sized> SmoothField for Box<F> {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (**self).eval(x, y)
    }
    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        (**self).grad(x, y)
    }
    fn hess(&self, x: f64, y: f64) -> Mat2 {
        (**self).hess(x, y)
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn contains(&self, x: f64, y: f64) -> bool {
        (**self).contains(x, y)
    }
}

/// The built-in test fields.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinField {
    /// `1/2 x^T A x + b.x + c`, `A` symmetric.
    Quadratic { a: Mat2, b: [f64; 2], c: f64 },
    /// `1/2 (l1 u^2 + l2 w^2)` in coordinates rotated by `theta`.
    RotatedQuadratic { l1: f64, l2: f64, theta: f64 },
    /// `exp(-|x - center|^2 / (2 sigma^2))`.
    GaussianBump { sigma: f64, center: [f64; 2] },
    /// `sin(omega x) sin(omega y)`.
    ProductSine { omega: f64 },
}

impl BuiltinField {
    /// `(x^2 + y^2) / 2`.
    pub fn isotropic_quadratic() -> Self {
        BuiltinField::Quadratic { a: Mat2::identity(), b: [0.0; 2], c: 0.0 }
    }

    pub fn affine(b: [f64; 2], c: f64) -> Self {
        BuiltinField::Quadratic { a: Mat2::zero(), b, c }
    }
}

fn expect_params(name: &str, params: &[f64], allowed: &[usize]) -> Result<()> {
    if !allowed.contains(&params.len()) {
        return Err(HtvError::InvalidParameter(format!(
            "field `{name}` takes {allowed:?} parameters, got {}",
            params.len()
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(HtvError::InvalidParameter(format!("field `{name}` has non-finite parameters")));
    }
    Ok(())
}

/// Builds a named field. Names accept `-` or `_` as separator.
///
/// * `quadratic`: `a11,a12,a22[,b1,b2[,c]]`
/// * `rotated-quadratic`: `l1,l2,theta` (radians)
/// * `gaussian-bump`: `sigma[,cx,cy]` (centre defaults to `(1/2, 1/2)`)
/// * `product-sine`: `omega`
pub fn builtin_field(name: &str, params: &[f64]) -> Result<BuiltinField> {
    let key = name.trim().to_ascii_lowercase().replace('_', "-");
    match key.as_str() {
        "quadratic" => {
            expect_params(name, params, &[3, 5, 6])?;
            let a = Mat2::new(params[0], params[1], params[1], params[2])?;
            let b = if params.len() >= 5 { [params[3], params[4]] } else { [0.0; 2] };
            let c = params.get(5).copied().unwrap_or(0.0);
            Ok(BuiltinField::Quadratic { a, b, c })
        }
        "rotated-quadratic" => {
            expect_params(name, params, &[3])?;
            Ok(BuiltinField::RotatedQuadratic { l1: params[0], l2: params[1], theta: params[2] })
        }
        "gaussian-bump" => {
            expect_params(name, params, &[1, 3])?;
            if params[0] <= 0.0 {
                return Err(HtvError::InvalidParameter("gaussian-bump needs sigma > 0".into()));
            }
            let center = if params.len() == 3 { [params[1], params[2]] } else { [0.5, 0.5] };
            Ok(BuiltinField::GaussianBump { sigma: params[0], center })
        }
        "product-sine" => {
            expect_params(name, params, &[1])?;
            Ok(BuiltinField::ProductSine { omega: params[0] })
        }
        _ => Err(HtvError::UnknownField(name.to_string())),
    }
}

impl FromStr for BuiltinField {
    type Err = HtvError;

    /// `name:p1,p2,...`; `quadratic:iso` is `(x^2 + y^2) / 2`.
    fn from_str(desc: &str) -> Result<Self> {
        let (name, rest) = desc.split_once(':').unwrap_or((desc, ""));
        if name.trim().eq_ignore_ascii_case("quadratic") && rest.trim().eq_ignore_ascii_case("iso") {
            return Ok(BuiltinField::isotropic_quadratic());
        }
        let params = rest
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| HtvError::InvalidParameter(format!("bad field parameter `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        builtin_field(name, &params)
    }
}

impl fmt::Display for BuiltinField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinField::Quadratic { a, b, c } => {
                write!(f, "quadratic:{},{},{},{},{},{}", a.m11, a.m12, a.m22, b[0], b[1], c)
            }
            BuiltinField::RotatedQuadratic { l1, l2, theta } => write!(f, "rotated-quadratic:{l1},{l2},{theta}"),
            BuiltinField::GaussianBump { sigma, center } => {
                write!(f, "gaussian-bump:{sigma},{},{}", center[0], center[1])
            }
            BuiltinField::ProductSine { omega } => write!(f, "product-sine:{omega}"),
        }
    }
}

impl SmoothField for BuiltinField {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            BuiltinField::Quadratic { a, b, c } => {
                0.5 * (a.m11 * x * x + (a.m12 + a.m21) * x * y + a.m22 * y * y) + b[0] * x + b[1] * y + c
            }
            BuiltinField::RotatedQuadratic { l1, l2, theta } => {
                let (s, co) = theta.sin_cos();
                let u = co * x + s * y;
                let w = -s * x + co * y;
                0.5 * (l1 * u * u + l2 * w * w)
            }
            BuiltinField::GaussianBump { sigma, center } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
            BuiltinField::ProductSine { omega } => (omega * x).sin() * (omega * y).sin(),
        }
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            BuiltinField::Quadratic { a, b, .. } => {
                let sym = 0.5 * (a.m12 + a.m21);
                [a.m11 * x + sym * y + b[0], sym * x + a.m22 * y + b[1]]
            }
            BuiltinField::RotatedQuadratic { .. } => {
                let h = self.hess(x, y);
                h.apply([x, y])
            }
            BuiltinField::GaussianBump { sigma, center } => {
                let f = self.eval(x, y);
                let s2 = sigma * sigma;
                [-(x - center[0]) / s2 * f, -(y - center[1]) / s2 * f]
            }
            BuiltinField::ProductSine { omega } => {
                let (sx, cx) = (omega * x).sin_cos();
                let (sy, cy) = (omega * y).sin_cos();
                [omega * cx * sy, omega * sx * cy]
            }
        }
    }

    fn hess(&self, x: f64, y: f64) -> Mat2 {
        match *self {
            BuiltinField::Quadratic { a, .. } => {
                let sym = 0.5 * (a.m12 + a.m21);
                Mat2::from_entries(a.m11, sym, sym, a.m22)
            }
            BuiltinField::RotatedQuadratic { l1, l2, theta } => {
                let (s, c) = theta.sin_cos();
                let off = (l1 - l2) * s * c;
                Mat2::from_entries(l1 * c * c + l2 * s * s, off, off, l1 * s * s + l2 * c * c)
            }
            BuiltinField::GaussianBump { sigma, center } => {
                let f = self.eval(x, y);
                let s2 = sigma * sigma;
                let (dx, dy) = (x - center[0], y - center[1]);
                let k = f / (s2 * s2);
                Mat2::from_entries(k * (dx * dx - s2), k * dx * dy, k * dx * dy, k * (dy * dy - s2))
            }
            BuiltinField::ProductSine { omega } => {
                let (sx, cx) = (omega * x).sin_cos();
                let (sy, cy) = (omega * y).sin_cos();
                let w2 = omega * omega;
                Mat2::from_entries(-w2 * sx * sy, w2 * cx * cy, w2 * cx * cy, -w2 * sx * sy)
            }
        }
    }

    fn descriptor(&self) -> String {
        self.to_string()
    }
}

/// Midpoint-rule approximation of `int_{(0,1)^2} |hess f|_p`.
///
/// Rows are integrated in parallel and reduced pairwise in row order, so the
/// result does not depend on the number of worker threads.
pub fn htv_quadrature<F: SmoothField + ?Sized>(f: &F, p: SchattenP, resolution: usize) -> Result<f64> {
    if resolution < 2 {
        return Err(HtvError::InvalidParameter(format!("resolution must be >= 2, got {resolution}")));
    }
    let h = 1.0 / resolution as f64;
    let rows: Vec<f64> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let y = (j as f64 + 0.5) * h;
            let cells = (0..resolution)
                .map(|i| schatten_norm(&f.hess((i as f64 + 0.5) * h, y), p))
                .collect::<Result<Vec<f64>>>()?;
            Ok(pairwise(&cells))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise(&rows) * h * h)
}

pub const DEFAULT_QUADRATURE_RESOLUTION: usize = 512;
