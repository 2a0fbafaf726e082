use super::SmoothField;
use crate::schatten::Mat2;

/// Extension across `x = 0` of a field given on `x >= 0`:
/// `f(x, y)` for `x >= 0` and `3 f(-x, y) - 2 f(-2x, y)` for `x < 0`.
///
/// The result is C^1 across the line and defined for `-1/2 < x <= 1`.
#[derive(Debug, Clone)]
pub struct ReflectedExtension<F> {
    inner: F,
}

impl<F: SmoothField> ReflectedExtension<F> {
    pub fn new(inner: F) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: SmoothField> SmoothField for ReflectedExtension<F> {
    fn eval(&self, x: f64, y: f64) -> f64 {
        if x >= 0.0 {
            self.inner.eval(x, y)
        } else {
            3.0 * self.inner.eval(-x, y) - 2.0 * self.inner.eval(-2.0 * x, y)
        }
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        if x >= 0.0 {
            return self.inner.grad(x, y);
        }
        let g1 = self.inner.grad(-x, y);
        let g2 = self.inner.grad(-2.0 * x, y);
        [-3.0 * g1[0] + 4.0 * g2[0], 3.0 * g1[1] - 2.0 * g2[1]]
    }

    fn hess(&self, x: f64, y: f64) -> Mat2 {
        if x >= 0.0 {
            return self.inner.hess(x, y);
        }
        let h1 = self.inner.hess(-x, y);
        let h2 = self.inner.hess(-2.0 * x, y);
        let xy = -3.0 * h1.m12 + 4.0 * h2.m12;
        Mat2::from_entries(3.0 * h1.m11 - 8.0 * h2.m11, xy, xy, 3.0 * h1.m22 - 2.0 * h2.m22)
    }

    fn descriptor(&self) -> String {
        format!("reflect-x({})", self.inner.descriptor())
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x > -0.5 && x <= 1.0 && self.inner.contains(x.abs(), y) && self.inner.contains((-2.0 * x).max(x), y)
    }
}

/// `(x, y) -> f(y, x)`.
#[derive(Debug, Clone)]
pub struct Swapped<F> {
    inner: F,
}

impl<F: SmoothField> Swapped<F> {
    pub fn new(inner: F) -> Self {
        Self { inner }
    }
}

impl<F: SmoothField> SmoothField for Swapped<F> {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.inner.eval(y, x)
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let g = self.inner.grad(y, x);
        [g[1], g[0]]
    }

    fn hess(&self, x: f64, y: f64) -> Mat2 {
        let h = self.inner.hess(y, x);
        Mat2::from_entries(h.m22, h.m21, h.m12, h.m11)
    }

    fn descriptor(&self) -> String {
        format!("swap({})", self.inner.descriptor())
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.inner.contains(y, x)
    }
}
