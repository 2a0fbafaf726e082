use serde::{Deserialize, Serialize};

use super::SmoothField;
use crate::error::{HtvError, Result};
use crate::schatten::{schatten_norm, Mat2, SchattenP};
use crate::sum::pairwise;

/// Samples on the grid `origin + (i, j) * spacing`, stored row-major (`j` outer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    origin: [f64; 2],
    spacing: f64,
    nx: usize,
    ny: usize,
    samples: Vec<f64>,
}

impl GridSample {
    pub fn new(origin: [f64; 2], spacing: f64, nx: usize, ny: usize, samples: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(HtvError::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
        }
        if nx == 0 || ny == 0 || samples.len() != nx * ny {
            return Err(HtvError::InvalidParameter(format!(
                "grid {nx}x{ny} does not match {} samples",
                samples.len()
            )));
        }
        Ok(Self { origin, spacing, nx, ny, samples })
    }

    pub fn from_fn(origin: [f64; 2], spacing: f64, nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                samples.push(f(origin[0] + i as f64 * spacing, origin[1] + j as f64 * spacing));
            }
        }
        Self::new(origin, spacing, nx, ny, samples)
    }

    pub fn sample_field<F: SmoothField + ?Sized>(f: &F, origin: [f64; 2], spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::from_fn(origin, spacing, nx, ny, |x, y| f.eval(x, y))
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.samples[j * self.nx + i]
    }

    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.spacing, self.origin[1] + j as f64 * self.spacing]
    }

    pub fn sum(&self) -> f64 {
        pairwise(&self.samples)
    }
}

/// Half-open index window `[i0, i1) x [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl Window {
    /// The window grown by `r` cells on every side.
    pub fn grow(&self, r: usize) -> Option<Self> {
        Some(Self { i0: self.i0.checked_sub(r)?, i1: self.i1 + r, j0: self.j0.checked_sub(r)?, j1: self.j1 + r })
    }

    /// The whole grid less `r` cells on every side.
    pub fn inset(u: &GridSample, r: usize) -> Option<Self> {
        let (nx, ny) = u.dims();
        (2 * r < nx && 2 * r < ny).then_some(Self { i0: r, i1: nx - r, j0: r, j1: ny - r })
    }
}

/// Offsets and weights of the discrete `(1 - |d|^2 / R^2)^3` kernel, summing to one.
fn kernel(spacing: f64, radius: f64) -> Vec<(isize, isize, f64)> {
    let reach = (radius / spacing).floor() as isize;
    let mut taps = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let r2 = ((di * di + dj * dj) as f64) * spacing * spacing / (radius * radius);
            if r2 < 1.0 {
                taps.push((di, dj, (1.0 - r2).powi(3)));
            }
        }
    }
    let total: f64 = pairwise(&taps.iter().map(|t| t.2).collect::<Vec<_>>());
    for t in &mut taps {
        t.2 /= total;
    }
    taps
}

/// Largest index offset used by the kernel of `mollify(_, radius)` on this grid.
pub(crate) fn kernel_reach(spacing: f64, radius: f64) -> usize {
    kernel(spacing, radius).iter().map(|&(di, dj, _)| di.unsigned_abs().max(dj.unsigned_abs())).max().unwrap_or(0)
}

/// Discrete convolution with the normalized polynomial bump of the given radius;
/// samples outside the grid count as zero.
pub fn mollify(u: &GridSample, radius: f64) -> Result<GridSample> {
    if !(radius >= u.spacing) || !radius.is_finite() {
        return Err(HtvError::InvalidParameter(format!(
            "mollifier radius {radius} is smaller than the grid spacing {}",
            u.spacing
        )));
    }
    let taps = kernel(u.spacing, radius);
    let (nx, ny) = (u.nx as isize, u.ny as isize);
    let mut out = vec![0.0; u.samples.len()];
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            for &(di, dj, w) in &taps {
                let (si, sj) = (i - di, j - dj);
                if (0..nx).contains(&si) && (0..ny).contains(&sj) {
                    acc += w * u.samples[(sj * nx + si) as usize];
                }
            }
            out[(j * nx + i) as usize] = acc;
        }
    }
    GridSample::new(u.origin, u.spacing, u.nx, u.ny, out)
}

fn discrete_hessian(u: &GridSample, i: usize, j: usize) -> Mat2 {
    let h2 = u.spacing * u.spacing;
    let g = |a: usize, b: usize| u.get(a, b);
    let xx = (g(i + 1, j) - 2.0 * g(i, j) + g(i - 1, j)) / h2;
    let yy = (g(i, j + 1) - 2.0 * g(i, j) + g(i, j - 1)) / h2;
    let xy = (g(i + 1, j + 1) - g(i + 1, j - 1) - g(i - 1, j + 1) + g(i - 1, j - 1)) / (4.0 * h2);
    Mat2::from_entries(xx, xy, xy, yy)
}

/// `sum |H u|_p h^2` over the window, with central-difference Hessians.
pub fn discrete_hessian_energy(u: &GridSample, window: Window, p: SchattenP) -> Result<f64> {
    let ok = window.i0 >= 1 && window.j0 >= 1 && window.i1 < u.nx && window.j1 < u.ny;
    if !ok || window.i0 >= window.i1 || window.j0 >= window.j1 {
        return Err(HtvError::InvalidParameter(format!(
            "window {window:?} must be non-empty and one cell away from the border of a {}x{} grid",
            u.nx, u.ny
        )));
    }
    let mut terms = Vec::with_capacity((window.i1 - window.i0) * (window.j1 - window.j0));
    for j in window.j0..window.j1 {
        for i in window.i0..window.i1 {
            terms.push(schatten_norm(&discrete_hessian(u, i, j), p)?);
        }
    }
    Ok(pairwise(&terms) * u.spacing * u.spacing)
}

/// Energy of `mollify(u, radius)` on `window` against the energy of `u` on
/// `window` grown by the kernel reach. Returns `(mollified, original)`.
pub fn mollified_energy_pair(u: &GridSample, radius: f64, window: Window, p: SchattenP) -> Result<(f64, f64)> {
    let reach = kernel_reach(u.spacing, radius);
    let big = window
        .grow(reach)
        .filter(|w| w.i0 >= 1 && w.j0 >= 1 && w.i1 < u.nx && w.j1 < u.ny)
        .ok_or_else(|| HtvError::InvalidParameter("window too close to the border for this radius".into()))?;
    let m = mollify(u, radius)?;
    Ok((discrete_hessian_energy(&m, window, p)?, discrete_hessian_energy(u, big, p)?))
}

/// Grid version of [`super::ReflectedExtension`]: the input's first column
/// must lie on `x = 0`; columns are added for `x = -h, -2h, ...` while `-2x`
/// stays on the grid.
pub fn extend_reflection_grid(u: &GridSample) -> Result<GridSample> {
    if u.origin[0] != 0.0 {
        return Err(HtvError::InvalidParameter(format!(
            "grid must start at x = 0, starts at {}",
            u.origin[0]
        )));
    }
    let m = (u.nx - 1) / 2;
    let nx = u.nx + m;
    let mut samples = Vec::with_capacity(nx * u.ny);
    for j in 0..u.ny {
        for c in 0..nx {
            let v = if c >= m {
                u.get(c - m, j)
            } else {
                let k = m - c;
                3.0 * u.get(k, j) - 2.0 * u.get(2 * k, j)
            };
            samples.push(v);
        }
    }
    GridSample::new([-(m as f64) * u.spacing, u.origin[1]], u.spacing, nx, u.ny, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BuiltinField;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_is_fixed_in_the_interior() {
        let u = GridSample::from_fn([0.0, 0.0], 0.05, 21, 21, |_, _| 2.5).unwrap();
        let m = mollify(&u, 0.12).unwrap();
        let reach = kernel_reach(0.05, 0.12);
        for j in reach..21 - reach {
            for i in reach..21 - reach {
                assert!((m.get(i, j) - 2.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn spike_spreads_with_same_mass() {
        let mut s = vec![0.0; 31 * 31];
        s[15 * 31 + 15] = 1.0;
        let u = GridSample::new([0.0, 0.0], 0.1, 31, 31, s).unwrap();
        let m = mollify(&u, 0.45).unwrap();
        assert!((m.sum() - 1.0).abs() < 1e-10);
        assert!(m.get(15, 15) < 1.0 && m.get(16, 15) > 0.0);
    }

    #[test]
    fn radius_below_spacing_rejected() {
        let u = GridSample::from_fn([0.0, 0.0], 0.1, 5, 5, |x, _| x).unwrap();
        assert!(mollify(&u, 0.05).is_err());
        assert!(GridSample::new([0.0, 0.0], 0.0, 1, 1, vec![0.0]).is_err());
        assert!(GridSample::new([0.0, 0.0], 1.0, 2, 2, vec![0.0]).is_err());
    }

    #[test]
    fn quadratic_energy_inequality() {
        let f = BuiltinField::isotropic_quadratic();
        let u = GridSample::sample_field(&f, [0.0, 0.0], 1.0 / 40.0, 41, 41).unwrap();
        let w = Window::inset(&u, 8).unwrap();
        let (lhs, rhs) = mollified_energy_pair(&u, 0.1, w, SchattenP::One).unwrap();
        assert!(lhs <= rhs + 1e-6, "{lhs} > {rhs}");
        // central differences are exact on quadratics
        let full = discrete_hessian_energy(&u, Window::inset(&u, 1).unwrap(), SchattenP::One).unwrap();
        assert!((full - 2.0 * (39.0f64 / 40.0).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn random_energy_inequality() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.gen_range(20..30);
            let s: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = GridSample::new([0.0, 0.0], 0.1, n, n, s).unwrap();
            let r = rng.gen_range(0.1..0.35);
            let w = Window::inset(&u, kernel_reach(0.1, r) + 2).unwrap();
            for p in [SchattenP::One, SchattenP::Two, SchattenP::Inf] {
                let (lhs, rhs) = mollified_energy_pair(&u, r, w, p).unwrap();
                assert!(lhs <= rhs + 1e-6, "{lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn grid_reflection_reproduces_affine() {
        let u = GridSample::from_fn([0.0, 0.0], 0.1, 11, 6, |x, y| 2.0 * x - y + 0.5).unwrap();
        let e = extend_reflection_grid(&u).unwrap();
        assert_eq!(e.dims(), (16, 6));
        assert_eq!(e.origin()[0], -0.5);
        for j in 0..6 {
            for i in 0..16 {
                let [x, y] = e.position(i, j);
                assert!((e.get(i, j) - (2.0 * x - y + 0.5)).abs() < 1e-12);
            }
        }
        let shifted = GridSample::from_fn([0.1, 0.0], 0.1, 3, 3, |_, _| 1.0).unwrap();
        assert!(extend_reflection_grid(&shifted).is_err());
    }
}
