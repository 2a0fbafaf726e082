//! Dense nullspace and nonnegative least squares on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis (as columns) of `{x : a x = 0}`, treating singular values
/// below `rel_tol * sigma_max` as zero.
pub(crate) fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // A full set of right singular vectors needs at least n rows.
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * sigma_max;
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= cut).collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(b, 1e-14).expect("both singular vector sets requested")
}

/// Lawson-Hanson active-set solution of `min |a x - b|_2` subject to `x >= 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let tol = 10.0 * f64::EPSILON * scale * (a.nrows().max(n) as f64) * b.amax().max(1.0);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate.filter(|&j| w[j] > tol) else { break };
        passive[j] = true;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&cols);
            let zp = least_squares(&sub, b);
            let mut z = DVector::zeros(n);
            for (k, &c) in cols.iter().enumerate() {
                z[c] = zp[k];
            }
            if cols.iter().all(|&c| z[c] > 0.0) {
                x = z;
                break;
            }
            let alpha = cols
                .iter()
                .filter(|&&c| z[c] <= 0.0)
                .map(|&c| x[c] / (x[c] - z[c]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for &c in &cols {
                if x[c] <= tol {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let ns = nullspace(&a, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).amax() < 1e-14);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn nullspace_of_full_rank_is_empty() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(nullspace(&a, 1e-10).ncols(), 0);
    }

    #[test]
    fn nnls_matches_unconstrained_when_feasible() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 3.0, 5.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_clamps_negative_directions() {
        // unconstrained optimum is (-1, 2); constrained is (0, b.a2 / |a2|^2)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_with_signed_pairs() {
        let a = DMatrix::from_row_slice(3, 4, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let b = DVector::from_vec(vec![3.0, -2.0, 1.0]);
        let x = nnls(&a, &b);
        assert!((&a * &x - &b).amax() < 1e-12);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[3] - 2.0).abs() < 1e-12);
    }
}
