//! Small dense linear-algebra helpers on top of nalgebra.

use crate::{Matrix, Vector};

/// Relative singular-value cutoff used for every pseudoinverse in the crate.
pub const PINV_RCOND: f64 = 1e-12;

/// Moore-Penrose pseudoinverse with singular values below
/// `PINV_RCOND * sigma_max` treated as zero.
pub fn pinv(a: &Matrix) -> Matrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = PINV_RCOND * sigma_max;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Solves a square system by LU, falling back to the pseudoinverse when the
/// factorization is singular or produces non-finite values.
pub fn solve_square(a: &Matrix, b: &Vector) -> Vector {
    if a.nrows() == 0 {
        return Vector::zeros(0);
    }
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    pinv(a) * b
}

/// Returns `true` when `a` is symmetric to within `rel_tol` relative to its
/// largest entry.
pub fn is_symmetric(a: &Matrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() <= rel_tol * scale
}

/// Central finite-difference gradient of a scalar function.
pub fn fd_gradient(f: &dyn Fn(&Vector) -> f64, x: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central finite-difference Jacobian of a vector field, symmetrized.
/// Used as the Hessian of a scalar function when only its gradient is known.
pub fn fd_hessian(grad: &dyn Fn(&Vector) -> Vector, x: &Vector, step: f64) -> Matrix {
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut xp = x.clone();
    for i in 0..n {
        let h = step * x[i].abs().max(1.0);
        let xi = x[i];
        xp[i] = xi + h;
        let gp = grad(&xp);
        xp[i] = xi - h;
        let gm = grad(&xp);
        xp[i] = xi;
        hess.set_column(i, &((gp - gm) / (2.0 * h)));
    }
    (&hess + hess.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_one() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pinv(&a);
        let expected = Matrix::from_element(2, 2, 0.25);
        assert!((p - expected).amax() < 1e-14);
    }

    #[test]
    fn pinv_of_empty() {
        let a = Matrix::zeros(3, 0);
        assert_eq!(pinv(&a).shape(), (0, 3));
    }

    #[test]
    fn solve_square_falls_back_on_singular() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![2.0, 0.0]);
        let x = solve_square(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-14 && x[1].abs() < 1e-14);
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let grad = |x: &Vector| Vector::from_vec(vec![2.0 * x[0] + x[1], x[0] + 4.0 * x[1]]);
        let h = fd_hessian(&grad, &Vector::from_vec(vec![0.3, -1.2]), 1e-6);
        let expected = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]);
        assert!((h - expected).amax() < 1e-8);
    }
}
