//! Non-negative least squares in normal-equation form.
//!
//! Solves `min 1/2 x^T Q x + c^T x` subject to `x >= 0` for symmetric positive
//! semidefinite `Q` with a Lawson-Hanson style active-set iteration. At
//! termination the passive block satisfies `Q_PP x_P = -c_P` exactly (up to
//! the linear solve), which makes `x^T (Q x + c) = 0` hold to rounding. The
//! reflection operators depend on that identity for energy conservation.

use crate::error::SolverError;
use crate::linalg;
use crate::{Matrix, Vector};

fn solve_passive(q: &Matrix, c: &Vector, passive: &[usize]) -> Vector {
    let k = passive.len();
    let qp = Matrix::from_fn(k, k, |a, b| q[(passive[a], passive[b])]);
    let rhs = Vector::from_fn(k, |a, _| -c[passive[a]]);
    match qp.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => linalg::pinv(&qp) * rhs,
    }
}

/// Non-negative minimizer of `1/2 x^T Q x + c^T x`.
pub fn nnls_normal(q: &Matrix, c: &Vector) -> Result<Vector, SolverError> {
    let k = c.len();
    assert_eq!(q.shape(), (k, k), "Q must be square and match c");
    let mut x = Vector::zeros(k);
    if k == 0 {
        return Ok(x);
    }
    let scale = c.amax().max(q.amax()).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;
    let mut passive = vec![false; k];
    let mut blocked = vec![false; k];
    let max_outer = 10 * k + 10;

    for _ in 0..max_outer {
        let w = -(q * &x + c);
        let entering = (0..k)
            .filter(|&i| !passive[i] && !blocked[i] && w[i] > tol)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if w[b] >= w[i] => Some(b),
                _ => Some(i),
            });
        let Some(j) = entering else {
            return Ok(x);
        };
        passive[j] = true;

        let mut first = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let z_p = solve_passive(q, c, &idx);
            let mut z = Vector::zeros(k);
            for (a, &i) in idx.iter().enumerate() {
                z[i] = z_p[a];
            }
            if idx.iter().all(|&i| z[i] > 0.0) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            if first && z[j] <= 0.0 {
                // degenerate entry: the new column cannot carry weight
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            let mut alpha = f64::INFINITY;
            for &i in &idx {
                if z[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            let alpha = if alpha.is_finite() { alpha.clamp(0.0, 1.0) } else { 0.0 };
            x += (&z - &x) * alpha;
            for &i in &idx {
                if x[i] <= tol.min(1e-15 * x.amax().max(1.0)) || (z[i] <= 0.0 && x[i] <= 0.0) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }
    Err(SolverError::NnlsStagnation { iterations: max_outer })
}

/// KKT residual of a candidate solution: the largest violation among
/// `x >= 0`, `Q x + c >= 0` and `x_i (Q x + c)_i = 0`.
pub fn kkt_residual(q: &Matrix, c: &Vector, x: &Vector) -> f64 {
    let w = q * x + c;
    let mut r: f64 = 0.0;
    for i in 0..x.len() {
        r = r.max((-x[i]).max(0.0));
        r = r.max((-w[i]).max(0.0));
        r = r.max((x[i] * w[i]).abs());
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_cases() {
        let q = Matrix::from_element(1, 1, 1.0);
        // G = [1], M = [1], p = -2  ->  Q = 1, c = 2 p = -4
        let x = nnls_normal(&q, &Vector::from_element(1, -4.0)).unwrap();
        assert!((x[0] - 4.0).abs() < 1e-15);
        let x = nnls_normal(&q, &Vector::from_element(1, 6.0)).unwrap();
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn empty_problem() {
        let x = nnls_normal(&Matrix::zeros(0, 0), &Vector::zeros(0)).unwrap();
        assert_eq!(x.len(), 0);
    }

    #[test]
    fn coupled_problem_drops_a_column() {
        // minimizer of the unconstrained problem has a negative entry
        let q = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let c = Vector::from_vec(vec![-4.0, 1.0]);
        let x = nnls_normal(&q, &c).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14 && x[1] == 0.0);
        assert!(kkt_residual(&q, &c, &x) < 1e-12);
    }

    #[test]
    fn duplicated_column_is_handled() {
        let q = Matrix::from_element(2, 2, 1.0);
        let c = Vector::from_vec(vec![-2.0, -2.0]);
        let x = nnls_normal(&q, &c).unwrap();
        assert!(kkt_residual(&q, &c, &x) < 1e-12);
        assert!((x.sum() - 2.0).abs() < 1e-12);
    }
}
