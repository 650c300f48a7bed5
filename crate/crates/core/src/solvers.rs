//! Constrained nonlinear solves shared by the integrators.
//!
//! Every implicit step in the crate reduces to a small mixed complementarity
//! problem: find `x`, `lambda >= 0`, `nu` with
//!
//! ```text
//! r(x, lambda, nu) = 0,   f(x) = 0,   0 <= lambda  _|_  g(x) >= 0
//! ```
//!
//! [`solve_complementarity`] handles all of them with an outer loop over
//! working sets `W` (constraints imposed as equalities) and a damped Newton
//! solve inside. Pivoting drops the most negative multiplier or adds the most
//! violated constraint; if a set repeats or Newton fails, the remaining sets
//! are enumerated by size and then lexicographically.

use std::collections::HashSet;

use crate::cones::{projected_active_gradient, IndexSet, Tolerances};
use crate::error::SolverError;
use crate::linalg;
use crate::quadrature::{Quadrature, Rule};
use crate::sysmodel::MechanicalSystem;
use crate::{Matrix, Vector};

pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const MAX_HALVINGS: usize = 30;
/// Upper bound on working sets visited by exhaustive enumeration.
pub const MAX_WORKING_SETS: usize = 4096;
pub const MAX_BISECTIONS: usize = 200;

/// A mixed complementarity problem with `k` inequality and `m` equality
/// constraints in the unknown `x`.
pub trait KktSystem {
    fn dim(&self) -> usize;
    fn num_ineq(&self) -> usize;
    fn num_eq(&self) -> usize;
    /// Stationarity residual `r(x, lambda, nu)`; `lambda` has length `k`.
    fn stationarity(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Vector;
    /// `dr/dx` at fixed multipliers.
    fn jacobian_x(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Matrix;
    /// `dr/dlambda` as an `n x k` matrix.
    fn lambda_matrix(&self, x: &Vector) -> Matrix;
    /// `dr/dnu` as an `n x m` matrix.
    fn nu_matrix(&self, x: &Vector) -> Matrix;
    fn ineq_values(&self, x: &Vector) -> Vector;
    /// Gradients of the inequality functions (in `x`) as columns.
    fn ineq_gradients(&self, x: &Vector) -> Matrix;
    fn eq_values(&self, x: &Vector) -> Vector;
    fn eq_gradients(&self, x: &Vector) -> Matrix;
    /// Magnitude the stationarity residual is measured against; convergence
    /// requires `|F| <= eps_solver * max(1, residual_scale())`, or
    /// `|F| <= residual_floor()` when that is larger.
    fn residual_scale(&self) -> f64 {
        1.0
    }
    /// Residual level below which rounding dominates; Newton stops there.
    fn residual_floor(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementaritySolution {
    pub x: Vector,
    /// One entry per inequality of the problem; zero outside the working set.
    pub lambda: Vector,
    pub nu: Vector,
    pub residual: f64,
    /// Working set (problem-local indices) at the solution.
    pub working: IndexSet,
}

struct NewtonOutcome {
    x: Vector,
    lambda_w: Vector,
    nu: Vector,
    residual: f64,
}

fn assemble(prob: &dyn KktSystem, w: &[usize], x: &Vector, lam_w: &Vector, nu: &Vector) -> (Vector, Vector) {
    let k = prob.num_ineq();
    let mut lambda = Vector::zeros(k);
    for (a, &i) in w.iter().enumerate() {
        lambda[i] = lam_w[a];
    }
    let r = prob.stationarity(x, &lambda, nu);
    let g = prob.ineq_values(x);
    let f = prob.eq_values(x);
    let n = prob.dim();
    let mut out = Vector::zeros(n + w.len() + f.len());
    out.rows_mut(0, n).copy_from(&r);
    for (a, &i) in w.iter().enumerate() {
        out[n + a] = g[i];
    }
    out.rows_mut(n + w.len(), f.len()).copy_from(&f);
    (out, lambda)
}

fn newton(prob: &dyn KktSystem, w: &[usize], x0: &Vector, tol: f64) -> Result<NewtonOutcome, SolverError> {
    let n = prob.dim();
    let m = prob.num_eq();
    let kw = w.len();
    let size = n + kw + m;
    let mut x = x0.clone();
    let mut lam_w = Vector::zeros(kw);
    let mut nu = Vector::zeros(m);
    let (mut res, mut lambda) = assemble(prob, w, &x, &lam_w, &nu);
    let mut norm = res.amax();
    let target = (tol * prob.residual_scale().max(1.0)).max(prob.residual_floor());

    for _ in 0..MAX_NEWTON_ITERATIONS {
        if !norm.is_finite() {
            break;
        }
        let mut jac = Matrix::zeros(size, size);
        jac.view_mut((0, 0), (n, n)).copy_from(&prob.jacobian_x(&x, &lambda, &nu));
        let lm = prob.lambda_matrix(&x);
        let gg = prob.ineq_gradients(&x);
        for (a, &i) in w.iter().enumerate() {
            jac.view_mut((0, n + a), (n, 1)).copy_from(&lm.column(i));
            jac.view_mut((n + a, 0), (1, n)).copy_from(&gg.column(i).transpose());
        }
        if m > 0 {
            jac.view_mut((0, n + kw), (n, m)).copy_from(&prob.nu_matrix(&x));
            jac.view_mut((n + kw, 0), (m, n)).copy_from(&prob.eq_gradients(&x).transpose());
        }
        let delta = linalg::solve_square(&jac, &(-&res));
        if norm <= target {
            // one polishing step, kept only if it does not hurt
            let xt = &x + delta.rows(0, n);
            let lt = &lam_w + delta.rows(n, kw);
            let nt = &nu + delta.rows(n + kw, m);
            let nt_norm = assemble(prob, w, &xt, &lt, &nt).0.amax();
            if nt_norm <= norm {
                x = xt;
                lam_w = lt;
                nu = nt;
                norm = nt_norm;
            }
            return Ok(NewtonOutcome { x, lambda_w: lam_w, nu, residual: norm });
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let xt = &x + delta.rows(0, n) * t;
            let lt = &lam_w + delta.rows(n, kw) * t;
            let nt = &nu + delta.rows(n + kw, m) * t;
            let (rt, lamt) = assemble(prob, w, &xt, &lt, &nt);
            let nt_norm = rt.amax();
            if nt_norm.is_finite() && nt_norm < norm {
                x = xt;
                lam_w = lt;
                nu = nt;
                res = rt;
                lambda = lamt;
                norm = nt_norm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if norm <= target {
                return Ok(NewtonOutcome { x, lambda_w: lam_w, nu, residual: norm });
            }
            break;
        }
    }
    if norm <= target {
        return Ok(NewtonOutcome { x, lambda_w: lam_w, nu, residual: norm });
    }
    Err(SolverError::NewtonDiverged {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: norm,
    })
}

enum Verdict {
    Accept(ComplementaritySolution),
    Drop(usize),
    Add(usize),
}

fn judge(prob: &dyn KktSystem, w: &[usize], out: NewtonOutcome, tol: &Tolerances) -> Verdict {
    let k = prob.num_ineq();
    let lam_floor = -tol.eps_solver;
    let worst_lambda = w
        .iter()
        .enumerate()
        .filter(|(a, _)| out.lambda_w[*a] < lam_floor)
        .min_by(|a, b| out.lambda_w[a.0].total_cmp(&out.lambda_w[b.0]).then(a.1.cmp(b.1)));
    if let Some((_, &i)) = worst_lambda {
        return Verdict::Drop(i);
    }
    let g = prob.ineq_values(&out.x);
    let worst_g = (0..k)
        .filter(|i| !w.contains(i) && g[*i] < -tol.eps_active)
        .min_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
    if let Some(i) = worst_g {
        return Verdict::Add(i);
    }
    let mut lambda = Vector::zeros(k);
    for (a, &i) in w.iter().enumerate() {
        lambda[i] = out.lambda_w[a].max(0.0);
    }
    Verdict::Accept(ComplementaritySolution {
        x: out.x,
        lambda,
        nu: out.nu,
        residual: out.residual,
        working: IndexSet::from_indices(w.iter().copied()),
    })
}

/// Subsets of `0..k` ordered by size, then lexicographically.
fn enumerate_subsets(k: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, size, cur, out, cap);
            cur.pop();
            if out.len() >= cap {
                return;
            }
        }
    }
    let mut out = Vec::new();
    for size in 0..=k {
        rec(0, k, size, &mut Vec::new(), &mut out, cap);
    }
    out
}

/// Active-set Newton solve of a mixed complementarity problem, starting from
/// working set `w0` and initial guess `x0`.
pub fn solve_complementarity(
    prob: &dyn KktSystem,
    x0: &Vector,
    w0: &IndexSet,
    tol: &Tolerances,
) -> Result<ComplementaritySolution, SolverError> {
    let k = prob.num_ineq();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut w: Vec<usize> = w0.as_slice().to_vec();
    let mut last_err: Option<SolverError> = None;

    while visited.insert(w.clone()) {
        match newton(prob, &w, x0, tol.eps_solver) {
            Ok(out) => match judge(prob, &w, out, tol) {
                Verdict::Accept(sol) => return Ok(sol),
                Verdict::Drop(i) => w.retain(|&j| j != i),
                Verdict::Add(i) => {
                    w.push(i);
                    w.sort_unstable();
                }
            },
            Err(e) => {
                last_err = Some(e);
                break;
            }
        }
    }

    for cand in enumerate_subsets(k, MAX_WORKING_SETS) {
        if visited.contains(&cand) {
            continue;
        }
        visited.insert(cand.clone());
        match newton(prob, &cand, x0, tol.eps_solver) {
            Ok(out) => {
                if let Verdict::Accept(sol) = judge(prob, &cand, out, tol) {
                    return Ok(sol);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match last_err {
        Some(e @ SolverError::NewtonDiverged { .. }) if k == 0 => Err(e),
        _ => Err(SolverError::Infeasible { tried: visited.len() }),
    }
}

/// Position update of the generalized integrator:
///
/// `D1 L_d(q, x) + p + N_S(q) lambda + F(q) nu = 0`, `f(x) = 0`,
/// `0 <= lambda _|_ g_S(x) >= 0`.
///
/// Constraint gradients are frozen at `q`, constraint values are taken at `x`.
pub struct PositionUpdate<'a> {
    sys: &'a MechanicalSystem,
    quad: Quadrature,
    q: &'a Vector,
    p: &'a Vector,
    set: Vec<usize>,
    normals: Matrix,
    eq_normals: Matrix,
}

impl<'a> PositionUpdate<'a> {
    pub fn new(sys: &'a MechanicalSystem, quad: Quadrature, q: &'a Vector, p: &'a Vector, s: &IndexSet) -> Self {
        Self {
            sys,
            quad,
            q,
            p,
            set: s.as_slice().to_vec(),
            normals: projected_active_gradient(sys, q, s),
            eq_normals: sys.equality_gradients(q),
        }
    }
}

impl KktSystem for PositionUpdate<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn num_ineq(&self) -> usize {
        self.set.len()
    }
    fn num_eq(&self) -> usize {
        self.sys.num_equalities()
    }
    fn stationarity(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Vector {
        self.quad.d1(self.sys, self.q, x) + self.p + &self.normals * lambda + &self.eq_normals * nu
    }
    fn jacobian_x(&self, x: &Vector, _: &Vector, _: &Vector) -> Matrix {
        self.quad.d1_jacobian(self.sys, self.q, x)
    }
    fn lambda_matrix(&self, _: &Vector) -> Matrix {
        self.normals.clone()
    }
    fn nu_matrix(&self, _: &Vector) -> Matrix {
        self.eq_normals.clone()
    }
    fn ineq_values(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.set.len(), self.set.iter().map(|&i| self.sys.inequalities()[i].eval(x)))
    }
    fn ineq_gradients(&self, x: &Vector) -> Matrix {
        let mut out = Matrix::zeros(self.sys.dim(), self.set.len());
        for (c, &i) in self.set.iter().enumerate() {
            out.set_column(c, &self.sys.inequalities()[i].grad(x));
        }
        out
    }
    fn eq_values(&self, x: &Vector) -> Vector {
        self.sys.equality_values(x)
    }
    fn eq_gradients(&self, x: &Vector) -> Matrix {
        self.sys.equality_gradients(x)
    }
    fn residual_scale(&self) -> f64 {
        self.p.amax()
    }
    fn residual_floor(&self) -> f64 {
        rounding_floor(self.sys, self.q, self.p, self.quad.h)
    }
}

/// About a thousand ulps of the largest term in `D1 L_d(q, x) + p`.
fn rounding_floor(sys: &MechanicalSystem, q: &Vector, p: &Vector, h: f64) -> f64 {
    1e3 * f64::EPSILON * ((sys.mass() * q).amax() / h + p.amax())
}

/// Solution of the position update with multipliers indexed like `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSolution {
    pub q_next: Vector,
    pub lambda: Vector,
    pub nu: Vector,
    pub residual: f64,
}

pub fn position_update_solve(
    sys: &MechanicalSystem,
    quad: Quadrature,
    q: &Vector,
    p_plus: &Vector,
    s: &IndexSet,
    tol: &Tolerances,
) -> Result<PositionSolution, SolverError> {
    if s.is_empty() && !sys.has_equalities() {
        let x = forward_predictor(sys, quad, q, p_plus, tol)?;
        return Ok(PositionSolution {
            q_next: x,
            lambda: Vector::zeros(0),
            nu: Vector::zeros(0),
            residual: 0.0,
        });
    }
    let prob = PositionUpdate::new(sys, quad, q, p_plus, s);
    let x0 = forward_predictor(sys, quad, q, p_plus, tol).unwrap_or_else(|_| q.clone());
    let sol = solve_complementarity(&prob, &x0, &IndexSet::all(s.len()), tol)?;
    Ok(PositionSolution {
        q_next: sol.x,
        lambda: sol.lambda,
        nu: sol.nu,
        residual: sol.residual,
    })
}

/// Momentum update: `p' = D2 L_d(q_old, q_new) + N_S(q_new) mu + F(q_new) xi`
/// with `mu, xi` chosen so that `p'` is `M^-1`-orthogonal to every column.
/// Returns `(p', mu, xi)`.
pub fn momentum_update_solve(
    sys: &MechanicalSystem,
    quad: Quadrature,
    q_old: &Vector,
    q_new: &Vector,
    s: &IndexSet,
) -> (Vector, Vector, Vector) {
    let d2 = quad.d2(sys, q_old, q_new);
    let g = sys
        .constraint_gradient_matrix(q_new, s, crate::sysmodel::ConstraintKind::Inequality)
        .expect("smooth set indices are valid");
    let f = sys.equality_gradients(q_new);
    let (ks, kf) = (g.ncols(), f.ncols());
    if ks + kf == 0 {
        return (d2, Vector::zeros(0), Vector::zeros(0));
    }
    let mut c = Matrix::zeros(sys.dim(), ks + kf);
    c.view_mut((0, 0), (sys.dim(), ks)).copy_from(&g);
    c.view_mut((0, ks), (sys.dim(), kf)).copy_from(&f);
    let minv_c = sys.mass_inv() * &c;
    let gram = c.transpose() * &minv_c;
    let rhs = -(minv_c.transpose() * &d2);
    let coef = match gram.clone().cholesky() {
        Some(ch) if gram_well_conditioned(&gram) => ch.solve(&rhs),
        _ => linalg::pinv(&gram) * rhs,
    };
    let p = &d2 + &c * &coef;
    (p, coef.rows(0, ks).into_owned(), coef.rows(ks, kf).into_owned())
}

fn gram_well_conditioned(gram: &Matrix) -> bool {
    let sv = gram.singular_values();
    sv.min() > linalg::PINV_RCOND * sv.max()
}

struct Predictor<'a> {
    sys: &'a MechanicalSystem,
    quad: Quadrature,
    q: &'a Vector,
    p: &'a Vector,
}

impl KktSystem for Predictor<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn num_ineq(&self) -> usize {
        0
    }
    fn num_eq(&self) -> usize {
        0
    }
    fn stationarity(&self, x: &Vector, _: &Vector, _: &Vector) -> Vector {
        self.quad.d1(self.sys, self.q, x) + self.p
    }
    fn jacobian_x(&self, x: &Vector, _: &Vector, _: &Vector) -> Matrix {
        self.quad.d1_jacobian(self.sys, self.q, x)
    }
    fn lambda_matrix(&self, _: &Vector) -> Matrix {
        Matrix::zeros(self.sys.dim(), 0)
    }
    fn nu_matrix(&self, _: &Vector) -> Matrix {
        Matrix::zeros(self.sys.dim(), 0)
    }
    fn ineq_values(&self, _: &Vector) -> Vector {
        Vector::zeros(0)
    }
    fn ineq_gradients(&self, _: &Vector) -> Matrix {
        Matrix::zeros(self.sys.dim(), 0)
    }
    fn eq_values(&self, _: &Vector) -> Vector {
        Vector::zeros(0)
    }
    fn eq_gradients(&self, _: &Vector) -> Matrix {
        Matrix::zeros(self.sys.dim(), 0)
    }
    fn residual_scale(&self) -> f64 {
        self.p.amax()
    }
    fn residual_floor(&self) -> f64 {
        rounding_floor(self.sys, self.q, self.p, self.quad.h)
    }
}

/// Unconstrained forward map: solves `D1 L_d(q, x) + p = 0` for `x`. Closed
/// form for Verlet, Newton for the midpoint rule.
pub fn forward_predictor(
    sys: &MechanicalSystem,
    quad: Quadrature,
    q: &Vector,
    p: &Vector,
    tol: &Tolerances,
) -> Result<Vector, SolverError> {
    let h = quad.h;
    match quad.rule {
        Rule::Verlet => Ok(q + sys.velocity(&(p - sys.potential_gradient(q) * (0.5 * h))) * h),
        Rule::Midpoint => {
            let x0 = q + sys.velocity(p) * h;
            let prob = Predictor { sys, quad, q, p };
            newton(&prob, &[], &x0, tol.eps_solver).map(|o| o.x)
        }
    }
}

/// Bisection for the first zero of `g_i` along `(1 - tau) q0 + tau q1`.
/// Requires `g_i(q0) > 0 > g_i(q1)`.
pub fn time_of_impact(
    sys: &MechanicalSystem,
    q0: &Vector,
    q1: &Vector,
    index: usize,
    tol: &Tolerances,
) -> Result<f64, SolverError> {
    let c = sys.inequalities().get(index).ok_or(crate::error::ModelError::IndexOutOfRange {
        kind: "inequality",
        index,
        count: sys.num_inequalities(),
    })?;
    let at = |tau: f64| c.eval(&(q0 * (1.0 - tau) + q1 * tau));
    let (g0, g1) = (at(0.0), at(1.0));
    if !(g0 > 0.0 && g1 < 0.0) {
        return Err(SolverError::NoSignChange { index });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let gm = at(mid);
        if gm.abs() <= tol.eps_active {
            return Ok(mid);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
