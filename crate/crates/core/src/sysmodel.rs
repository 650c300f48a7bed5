//! Constrained mechanical systems: mass, potential, and the inequality
//! (`g(q) >= 0`) and equality (`f(q) = 0`) constraint functions.

use std::fmt;
use std::sync::Arc;

use crate::cones::IndexSet;
use crate::error::ModelError;
use crate::linalg;
use crate::{Matrix, Vector};

pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Finite-difference step used whenever an analytic Hessian is missing.
const FD_HESSIAN_STEP: f64 = 1e-6;

/// Potential energy `V(q)` with its gradient and an optional Hessian.
#[derive(Clone)]
pub struct Potential {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    pub hessian: Option<MatrixFn>,
}

impl Potential {
    pub fn new(
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// `V == 0` on `R^n`.
    pub fn zero(dim: usize) -> Self {
        Self::new(|_| 0.0, move |_| Vector::zeros(dim)).with_hessian(move |_| Matrix::zeros(dim, dim))
    }

    /// Linear potential `V(q) = c^T q`.
    pub fn linear(c: Vector) -> Self {
        let n = c.len();
        let c2 = c.clone();
        Self::new(move |q| c.dot(q), move |_| c2.clone()).with_hessian(move |_| Matrix::zeros(n, n))
    }

    /// Quadratic potential `V(q) = 1/2 q^T K q + c^T q`.
    pub fn quadratic(k: Matrix, c: Vector) -> Self {
        let (k1, k2, k3) = (k.clone(), k.clone(), k);
        let (c1, c2) = (c.clone(), c);
        Self::new(
            move |q| 0.5 * q.dot(&(&k1 * q)) + c1.dot(q),
            move |q| &k2 * q + &c2,
        )
        .with_hessian(move |_| k3.clone())
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

/// A scalar constraint function with its gradient (and optional Hessian).
#[derive(Clone)]
pub struct Constraint {
    pub name: String,
    pub value: ScalarFn,
    pub gradient: VectorFn,
    pub hessian: Option<MatrixFn>,
}

impl Constraint {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// Affine constraint `a^T q + b`.
    pub fn affine(name: impl Into<String>, a: Vector, b: f64) -> Self {
        let n = a.len();
        let a2 = a.clone();
        Self::new(name, move |q| a.dot(q) + b, move |_| a2.clone()).with_hessian(move |_| Matrix::zeros(n, n))
    }

    pub fn eval(&self, q: &Vector) -> f64 {
        (self.value)(q)
    }

    pub fn grad(&self, q: &Vector) -> Vector {
        (self.gradient)(q)
    }

    /// Analytic Hessian when supplied, central differences of the gradient otherwise.
    pub fn hess(&self, q: &Vector) -> Matrix {
        match &self.hessian {
            Some(h) => h(q),
            None => linalg::fd_hessian(&|x: &Vector| (self.gradient)(x), q, FD_HESSIAN_STEP),
        }
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraint").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Inequality,
    Equality,
}

/// Configuration `q`, momentum `p` and time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vector,
    pub p: Vector,
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: Vector, p: Vector, t: f64) -> Self {
        Self { q, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

/// A separable mechanical system `H = 1/2 p^T M^-1 p + V(q)` on `R^n` with
/// inequality constraints `g_i(q) >= 0` and equality constraints `f_j(q) = 0`.
///
/// Immutable once built; share it across threads behind a reference.
#[derive(Debug, Clone)]
pub struct MechanicalSystem {
    dim: usize,
    mass: Matrix,
    mass_inv: Matrix,
    potential: Potential,
    inequalities: Vec<Constraint>,
    equalities: Vec<Constraint>,
    block: usize,
}

impl MechanicalSystem {
    /// Validates the mass matrix (square, symmetric to `1e-12` relative,
    /// positive definite) and builds an unconstrained system.
    pub fn new(mass: Matrix, potential: Potential) -> Result<Self, ModelError> {
        let dim = mass.nrows();
        if mass.ncols() != dim || dim == 0 {
            return Err(ModelError::MassShape {
                expected: dim.max(1),
                rows: mass.nrows(),
                cols: mass.ncols(),
            });
        }
        if !linalg::is_symmetric(&mass, 1e-12) {
            let asym = (&mass - mass.transpose()).amax() / mass.amax();
            return Err(ModelError::MassNotSymmetric(asym));
        }
        let sym = (&mass + mass.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigenvalues();
        if eig.iter().any(|&l| !(l > 0.0)) {
            return Err(ModelError::MassNotPositiveDefinite);
        }
        let chol = sym.clone().cholesky().ok_or(ModelError::MassNotPositiveDefinite)?;
        let mass_inv = chol.inverse();
        let mass_inv = (&mass_inv + mass_inv.transpose()) * 0.5;
        Ok(Self {
            dim,
            mass: sym,
            mass_inv,
            potential,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            block: 1,
        })
    }

    /// Diagonal mass matrix with unit masses.
    pub fn unit_mass(dim: usize, potential: Potential) -> Result<Self, ModelError> {
        Self::new(Matrix::identity(dim, dim), potential)
    }

    pub fn with_inequality(mut self, c: Constraint) -> Self {
        self.inequalities.push(c);
        self
    }

    pub fn with_equality(mut self, c: Constraint) -> Self {
        self.equalities.push(c);
        self
    }

    /// Spatial dimension of each particle block (1, 2 or 3), used for momentum
    /// diagnostics.
    pub fn with_particle_block(mut self, block: usize) -> Self {
        assert!(block > 0 && self.dim % block == 0, "block must divide the dimension");
        self.block = block;
        self
    }

    /// Same system with the inequality constraints replaced.
    pub fn with_inequalities_replaced(&self, inequalities: Vec<Constraint>) -> Self {
        let mut out = self.clone();
        out.inequalities = inequalities;
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle_block(&self) -> usize {
        self.block
    }

    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    pub fn mass_inv(&self) -> &Matrix {
        &self.mass_inv
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn inequalities(&self) -> &[Constraint] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.equalities
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn has_equalities(&self) -> bool {
        !self.equalities.is_empty()
    }

    pub fn check_dim(&self, v: &Vector) -> Result<(), ModelError> {
        if v.len() != self.dim {
            return Err(ModelError::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn potential_energy(&self, q: &Vector) -> f64 {
        (self.potential.value)(q)
    }

    pub fn potential_gradient(&self, q: &Vector) -> Vector {
        (self.potential.gradient)(q)
    }

    /// Analytic Hessian of `V`; errors when the system was built without one.
    pub fn potential_hessian(&self, q: &Vector) -> Result<Matrix, ModelError> {
        self.potential
            .hessian
            .as_ref()
            .map(|h| h(q))
            .ok_or(ModelError::MissingHessian)
    }

    /// Analytic Hessian when available, central differences of `grad V` otherwise.
    pub fn potential_hessian_or_fd(&self, q: &Vector) -> Matrix {
        match &self.potential.hessian {
            Some(h) => h(q),
            None => linalg::fd_hessian(&|x: &Vector| (self.potential.gradient)(x), q, FD_HESSIAN_STEP),
        }
    }

    pub fn velocity(&self, p: &Vector) -> Vector {
        &self.mass_inv * p
    }

    pub fn kinetic_energy(&self, p: &Vector) -> f64 {
        0.5 * p.dot(&(&self.mass_inv * p))
    }

    /// `H(q, p) = 1/2 p^T M^-1 p + V(q)`.
    pub fn hamiltonian(&self, s: &PhaseState) -> f64 {
        self.kinetic_energy(&s.p) + self.potential_energy(&s.q)
    }

    /// All inequality values `g(q)` and equality values `f(q)`.
    pub fn constraint_values(&self, q: &Vector) -> (Vector, Vector) {
        (self.inequality_values(q), self.equality_values(q))
    }

    pub fn inequality_values(&self, q: &Vector) -> Vector {
        Vector::from_iterator(self.inequalities.len(), self.inequalities.iter().map(|c| c.eval(q)))
    }

    pub fn equality_values(&self, q: &Vector) -> Vector {
        Vector::from_iterator(self.equalities.len(), self.equalities.iter().map(|c| c.eval(q)))
    }

    fn constraints(&self, kind: ConstraintKind) -> (&[Constraint], &'static str) {
        match kind {
            ConstraintKind::Inequality => (&self.inequalities, "inequality"),
            ConstraintKind::Equality => (&self.equalities, "equality"),
        }
    }

    /// Gradients of the selected constraints stacked as columns, in subset
    /// order. An empty subset yields an `n x 0` matrix.
    pub fn constraint_gradient_matrix(
        &self,
        q: &Vector,
        subset: &IndexSet,
        kind: ConstraintKind,
    ) -> Result<Matrix, ModelError> {
        let (list, name) = self.constraints(kind);
        let mut out = Matrix::zeros(self.dim, subset.len());
        for (col, &i) in subset.iter().enumerate() {
            let c = list.get(i).ok_or(ModelError::IndexOutOfRange {
                kind: name,
                index: i,
                count: list.len(),
            })?;
            out.set_column(col, &c.grad(q));
        }
        Ok(out)
    }

    /// Gradients of every equality constraint as columns (`F(q)`).
    pub fn equality_gradients(&self, q: &Vector) -> Matrix {
        let mut out = Matrix::zeros(self.dim, self.equalities.len());
        for (j, c) in self.equalities.iter().enumerate() {
            out.set_column(j, &c.grad(q));
        }
        out
    }

    /// Maximum relative mismatch between each constraint's (and the
    /// potential's) supplied gradient and a central difference of its value
    /// at `q`.
    pub fn gradient_consistency(&self, q: &Vector, step: f64) -> f64 {
        let rel = |fd: &Vector, an: &Vector| (fd - an).amax() / an.amax().max(1.0);
        let pot = |x: &Vector| (self.potential.value)(x);
        let mut worst = rel(&linalg::fd_gradient(&pot, q, step), &self.potential_gradient(q));
        for c in self.inequalities.iter().chain(self.equalities.iter()) {
            let f = |x: &Vector| c.eval(x);
            worst = worst.max(rel(&linalg::fd_gradient(&f, q, step), &c.grad(q)));
        }
        worst
    }
}
