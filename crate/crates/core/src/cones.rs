//! Active-set bookkeeping: active, extended-active and smooth constraint
//! subsets, tangent-cone membership, and constraint gradients projected onto
//! the cotangent space of the equality manifold.

use std::collections::BTreeSet;
use std::fmt;

use crate::linalg;
use crate::sysmodel::{ConstraintKind, MechanicalSystem};
use crate::{Matrix, Vector};

/// Sorted set of distinct inequality-constraint indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        Self(set.into_iter().collect())
    }

    pub fn all(count: usize) -> Self {
        Self((0..count).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> + '_ {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        Self::from_indices(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> IndexSet {
        Self(self.0.iter().copied().filter(|&i| keep(i)).collect())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::from_indices(iter)
    }
}

/// Absolute thresholds used to decide floating-point equalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `|g_i(q)| <= eps_active` counts as on the boundary.
    pub eps_active: f64,
    /// `|grad g_i^T M^-1 p| <= eps_tangent` counts as tangential.
    pub eps_tangent: f64,
    /// Residual target for the nonlinear solves.
    pub eps_solver: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_active: 1e-9,
            eps_tangent: 1e-9,
            eps_solver: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("eps_active", self.eps_active),
            ("eps_tangent", self.eps_tangent),
            ("eps_solver", self.eps_solver),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// `{i : g_i(q) <= eps_active}`: constraints on the boundary plus any that
/// are violated.
pub fn active_set(sys: &MechanicalSystem, q: &Vector, tol: &Tolerances) -> IndexSet {
    sys.inequalities()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.eval(q) <= tol.eps_active)
        .map(|(i, _)| i)
        .collect()
}

/// Indices violated beyond the activity threshold.
pub fn violated_set(sys: &MechanicalSystem, q: &Vector, tol: &Tolerances) -> IndexSet {
    sys.inequalities()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.eval(q) < -tol.eps_active)
        .map(|(i, _)| i)
        .collect()
}

/// Constraints the predictor configuration reaches or violates
/// (`g_i(q_pred) <= 0`, exact sign test) together with those active at `q`.
pub fn extended_active_set(sys: &MechanicalSystem, q: &Vector, q_pred: &Vector, tol: &Tolerances) -> IndexSet {
    let predicted: IndexSet = sys
        .inequalities()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.eval(q_pred) <= 0.0)
        .map(|(i, _)| i)
        .collect();
    predicted.union(&active_set(sys, q, tol))
}

/// Active constraints whose (projected) gradient is `M^-1`-orthogonal to `p`.
pub fn smooth_set(sys: &MechanicalSystem, q: &Vector, p: &Vector, tol: &Tolerances) -> IndexSet {
    let on_boundary: IndexSet = sys
        .inequalities()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.eval(q).abs() <= tol.eps_active)
        .map(|(i, _)| i)
        .collect();
    if on_boundary.is_empty() {
        return on_boundary;
    }
    let normals = projected_active_gradient(sys, q, &on_boundary);
    let normal_velocity = normals.transpose() * sys.velocity(p);
    let keep: Vec<usize> = on_boundary
        .iter()
        .zip(normal_velocity.iter())
        .filter(|(_, u)| u.abs() <= tol.eps_tangent)
        .map(|(&i, _)| i)
        .collect();
    IndexSet::from_indices(keep)
}

/// `true` iff `grad g_i(q)^T v >= -eps_tangent` for every active constraint.
pub fn in_tangent_cone(sys: &MechanicalSystem, q: &Vector, v: &Vector, tol: &Tolerances) -> bool {
    active_set(sys, q, tol)
        .iter()
        .all(|&i| sys.inequalities()[i].grad(q).dot(v) >= -tol.eps_tangent)
}

/// `M^-1`-orthogonal projector onto the cotangent space of the equality
/// manifold at `q`: `P = I - F (F^T M^-1 F)^+ F^T M^-1`, so that
/// `F^T M^-1 P = 0`. Returns `None` when the system has no equalities.
pub fn equality_projector(sys: &MechanicalSystem, q: &Vector) -> Option<Matrix> {
    if !sys.has_equalities() {
        return None;
    }
    let f = sys.equality_gradients(q);
    let minv_f = sys.mass_inv() * &f;
    let gram = f.transpose() * &minv_f;
    let n = sys.dim();
    Some(Matrix::identity(n, n) - &f * linalg::pinv(&gram) * minv_f.transpose())
}

/// Inequality gradients for `subset` as columns, projected so that
/// `F^T M^-1 N = 0` when equality constraints exist (plain gradients
/// otherwise).
pub fn projected_active_gradient(sys: &MechanicalSystem, q: &Vector, subset: &IndexSet) -> Matrix {
    let g = sys
        .constraint_gradient_matrix(q, subset, ConstraintKind::Inequality)
        .expect("subset indices must be valid inequality indices");
    match equality_projector(sys, q) {
        Some(proj) => proj * g,
        None => g,
    }
}
