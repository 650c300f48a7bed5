#![allow(dead_code)]

use gvi::{Constraint, Matrix, MechanicalSystem, Potential, Vector};
use rand::Rng;

/// Random symmetric positive definite matrix with eigenvalues roughly in [0.5, 3].
pub fn spd(rng: &mut impl Rng, n: usize) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let s = &b * b.transpose() / n as f64;
    s + Matrix::identity(n, n) * 0.5
}

pub fn vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn unit(rng: &mut impl Rng, n: usize) -> Vector {
    loop {
        let v = vector(rng, n, 1.0);
        let nrm = v.norm();
        if nrm > 0.2 {
            return v / nrm;
        }
    }
}

/// A random instance at a boundary point: `k` affine inequalities all active
/// at `q`, optionally one affine equality through `q`, quadratic potential.
pub struct Instance {
    pub sys: MechanicalSystem,
    pub q: Vector,
    pub p: Vector,
}

pub fn boundary_instance(rng: &mut impl Rng, n: usize, k: usize, with_equality: bool) -> Instance {
    let mass = spd(rng, n);
    let stiffness = spd(rng, n);
    let potential = Potential::quadratic(stiffness, Vector::zeros(n));
    let mut sys = MechanicalSystem::new(mass, potential).unwrap();
    let q = vector(rng, n, 1.0);
    for i in 0..k {
        let a = unit(rng, n);
        let b = -a.dot(&q);
        sys = sys.with_inequality(Constraint::affine(format!("wall{i}"), a, b));
    }
    if with_equality {
        let a = unit(rng, n);
        let b = -a.dot(&q);
        sys = sys.with_equality(Constraint::affine("rod", a, b));
    }
    let mut p = vector(rng, n, 1.0);
    if with_equality {
        let f = sys.equality_gradients(&q);
        let proj = gvi::cones::equality_projector(&sys, &q).unwrap();
        p = proj * p;
        debug_assert!((f.transpose() * sys.mass_inv() * &p).amax() < 1e-12);
    }
    Instance { sys, q, p }
}

/// Brute-force minimiser of `½ λᵀQλ + cᵀλ` over `λ ≥ 0` by enumerating
/// every candidate free set.
pub fn brute_force_nnls(q: &Matrix, c: &Vector) -> Vector {
    let k = c.len();
    let mut best = Vector::zeros(k);
    let mut best_val = 0.0;
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let qs = Matrix::from_fn(idx.len(), idx.len(), |a, b| q[(idx[a], idx[b])]);
        let cs = Vector::from_fn(idx.len(), |a, _| c[idx[a]]);
        let Some(sol) = qs.lu().solve(&(-cs)) else { continue };
        if sol.iter().any(|&x| x < 0.0) {
            continue;
        }
        let mut lam = Vector::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            lam[i] = sol[a];
        }
        let val = 0.5 * lam.dot(&(q * &lam)) + c.dot(&lam);
        if val < best_val {
            best_val = val;
            best = lam;
        }
    }
    best
}
