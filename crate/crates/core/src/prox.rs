//! Proximal operators and the scaled proximal subproblem.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linops::{cholesky, cholesky_solve, conjugate_gradient, largest_eigenvalue, SymOp};

/// Nonsmooth part `g` of a composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxSpec {
    Zero,
    /// `weight * ||x||_1`
    L1 { weight: f64 },
    /// Indicator of the probability simplex.
    Simplex,
    /// Indicator of `[lo, hi]^p`.
    Box { lo: f64, hi: f64 },
}

/// Feasibility slack used when evaluating indicator functions.
const FEAS_TOL: f64 = 1e-9;

/// Multiple of machine epsilon below which subproblem residuals are noise.
const ROUNDING_SLACK: f64 = 16.0;

impl ProxSpec {
    /// `g(x)`, with `+inf` outside the feasible set of an indicator.
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        match *self {
            ProxSpec::Zero => 0.0,
            ProxSpec::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxSpec::Simplex => {
                let ok = x.iter().all(|v| *v >= -FEAS_TOL) && (x.sum() - 1.0).abs() <= FEAS_TOL;
                if ok {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxSpec::Box { lo, hi } => {
                if x.iter().all(|v| *v >= lo - FEAS_TOL && *v <= hi + FEAS_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_z g(z) + ||z - u||^2 / (2 step)`.
    pub fn apply(&self, u: &Array1<f64>, step: f64) -> Array1<f64> {
        match *self {
            ProxSpec::Zero => u.clone(),
            ProxSpec::L1 { weight } => u.mapv(|v| soft_threshold(v, weight * step)),
            ProxSpec::Simplex => project_simplex(u),
            ProxSpec::Box { lo, hi } => u.mapv(|v| v.clamp(lo, hi)),
        }
    }
}

pub fn prox_apply(g: &ProxSpec, u: &Array1<f64>, step: f64) -> Array1<f64> {
    g.apply(u, step)
}

pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Euclidean projection onto `{z >= 0, sum z = 1}` by sorting.
pub fn project_simplex(u: &Array1<f64>) -> Array1<f64> {
    let p = u.len();
    if p == 0 {
        return u.clone();
    }
    let mut sorted: Vec<f64> = u.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    let mut z = u.mapv(|v| (v - theta).max(0.0));
    // Rescale the support so the sum is exact to rounding.
    let s = z.sum();
    if s > 0.0 {
        z /= s;
    }
    z
}

/// Solution of the scaled proximal subproblem.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub z: Array1<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Step `1 / L_h` used in the residual.
    pub step: f64,
}

/// Upper estimate of the largest eigenvalue of `h`.
pub fn lipschitz_estimate(h: &dyn SymOp) -> f64 {
    let est = largest_eigenvalue(h, 1e-3, 10_000).value;
    est * 1.01
}

/// `||(z - prox(z - s grad_q, s)) / s||`, the composite gradient mapping.
pub fn mapping_residual(g: &ProxSpec, z: &Array1<f64>, grad_q: &Array1<f64>, s: f64) -> f64 {
    let moved = g.apply(&(z - &(grad_q * s)), s);
    let d = z - &moved;
    d.dot(&d).sqrt() / s
}

/// Minimizes `grad^T (z - x) + (z - x)^T h (z - x) / 2 + g(z)` by
/// accelerated proximal gradient with function-value restart.
pub fn scaled_prox_subproblem(
    h: &dyn SymOp,
    grad: &Array1<f64>,
    x: &Array1<f64>,
    g: &ProxSpec,
    tol: f64,
    max_inner: usize,
) -> Result<Subproblem> {
    let l_h = lipschitz_estimate(h);
    let s = if l_h > 0.0 { 1.0 / l_h } else { 1.0 };
    // The mapping residual cannot resolve below rounding of `z` and `grad`.
    let floor = ROUNDING_SLACK * f64::EPSILON * (l_h * x.dot(x).sqrt() + grad.dot(grad).sqrt());
    let tol = tol.max(floor);

    if *g == ProxSpec::Zero {
        let neg = -grad;
        let d = match h.dense() {
            Some(a) => cholesky_solve(&cholesky(a)?, neg.view()),
            None => conjugate_gradient(h, &neg, 1e-14, 20 * h.dim().max(1), None)?,
        };
        let z = x + &d;
        let gq = grad + &h.apply(&d);
        let residual = gq.dot(&gq).sqrt();
        return Ok(Subproblem { z, residual, iterations: 1, step: s });
    }

    let objective = |d: &Array1<f64>, hd: &Array1<f64>, z: &Array1<f64>| {
        grad.dot(d) + 0.5 * d.dot(hd) + g.value(z)
    };

    let mut z = g.apply(x, s);
    let dz = &z - x;
    let mut hdz = h.apply(&dz);
    let mut obj = objective(&dz, &hdz, &z);
    let mut y = z.clone();
    let mut hdy = hdz.clone();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;

    for it in 1..=max_inner {
        let gy = grad + &hdy;
        let z_new = g.apply(&(&y - &(&gy * s)), s);
        let dz_new = &z_new - x;
        let hdz_new = h.apply(&dz_new);
        let obj_new = objective(&dz_new, &hdz_new, &z_new);

        if obj_new > obj && t > 1.0 {
            // Momentum overshot: restart from the last iterate.
            t = 1.0;
            y = z.clone();
            hdy = hdz.clone();
            continue;
        }

        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_new;
        let step_dir = &z_new - &z;
        let hstep = &hdz_new - &hdz;
        y = &z_new + &(&step_dir * beta);
        hdy = &hdz_new + &(&hstep * beta);
        t = t_new;
        z = z_new;
        hdz = hdz_new;
        obj = obj_new.min(obj);

        let gz = grad + &hdz;
        residual = mapping_residual(g, &z, &gz, s);
        if residual <= tol {
            return Ok(Subproblem { z, residual, iterations: it, step: s });
        }
    }
    Err(Error::InexactSubproblem { residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn soft_threshold_examples() {
        let g = ProxSpec::L1 { weight: 1.0 };
        assert_eq!(g.apply(&array![1.5], 1.0), array![0.5]);
        let g = ProxSpec::L1 { weight: 0.5 };
        assert_eq!(g.apply(&array![0.3], 1.0), array![0.0]);
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(project_simplex(&array![2.0, 0.0]), array![1.0, 0.0]);
        assert_eq!(project_simplex(&array![0.6, 0.6]), array![0.5, 0.5]);
        let z = project_simplex(&array![0.3, -2.0, 5.0, 0.1]);
        assert!((z.sum() - 1.0).abs() < 1e-15);
        assert!(z.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn box_and_zero() {
        let g = ProxSpec::Box { lo: -1.0, hi: 1.0 };
        assert_eq!(g.apply(&array![-3.0, 0.5, 2.0], 1.0), array![-1.0, 0.5, 1.0]);
        assert_eq!(ProxSpec::Zero.apply(&array![3.0], 7.0), array![3.0]);
    }

    #[test]
    fn zero_reduces_to_newton() {
        let h = array![[2.0, 0.5], [0.5, 1.0]];
        let grad = array![1.0, -1.0];
        let x = array![0.3, 0.4];
        let sp = scaled_prox_subproblem(&h, &grad, &x, &ProxSpec::Zero, 1e-12, 10).unwrap();
        let r = h.dot(&(&sp.z - &x)) + &grad;
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn identity_metric_is_one_prox_step() {
        let h = Array2::<f64>::eye(3);
        let grad = array![0.3, -1.2, 0.8];
        let x = array![0.2, 0.5, 0.3];
        let g = ProxSpec::Simplex;
        let sp = scaled_prox_subproblem(&h, &grad, &x, &g, 1e-12, 10_000).unwrap();
        let direct = g.apply(&(&x - &grad), 1.0);
        assert!((&sp.z - &direct).iter().all(|v| v.abs() < 1e-10));
    }
}
