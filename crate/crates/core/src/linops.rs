//! Newton systems, local norms and extreme eigenvalues.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// A symmetric linear operator, held densely or applied on demand.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, v: &Array1<f64>) -> Array1<f64>;
    fn dense(&self) -> Option<&Array2<f64>> {
        None
    }
}

impl SymOp for Array2<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        self.dot(v)
    }
    fn dense(&self) -> Option<&Array2<f64>> {
        Some(self)
    }
}

/// Operator backed by a closure, typically a Hessian-vector product.
pub struct FnOp<F: Fn(&Array1<f64>) -> Array1<f64>> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&Array1<f64>) -> Array1<f64>> SymOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        (self.f)(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Cholesky when the operator is dense, CG otherwise.
    Auto,
    Cholesky,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    pub method: SolveMethod,
    /// Relative residual target for CG.
    pub cg_tol: f64,
    /// CG iteration cap; `0` means `10 * dim`.
    pub cg_max_iter: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Auto, cg_tol: 1e-10, cg_max_iter: 0 }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L y = b` by forward substitution.
pub fn forward_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves `L^T x = y` by back substitution.
pub fn backward_solve(l: &Array2<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let y = forward_solve(l, b);
    backward_solve(l, y.view())
}

/// Conjugate gradients for `h x = b`, stopping at `||h x - b|| <= tol ||b||`.
pub fn conjugate_gradient(
    h: &dyn SymOp,
    b: &Array1<f64>,
    tol: f64,
    max_iter: usize,
    warm: Option<&Array1<f64>>,
) -> Result<Array1<f64>> {
    let bnorm = b.dot(b).sqrt();
    let mut x = match warm {
        Some(w) if w.len() == b.len() => w.clone(),
        _ => Array1::zeros(b.len()),
    };
    if bnorm == 0.0 {
        return Ok(Array1::zeros(b.len()));
    }
    let mut r = b - &h.apply(&x);
    let target = tol * bnorm;
    let mut rr = r.dot(&r);
    if rr.sqrt() <= target {
        return Ok(x);
    }
    let mut p = r.clone();
    for _ in 0..max_iter {
        let hp = h.apply(&p);
        let curv = p.dot(&hp);
        if curv <= 1e-14 * p.dot(&p) {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rr / curv;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &hp);
        let rr_new = r.dot(&r);
        if rr_new.sqrt() <= target {
            return Ok(x);
        }
        p = &r + &(&p * (rr_new / rr));
        rr = rr_new;
    }
    Err(Error::NoConvergence { residual: rr.sqrt() / bnorm })
}

/// Newton direction `n = -h^{-1} g` and decrement `sqrt(-g^T n)`.
pub fn newton_direction(
    h: &dyn SymOp,
    g: &Array1<f64>,
    opts: &InnerOptions,
    warm: Option<&Array1<f64>>,
) -> Result<(Array1<f64>, f64)> {
    let use_chol = match opts.method {
        SolveMethod::Cholesky => true,
        SolveMethod::Cg => false,
        SolveMethod::Auto => h.dense().is_some(),
    };
    let n = if use_chol {
        let l = match h.dense() {
            Some(a) => cholesky(a)?,
            None => cholesky(&materialize(h))?,
        };
        -cholesky_solve(&l, g.view())
    } else {
        let max_iter = if opts.cg_max_iter == 0 { 10 * h.dim().max(1) } else { opts.cg_max_iter };
        let neg_g = -g;
        let warm = warm.map(|w| w.clone());
        conjugate_gradient(h, &neg_g, opts.cg_tol, max_iter, warm.as_ref())?
    };
    let lambda = (-g.dot(&n)).max(0.0).sqrt();
    Ok((n, lambda))
}

/// Dense copy of an operator, built column by column.
pub fn materialize(h: &dyn SymOp) -> Array2<f64> {
    if let Some(a) = h.dense() {
        return a.clone();
    }
    let p = h.dim();
    let mut out = Array2::zeros((p, p));
    for j in 0..p {
        let mut e = Array1::zeros(p);
        e[j] = 1.0;
        out.column_mut(j).assign(&h.apply(&e));
    }
    out
}

/// `sqrt(v^T h v)`.
pub fn local_norm(h: &dyn SymOp, v: &Array1<f64>) -> Result<f64> {
    let q = v.dot(&h.apply(v));
    let vv = v.dot(v);
    if q < -1e-12 * vv {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(q.max(0.0).sqrt())
}

/// Eigenvalue estimate and whether the iteration met its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigEstimate {
    pub value: f64,
    pub converged: bool,
}

fn start_vector(p: usize) -> Array1<f64> {
    let v = Array1::from_shape_fn(p, |i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.7548776662).fract());
    let n = v.dot(&v).sqrt();
    v / n
}

/// Largest eigenvalue by power iteration.
pub fn largest_eigenvalue(h: &dyn SymOp, rel_tol: f64, max_iter: usize) -> EigEstimate {
    let p = h.dim();
    if p == 0 {
        return EigEstimate { value: 0.0, converged: true };
    }
    let mut v = start_vector(p);
    let mut mu = 0.0;
    for _ in 0..max_iter {
        let w = h.apply(&v);
        let mu_new = v.dot(&w);
        let nw = w.dot(&w).sqrt();
        if nw == 0.0 {
            return EigEstimate { value: 0.0, converged: true };
        }
        v = w / nw;
        if (mu_new - mu).abs() <= rel_tol * mu_new.abs() {
            return EigEstimate { value: mu_new.max(nw), converged: true };
        }
        mu = mu_new;
    }
    EigEstimate { value: mu, converged: false }
}

/// Smallest eigenvalue of a positive semidefinite operator: inverse power
/// iteration when dense, Lanczos otherwise.
pub fn smallest_eigenvalue(h: &dyn SymOp, tol: f64) -> Result<EigEstimate> {
    match h.dense() {
        Some(a) => inverse_iteration(a, tol),
        None => Ok(lanczos_smallest(h, tol)),
    }
}

fn inverse_iteration(a: &Array2<f64>, tol: f64) -> Result<EigEstimate> {
    let p = a.nrows();
    if p == 0 {
        return Ok(EigEstimate { value: 0.0, converged: true });
    }
    let l = match cholesky(a) {
        Ok(l) => l,
        // A singular PSD matrix has smallest eigenvalue zero.
        Err(_) => return Ok(EigEstimate { value: 0.0, converged: true }),
    };
    let mut v = start_vector(p);
    let mut mu = f64::INFINITY;
    for _ in 0..5000 {
        let w = cholesky_solve(&l, v.view());
        let nw = w.dot(&w).sqrt();
        v = w / nw;
        let av = a.dot(&v);
        let rq = v.dot(&av);
        let resid = (&av - &(&v * rq)).dot(&(&av - &(&v * rq))).sqrt();
        if resid <= tol * rq.abs() || (mu - rq).abs() <= 1e-3 * tol * rq.abs() {
            return Ok(EigEstimate { value: rq.max(0.0), converged: true });
        }
        mu = rq;
    }
    Ok(EigEstimate { value: mu.max(0.0), converged: false })
}

/// Number of eigenvalues of the tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        q = alpha[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = 1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_min(alpha: &[f64], beta: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..alpha.len() {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i < beta.len() { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(alpha, beta, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn lanczos_smallest(h: &dyn SymOp, tol: f64) -> EigEstimate {
    let p = h.dim();
    if p == 0 {
        return EigEstimate { value: 0.0, converged: true };
    }
    let steps = p.min(300);
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut v = start_vector(p);
    let mut prev_est = f64::INFINITY;
    for j in 0..steps {
        let mut w = h.apply(&v);
        let a = v.dot(&w);
        alpha.push(a);
        basis.push(v.clone());
        for q in &basis {
            let c = q.dot(&w);
            w.scaled_add(-c, q);
        }
        for q in &basis {
            let c = q.dot(&w);
            w.scaled_add(-c, q);
        }
        let b = w.dot(&w).sqrt();
        let est = tridiagonal_min(&alpha, &beta);
        if b <= 1e-12 * a.abs().max(1e-300) || j + 1 == p {
            return EigEstimate { value: est.max(0.0), converged: true };
        }
        if j >= 10 && (prev_est - est).abs() <= tol * est.abs() {
            return EigEstimate { value: est.max(0.0), converged: true };
        }
        prev_est = est;
        beta.push(b);
        v = w / b;
    }
    EigEstimate { value: prev_est.max(0.0), converged: false }
}

/// All eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        let scale: f64 = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for pi in 0..n {
            for q in (pi + 1)..n {
                let apq = m[[pi, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[pi, pi]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, pi]];
                    let mkq = m[[k, q]];
                    m[[k, pi]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[pi, k]];
                    let mqk = m[[q, k]];
                    m[[pi, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn hand_solves() {
        let h = array![[4.0, 0.0], [0.0, 1.0]];
        let (n, lam) = newton_direction(&h, &array![2.0, 1.0], &InnerOptions::default(), None).unwrap();
        assert_relative_eq!(n[0], -0.5);
        assert_relative_eq!(n[1], -1.0);
        assert_relative_eq!(lam, 2f64.sqrt(), max_relative = 1e-15);

        let id = Array2::<f64>::eye(2);
        let (n, lam) = newton_direction(&id, &array![0.0, 0.0], &InnerOptions::default(), None).unwrap();
        assert_eq!(n, array![0.0, 0.0]);
        assert_eq!(lam, 0.0);
        let cg = InnerOptions { method: SolveMethod::Cg, ..Default::default() };
        let (n, lam) = newton_direction(&id, &array![3.0, 4.0], &cg, None).unwrap();
        assert_relative_eq!(n[0], -3.0);
        assert_relative_eq!(lam, 5.0);
    }

    #[test]
    fn not_pd() {
        let h = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            newton_direction(&h, &array![1.0, 0.0], &InnerOptions::default(), None),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(local_norm(&h, &array![1.0, -1.0]).is_err());
    }

    #[test]
    fn norms() {
        let h = array![[4.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(local_norm(&h, &array![1.0, 1.0]).unwrap(), 5f64.sqrt());
        assert_eq!(local_norm(&h, &array![0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eigen_estimates() {
        let h = array![[4.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(smallest_eigenvalue(&h, 1e-10).unwrap().value, 1.0, max_relative = 1e-8);
        let op = FnOp { dim: 2, f: |v: &Array1<f64>| array![4.0 * v[0], v[1]] };
        assert_relative_eq!(smallest_eigenvalue(&op, 1e-10).unwrap().value, 1.0, max_relative = 1e-8);
        assert_relative_eq!(largest_eigenvalue(&h, 1e-12, 10_000).value, 4.0, max_relative = 1e-6);
        let ev = symmetric_eigenvalues(&array![[2.0, 1.0], [1.0, 2.0]]);
        assert_relative_eq!(ev[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(ev[1], 3.0, max_relative = 1e-14);
    }
}
