//! BFGS quasi-Newton with the analytic step as an Armijo floor.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kernel::{step_size, GscParams};
use crate::linops::{cholesky, cholesky_solve, SymOp};
use crate::models::{params_for, Model, NuChoice};
use crate::trace::{Clock, IterRecord, Phase, SolveResult, Status};

/// Hessian approximation `h` and its inverse `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BfgsState {
    pub h: Array2<f64>,
    pub b: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Accepted,
    /// Curvature `<y, s>` too small; the state is unchanged.
    Skipped,
}

fn outer(u: &Array1<f64>, v: &Array1<f64>) -> Array2<f64> {
    let (p, q) = (u.len(), v.len());
    Array2::from_shape_fn((p, q), |(i, j)| u[i] * v[j])
}

fn symmetrize(a: &mut Array2<f64>) {
    let t = a.t().to_owned();
    *a += &t;
    *a *= 0.5;
}

impl BfgsState {
    pub fn scaled_identity(p: usize, scale: f64) -> Self {
        Self { h: Array2::eye(p) * scale, b: Array2::eye(p) / scale }
    }

    /// Starts from a given positive definite approximation.
    pub fn from_hessian(h: Array2<f64>) -> Result<Self> {
        let l = cholesky(&h)?;
        let p = h.nrows();
        let mut b = Array2::zeros((p, p));
        for j in 0..p {
            let mut e = Array1::zeros(p);
            e[j] = 1.0;
            b.column_mut(j).assign(&cholesky_solve(&l, e.view()));
        }
        symmetrize(&mut b);
        Ok(Self { h, b })
    }

    /// Rank-two update making `h s = y`.
    pub fn update(&mut self, s: &Array1<f64>, y: &Array1<f64>) -> UpdateOutcome {
        let ys = y.dot(s);
        let guard = 1e-12 * y.dot(y).sqrt() * s.dot(s).sqrt();
        if !(ys > guard) {
            return UpdateOutcome::Skipped;
        }
        let hs = self.h.dot(s);
        let shs = s.dot(&hs);
        if !(shs > 0.0) {
            return UpdateOutcome::Skipped;
        }
        self.h = &self.h + &(outer(y, y) / ys) - &(outer(&hs, &hs) / shs);
        symmetrize(&mut self.h);

        let rho = 1.0 / ys;
        let by = self.b.dot(y);
        let yby = y.dot(&by);
        let sby = outer(s, &by);
        self.b = &self.b - &((&sby + &sby.t()) * rho) + &(outer(s, s) * (rho * rho * yby + rho));
        symmetrize(&mut self.b);
        UpdateOutcome::Accepted
    }
}

pub fn bfgs_update(state: &BfgsState, s: &Array1<f64>, y: &Array1<f64>) -> (BfgsState, UpdateOutcome) {
    let mut next = state.clone();
    let outcome = next.update(s, y);
    (next, outcome)
}

/// `||(H_k - H*) e||*_{x*} / ||e||_{x*}` with `e = x_k - x*`.
pub fn dennis_more_ratio(
    h_k: &Array2<f64>,
    hess_star: &Array2<f64>,
    x_k: &Array1<f64>,
    x_star: &Array1<f64>,
) -> Result<f64> {
    let e = x_k - x_star;
    if e.iter().all(|v| *v == 0.0) {
        return Err(Error::Coincident);
    }
    let r = (h_k - hess_star).dot(&e);
    let l = cholesky(hess_star)?;
    let dual = r.dot(&cholesky_solve(&l, r.view())).max(0.0).sqrt();
    let primal = e.dot(&hess_star.dot(&e)).sqrt();
    Ok(dual / primal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnLineSearch {
    /// Armijo backtracking from `min(1, 2 tau)` with the analytic step
    /// `tau` as the first fallback.
    AnalyticFloor,
    /// Exact minimization along the direction by one-dimensional Newton.
    Exact,
}

#[derive(Debug, Clone)]
pub struct QnOptions {
    pub nu_choice: NuChoice,
    pub eps: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub line_search: QnLineSearch,
    /// Initial approximation; defaults to a scaled identity.
    pub initial_hessian: Option<Array2<f64>>,
    /// Replace the default identity by `(y^T y / y^T s) I` before the first
    /// update.
    pub rescale_initial: bool,
    /// Keep every iterate and approximation for diagnostics.
    pub keep_history: bool,
    pub record_time: bool,
}

impl Default for QnOptions {
    fn default() -> Self {
        Self {
            nu_choice: NuChoice::Native,
            eps: 1e-8,
            max_iter: 500,
            armijo_c1: 1e-6,
            line_search: QnLineSearch::AnalyticFloor,
            initial_hessian: None,
            rescale_initial: true,
            keep_history: false,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QnResult {
    pub result: SolveResult,
    pub state: BfgsState,
    pub outcomes: Vec<UpdateOutcome>,
    /// `||h s - y|| / ||y||` after each accepted update.
    pub secant_residuals: Vec<f64>,
    /// Iterates and approximations when `keep_history` is set.
    pub iterates: Vec<Array1<f64>>,
    pub approximations: Vec<Array2<f64>>,
}

fn exact_step(model: &dyn Model, x: &Array1<f64>, d: &Array1<f64>, slope0: f64) -> Result<f64> {
    let mut tau = 0.0f64;
    let mut slope = slope0;
    for _ in 0..100 {
        let xt = x + &(d * tau);
        let curv = d.dot(&model.hvp(&xt, d)?);
        if !(curv > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let next = tau - slope / curv;
        tau = if next > 0.0 { next } else { 0.5 * tau };
        let g = model.gradient(&(x + &(d * tau)))?;
        slope = g.dot(d);
        if slope.abs() <= 1e-15 * slope0.abs() {
            break;
        }
    }
    Ok(tau)
}

/// Minimizes `model` from `x0` with BFGS directions.
pub fn minimize_qn(model: &dyn Model, x0: &Array1<f64>, opts: &QnOptions) -> Result<QnResult> {
    if !(opts.eps > 0.0) || !(opts.armijo_c1 > 0.0 && opts.armijo_c1 < 1.0) {
        return Err(Error::InvalidParams("eps must be positive and armijo_c1 in (0, 1)".into()));
    }
    let GscParams { m, nu } = params_for(model, opts.nu_choice)?;
    let clock = Clock::new(opts.record_time);
    let p = model.dim();

    let mut x = x0.clone();
    let mut f = model.value(&x)?;
    let mut g = model.gradient(&x)?;
    let g0 = g.dot(&g).sqrt();
    let mut state = match &opts.initial_hessian {
        Some(h) => BfgsState::from_hessian(h.clone())?,
        None => {
            let scale = g0 / x.dot(&x).sqrt().max(1.0);
            BfgsState::scaled_identity(p, if scale > 0.0 { scale } else { 1.0 })
        }
    };
    let target = opts.eps * g0.max(1.0);
    let mut evals = 1;
    let mut trace = Vec::new();
    let mut outcomes = Vec::new();
    let mut secant_residuals = Vec::new();
    let mut iterates = Vec::new();
    let mut approximations = Vec::new();
    let mut status = Status::MaxIter;

    for k in 0..=opts.max_iter {
        if opts.keep_history {
            iterates.push(x.clone());
            approximations.push(state.h.clone());
        }
        let gnorm = g.dot(&g).sqrt();
        let d = -state.b.dot(&g);
        let slope = g.dot(&d);
        let lambda = (-slope).max(0.0).sqrt();
        let beta = m * d.dot(&d).sqrt();
        let step = step_size(nu, m, lambda, beta)?;
        let mut record = IterRecord {
            iter: k,
            phase: Phase::Damped,
            f,
            grad_norm: gnorm,
            lambda,
            beta,
            d_k: step.d_k,
            tau: step.tau,
            cum_time_s: 0.0,
        };
        if gnorm <= target {
            record.cum_time_s = clock.elapsed();
            trace.push(record);
            status = Status::Converged;
            break;
        }
        if k == opts.max_iter {
            record.cum_time_s = clock.elapsed();
            trace.push(record);
            break;
        }

        let (tau, f_new) = match opts.line_search {
            QnLineSearch::Exact => {
                let tau = exact_step(model, &x, &d, slope)?;
                evals += 1;
                (tau, model.value(&(&x + &(&d * tau)))?)
            }
            QnLineSearch::AnalyticFloor => {
                let floor = step.tau;
                let mut tau = (2.0 * floor).min(1.0);
                let mut floor_tried = tau <= floor;
                let mut found = None;
                let slack = 4.0 * f64::EPSILON * (1.0 + f.abs());
                for _ in 0..200 {
                    let trial = &x + &(&d * tau);
                    evals += 1;
                    match model.value(&trial) {
                        // Below rounding level the sufficient-decrease test
                        // cannot be resolved; accept any step that does not
                        // raise f beyond that level.
                        Ok(ft) if ft <= f + opts.armijo_c1 * tau * slope
                            || (-opts.armijo_c1 * tau * slope <= slack && ft <= f + slack) =>
                        {
                            found = Some((tau, ft));
                            break;
                        }
                        Ok(_) | Err(Error::OutsideDomain { .. }) => {}
                        Err(e) => return Err(e),
                    }
                    let next = 0.5 * tau;
                    tau = if !floor_tried && next < floor {
                        floor_tried = true;
                        floor
                    } else {
                        next
                    };
                }
                found.ok_or(Error::NoConvergence { residual: tau })?
            }
        };

        let x_new = &x + &(&d * tau);
        let g_new = model.gradient(&x_new)?;
        let s = &x_new - &x;
        let y = &g_new - &g;
        if k == 0 && opts.initial_hessian.is_none() && opts.rescale_initial {
            let (ys, yy) = (y.dot(&s), y.dot(&y));
            if ys > 0.0 && yy > 0.0 {
                state = BfgsState::scaled_identity(p, yy / ys);
            }
        }
        let outcome = state.update(&s, &y);
        if outcome == UpdateOutcome::Accepted {
            let r = state.h.dot(&s) - &y;
            secant_residuals.push(r.dot(&r).sqrt() / y.dot(&y).sqrt());
        }
        outcomes.push(outcome);

        record.tau = tau;
        record.cum_time_s = clock.elapsed();
        trace.push(record);
        x = x_new;
        f = f_new;
        g = g_new;
    }

    let result = SolveResult { x, trace, status, f_evals: evals, domain_fallbacks: 0 };
    Ok(QnResult { result, state, outcomes, secant_residuals, iterates, approximations })
}

impl SymOp for BfgsState {
    fn dim(&self) -> usize {
        self.h.nrows()
    }
    fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        self.h.dot(v)
    }
    fn dense(&self) -> Option<&Array2<f64>> {
        Some(&self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QuadraticModel;
    use ndarray::array;

    #[test]
    fn hand_update() {
        let st = BfgsState::scaled_identity(3, 1.0);
        let (next, out) = bfgs_update(&st, &array![1.0, 0.0, 0.0], &array![2.0, 0.0, 0.0]);
        assert_eq!(out, UpdateOutcome::Accepted);
        let expect = Array2::from_diag(&array![2.0, 1.0, 1.0]);
        assert!((&next.h - &expect).iter().all(|v| v.abs() < 1e-15));
        assert!((&next.h.dot(&next.b) - &Array2::<f64>::eye(3)).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn fixed_point_and_skip() {
        let h = array![[2.0, 0.3], [0.3, 1.0]];
        let st = BfgsState::from_hessian(h.clone()).unwrap();
        let s = array![0.4, -1.0];
        let (next, _) = bfgs_update(&st, &s, &h.dot(&s));
        assert!((&next.h - &h).iter().all(|v| v.abs() < 1e-14));
        let (same, out) = bfgs_update(&st, &s, &array![-0.4, 1.0]);
        assert_eq!(out, UpdateOutcome::Skipped);
        assert_eq!(same, st);
    }

    #[test]
    fn dennis_more_identity_metric() {
        let eye = Array2::<f64>::eye(2);
        let x = array![1.0, 2.0];
        let xs = array![0.0, 0.5];
        assert_eq!(dennis_more_ratio(&eye, &eye, &x, &xs).unwrap(), 0.0);
        let r = dennis_more_ratio(&(&eye * 1.25), &eye, &x, &xs).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
        assert!(dennis_more_ratio(&eye, &eye, &x, &x).is_err());
    }

    #[test]
    fn exact_hessian_start_is_one_step() {
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        let q = QuadraticModel::new(a.clone(), array![1.0, -1.0]);
        let opts = QnOptions { initial_hessian: Some(a), ..Default::default() };
        let r = minimize_qn(&q, &array![5.0, 5.0], &opts).unwrap();
        assert_eq!(r.result.status, Status::Converged);
        assert_eq!(r.result.iterations(), 1);
    }
}
