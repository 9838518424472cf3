//! Proximal Newton for `F = f + g` with smooth self-concordant `f`.
//!
//! Each iteration solves the scaled proximal subproblem at `x` for `z`,
//! sets `n = z - x`, and moves to `x + tau n` with the same analytic step
//! as the Newton solver. Since `tau <= 1` the new point is a convex
//! combination of `x` and `z`, so convex constraints encoded in `g` stay
//! satisfied.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::kernel::{phase2_threshold, step_size, GscParams, Solver};
use crate::linops::{local_norm, smallest_eigenvalue};
use crate::models::{params_for, Model};
use crate::newton::{Phase2, SolveOptions, StepRule};
use crate::prox::{lipschitz_estimate, mapping_residual, scaled_prox_subproblem, ProxSpec};
use crate::trace::{Clock, IterRecord, Phase, SolveResult, Status};

/// Composite objective `model + g`.
pub struct CompositeProblem<'a> {
    pub model: &'a dyn Model,
    pub g: ProxSpec,
}

impl CompositeProblem<'_> {
    pub fn value(&self, x: &Array1<f64>) -> Result<f64> {
        let gv = self.g.value(x);
        if !gv.is_finite() {
            return Err(Error::Domain("point violates the constraint set".into()));
        }
        Ok(self.model.value(x)? + gv)
    }

    /// Prox-gradient residual at `x` with step `1 / L` for the local
    /// Hessian's largest eigenvalue `L`.
    pub fn optimality_residual(&self, x: &Array1<f64>) -> Result<f64> {
        let grad = self.model.gradient(x)?;
        let h = self.model.curvature(x)?;
        let s = 1.0 / lipschitz_estimate(&h);
        Ok(mapping_residual(&self.g, x, &grad, s))
    }
}

/// Minimizes `problem` from `x0`.
pub fn minimize_composite(problem: &CompositeProblem<'_>, x0: &Array1<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    let model = problem.model;
    let GscParams { m, nu } = params_for(model, opts.nu_choice)?;
    let threshold = phase2_threshold(nu, Solver::ProxNewton)?;
    let clock = Clock::new(opts.record_time);

    let mut x = x0.clone();
    let mut big_f = problem.value(&x)?;
    let mut evals = 1;
    let mut fallbacks = 0;
    let mut phase = if opts.step_rule == StepRule::Full { Phase::Full } else { Phase::Damped };
    let mut trace = Vec::new();
    let mut status = Status::MaxIter;
    let mut prev_lambda = 1.0f64;

    for k in 0..=opts.max_iter {
        let grad = model.gradient(&x)?;
        let h = model.curvature(&x)?;
        let tol = (prev_lambda * prev_lambda).min(0.1).max(1e-12);
        let sub = scaled_prox_subproblem(&h, &grad, &x, &problem.g, tol, opts.max_inner)?;
        let n = &sub.z - &x;
        let lambda = local_norm(&h, &n)?;
        let beta = m * n.dot(&n).sqrt();
        let step = step_size(nu, m, lambda, beta)?;
        let mut record = IterRecord {
            iter: k,
            phase,
            f: big_f,
            grad_norm: mapping_residual(&problem.g, &x, &grad, sub.step),
            lambda,
            beta,
            d_k: step.d_k,
            tau: step.tau,
            cum_time_s: 0.0,
        };

        if lambda <= opts.eps {
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

        if phase == Phase::Damped {
            let enter = match opts.phase2 {
                Phase2::HeuristicTau(th) => step.tau >= th,
                Phase2::StrictTheorem => {
                    let sigma = smallest_eigenvalue(&h, 1e-8)?.value;
                    threshold.admits(lambda, sigma, m)
                }
                Phase2::Off => false,
            };
            if enter {
                phase = Phase::Full;
                record.phase = phase;
            }
        }

        let mut tau = if phase == Phase::Full { 1.0 } else { step.tau };
        let mut accepted = None;
        for _ in 0..=60 {
            let trial = &x + &(&n * tau);
            evals += 1;
            match problem.value(&trial) {
                Ok(v) => {
                    accepted = Some((trial, v));
                    break;
                }
                Err(Error::OutsideDomain { .. }) => {
                    fallbacks += 1;
                    if phase == Phase::Full && tau == 1.0 && opts.phase2 == Phase2::StrictTheorem {
                        record.phase = Phase::Damped;
                        tau = step.tau;
                    } else {
                        tau *= 0.5;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let Some((x_new, f_new)) = accepted else {
            record.cum_time_s = clock.elapsed();
            trace.push(record);
            status = Status::DomainError;
            break;
        };
        record.tau = tau;
        record.cum_time_s = clock.elapsed();
        trace.push(record);
        x = x_new;
        big_f = f_new;
        prev_lambda = lambda;
    }

    Ok(SolveResult { x, trace, status, f_evals: evals, domain_fallbacks: fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PortfolioModel;
    use ndarray::array;

    #[test]
    fn small_portfolio_stays_on_simplex() {
        let w = array![[1.1, 0.9, 1.0], [0.95, 1.05, 1.2], [1.3, 0.8, 0.9], [0.9, 1.1, 1.0]];
        let model = PortfolioModel::new(w).unwrap();
        let problem = CompositeProblem { model: &model, g: ProxSpec::Simplex };
        let x0 = Array1::from_elem(3, 1.0 / 3.0);
        let r = minimize_composite(&problem, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.x.sum() - 1.0).abs() < 1e-12);
        assert!(r.x.iter().all(|v| *v >= 0.0));
        for w in r.trace.windows(2) {
            assert!(w[1].f <= w[0].f + 1e-12 * (1.0 + w[0].f.abs()));
        }
    }
}
