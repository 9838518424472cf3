//! Damped and two-phase Newton for unconstrained minimization.
//!
//! Each iteration solves the Newton system, computes the decrement
//! `lambda = sqrt(g^T H^{-1} g)` and `beta = M ||n||_2`, and moves by the
//! analytic step from [`crate::kernel::step_size`]. Depending on
//! [`Phase2`] the solver later switches to unit steps. The line-search
//! variants start from 1 and halve, optionally stopping at the analytic
//! step as a floor.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::kernel::{phase2_threshold, step_size, GscParams, Solver};
use crate::linops::{newton_direction, smallest_eigenvalue, InnerOptions};
use crate::models::{params_for, Model, NuChoice};
use crate::trace::{Clock, IterRecord, Phase, SolveResult, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    Analytic,
    /// Armijo backtracking from 1 that never goes below the analytic step.
    LinesearchFloor,
    /// Armijo backtracking from 1 without a floor.
    Backtracking,
    Full,
    /// Same as `Analytic`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase2 {
    /// Switch to unit steps once the analytic step reaches the threshold.
    HeuristicTau(f64),
    /// Switch once the quadratic-convergence region test passes.
    StrictTheorem,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub nu_choice: NuChoice,
    pub step_rule: StepRule,
    pub eps: f64,
    pub max_iter: usize,
    pub phase2: Phase2,
    pub armijo_c1: f64,
    pub inner: InnerOptions,
    /// Iteration budget of the proximal subproblem solver.
    pub max_inner: usize,
    /// Record wall-clock time in traces; off keeps traces reproducible.
    pub record_time: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            nu_choice: NuChoice::Native,
            step_rule: StepRule::Analytic,
            eps: 1e-8,
            max_iter: 500,
            phase2: Phase2::HeuristicTau(0.9),
            armijo_c1: 1e-6,
            inner: InnerOptions::default(),
            max_inner: 100_000,
            record_time: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParams("eps must be positive".into()));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::InvalidParams("armijo_c1 must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Result of a backtracking search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub tau: f64,
    pub f: f64,
    pub evals: usize,
}

/// Halves `tau` from 1 until `f(x + tau n) <= f0 + c1 tau g^T n`.
///
/// With a floor, the first trial below it is replaced by the floor itself,
/// which is accepted without testing. Trial points outside the domain
/// count as failures.
pub fn linesearch_step(
    model: &dyn Model,
    x: &Array1<f64>,
    n: &Array1<f64>,
    f0: f64,
    slope: f64,
    tau_floor: Option<f64>,
    c1: f64,
) -> Result<LineSearch> {
    let mut tau = 1.0;
    let mut evals = 0;
    for _ in 0..80 {
        let floor_hit = matches!(tau_floor, Some(fl) if tau <= fl);
        if floor_hit {
            tau = tau_floor.unwrap();
        }
        let trial = x + &(n * tau);
        evals += 1;
        match model.value(&trial) {
            Ok(f) => {
                if floor_hit || f <= f0 + c1 * tau * slope {
                    return Ok(LineSearch { tau, f, evals });
                }
            }
            Err(Error::OutsideDomain { .. }) if !floor_hit => {}
            Err(e) => return Err(e),
        }
        tau *= 0.5;
    }
    Err(Error::NoConvergence { residual: tau })
}

/// Evaluates `x + tau n`, halving `tau` while the point is infeasible.
fn guarded_step(
    model: &dyn Model,
    x: &Array1<f64>,
    n: &Array1<f64>,
    mut tau: f64,
    evals: &mut usize,
    fallbacks: &mut usize,
) -> Result<Option<(Array1<f64>, f64, f64)>> {
    for _ in 0..=60 {
        let trial = x + &(n * tau);
        *evals += 1;
        match model.value(&trial) {
            Ok(f) => return Ok(Some((trial, f, tau))),
            Err(Error::OutsideDomain { .. }) => {
                *fallbacks += 1;
                tau *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Minimizes `model` from `x0`.
pub fn minimize(model: &dyn Model, x0: &Array1<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    let params = params_for(model, opts.nu_choice)?;
    let GscParams { m, nu } = params;
    let threshold = phase2_threshold(nu, Solver::Newton)?;
    let clock = Clock::new(opts.record_time);

    let mut x = x0.clone();
    let mut f = model.value(&x)?;
    let mut evals = 1;
    let mut fallbacks = 0;
    let mut phase = if opts.step_rule == StepRule::Full { Phase::Full } else { Phase::Damped };
    let mut trace = Vec::new();
    let mut warm: Option<Array1<f64>> = None;
    let mut status = Status::MaxIter;

    for k in 0..=opts.max_iter {
        let g = model.gradient(&x)?;
        let h = model.curvature(&x)?;
        let (n, lambda) = newton_direction(&h, &g, &opts.inner, warm.as_ref())?;
        let beta = m * n.dot(&n).sqrt();
        let step = step_size(nu, m, lambda, beta)?;
        let mut record = IterRecord {
            iter: k,
            phase,
            f,
            grad_norm: g.dot(&g).sqrt(),
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

        let uses_phases = matches!(opts.step_rule, StepRule::Analytic | StepRule::Auto);
        if uses_phases && phase == Phase::Damped {
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

        let (x_new, f_new, tau) = match opts.step_rule {
            StepRule::LinesearchFloor | StepRule::Backtracking => {
                let floor = (opts.step_rule == StepRule::LinesearchFloor).then_some(step.tau);
                let ls = linesearch_step(model, &x, &n, f, -lambda * lambda, floor, opts.armijo_c1)?;
                evals += ls.evals;
                (&x + &(&n * ls.tau), ls.f, ls.tau)
            }
            _ => {
                let tau0 = if phase == Phase::Full { 1.0 } else { step.tau };
                let guarded = if phase == Phase::Full && opts.phase2 == Phase2::StrictTheorem {
                    // A unit step leaving the domain falls back to the damped step.
                    let trial = &x + &n;
                    evals += 1;
                    match model.value(&trial) {
                        Ok(fv) => Some((trial, fv, 1.0)),
                        Err(Error::OutsideDomain { .. }) => {
                            fallbacks += 1;
                            record.phase = Phase::Damped;
                            guarded_step(model, &x, &n, step.tau, &mut evals, &mut fallbacks)?
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    guarded_step(model, &x, &n, tau0, &mut evals, &mut fallbacks)?
                };
                match guarded {
                    Some(s) => s,
                    None => {
                        record.cum_time_s = clock.elapsed();
                        trace.push(record);
                        status = Status::DomainError;
                        break;
                    }
                }
            }
        };
        record.tau = tau;
        record.cum_time_s = clock.elapsed();
        trace.push(record);
        warm = Some(n);
        x = x_new;
        f = f_new;
    }

    Ok(SolveResult { x, trace, status, f_evals: evals, domain_fallbacks: fallbacks })
}

/// Diagnostic for the existence of a minimizer near `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceCheck {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Compares `lambda(x)` with `2 sigma_min^((3-nu)/2) / ((4-nu) M)`.
pub fn existence_check(model: &dyn Model, x: &Array1<f64>) -> Result<ExistenceCheck> {
    let GscParams { m, nu } = model.gsc_params();
    let g = model.gradient(x)?;
    let h = model.curvature(x)?;
    let lhs = match newton_direction(&h, &g, &InnerOptions::default(), None) {
        Ok((_, l)) => l,
        Err(Error::NotPositiveDefinite) => {
            return Ok(ExistenceCheck { satisfied: false, lhs: f64::NAN, rhs: 0.0 })
        }
        Err(e) => return Err(e),
    };
    if m == 0.0 {
        return Ok(ExistenceCheck { satisfied: true, lhs, rhs: f64::INFINITY });
    }
    let sigma_term = if nu == 3.0 { 1.0 } else { smallest_eigenvalue(&h, 1e-10)?.value.powf((3.0 - nu) / 2.0) };
    let rhs = 2.0 * sigma_term / ((4.0 - nu) * m);
    Ok(ExistenceCheck { satisfied: lhs < rhs, lhs, rhs })
}
