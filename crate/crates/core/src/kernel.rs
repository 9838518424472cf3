//! Scalar kernels of generalized self-concordance.
//!
//! Every function here is pure. The `omega*` family bounds local norms,
//! gradients and function values along a segment in terms of the
//! distance-like quantity returned by [`d_nu`]. The parameter calculus
//! (`combine_sum`, `transform_affine`, `reparam`, `conjugate_params`) maps
//! certified `(M, nu)` pairs through the usual constructions.
//!
//! Near zero the closed forms are ratios of vanishing quantities, so
//! `omega` and `r_nu` switch to their power series there. The remaining
//! kernels are written with `expm1`/`ln_1p` and stay accurate without one.

use crate::error::{Error, Result};

/// Self-concordance constant `m` together with the order `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GscParams {
    pub m: f64,
    pub nu: f64,
}

impl GscParams {
    pub fn new(m: f64, nu: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidParams(format!("M must be finite and >= 0, got {m}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParams(format!("nu must be positive, got {nu}")));
        }
        Ok(Self { m, nu })
    }

    /// Solvers only handle orders in `[2, 3]`.
    pub fn require_solver_order(&self) -> Result<()> {
        if (2.0..=3.0).contains(&self.nu) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "solvers require nu in [2, 3], got {}",
                self.nu
            )))
        }
    }
}

/// Series are used while `|tau| * max(1, growth rate)` stays below this.
const SERIES_RADIUS: f64 = 0.25;
const SERIES_MAX_TERMS: usize = 400;

fn check_order(nu: f64) -> Result<()> {
    if nu >= 2.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernels are defined for nu >= 2, got {nu}")))
    }
}

fn check_arg(nu: f64, tau: f64) -> Result<()> {
    check_order(nu)?;
    if !tau.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {tau}")));
    }
    if nu > 2.0 && tau >= 1.0 {
        return Err(Error::Domain(format!("argument {tau} >= 1 for nu = {nu}")));
    }
    Ok(())
}

/// Exponent `2 / (nu - 2)` shared by the `nu > 2` branches.
fn growth(nu: f64) -> f64 {
    2.0 / (nu - 2.0)
}

/// Sums `sum_k c_k tau^k / ((k+1)(k+2))` where `c_k` are the Taylor
/// coefficients of `omega_bar_bar`.
fn omega_series(nu: f64, tau: f64) -> f64 {
    let a = if nu == 2.0 { f64::INFINITY } else { growth(nu) };
    let mut c = 1.0;
    let mut pow = 1.0;
    let mut sum = 0.5;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        c *= if a.is_infinite() { 1.0 / (kf + 1.0) } else { (a + kf) / (kf + 1.0) };
        pow *= tau;
        let term = c * pow / ((kf + 2.0) * (kf + 3.0));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Local-norm bound: `e^tau` for `nu = 2`, `(1 - tau)^(-2/(nu-2))` otherwise.
pub fn omega_bar_bar(nu: f64, tau: f64) -> Result<f64> {
    check_arg(nu, tau)?;
    if nu == 2.0 {
        return Ok(tau.exp());
    }
    Ok((-growth(nu) * (-tau).ln_1p()).exp())
}

/// Gradient bound, the mean of [`omega_bar_bar`] over `[0, tau]`.
pub fn omega_bar(nu: f64, tau: f64) -> Result<f64> {
    check_arg(nu, tau)?;
    if tau == 0.0 {
        return Ok(1.0);
    }
    if nu == 2.0 {
        return Ok(tau.exp_m1() / tau);
    }
    let l = (-tau).ln_1p();
    let b = (nu - 4.0) / (nu - 2.0);
    if b == 0.0 {
        return Ok(-l / tau);
    }
    Ok(-(b * l).exp_m1() / (b * tau))
}

/// Function-value bound, `int_0^1 t * omega_bar(t * tau) dt`.
pub fn omega(nu: f64, tau: f64) -> Result<f64> {
    check_arg(nu, tau)?;
    let scale = if nu == 2.0 { 1.0 } else { growth(nu).max(1.0) };
    if tau.abs() * scale <= SERIES_RADIUS {
        return Ok(omega_series(nu, tau));
    }
    if nu == 2.0 {
        return Ok((tau.exp_m1() - tau) / (tau * tau));
    }
    let l = (-tau).ln_1p();
    if nu == 3.0 {
        return Ok((-tau - l) / (tau * tau));
    }
    if nu == 4.0 {
        return Ok(((1.0 - tau) * l + tau) / (tau * tau));
    }
    let a = growth(nu);
    let e = 2.0 - a;
    let inner = -(e * l).exp_m1() / (e * tau);
    Ok((inner - 1.0) / ((a - 1.0) * tau))
}

/// Lower and upper bounds on the averaged Hessian along a segment of
/// length `t`.
pub fn kappa_bounds(nu: f64, t: f64) -> Result<(f64, f64)> {
    check_arg(nu, t)?;
    if t < 0.0 {
        return Err(Error::Domain(format!("kappa bounds need t >= 0, got {t}")));
    }
    let upper = omega_bar(nu, t)?;
    if t == 0.0 {
        return Ok((1.0, upper));
    }
    let lower = if nu == 2.0 {
        -(-t).exp_m1() / t
    } else {
        let c = nu / (nu - 2.0);
        -(c * (-t).ln_1p()).exp_m1() / (c * t)
    };
    Ok((lower, upper))
}

/// Contraction factor of the quadratic-convergence analysis.
///
/// For `nu = 3` this equals `1 / (1 - t)`.
pub fn r_nu(nu: f64, t: f64) -> Result<f64> {
    if !(2.0..=3.0).contains(&nu) {
        return Err(Error::Domain(format!("r_nu needs nu in [2, 3], got {nu}")));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("r_nu needs t in [0, 1), got {t}")));
    }
    if nu == 2.0 {
        return Ok((1.5 + t / 3.0) * t.exp());
    }
    let r = (4.0 - nu) / (nu - 2.0);
    if t * r.max(1.0) <= SERIES_RADIUS {
        let mut term = (r + 1.0) / 2.0;
        let mut sum = term;
        for j in 0..SERIES_MAX_TERMS {
            let jf = j as f64;
            term *= t * (r + jf + 2.0) / (jf + 3.0);
            sum += term;
            if term.abs() <= 1e-18 * sum {
                break;
            }
        }
        return Ok(sum);
    }
    let l = (-t).ln_1p();
    Ok(((-r * l).exp_m1() - r * t) / (r * t * t))
}

/// Distance between two points measured in the self-concordance geometry.
///
/// `dist2` is the Euclidean distance, `distx` the local-norm distance.
pub fn d_nu(nu: f64, m: f64, dist2: f64, distx: f64) -> f64 {
    if nu == 2.0 {
        return m * dist2;
    }
    if dist2 == 0.0 && distx == 0.0 {
        return 0.0;
    }
    (nu / 2.0 - 1.0) * m * dist2.powf(3.0 - nu) * distx.powf(nu - 2.0)
}

/// Analytic damped step and the quantity it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub tau: f64,
    pub d_k: f64,
}

/// Damped Newton step for decrement `lambda` and scaled direction length
/// `beta = M * ||n||_2`.
pub fn step_size(nu: f64, m: f64, lambda: f64, beta: f64) -> Result<Step> {
    if !(2.0..=3.0).contains(&nu) {
        return Err(Error::Domain(format!("step size needs nu in [2, 3], got {nu}")));
    }
    if !(lambda > 0.0) {
        return Ok(Step { tau: 1.0, d_k: 0.0 });
    }
    if nu == 2.0 {
        if beta <= 1e-14 {
            return Ok(Step { tau: 1.0, d_k: beta });
        }
        return Ok(Step { tau: beta.ln_1p() / beta, d_k: beta });
    }
    let d = (nu / 2.0 - 1.0) * m.powf(nu - 2.0) * lambda.powf(nu - 2.0) * beta.powf(3.0 - nu);
    if d <= 1e-14 {
        return Ok(Step { tau: 1.0, d_k: d });
    }
    let k = (4.0 - nu) / (nu - 2.0);
    let tau = -(-(k * d).ln_1p() / k).exp_m1() / d;
    Ok(Step { tau: tau.min(1.0), d_k: d })
}

/// Guaranteed decrease `lambda^2 tau - omega(tau d) tau^2 lambda^2`.
pub fn descent_estimate(nu: f64, lambda: f64, d_k: f64, tau: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let l2 = lambda * lambda;
    Ok(l2 * tau - omega(nu, tau * d_k)? * tau * tau * l2)
}

/// Parameters of a weighted sum `sum_i w_i f_i`.
pub fn combine_sum(parts: &[(GscParams, f64)]) -> Result<GscParams> {
    let Some((first, _)) = parts.first() else {
        return Err(Error::InvalidParams("empty sum".into()));
    };
    let nu = first.nu;
    if nu < 2.0 {
        return Err(Error::InvalidParams(format!("sum rule needs nu >= 2, got {nu}")));
    }
    let mut m = 0.0f64;
    for (p, w) in parts {
        if (p.nu - nu).abs() > 1e-12 * nu {
            return Err(Error::InvalidParams(format!(
                "mismatched orders {} and {}",
                nu, p.nu
            )));
        }
        if !(*w > 0.0) {
            return Err(Error::InvalidParams(format!("weights must be positive, got {w}")));
        }
        m = m.max(w.powf(1.0 - nu / 2.0) * p.m);
    }
    GscParams::new(m, nu)
}

/// Parameters of `x -> f(Ax + b)` given `||A||` and `lambda_min(A^T A)`.
pub fn transform_affine(p: GscParams, op_norm_a: f64, lam_min_ata: f64) -> Result<GscParams> {
    if p.nu <= 3.0 {
        return GscParams::new(p.m * op_norm_a.powf(3.0 - p.nu), p.nu);
    }
    if !(lam_min_ata > 0.0) {
        return Err(Error::InvalidParams(
            "nu > 3 needs A^T A positive definite".into(),
        ));
    }
    GscParams::new(p.m * lam_min_ata.powf((3.0 - p.nu) / 2.0), p.nu)
}

/// Extra curvature information used to change the order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reparam {
    /// Strong convexity modulus; maps to order 3.
    StrongConvexity(f64),
    /// Lipschitz constant of the gradient; maps to order 2.
    LipschitzGradient(f64),
}

pub fn reparam(p: GscParams, mode: Reparam) -> Result<GscParams> {
    match mode {
        Reparam::StrongConvexity(mu) => {
            if !(p.nu > 0.0 && p.nu <= 3.0) {
                return Err(Error::InvalidParams(format!(
                    "strong convexity reparameterization needs nu in (0, 3], got {}",
                    p.nu
                )));
            }
            if !(mu > 0.0) {
                return Err(Error::InvalidParams(format!("modulus must be positive, got {mu}")));
            }
            GscParams::new(p.m / mu.powf((3.0 - p.nu) / 2.0), 3.0)
        }
        Reparam::LipschitzGradient(l) => {
            if p.nu < 2.0 {
                return Err(Error::InvalidParams(format!(
                    "Lipschitz reparameterization needs nu >= 2, got {}",
                    p.nu
                )));
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParams(format!("Lipschitz constant must be positive, got {l}")));
            }
            GscParams::new(p.m * l.powf(p.nu / 2.0 - 1.0), 2.0)
        }
    }
}

/// Parameters of the Fenchel conjugate in dimension `dim`.
pub fn conjugate_params(p: GscParams, dim: usize) -> Result<GscParams> {
    let ok = if dim == 1 {
        p.nu > 0.0 && p.nu < 6.0
    } else {
        (3.0..6.0).contains(&p.nu)
    };
    if dim == 0 || !ok {
        return Err(Error::InvalidParams(format!(
            "conjugate rule does not cover nu = {} in dimension {dim}",
            p.nu
        )));
    }
    GscParams::new(p.m, 6.0 - p.nu)
}

/// Printed quadratic-region constant for Newton with `nu = 2`.
pub const NEWTON_D2: f64 = 0.12964;
/// Printed quadratic-region constant for proximal Newton with `nu = 2`.
pub const PROX_NEWTON_D2: f64 = 0.35482;
/// Printed quadratic-region constant for proximal Newton with `nu = 3`.
pub const PROX_NEWTON_D3: f64 = 0.20943;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Newton,
    ProxNewton,
}

/// Entry test for the full-step phase:
/// `sigma_min^(-sigma_exponent) * lambda < bound / M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase2Threshold {
    pub d_star: f64,
    pub sigma_exponent: f64,
    pub bound: f64,
}

impl Phase2Threshold {
    pub fn admits(&self, lambda: f64, sigma_min: f64, m: f64) -> bool {
        if m == 0.0 {
            return true;
        }
        let scaled = if self.sigma_exponent == 0.0 {
            lambda
        } else {
            if !(sigma_min > 0.0) {
                return false;
            }
            sigma_min.powf(-self.sigma_exponent) * lambda
        };
        scaled < self.bound / m
    }
}

const BISECTION_TOL: f64 = 1e-10;

/// Root of an increasing function on `[lo, hi]` by bisection.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `(nu - 2) R(d) = 4 (1 - d)^((4-nu)/(nu-2))`, or of
/// `R(d) e^d = 2` at `nu = 2`.
pub fn newton_region_root(nu: f64) -> Result<f64> {
    if !(2.0..=3.0).contains(&nu) {
        return Err(Error::Domain(format!("threshold needs nu in [2, 3], got {nu}")));
    }
    if nu == 2.0 {
        return Ok(bisect_increasing(
            |d| r_nu(2.0, d).unwrap() * d.exp() - 2.0,
            1e-8,
            1.0 - 1e-8,
            BISECTION_TOL,
        ));
    }
    let e = (4.0 - nu) / (nu - 2.0);
    Ok(bisect_increasing(
        |d| (nu - 2.0) * r_nu(nu, d).unwrap() - 4.0 * (1.0 - d).powf(e),
        1e-8,
        1.0 - 1e-8,
        BISECTION_TOL,
    ))
}

/// Root of the proximal-Newton contraction equation. At `nu = 2` this is
/// `R(d) e^d / (2 - e^d) = 2`, which does not reproduce [`PROX_NEWTON_D2`].
pub fn prox_region_root(nu: f64) -> Result<f64> {
    if !(2.0..=3.0).contains(&nu) {
        return Err(Error::Domain(format!("threshold needs nu in [2, 3], got {nu}")));
    }
    if nu == 2.0 {
        let pole = 2f64.ln();
        return Ok(bisect_increasing(
            |d| r_nu(2.0, d).unwrap() * d.exp() / (2.0 - d.exp()) - 2.0,
            1e-8,
            pole - 1e-12,
            BISECTION_TOL,
        ));
    }
    let g = growth(nu);
    let e = (4.0 - nu) / (nu - 2.0);
    let pole = 1.0 - 0.5f64.powf((nu - 2.0) / 2.0);
    Ok(bisect_increasing(
        |d| {
            let den = 2.0 - (1.0 - d).powf(-g);
            (nu / 2.0 - 1.0) * r_nu(nu, d).unwrap() * (1.0 - d).powf(-e) / den - 2.0
        },
        1e-8,
        pole - 1e-12,
        BISECTION_TOL,
    ))
}

/// Constants and entry rule of the full-step phase.
pub fn phase2_threshold(nu: f64, solver: Solver) -> Result<Phase2Threshold> {
    if !(2.0..=3.0).contains(&nu) {
        return Err(Error::Domain(format!("threshold needs nu in [2, 3], got {nu}")));
    }
    let sigma_exponent = (3.0 - nu) / 2.0;
    let th = match solver {
        Solver::Newton => {
            if nu == 2.0 {
                Phase2Threshold { d_star: NEWTON_D2, sigma_exponent, bound: NEWTON_D2 }
            } else if nu == 3.0 {
                Phase2Threshold { d_star: 0.5, sigma_exponent, bound: 0.5 }
            } else {
                let d = newton_region_root(nu)?;
                Phase2Threshold { d_star: d, sigma_exponent, bound: (2.0 * d / (nu - 2.0)).min(0.5) }
            }
        }
        Solver::ProxNewton => {
            if nu == 2.0 {
                Phase2Threshold { d_star: PROX_NEWTON_D2, sigma_exponent, bound: PROX_NEWTON_D2 }
            } else if nu == 3.0 {
                Phase2Threshold { d_star: PROX_NEWTON_D3, sigma_exponent, bound: 2.0 * PROX_NEWTON_D3 }
            } else {
                let d = prox_region_root(nu)?;
                Phase2Threshold { d_star: d, sigma_exponent, bound: (2.0 * d / (nu - 2.0)).min(0.5) }
            }
        }
    };
    Ok(th)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_examples() {
        let e = std::f64::consts::E;
        assert_relative_eq!(omega(2.0, 1.0).unwrap(), e - 2.0, max_relative = 1e-14);
        assert_relative_eq!(omega(3.0, 0.5).unwrap(), (-0.5 - 0.5f64.ln()) / 0.25, max_relative = 1e-14);
        assert_relative_eq!(omega_bar(2.0, 1.0).unwrap(), e - 1.0, max_relative = 1e-14);
        assert_relative_eq!(omega_bar(4.0, 0.5).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(omega_bar_bar(2.0, 0.3).unwrap(), 0.3f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(omega_bar_bar(3.0, 0.5).unwrap(), 4.0, max_relative = 1e-15);
        for nu in [2.0, 2.5, 3.0, 4.0] {
            assert_eq!(omega(nu, 0.0).unwrap(), 0.5);
            assert_eq!(omega_bar(nu, 0.0).unwrap(), 1.0);
            assert_eq!(omega_bar_bar(nu, 0.0).unwrap(), 1.0);
            assert_eq!(kappa_bounds(nu, 0.0).unwrap(), (1.0, 1.0));
        }
    }

    #[test]
    fn kappa_examples() {
        let (lo, hi) = kappa_bounds(2.0, 1.0).unwrap();
        assert_relative_eq!(lo, 1.0 - (-1f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(hi, std::f64::consts::E - 1.0, max_relative = 1e-14);
        let (lo, hi) = kappa_bounds(4.0, 0.5).unwrap();
        assert_relative_eq!(lo, 0.75, max_relative = 1e-14);
        assert_relative_eq!(hi, 2.0 * 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(omega(3.0, 1.0).is_err());
        assert!(omega_bar(2.5, 1.5).is_err());
        assert!(omega_bar_bar(4.0, 1.0).is_err());
        assert!(kappa_bounds(3.0, 1.0).is_err());
        assert!(r_nu(2.5, 1.0).is_err());
        assert!(omega(1.5, 0.1).is_err());
        assert!(omega(2.0, 5.0).is_ok());
    }

    #[test]
    fn r_nu_examples() {
        assert_eq!(r_nu(2.0, 0.0).unwrap(), 1.5);
        assert_relative_eq!(r_nu(3.0, 0.5).unwrap(), 2.0, max_relative = 1e-14);
        for t in [0.01, 0.1, 0.3, 0.7, 0.95] {
            assert_relative_eq!(r_nu(3.0, t).unwrap(), 1.0 / (1.0 - t), max_relative = 1e-13);
        }
        let v = r_nu(2.0, 0.12964).unwrap() * 0.12964f64.exp();
        assert!((v - 2.0).abs() < 1e-3);
    }

    #[test]
    fn d_nu_examples() {
        assert_eq!(d_nu(2.0, 1.0, 0.3, 5.0), 0.3);
        assert_relative_eq!(d_nu(3.0, 2.0, 7.0, 0.4), 0.4, max_relative = 1e-15);
        assert_relative_eq!(d_nu(2.5, 1.0, 1.0, 1.0), 0.25, max_relative = 1e-15);
        assert_eq!(d_nu(2.5, 1.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn step_examples() {
        let s = step_size(2.0, 3.0, 0.7, 1.0).unwrap();
        assert_relative_eq!(s.tau, 2f64.ln(), max_relative = 1e-15);
        let s = step_size(3.0, 1.0, 1.0, 123.0).unwrap();
        assert_relative_eq!(s.d_k, 0.5, max_relative = 1e-15);
        assert_relative_eq!(s.tau, 2.0 / 3.0, max_relative = 1e-14);
        let s = step_size(2.5, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.d_k, 0.25, max_relative = 1e-15);
        assert_relative_eq!(s.tau, 4.0 * (1.0 - 1.75f64.powf(-1.0 / 3.0)), max_relative = 1e-14);
        assert!((s.tau - 0.680694).abs() < 1e-6);
        assert_eq!(step_size(2.0, 1.0, 0.0, 0.0).unwrap().tau, 1.0);
        assert_eq!(step_size(2.5, 0.0, 1.0, 0.0).unwrap().tau, 1.0);
    }

    #[test]
    fn descent_examples() {
        let d = descent_estimate(2.0, 1.0, 1.0, 2f64.ln()).unwrap();
        assert_relative_eq!(d, 2.0 * 2f64.ln() - 1.0, max_relative = 1e-13);
        assert_eq!(descent_estimate(2.5, 0.0, 0.3, 0.5).unwrap(), 0.0);
        // nu = 3, lambda = 1, M = 1: d = 0.5, tau = 2/3.
        let s = step_size(3.0, 1.0, 1.0, 1.0).unwrap();
        let d = descent_estimate(3.0, 1.0, s.d_k, s.tau).unwrap();
        let closed = 2.0 / 3.0 + 4.0 * (1.0 / 3.0 - 1.5f64.ln());
        assert_relative_eq!(d, closed, max_relative = 1e-13);
        assert!((d - 0.378140).abs() < 1e-6);
    }

    #[test]
    fn calculus_examples() {
        let p = |m, nu| GscParams::new(m, nu).unwrap();
        assert_eq!(combine_sum(&[(p(1.0, 2.0), 10.0), (p(2.0, 2.0), 0.1)]).unwrap().m, 2.0);
        assert_relative_eq!(combine_sum(&[(p(2.0, 3.0), 4.0)]).unwrap().m, 1.0);
        assert_relative_eq!(combine_sum(&[(p(1.0, 3.0), 1.0), (p(3.0, 3.0), 9.0)]).unwrap().m, 1.0);
        assert!(combine_sum(&[(p(1.0, 3.0), 1.0), (p(1.0, 2.0), 1.0)]).is_err());
        assert!(combine_sum(&[(p(1.0, 1.5), 1.0)]).is_err());

        assert_relative_eq!(transform_affine(p(1.0, 2.0), 3.0, 0.0).unwrap().m, 3.0);
        assert_eq!(transform_affine(p(1.7, 3.0), 9.0, 0.0).unwrap().m, 1.7);
        assert_relative_eq!(transform_affine(p(1.0, 4.0), 0.0, 4.0).unwrap().m, 0.5);
        assert!(transform_affine(p(1.0, 4.0), 1.0, 0.0).is_err());

        let r = reparam(p(1.0, 2.0), Reparam::StrongConvexity(1e-5)).unwrap();
        assert_relative_eq!(r.m, 316.2277660168379, max_relative = 1e-12);
        assert_eq!(r.nu, 3.0);
        assert_eq!(reparam(p(1.3, 3.0), Reparam::StrongConvexity(0.2)).unwrap(), p(1.3, 3.0));
        assert_eq!(reparam(p(2.0, 2.0), Reparam::LipschitzGradient(4.0)).unwrap(), p(2.0, 2.0));
        assert!(reparam(p(1.0, 4.0), Reparam::StrongConvexity(1.0)).is_err());
        assert!(reparam(p(1.0, 1.0), Reparam::LipschitzGradient(1.0)).is_err());

        assert_eq!(conjugate_params(p(1.1, 3.0), 7).unwrap(), p(1.1, 3.0));
        assert_eq!(conjugate_params(p(1.0, 4.0), 5).unwrap(), p(1.0, 2.0));
        assert!(conjugate_params(p(1.0, 2.0), 2).is_err());
        assert_eq!(conjugate_params(p(1.0, 2.0), 1).unwrap(), p(1.0, 4.0));
    }

    #[test]
    fn thresholds() {
        let d3 = prox_region_root(3.0).unwrap();
        assert!((d3 - (1.0 - (5.0f64 / 8.0).sqrt())).abs() < 1e-9);
        assert!((d3 - PROX_NEWTON_D3).abs() < 5e-5);
        let d2 = newton_region_root(2.0).unwrap();
        assert!((d2 - NEWTON_D2).abs() < 5e-5);
        assert!((newton_region_root(3.0).unwrap() - 0.5).abs() < 1e-9);
        let th = phase2_threshold(3.0, Solver::Newton).unwrap();
        assert!(th.admits(0.49, 123.0, 1.0));
        assert!(!th.admits(0.51, 123.0, 1.0));
        let th = phase2_threshold(2.0, Solver::Newton).unwrap();
        assert!(th.admits(0.1, 1.0, 1.0));
        assert!(!th.admits(0.1, 0.25, 1.0));
        for nu in [2.2, 2.5, 2.8] {
            let th = phase2_threshold(nu, Solver::Newton).unwrap();
            assert!(th.d_star > 0.0 && th.d_star < 1.0);
            let th = phase2_threshold(nu, Solver::ProxNewton).unwrap();
            assert!(th.d_star > 0.0 && th.d_star < 1.0 - 0.5f64.powf((nu - 2.0) / 2.0));
        }
    }
}
