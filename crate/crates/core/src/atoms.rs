//! Univariate loss atoms with analytic derivatives up to third order.

use crate::error::{Error, Result};
use crate::kernel::GscParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingVariant {
    /// `gamma * ln cosh(t / gamma)`
    LogSumExp,
    /// `sqrt(t^2 + gamma^2) - gamma`
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossAtom {
    /// `ln(1 + e^{-t})`
    Logistic,
    /// `e^{-t}`
    Exponential,
    /// `t^{-q}` on `t > 0`
    NegPower { q: f64 },
    /// `t ln t` on `t > 0`
    Entropy,
    /// `-ln t` on `t > 0`
    LogBarrier,
    /// `t ln t - ln t` on `t > 0`
    EntropyBarrier,
    /// `t^q` on `t > 0`, `1 < q < 2`
    PositivePower { q: f64 },
    SmoothedL1 { gamma: f64, variant: SmoothingVariant },
    /// `gamma ln cosh((1 - t) / gamma) + (1 - t) / 2`
    SmoothedHinge { gamma: f64 },
}

/// `sigma(t) = 1 / (1 + e^{-t})` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `gamma ln cosh(u)` written as `gamma(|u| + ln1p(e^{-2|u|}) - ln 2)`,
/// with `tanh(u)` and `sech^2(u)`.
fn log_cosh_parts(u: f64) -> (f64, f64, f64) {
    let e = (-2.0 * u.abs()).exp();
    let lc = u.abs() + e.ln_1p() - std::f64::consts::LN_2;
    let th = (1.0 - e) / (1.0 + e) * u.signum();
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    (lc, th, sech2)
}

impl LossAtom {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LossAtom::NegPower { q } => q > 0.0 && q.is_finite(),
            LossAtom::PositivePower { q } => q > 1.0 && q < 2.0,
            LossAtom::SmoothedL1 { gamma, .. } | LossAtom::SmoothedHinge { gamma } => {
                gamma > 0.0 && gamma.is_finite()
            }
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid atom parameters: {self:?}")))
        }
    }

    /// Open domain `(lower, upper)`.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            LossAtom::Logistic
            | LossAtom::Exponential
            | LossAtom::SmoothedL1 { .. }
            | LossAtom::SmoothedHinge { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.domain();
        t > lo && t < hi
    }

    /// Interval on which the certificate is checked by default.
    pub fn representative_interval(&self) -> (f64, f64) {
        match self {
            LossAtom::Logistic => (-20.0, 20.0),
            LossAtom::Exponential => (-5.0, 5.0),
            LossAtom::SmoothedL1 { gamma, .. } | LossAtom::SmoothedHinge { gamma } => {
                (-20.0 * gamma - 1.0, 20.0 * gamma + 2.0)
            }
            _ => (0.01, 100.0),
        }
    }

    /// Certified `(M, nu)`.
    pub fn params(&self) -> GscParams {
        let (m, nu) = match *self {
            LossAtom::Logistic | LossAtom::Exponential => (1.0, 2.0),
            LossAtom::NegPower { q } => (
                (q + 2.0) / (q * (q + 1.0)).powf(1.0 / (q + 2.0)),
                2.0 * (q + 3.0) / (q + 2.0),
            ),
            LossAtom::Entropy => (1.0, 4.0),
            LossAtom::LogBarrier | LossAtom::EntropyBarrier => (2.0, 3.0),
            LossAtom::PositivePower { q } => (
                (2.0 - q) / (q * (q - 1.0)).powf(1.0 / (2.0 - q)),
                2.0 * (3.0 - q) / (2.0 - q),
            ),
            LossAtom::SmoothedL1 { gamma, variant: SmoothingVariant::LogSumExp } => (2.0 / gamma, 2.0),
            LossAtom::SmoothedL1 { gamma, variant: SmoothingVariant::Sqrt } => {
                (3.0 * gamma.powf(-2.0 / 3.0), 8.0 / 3.0)
            }
            // |phi'''| / phi'' = 2 |tanh((1 - t) / gamma)| / gamma.
            LossAtom::SmoothedHinge { gamma } => (2.0 / gamma, 2.0),
        };
        GscParams { m, nu }
    }

    /// `sup phi''` over the domain when finite.
    pub fn sup_second_derivative(&self) -> Option<f64> {
        match *self {
            LossAtom::Logistic => Some(0.25),
            LossAtom::SmoothedL1 { gamma, .. } | LossAtom::SmoothedHinge { gamma } => Some(1.0 / gamma),
            _ => None,
        }
    }

    /// Closed range of `phi'` as `(inf, sup)`.
    fn derivative_range(&self) -> (f64, f64) {
        match self {
            LossAtom::Logistic => (-1.0, 0.0),
            LossAtom::Exponential | LossAtom::NegPower { .. } | LossAtom::LogBarrier => {
                (f64::NEG_INFINITY, 0.0)
            }
            LossAtom::Entropy | LossAtom::EntropyBarrier => (f64::NEG_INFINITY, f64::INFINITY),
            LossAtom::PositivePower { .. } => (0.0, f64::INFINITY),
            LossAtom::SmoothedL1 { .. } => (-1.0, 1.0),
            LossAtom::SmoothedHinge { .. } => (-1.5, 0.5),
        }
    }

    /// `(phi, phi', phi'', phi''')` at `t`.
    pub fn derivatives(&self, t: f64) -> Result<[f64; 4]> {
        if !self.contains(t) {
            return Err(Error::Domain(format!("{t} outside the domain of {self:?}")));
        }
        let d = match *self {
            LossAtom::Logistic => {
                let s = sigmoid(t);
                let sc = sigmoid(-t);
                let v = (-t).max(0.0) + (-t.abs()).exp().ln_1p();
                let h = s * sc;
                [v, -sc, h, h * (sc - s)]
            }
            LossAtom::Exponential => {
                let e = (-t).exp();
                [e, -e, e, -e]
            }
            LossAtom::NegPower { q } => {
                let v = t.powf(-q);
                [v, -q * v / t, q * (q + 1.0) * v / (t * t), -q * (q + 1.0) * (q + 2.0) * v / (t * t * t)]
            }
            LossAtom::Entropy => [t * t.ln(), t.ln() + 1.0, 1.0 / t, -1.0 / (t * t)],
            LossAtom::LogBarrier => [-t.ln(), -1.0 / t, 1.0 / (t * t), -2.0 / (t * t * t)],
            LossAtom::EntropyBarrier => {
                let l = t.ln();
                [
                    t * l - l,
                    l + 1.0 - 1.0 / t,
                    1.0 / t + 1.0 / (t * t),
                    -1.0 / (t * t) - 2.0 / (t * t * t),
                ]
            }
            LossAtom::PositivePower { q } => {
                let v = t.powf(q);
                [v, q * v / t, q * (q - 1.0) * v / (t * t), q * (q - 1.0) * (q - 2.0) * v / (t * t * t)]
            }
            LossAtom::SmoothedL1 { gamma, variant: SmoothingVariant::LogSumExp } => {
                let (lc, th, s2) = log_cosh_parts(t / gamma);
                [gamma * lc, th, s2 / gamma, -2.0 * th * s2 / (gamma * gamma)]
            }
            LossAtom::SmoothedL1 { gamma, variant: SmoothingVariant::Sqrt } => {
                let r = t.hypot(gamma);
                let r3 = r * r * r;
                [r - gamma, t / r, gamma * gamma / r3, -3.0 * gamma * gamma * t / (r3 * r * r)]
            }
            LossAtom::SmoothedHinge { gamma } => {
                let u = (1.0 - t) / gamma;
                let (lc, th, s2) = log_cosh_parts(u);
                [gamma * lc + 0.5 * (1.0 - t), -th - 0.5, s2 / gamma, 2.0 * th * s2 / (gamma * gamma)]
            }
        };
        Ok(d)
    }

    /// Derivative of the given order (0 to 3).
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidParams(format!("derivative order {order} not available")));
        }
        Ok(self.derivatives(t)?[order])
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.eval(t, 0)
    }

    /// Largest `|phi'''| / phi''^(nu/2)` on a uniform grid over `interval`,
    /// with `0/0` counted as 0.
    pub fn gsc_certificate(&self, interval: (f64, f64), samples: usize) -> Result<f64> {
        let (lo, hi) = interval;
        if samples < 2 || !(lo < hi) {
            return Err(Error::InvalidParams("certificate needs a nonempty grid".into()));
        }
        if !self.contains(lo) || !self.contains(hi) {
            return Err(Error::Domain(format!("interval [{lo}, {hi}] leaves the domain")));
        }
        let nu = self.params().nu;
        let mut worst = 0.0f64;
        for i in 0..samples {
            let t = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let d = self.derivatives(t)?;
            let num = d[3].abs();
            let den = d[2].powf(nu / 2.0);
            let ratio = if num == 0.0 { 0.0 } else { num / den };
            worst = worst.max(ratio);
        }
        Ok(worst)
    }

    /// Fenchel conjugate `sup_u { t u - phi(u) }` by solving `phi'(u) = t`.
    pub fn numeric_conjugate(&self, t: f64, tol: f64) -> Result<f64> {
        let (glo, ghi) = self.derivative_range();
        if !t.is_finite() || t < glo || t > ghi {
            return Err(Error::Unbounded);
        }
        let (dlo, dhi) = self.domain();
        let positive = dlo == 0.0;
        let objective = |u: f64| -> Result<f64> { Ok(t * u - self.value(u)?) };
        let slope = |u: f64| -> Result<f64> { Ok(self.eval(u, 1)? - t) };

        if t == glo || t == ghi {
            // The supremum is approached at an end of the domain.
            let toward_hi = t == ghi;
            let mut u = if positive { 1.0 } else { 0.0 };
            let mut prev = objective(u)?;
            for k in 0..2000 {
                u = match (positive, toward_hi) {
                    (true, true) => u * 2.0,
                    (true, false) => u * 0.5,
                    (false, true) => u + 2f64.powi(k.min(60)),
                    (false, false) => u - 2f64.powi(k.min(60)),
                };
                if !(u > dlo && u < dhi) || !u.is_finite() {
                    break;
                }
                let v = objective(u)?;
                if (v - prev).abs() <= tol {
                    return Ok(v);
                }
                prev = v;
            }
            return Err(Error::Unbounded);
        }

        // Bracket the root of the increasing function `slope`.
        let start = if positive { 1.0 } else { 0.0 };
        let (mut lo, mut hi);
        let g0 = slope(start)?;
        if g0 == 0.0 {
            return objective(start);
        }
        if g0 < 0.0 {
            lo = start;
            hi = start;
            let mut step = 1.0;
            loop {
                hi = if positive { hi * 2.0 } else { hi + step };
                step *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Unbounded);
                }
                if slope(hi)? >= 0.0 {
                    break;
                }
                lo = hi;
            }
        } else {
            lo = start;
            hi = start;
            let mut step = 1.0;
            loop {
                lo = if positive { lo * 0.5 } else { lo - step };
                step *= 2.0;
                if !lo.is_finite() || (positive && lo == 0.0) {
                    return Err(Error::Unbounded);
                }
                if slope(lo)? <= 0.0 {
                    break;
                }
                hi = lo;
            }
        }

        // Safeguarded Newton on the bracket.
        let mut u = 0.5 * (lo + hi);
        for _ in 0..500 {
            let d = self.derivatives(u)?;
            let g = d[1] - t;
            if g.abs() <= 1e-3 * tol {
                break;
            }
            if g < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= tol * 1e-3 * (1.0 + u.abs()) {
                break;
            }
            let newton = if d[2] > 0.0 { u - g / d[2] } else { f64::NAN };
            u = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        objective(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logistic_at_zero() {
        let d = LossAtom::Logistic.derivatives(0.0).unwrap();
        assert_relative_eq!(d[0], 2f64.ln(), max_relative = 1e-15);
        assert_eq!(d[1], -0.5);
        assert_eq!(d[2], 0.25);
        assert_eq!(d[3], 0.0);
    }

    #[test]
    fn logistic_is_overflow_safe() {
        let d = LossAtom::Logistic.derivatives(-800.0).unwrap();
        assert_eq!(d[0], 800.0);
        assert_eq!(d[1], -1.0);
        let d = LossAtom::Logistic.derivatives(800.0).unwrap();
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn entropy_and_neg_power() {
        let d = LossAtom::Entropy.derivatives(1.0).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[2], 1.0);
        assert_eq!(d[3], -1.0);
        let d = LossAtom::NegPower { q: 1.0 }.derivatives(2.0).unwrap();
        assert_relative_eq!(d[0], 0.5);
        assert_relative_eq!(d[2], 0.25);
        assert_relative_eq!(d[3], -0.375);
    }

    #[test]
    fn table_params() {
        assert_eq!(LossAtom::Logistic.params(), GscParams { m: 1.0, nu: 2.0 });
        let p = LossAtom::NegPower { q: 1.0 }.params();
        assert_relative_eq!(p.m, 3.0 / 2f64.powf(1.0 / 3.0), max_relative = 1e-15);
        assert!((p.m - 2.38110).abs() < 1e-5);
        assert_relative_eq!(p.nu, 8.0 / 3.0);
        assert_eq!(LossAtom::LogBarrier.params(), GscParams { m: 2.0, nu: 3.0 });
    }

    #[test]
    fn domain_violation() {
        assert!(LossAtom::LogBarrier.eval(0.0, 0).is_err());
        assert!(LossAtom::Entropy.eval(-1.0, 2).is_err());
        assert!(LossAtom::Logistic.eval(1.0, 4).is_err());
    }

    #[test]
    fn exact_certificates() {
        let r = LossAtom::Exponential.gsc_certificate((-5.0, 5.0), 1001).unwrap();
        assert_relative_eq!(r, 1.0, max_relative = 1e-15);
        let r = LossAtom::Entropy.gsc_certificate((0.01, 100.0), 1001).unwrap();
        assert_relative_eq!(r, 1.0, max_relative = 1e-12);
        assert!(LossAtom::Logistic.gsc_certificate((-20.0, 20.0), 4001).unwrap() <= 1.0);
        assert!(LossAtom::LogBarrier.gsc_certificate((-1.0, 1.0), 11).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let v = LossAtom::Exponential.numeric_conjugate(-1.0, 1e-12).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-10);
        let v = LossAtom::Entropy.numeric_conjugate(1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-10);
        let v = LossAtom::Logistic.numeric_conjugate(-0.5, 1e-12).unwrap();
        assert_relative_eq!(v, -(2f64.ln()), max_relative = 1e-10);
        assert!(matches!(LossAtom::Logistic.numeric_conjugate(0.5, 1e-12), Err(Error::Unbounded)));
        let v = LossAtom::Logistic.numeric_conjugate(0.0, 1e-12).unwrap();
        assert!(v.abs() < 1e-10);
    }
}
