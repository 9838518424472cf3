use gsc::atoms::LossAtom;
use gsc::bench::KERNEL_REFERENCE;
use gsc::kernel::{
    combine_sum, descent_estimate, kappa_bounds, omega, omega_bar, omega_bar_bar, reparam, step_size,
    transform_affine, Reparam,
};
use proptest::prelude::*;

fn grid(nu: f64) -> Vec<f64> {
    let hi = if nu == 2.0 { 0.9 } else { 0.9f64.min(1.0 - 1e-9) };
    (0..1000).map(|i| -0.9 + (hi + 0.9) * i as f64 / 999.0).collect()
}

#[test]
fn kernels_are_positive_and_monotone() {
    for nu in [2.0, 2.5, 3.0, 4.0] {
        let taus = grid(nu);
        let mut prev = [f64::NEG_INFINITY; 3];
        for &t in &taus {
            let v = [omega(nu, t).unwrap(), omega_bar(nu, t).unwrap(), omega_bar_bar(nu, t).unwrap()];
            assert!(v[0] >= 0.0 && v[1] >= 0.0 && v[2] > 0.0, "nu={nu} tau={t} {v:?}");
            for j in 0..3 {
                assert!(v[j] >= prev[j] * (1.0 - 1e-14), "kernel {j} decreases at nu={nu} tau={t}");
            }
            prev = v;
        }
    }
}

#[test]
fn reference_table_matches() {
    let mut rows = 0;
    for line in KERNEL_REFERENCE.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (kernel, nu, tau, want): (&str, f64, f64, f64) =
            (cols[0], cols[1].parse().unwrap(), cols[2].parse().unwrap(), cols[3].parse().unwrap());
        let got = match kernel {
            "omega" => omega(nu, tau),
            "omega_bar" => omega_bar(nu, tau),
            "omega_bar_bar" => omega_bar_bar(nu, tau),
            _ => continue,
        }
        .unwrap();
        let tol = if tau.abs() < 1e-8 { 1e-10 } else { 1e-12 };
        assert!((got - want).abs() <= tol * want.abs(), "{kernel}({nu}, {tau}) = {got}, want {want}");
        rows += 1;
    }
    assert!(rows > 1000);
}

#[test]
fn series_and_closed_form_agree_near_switch() {
    for nu in [2.0f64, 2.5, 8.0 / 3.0, 3.0, 4.0] {
        let scale = if nu == 2.0 { 1.0 } else { (2.0 / (nu - 2.0)).max(1.0) };
        let edge = 0.25 / scale;
        for e in [edge, -edge] {
            let (inside, outside) = (e * (1.0 - 1e-9), e * (1.0 + 1e-9));
            let h = 1e-3 * edge;
            let slope = (omega(nu, e + h).unwrap() - omega(nu, e - h).unwrap()) / (2.0 * h);
            let a = omega(nu, inside).unwrap();
            let b = omega(nu, outside).unwrap();
            let jump = b - a - slope * (outside - inside);
            assert!(jump.abs() <= 1e-10 * a, "nu={nu} edge={e}: {a} vs {b}");
        }
        let tiny = omega(nu, 1e-4).unwrap();
        let at_zero = omega(nu, 0.0).unwrap();
        assert!((at_zero - 0.5).abs() < 1e-15);
        assert!((tiny - at_zero).abs() < 1e-4);
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        let sub = (tol / 2.0).max(1e-15);
        rec(f, a, m, fa, flm, fm, left, sub, depth - 1) + rec(f, m, b, fm, frm, fb, right, sub, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 30)
}

#[test]
fn kappa_bounds_match_quadrature() {
    for nu in [2.0, 2.5, 3.0, 4.0] {
        for t in [1e-3, 0.1, 0.3, 0.6, 0.9] {
            let (lo, hi) = kappa_bounds(nu, t).unwrap();
            assert!(lo <= 1.0 && 1.0 <= hi, "nu={nu} t={t}");
            let up = simpson(&|s| omega_bar_bar(nu, s * t).unwrap(), 0.0, 1.0, 1e-13);
            let down = simpson(&|s| 1.0 / omega_bar_bar(nu, s * t).unwrap(), 0.0, 1.0, 1e-13);
            assert!((hi - up).abs() <= 1e-8, "upper nu={nu} t={t}: {hi} vs {up}");
            assert!((lo - down).abs() <= 1e-8, "lower nu={nu} t={t}: {lo} vs {down}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn step_maximizes_the_decrease_model(
        nu in prop_oneof![Just(2.0), Just(3.0), 2.0f64..3.0],
        m in 0.01f64..10.0,
        lambda in 1e-3f64..5.0,
        beta in 1e-3f64..50.0,
    ) {
        let step = step_size(nu, m, lambda, beta).unwrap();
        prop_assert!(step.tau > 0.0 && step.tau <= 1.0);
        let best = descent_estimate(nu, lambda, step.d_k, step.tau).unwrap();
        prop_assert!(best > 0.0);
        for i in 1..=10_000 {
            let t = i as f64 * 1e-4;
            if nu > 2.0 && t * step.d_k >= 1.0 {
                break;
            }
            let v = descent_estimate(nu, lambda, step.d_k, t).unwrap();
            prop_assert!(v <= best + 1e-6 * best.abs(), "tau={} beats {} ({v} > {best})", t, step.tau);
        }
    }

    #[test]
    fn step_ordering_between_orders(m3 in 0.01f64..10.0, lambda in 1e-4f64..5.0, frac in 0.0f64..1.0) {
        let beta = frac * m3 * lambda;
        prop_assume!(beta > 1e-10);
        prop_assert!(beta.ln_1p() / beta > 1.0 / (1.0 + 0.5 * m3 * lambda));
    }

    #[test]
    fn weighted_sums_stay_certified(
        q in 0.2f64..3.0,
        w1 in 0.05f64..5.0,
        w2 in 0.05f64..5.0,
        s1 in 0.2f64..3.0,
    ) {
        // f(t) = w1 phi(t) + w2 phi(s1 t) on t > 0
        let atom = LossAtom::NegPower { q };
        let p = atom.params();
        let scaled = transform_affine(p, s1, s1 * s1).unwrap();
        let sum = combine_sum(&[(p, w1), (scaled, w2)]).unwrap();
        for i in 0..1000 {
            let t = 0.01 + 50.0 * i as f64 / 999.0;
            let a = atom.derivatives(t).unwrap();
            let b = atom.derivatives(s1 * t).unwrap();
            let d2 = w1 * a[2] + w2 * s1 * s1 * b[2];
            let d3 = w1 * a[3] + w2 * s1 * s1 * s1 * b[3];
            prop_assert!(d3.abs() <= sum.m * d2.powf(sum.nu / 2.0) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn strong_convexity_reparam_certified(q in 0.2f64..3.0, mu in 1e-3f64..1.0) {
        // f(t) = phi(t) + mu t^2 / 2 with phi'' + mu >= mu
        let atom = LossAtom::NegPower { q };
        let hat = reparam(atom.params(), Reparam::StrongConvexity(mu)).unwrap();
        prop_assert_eq!(hat.nu, 3.0);
        for i in 0..1000 {
            let t = 0.05 + 50.0 * i as f64 / 999.0;
            let d = atom.derivatives(t).unwrap();
            let d2 = d[2] + mu;
            prop_assert!(d[3].abs() <= hat.m * d2.powf(1.5) * (1.0 + 1e-10));
        }
    }
}
