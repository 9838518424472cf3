use gsc::atoms::{LossAtom, SmoothingVariant};
use gsc::bench::shipped_atoms;
use gsc::bench_io::GaussianStream;

/// Two-level Richardson extrapolation of the central difference.
fn richardson(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn sample_points(atom: &LossAtom, count: usize, seed: u64) -> Vec<f64> {
    let (lo, hi) = atom.representative_interval();
    let (lo, hi) = if lo > 0.0 { (lo.max(0.05), hi.min(20.0)) } else { (lo, hi) };
    let mut g = GaussianStream::new(seed);
    (0..count).map(|_| lo + (hi - lo) * g.uniform()).collect()
}

#[test]
fn derivatives_match_finite_differences() {
    for atom in shipped_atoms() {
        for t in sample_points(&atom, 200, 7) {
            let h = 1e-5 * t.abs().max(1.0);
            let h = if atom.domain().0 == 0.0 { h.min(t / 4.0) } else { h };
            let d = atom.derivatives(t).unwrap();
            for order in 1..=3 {
                let fd = richardson(&|s| atom.eval(s, order - 1).unwrap(), t, h);
                let want = d[order];
                let scale = want.abs().max(d[order - 1].abs() * 1e-3).max(1e-12);
                assert!(
                    (fd - want).abs() <= 1e-6 * scale,
                    "{atom:?} order {order} at {t}: analytic {want}, differenced {fd}"
                );
            }
        }
    }
}

#[test]
fn certificates_hold_on_representative_intervals() {
    for atom in shipped_atoms() {
        let m = atom.params().m;
        let worst = atom.gsc_certificate(atom.representative_interval(), 20_001).unwrap();
        assert!(worst <= m * (1.0 + 1e-9), "{atom:?}: {worst} > {m}");
    }
}

#[test]
fn smoothed_l1_stays_within_gamma() {
    for gamma in [1e-3, 0.1, 0.5, 2.0] {
        let atom = LossAtom::SmoothedL1 { gamma, variant: SmoothingVariant::Sqrt };
        for i in 0..=2000 {
            let t = -10.0 + 20.0 * i as f64 / 2000.0;
            let v = atom.value(t).unwrap();
            assert!((v - t.abs()).abs() <= gamma * (1.0 + 1e-12), "gamma={gamma} t={t}");
        }
    }
}

#[test]
fn conjugates_match_closed_forms() {
    let xlogx = |s: f64| if s == 0.0 { 0.0 } else { s * s.ln() };
    for i in 0..50 {
        let s = (i as f64 + 0.5) / 50.0;

        let t = -4.0 * s;
        let got = LossAtom::Exponential.numeric_conjugate(t, 1e-12).unwrap();
        let want = -t * (-t).ln() + t;
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "exp* at {t}: {got} vs {want}");

        let t = -3.0 + 6.0 * s;
        let got = LossAtom::Entropy.numeric_conjugate(t, 1e-12).unwrap();
        let want = (t - 1.0).exp();
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "entropy* at {t}");

        let t = -s;
        let got = LossAtom::Logistic.numeric_conjugate(t, 1e-12).unwrap();
        let want = xlogx(s) + xlogx(1.0 - s);
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "logistic* at {t}");
    }
}
