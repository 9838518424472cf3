use gsc::bench::{determinism_scenarios, logistic_toy};
use gsc::bench_io::{
    format_libsvm, gen_logistic, gen_portfolio, parse_libsvm, parse_trace_csv, parse_trace_json, read_libsvm,
    read_trace, trace_to_csv, trace_to_json, write_libsvm, write_trace, Dataset, GaussianStream, TraceFormat,
    PORTFOLIO_FLOOR,
};
use gsc::models::CsrMatrix;
use gsc::newton::{minimize, SolveOptions};
use gsc::trace::{IterRecord, Phase};
use ndarray::Array1;

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("gsc-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn same_bits(a: &[IterRecord], b: &[IterRecord]) -> bool {
    let bits = |r: &IterRecord| {
        [r.f, r.grad_norm, r.lambda, r.beta, r.d_k, r.tau, r.cum_time_s].map(|v| if v.is_nan() { u64::MAX } else { v.to_bits() })
    };
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.iter == y.iter && x.phase == y.phase && bits(x) == bits(y))
}

fn awkward_trace() -> Vec<IterRecord> {
    let mut g = GaussianStream::new(3);
    (0..50)
        .map(|k| IterRecord {
            iter: k,
            phase: if k % 3 == 0 { Phase::Full } else { Phase::Damped },
            f: g.normal() * 10f64.powi(k as i32 % 40 - 20),
            grad_norm: g.uniform() * 1e-300,
            lambda: if k % 7 == 0 { f64::NAN } else { g.uniform() },
            beta: f64::MIN_POSITIVE * g.uniform(),
            d_k: 0.1 + 0.2,
            tau: 1.0 / 3.0,
            cum_time_s: 0.0,
        })
        .collect()
}

#[test]
fn traces_round_trip_bit_exact() {
    let solved = minimize(&logistic_toy(), &Array1::zeros(20), &SolveOptions::default()).unwrap().trace;
    for trace in [solved, awkward_trace()] {
        assert!(same_bits(&parse_trace_csv(&trace_to_csv(&trace)).unwrap(), &trace));
        assert!(same_bits(&parse_trace_json(&trace_to_json(&trace)).unwrap(), &trace));
        for (name, fmt) in [("t.csv", TraceFormat::Csv), ("t.json", TraceFormat::Json)] {
            let path = scratch(name);
            assert_eq!(TraceFormat::from_path(&path), fmt);
            write_trace(&trace, &path, fmt).unwrap();
            assert!(same_bits(&read_trace(&path, fmt).unwrap(), &trace));
        }
    }
}

#[test]
fn libsvm_round_trip_is_exact() {
    let mut g = GaussianStream::new(8);
    let (n, p) = (60, 25);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for row in rows.iter_mut() {
        for j in 0..p {
            if g.uniform() < 0.2 {
                let scale = 1e3f64.powf(g.normal());
                row.push((j, g.normal() * scale));
            }
        }
    }
    let labels = Array1::from_shape_fn(n, |i| if i % 3 == 0 { 1.0 } else { -1.0 });
    let ds = Dataset::new("rt", CsrMatrix::from_rows(p, &rows).unwrap(), labels.clone(), false);
    let text = format_libsvm(&ds);
    let back = parse_libsvm(&text, "rt", false).unwrap();
    assert_eq!(back.labels, labels);
    for i in 0..n {
        let a: Vec<_> = ds.a.row(i).map(|(j, v)| (j, v.to_bits())).collect();
        let b: Vec<_> = back.a.row(i).map(|(j, v)| (j, v.to_bits())).collect();
        assert_eq!(a, b, "row {i}");
    }
    let path = scratch("rt.libsvm");
    write_libsvm(&ds, &path).unwrap();
    assert_eq!(format_libsvm(&read_libsvm(&path, false).unwrap()), text);
}

#[test]
fn normalized_rows_have_unit_norm() {
    let ds = parse_libsvm("1 1:3 2:4\n-1 3:2\n1 1:1 3:1\n", "n", true).unwrap();
    for i in 0..ds.a.nrows {
        assert!((ds.a.row_norm(i) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn gaussian_stream_moments() {
    let mut g = GaussianStream::new(99);
    let n = 200_000;
    let draws: Vec<f64> = (0..n).map(|_| g.normal()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 5.0 * (1.0 / n as f64).sqrt(), "mean {mean}");
    assert!((var.sqrt() - 1.0).abs() < 0.01, "std {}", var.sqrt());

    let u: Vec<f64> = (0..n).map(|_| g.uniform()).collect();
    assert!(u.iter().all(|v| *v > 0.0 && *v <= 1.0));
}

#[test]
fn generators_are_seeded_and_bounded() {
    let a = gen_portfolio(500, 8, 3);
    assert_eq!(a, gen_portfolio(500, 8, 3));
    assert_ne!(a, gen_portfolio(500, 8, 4));
    assert!(a.iter().all(|v| *v >= PORTFOLIO_FLOOR));
    let mean = a.mean().unwrap();
    let std = a.std(1.0);
    assert!((mean - 1.0).abs() < 0.01 && (std - 0.1).abs() < 0.01, "mean {mean} std {std}");

    let d1 = gen_logistic(100, 7, 5, 3.0);
    let d2 = gen_logistic(100, 7, 5, 3.0);
    assert_eq!(format_libsvm(&d1), format_libsvm(&d2));
    assert!(d1.labels.iter().all(|y| *y == 1.0 || *y == -1.0));
    for i in 0..d1.a.nrows {
        assert!((d1.a.row_norm(i) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn scenarios_repeat_byte_for_byte() {
    for (name, run) in determinism_scenarios() {
        let (a, b) = (run().unwrap(), run().unwrap());
        assert_eq!(trace_to_csv(&a.trace), trace_to_csv(&b.trace), "{name}");
        assert_eq!(trace_to_json(&a.trace), trace_to_json(&b.trace), "{name}");
        assert!(a.x.iter().zip(&b.x).all(|(u, v)| u.to_bits() == v.to_bits()), "{name}");
    }
}
