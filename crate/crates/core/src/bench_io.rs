//! Data ingestion, synthetic generators, first-order baselines and trace
//! persistence.
//!
//! Random draws come from `ChaCha20Rng::seed_from_u64(seed)` (crate
//! `rand_chacha`). Uniforms are `((next_u64 >> 11) + 1) * 2^-53` in `(0, 1]`
//! and Gaussians are formed by Box-Muller from consecutive uniform pairs,
//! cosine branch first. Any port using the same generator reproduces the
//! matrices bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::models::{CsrMatrix, Design, Model};
use crate::prox::{mapping_residual, ProxSpec};
use crate::prox_newton::CompositeProblem;
use crate::trace::{IterRecord, Phase, SolveResult, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: CsrMatrix,
    pub labels: Array1<f64>,
    pub meta: DatasetMeta,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn new(name: &str, a: CsrMatrix, labels: Array1<f64>, normalized: bool) -> Self {
        let meta = DatasetMeta { name: name.to_string(), n: a.nrows, p: a.ncols, normalized };
        Self { a, labels, meta, warnings: Vec::new() }
    }

    /// Rows multiplied by their labels, as expected by the logistic model.
    pub fn signed_design(&self) -> Design {
        let mut a = self.a.clone();
        for i in 0..a.nrows {
            for k in a.indptr[i]..a.indptr[i + 1] {
                a.values[k] *= self.labels[i];
            }
        }
        Design::Sparse(a)
    }

    pub fn normalize_rows(&mut self) {
        for i in 0..self.a.nrows {
            let norm = self.a.row_norm(i);
            if norm > 0.0 {
                for k in self.a.indptr[i]..self.a.indptr[i + 1] {
                    self.a.values[k] /= norm;
                }
            }
        }
        self.meta.normalized = true;
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses LIBSVM text (`label idx:val ...`, 1-based ascending indices).
pub fn parse_libsvm(text: &str, name: &str, normalize: bool) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut ncols = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| parse_err(line_no, format!("bad label {label_tok:?}")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(line_no, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(line_no, "indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_err(line_no, format!("index {idx} not ascending")));
            }
            let val: f64 = val.parse().map_err(|_| parse_err(line_no, format!("bad value {val:?}")))?;
            last = idx;
            row.push((idx - 1, val));
        }
        ncols = ncols.max(last);
        rows.push(row);
        labels.push(label);
    }

    let mut distinct: Vec<f64> = labels.clone();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() == 2 {
        let lo = distinct[0];
        for l in labels.iter_mut() {
            *l = if *l == lo { -1.0 } else { 1.0 };
        }
    }

    let a = CsrMatrix::from_rows(ncols, &rows)?;
    let mut ds = Dataset::new(name, a, Array1::from(labels), false);
    if ds.meta.n == 0 {
        ds.warnings.push(format!("{name}: no data rows"));
    }
    if normalize {
        ds.normalize_rows();
    }
    Ok(ds)
}

pub fn read_libsvm(path: &Path, normalize: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    parse_libsvm(&text, &name, normalize)
}

pub fn format_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.a.nrows {
        write!(out, "{}", ds.labels[i]).unwrap();
        for (j, v) in ds.a.row(i) {
            write!(out, " {}:{}", j + 1, v).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, format_libsvm(ds)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Seeded stream of standard normal draws.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform draw in `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * angle.sin());
        r * angle.cos()
    }
}

/// Smallest entry kept by [`gen_portfolio`].
pub const PORTFOLIO_FLOOR: f64 = 1e-3;

/// Price ratios `1 + 0.1 z` in row-major order, floored at
/// [`PORTFOLIO_FLOOR`].
pub fn gen_portfolio(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut g = GaussianStream::new(seed);
    Array2::from_shape_simple_fn((n, p), || (1.0 + 0.1 * g.normal()).max(PORTFOLIO_FLOOR))
}

/// Classification data with unit-norm Gaussian rows and labels drawn from
/// a logistic model around a hidden vector of norm `signal`.
pub fn gen_logistic(n: usize, p: usize, seed: u64, signal: f64) -> Dataset {
    let mut g = GaussianStream::new(seed);
    let mut truth = Array1::from_shape_simple_fn(p, || g.normal());
    let tn = truth.dot(&truth).sqrt();
    truth *= signal / tn;
    let mut a = Array2::zeros((n, p));
    let mut labels = Array1::zeros(n);
    for i in 0..n {
        let mut row = Array1::from_shape_simple_fn(p, || g.normal());
        let rn = row.dot(&row).sqrt();
        row /= rn;
        let prob = 1.0 / (1.0 + (-row.dot(&truth)).exp());
        labels[i] = if g.uniform() <= prob { 1.0 } else { -1.0 };
        a.row_mut(i).assign(&row);
    }
    let mut ds = Dataset::new("synthetic-logistic", CsrMatrix::from_dense(&a), labels, true);
    ds.meta.normalized = true;
    ds
}

/// Share of misclassified rows, `sum_i (1 - sign(y_i a_i^T x)) / (2n)`.
pub fn training_error(ds: &Dataset, x: &Array1<f64>) -> f64 {
    let n = ds.a.nrows;
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let m = ds.labels[i] * ds.a.row_dot(i, x);
            1.0 - if m > 0.0 { 1.0 } else if m < 0.0 { -1.0 } else { 0.0 }
        })
        .sum();
    total / (2.0 * n as f64)
}

fn baseline_record(iter: usize, f: f64, grad_norm: f64, tau: f64) -> IterRecord {
    IterRecord {
        iter,
        phase: Phase::Full,
        f,
        grad_norm,
        lambda: f64::NAN,
        beta: f64::NAN,
        d_k: f64::NAN,
        tau,
        cum_time_s: 0.0,
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Constant-momentum accelerated gradient for `mu`-strongly convex,
/// `l`-smooth objectives; missing constants are taken from the model.
/// Stops once `||grad f(x_k)|| <= eps`.
pub fn fast_gradient(
    model: &dyn Model,
    x0: &Array1<f64>,
    mu: Option<f64>,
    l: Option<f64>,
    eps: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    let mu = mu
        .or_else(|| model.strong_convexity())
        .ok_or_else(|| Error::InvalidParams("fast gradient needs a strong convexity modulus".into()))?;
    let l = l
        .or_else(|| model.gradient_lipschitz())
        .ok_or_else(|| Error::InvalidParams("fast gradient needs a gradient Lipschitz constant".into()))?;
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(Error::InvalidParams(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    let momentum = (l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt());
    let step = 1.0 / l;
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut trace = Vec::new();
    let mut evals = 0;
    let mut status = Status::MaxIter;
    for k in 0..=max_iter {
        let f = model.value(&x)?;
        let g = model.gradient(&x)?;
        evals += 1;
        let gn = norm(&g);
        trace.push(baseline_record(k, f, gn, step));
        if gn <= eps {
            status = Status::Converged;
            break;
        }
        if k == max_iter {
            break;
        }
        let y = &x + &((&x - &x_prev) * momentum);
        let gy = model.gradient(&y)?;
        x_prev = std::mem::replace(&mut x, &y - &(&gy * step));
    }
    Ok(SolveResult { x, trace, status, f_evals: evals, domain_fallbacks: 0 })
}

fn require_constraint(g: &ProxSpec) -> Result<()> {
    match g {
        ProxSpec::Simplex | ProxSpec::Box { .. } => Ok(()),
        _ => Err(Error::InvalidParams("baseline needs a simplex or box constraint".into())),
    }
}

/// Objective values remembered by the nonmonotone test in [`pg_bb`].
pub const PG_BB_MEMORY: usize = 10;

/// Projected gradient with Barzilai-Borwein steps and a nonmonotone
/// sufficient-decrease test against the largest of the last
/// [`PG_BB_MEMORY`] objective values. Stops once
/// `||x - P(x - grad f(x))|| <= eps`.
pub fn pg_bb(problem: &CompositeProblem<'_>, x0: &Array1<f64>, eps: f64, max_iter: usize) -> Result<SolveResult> {
    require_constraint(&problem.g)?;
    let model = problem.model;
    let mut x = problem.g.apply(x0, 1.0);
    let mut f = problem.value(&x)?;
    let mut g = model.gradient(&x)?;
    let mut alpha = 1.0 / norm(&g).max(1.0);
    let mut trace = Vec::new();
    let mut evals = 1;
    let mut fallbacks = 0;
    let mut status = Status::MaxIter;
    let mut recent = std::collections::VecDeque::with_capacity(PG_BB_MEMORY);
    for k in 0..=max_iter {
        if recent.len() == PG_BB_MEMORY {
            recent.pop_front();
        }
        recent.push_back(f);
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let res = mapping_residual(&problem.g, &x, &g, 1.0);
        trace.push(baseline_record(k, f, res, alpha));
        if res <= eps {
            status = Status::Converged;
            break;
        }
        if k == max_iter {
            break;
        }
        let slack = 4.0 * f64::EPSILON * (1.0 + reference.abs());
        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..60 {
            let trial = problem.g.apply(&(&x - &(&g * a)), a);
            let d = &trial - &x;
            evals += 1;
            match model.value(&trial) {
                Ok(ft) if ft <= reference - 1e-4 * d.dot(&d) / a + slack => {
                    accepted = Some((trial, ft));
                    break;
                }
                Ok(_) => {}
                Err(Error::OutsideDomain { .. }) => fallbacks += 1,
                Err(e) => return Err(e),
            }
            a *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            status = Status::DomainError;
            break;
        };
        trace.last_mut().expect("pushed above").tau = a;
        let g_new = model.gradient(&x_new)?;
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        alpha = if sy > 0.0 { (s.dot(&s) / sy).clamp(1e-10, 1e10) } else { (2.0 * a).min(1e10) };
        x = x_new;
        f = f_new;
        g = g_new;
    }
    Ok(SolveResult { x, trace, status, f_evals: evals, domain_fallbacks: fallbacks })
}

/// Vertex of the constraint set minimizing `grad^T v`.
fn linear_oracle(g: &ProxSpec, grad: &Array1<f64>) -> Array1<f64> {
    match *g {
        ProxSpec::Simplex => {
            let mut best = 0;
            for (i, v) in grad.iter().enumerate() {
                if *v < grad[best] {
                    best = i;
                }
            }
            let mut e = Array1::zeros(grad.len());
            e[best] = 1.0;
            e
        }
        ProxSpec::Box { lo, hi } => grad.mapv(|v| if v > 0.0 { lo } else { hi }),
        _ => unreachable!("checked by require_constraint"),
    }
}

/// Frank-Wolfe with the `2 / (k + 2)` rule or an exact line search on
/// `[0, 1]`. Stops once the duality gap is at most `eps`; the trace's
/// `grad_norm` column holds the gap.
pub fn frank_wolfe(
    problem: &CompositeProblem<'_>,
    x0: &Array1<f64>,
    eps: f64,
    linesearch: bool,
    max_iter: usize,
) -> Result<SolveResult> {
    require_constraint(&problem.g)?;
    let model = problem.model;
    let mut x = x0.clone();
    problem.value(&x)?;
    let mut trace = Vec::new();
    let mut evals = 0;
    let mut status = Status::MaxIter;
    for k in 0..=max_iter {
        let f = model.value(&x)?;
        let g = model.gradient(&x)?;
        evals += 1;
        let v = linear_oracle(&problem.g, &g);
        let d = &v - &x;
        let gap = -g.dot(&d);
        let mut gamma = 2.0 / (k as f64 + 2.0);
        if linesearch {
            gamma = exact_segment_step(model, &x, &d, -gap, &mut evals)?;
        }
        trace.push(baseline_record(k, f, gap, gamma));
        if gap <= eps {
            status = Status::Converged;
            break;
        }
        if k == max_iter {
            break;
        }
        x = &x * (1.0 - gamma) + &(&v * gamma);
    }
    Ok(SolveResult { x, trace, status, f_evals: evals, domain_fallbacks: 0 })
}

/// Minimizer of `f(x + gamma d)` over `gamma` in `[0, 1]` by bisection on
/// the directional derivative.
fn exact_segment_step(model: &dyn Model, x: &Array1<f64>, d: &Array1<f64>, slope0: f64, evals: &mut usize) -> Result<f64> {
    if slope0 >= 0.0 {
        return Ok(0.0);
    }
    let slope_at = |gamma: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        Ok(model.gradient(&(x + &(d * gamma)))?.dot(d))
    };
    if slope_at(1.0, evals)? <= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid, evals)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub const TRACE_HEADER: &str = "iter,phase,f,grad_norm,lambda,beta,d_k,tau,cum_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TraceFormat::Json,
            _ => TraceFormat::Csv,
        }
    }
}

/// 17 significant digits; non-finite values use Rust's spellings.
fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn fmt_json_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn record_floats(r: &IterRecord) -> [(&'static str, f64); 7] {
    [
        ("f", r.f),
        ("grad_norm", r.grad_norm),
        ("lambda", r.lambda),
        ("beta", r.beta),
        ("d_k", r.d_k),
        ("tau", r.tau),
        ("cum_time_s", r.cum_time_s),
    ]
}

pub fn trace_to_csv(trace: &[IterRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        write!(out, "{},{}", r.iter, r.phase.as_str()).unwrap();
        for (_, v) in record_floats(r) {
            out.push(',');
            out.push_str(&fmt_float(v));
        }
        out.push('\n');
    }
    out
}

pub fn trace_to_json(trace: &[IterRecord]) -> String {
    let mut out = String::from("[");
    for (k, r) in trace.iter().enumerate() {
        out.push_str(if k == 0 { "\n  {" } else { ",\n  {" });
        write!(out, "\"iter\": {}, \"phase\": \"{}\"", r.iter, r.phase.as_str()).unwrap();
        for (name, v) in record_floats(r) {
            write!(out, ", \"{name}\": {}", fmt_json_float(v)).unwrap();
        }
        out.push('}');
    }
    out.push_str(if trace.is_empty() { "]\n" } else { "\n]\n" });
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<IterRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(parse_err(1, "missing trace header")),
    }
    let mut out = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = ln + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(parse_err(line_no, format!("expected 9 fields, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| parse_err(line_no, format!("bad number {:?}", fields[i])))
        };
        let phase = match fields[1] {
            "damped" => Phase::Damped,
            "full" => Phase::Full,
            other => return Err(parse_err(line_no, format!("unknown phase {other:?}"))),
        };
        out.push(IterRecord {
            iter: fields[0].parse().map_err(|_| parse_err(line_no, "bad iteration index"))?,
            phase,
            f: num(2)?,
            grad_norm: num(3)?,
            lambda: num(4)?,
            beta: num(5)?,
            d_k: num(6)?,
            tau: num(7)?,
            cum_time_s: num(8)?,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRecord {
    iter: usize,
    phase: Phase,
    f: Option<f64>,
    grad_norm: Option<f64>,
    lambda: Option<f64>,
    beta: Option<f64>,
    d_k: Option<f64>,
    tau: Option<f64>,
    cum_time_s: Option<f64>,
}

pub fn parse_trace_json(text: &str) -> Result<Vec<IterRecord>> {
    let raw: Vec<JsonRecord> = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
    let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
    Ok(raw
        .into_iter()
        .map(|r| IterRecord {
            iter: r.iter,
            phase: r.phase,
            f: nan(r.f),
            grad_norm: nan(r.grad_norm),
            lambda: nan(r.lambda),
            beta: nan(r.beta),
            d_k: nan(r.d_k),
            tau: nan(r.tau),
            cum_time_s: nan(r.cum_time_s),
        })
        .collect())
}

pub fn write_trace(trace: &[IterRecord], path: &Path, format: TraceFormat) -> Result<()> {
    let text = match format {
        TraceFormat::Csv => trace_to_csv(trace),
        TraceFormat::Json => trace_to_json(trace),
    };
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_trace(path: &Path, format: TraceFormat) -> Result<Vec<IterRecord>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    match format {
        TraceFormat::Csv => parse_trace_csv(&text),
        TraceFormat::Json => parse_trace_json(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn libsvm_examples() {
        let ds = parse_libsvm("+1 1:0.6 3:0.8\n-1 2:3 4:4\n", "t", true).unwrap();
        assert_eq!(ds.a.to_dense(), array![[0.6, 0.0, 0.8, 0.0], [0.0, 0.6, 0.0, 0.8]]);
        assert_eq!(ds.labels, array![1.0, -1.0]);
        let empty = parse_libsvm("", "e", false).unwrap();
        assert_eq!(empty.meta.n, 0);
        assert_eq!(empty.warnings.len(), 1);
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        let e = parse_libsvm("1 1:2\n1 3:1 2:1\n", "t", false).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_libsvm("1 1:2\n\nx 1:1\n", "t", false).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn binary_labels_are_mapped() {
        let ds = parse_libsvm("0 1:1\n1 1:2\n0 2:1\n", "t", false).unwrap();
        assert_eq!(ds.labels, array![-1.0, 1.0, -1.0]);
    }

    #[test]
    fn trace_line_counts() {
        assert_eq!(trace_to_csv(&[]), format!("{TRACE_HEADER}\n"));
        let r = baseline_record(0, 1.0, 2.0, 0.5);
        let csv = trace_to_csv(&[r.clone(), r.clone(), r]);
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn portfolio_determinism() {
        assert_eq!(gen_portfolio(5, 4, 3), gen_portfolio(5, 4, 3));
        assert_ne!(gen_portfolio(5, 4, 3), gen_portfolio(5, 4, 4));
    }
}
