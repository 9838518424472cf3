//! `gsc`: fit logistic regression, DWD and log-utility portfolios with
//! Newton-type solvers, run the acceptance matrix, or print kernel values.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};

use gsc::bench;
use gsc::bench_io::{
    fast_gradient, frank_wolfe, gen_logistic, gen_portfolio, pg_bb, read_libsvm, training_error, write_trace, Dataset,
    TraceFormat,
};
use gsc::kernel::{kappa_bounds, omega, omega_bar, omega_bar_bar, r_nu};
use gsc::models::{Design, DwdModel, GlmModel, Model, NuChoice, PortfolioModel};
use gsc::newton::{minimize, SolveOptions, StepRule};
use gsc::prox::ProxSpec;
use gsc::prox_newton::{minimize_composite, CompositeProblem};
use gsc::quasi_newton::{minimize_qn, QnOptions};
use gsc::trace::{SolveResult, Status};

/// Environment variable overriding `--threads`.
const THREADS_ENV: &str = "GSC_SOLVE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "gsc", version, about = "Newton-type solvers for generalized self-concordant problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regularized logistic regression on LIBSVM or synthetic data.
    FitLogistic(FitLogistic),
    /// Distance-weighted discrimination on LIBSVM or synthetic data.
    FitDwd(FitDwd),
    /// Log-utility portfolio selection over the simplex.
    Portfolio(Portfolio),
    /// Run the acceptance matrix and print a pass/fail table.
    Bench(BenchArgs),
    /// Print kernel values at one point.
    Kernels(KernelArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum NuArg {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    Native,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum StepArg {
    Analytic,
    /// Armijo backtracking never going below the analytic step.
    Linesearch,
    /// Plain Armijo backtracking.
    Backtracking,
    Full,
    Auto,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Newton,
    ProxNewton,
    Bfgs,
    Fgm,
    Fw,
    FwLs,
    PgBb,
}

#[derive(Args, Debug)]
struct Common {
    /// LIBSVM file.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Synthetic instance, e.g. `n=2000,p=100`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, value_enum, default_value = "native")]
    nu: NuArg,
    #[arg(long, value_enum, default_value = "analytic")]
    step: StepArg,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace file; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock time in the trace.
    #[arg(long)]
    timing: bool,
    /// Worker threads for linear algebra (computation is single-threaded).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct FitLogistic {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "newton")]
    solver: SolverArg,
    #[arg(long, default_value_t = 1e-5)]
    gamma: f64,
    /// Keep rows as read instead of scaling them to unit norm.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Debug)]
struct FitDwd {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "newton")]
    solver: SolverArg,
    /// Regularization weights for `w`, `mu` and `xi`.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1e-5, 1e-5, 1e-7])]
    gammas: Vec<f64>,
    /// Power of the margin penalty.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Linear cost charged on every slack `xi_i`.
    #[arg(long, default_value_t = 1e-4)]
    cost: f64,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Debug)]
struct Portfolio {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "prox-newton")]
    solver: SolverArg,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Run only these criteria (1 to 12).
    #[arg(long, value_delimiter = ',')]
    criterion: Vec<usize>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long)]
    nu: f64,
    #[arg(long)]
    tau: f64,
}

/// Failure carrying the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 1, msg: msg.into() }
}

impl From<gsc::Error> for Failure {
    fn from(e: gsc::Error) -> Self {
        usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse_synthetic(spec: &str) -> CliResult<Vec<(String, f64)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("--synthetic: expected key=value, got {kv:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| usage(format!("--synthetic: bad number in {kv:?}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn synthetic_size(spec: &str, allowed: &[&str]) -> CliResult<Vec<f64>> {
    let pairs = parse_synthetic(spec)?;
    for (k, _) in &pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(usage(format!("--synthetic: unknown key {k:?} (expected {})", allowed.join(", "))));
        }
    }
    allowed
        .iter()
        .map(|name| {
            pairs
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| usage(format!("--synthetic: missing {name}")))
        })
        .collect()
}

fn as_count(v: f64, name: &str) -> CliResult<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= 1e8 {
        Ok(v as usize)
    } else {
        Err(usage(format!("--synthetic: {name} must be a positive integer")))
    }
}

fn threads(common: &Common) -> CliResult<usize> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| usage(format!("{THREADS_ENV}: expected a positive integer")))?),
        Err(_) => None,
    };
    let n = common.threads.or(from_env).unwrap_or(1);
    if n == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    Ok(n)
}

fn validate_common(common: &Common) -> CliResult<()> {
    if !(common.eps > 0.0) {
        return Err(usage("--eps must be positive"));
    }
    if common.data.is_none() && common.synthetic.is_none() {
        return Err(usage("one of --data or --synthetic is required"));
    }
    threads(common)?;
    Ok(())
}

fn require_solver(solver: SolverArg, allowed: &[SolverArg], command: &str) -> CliResult<()> {
    if allowed.contains(&solver) {
        Ok(())
    } else {
        let name = solver.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        Err(usage(format!("--solver {name} is not available for {command}")))
    }
}

fn nu_choice(nu: NuArg) -> NuChoice {
    match nu {
        NuArg::Two => NuChoice::Force2,
        NuArg::Three => NuChoice::Force3,
        NuArg::Native => NuChoice::Native,
    }
}

fn solve_options(common: &Common) -> SolveOptions {
    let step_rule = match common.step {
        StepArg::Analytic => StepRule::Analytic,
        StepArg::Linesearch => StepRule::LinesearchFloor,
        StepArg::Backtracking => StepRule::Backtracking,
        StepArg::Full => StepRule::Full,
        StepArg::Auto => StepRule::Auto,
    };
    SolveOptions {
        nu_choice: nu_choice(common.nu),
        step_rule,
        eps: common.eps,
        max_iter: common.max_iter,
        record_time: common.timing,
        ..SolveOptions::default()
    }
}

fn qn_options(common: &Common) -> QnOptions {
    QnOptions {
        nu_choice: nu_choice(common.nu),
        eps: common.eps,
        max_iter: common.max_iter,
        record_time: common.timing,
        ..QnOptions::default()
    }
}

fn load_classification(common: &Common, normalize: bool) -> CliResult<Dataset> {
    if let Some(path) = &common.data {
        let ds = read_libsvm(path, normalize)?;
        for w in &ds.warnings {
            eprintln!("warning: {w}");
        }
        return Ok(ds);
    }
    let spec = common.synthetic.as_deref().unwrap_or_default();
    let pairs = parse_synthetic(spec)?;
    let get = |k: &str| pairs.iter().find(|(name, _)| name == k).map(|(_, v)| *v);
    for (k, _) in &pairs {
        if !["n", "p", "signal"].contains(&k.as_str()) {
            return Err(usage(format!("--synthetic: unknown key {k:?} (expected n, p, signal)")));
        }
    }
    let n = as_count(get("n").ok_or_else(|| usage("--synthetic: missing n"))?, "n")?;
    let p = as_count(get("p").ok_or_else(|| usage("--synthetic: missing p"))?, "p")?;
    let signal = get("signal").unwrap_or(20.0);
    Ok(gen_logistic(n, p, common.seed, signal))
}

fn finish(
    common: &Common,
    result: &SolveResult,
    f_final: f64,
    extra: &str,
    started: Instant,
) -> CliResult<ExitCode> {
    if let Some(path) = &common.out {
        write_trace(&result.trace, path, TraceFormat::from_path(path))?;
    }
    let status = match result.status {
        Status::Converged => "converged",
        Status::MaxIter => "max_iter",
        Status::DomainError => "domain_error",
    };
    let grad = result.final_record().map_or(f64::NAN, |r| r.grad_norm);
    println!(
        "status={status} iters={} time={:.3}s f={f_final:.12e} grad_norm={grad:.3e}{extra}",
        result.iterations(),
        started.elapsed().as_secs_f64()
    );
    Ok(if result.status == Status::Converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_smooth(common: &Common, solver: SolverArg, model: &dyn Model, x0: &Array1<f64>) -> CliResult<SolveResult> {
    Ok(match solver {
        SolverArg::Newton => minimize(model, x0, &solve_options(common))?,
        SolverArg::Bfgs => minimize_qn(model, x0, &qn_options(common))?.result,
        SolverArg::Fgm => fast_gradient(model, x0, None, None, common.eps, common.max_iter)?,
        _ => unreachable!("validated by require_solver"),
    })
}

fn fit_logistic(args: &FitLogistic) -> CliResult<ExitCode> {
    let common = &args.common;
    validate_common(common)?;
    require_solver(args.solver, &[SolverArg::Newton, SolverArg::Bfgs, SolverArg::Fgm], "fit-logistic")?;
    if !(args.gamma > 0.0) {
        return Err(usage("--gamma must be positive"));
    }
    let ds = load_classification(common, !args.no_normalize)?;
    let started = Instant::now();
    let model = GlmModel::logistic(ds.signed_design(), args.gamma)?;
    let x0 = Array1::zeros(model.dim());
    let result = run_smooth(common, args.solver, &model, &x0)?;
    let f = model.value(&result.x)?;
    let err = training_error(&ds, &result.x);
    finish(common, &result, f, &format!(" train_error={err:.4}"), started)
}

fn fit_dwd(args: &FitDwd) -> CliResult<ExitCode> {
    let common = &args.common;
    validate_common(common)?;
    require_solver(args.solver, &[SolverArg::Newton, SolverArg::Bfgs, SolverArg::Fgm], "fit-dwd")?;
    if !args.cost.is_finite() {
        return Err(usage("--cost must be finite"));
    }
    if !(args.q > 0.0) {
        return Err(usage("--q must be positive"));
    }
    if args.gammas.len() != 3 || args.gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(usage("--gammas needs three positive values"));
    }
    let ds = load_classification(common, !args.no_normalize)?;
    let started = Instant::now();
    let signed = match ds.signed_design() {
        Design::Sparse(a) => a.to_dense(),
        Design::Dense(a) => a,
    };
    let cost = Array1::from_elem(ds.meta.n, args.cost);
    let gammas = (args.gammas[0], args.gammas[1], args.gammas[2]);
    let model = DwdModel::new(signed, ds.labels.clone(), cost, args.q, gammas)?;
    let x0 = model.start_point();
    let result = run_smooth(common, args.solver, &model, &x0)?;
    let f = model.value(&result.x)?;
    let (w, mu, _) = model.split(&result.x);
    let mut with_bias = Dataset::new("dwd", ds.a.clone(), ds.labels.clone(), ds.meta.normalized);
    with_bias.a = append_constant_column(&ds.a);
    let mut coef = w.to_vec();
    coef.push(mu);
    let err = training_error(&with_bias, &Array1::from(coef));
    finish(common, &result, f, &format!(" train_error={err:.4}"), started)
}

fn append_constant_column(a: &gsc::models::CsrMatrix) -> gsc::models::CsrMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..a.nrows)
        .map(|i| {
            let mut r: Vec<(usize, f64)> = a.row(i).collect();
            r.push((a.ncols, 1.0));
            r
        })
        .collect();
    gsc::models::CsrMatrix::from_rows(a.ncols + 1, &rows).expect("indices in range")
}

fn read_ratio_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("--data {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::parse).collect();
        let row = row.map_err(|_| usage(format!("--data {}: bad number on line {}", path.display(), ln + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(usage(format!("--data {}: line {} has {} columns, expected {}", path.display(), ln + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(usage(format!("--data {}: no rows", path.display())));
    }
    let p = rows[0].len();
    Ok(Array2::from_shape_vec((rows.len(), p), rows.concat()).expect("rectangular"))
}

fn portfolio(args: &Portfolio) -> CliResult<ExitCode> {
    let common = &args.common;
    validate_common(common)?;
    require_solver(args.solver, &[SolverArg::ProxNewton, SolverArg::PgBb, SolverArg::Fw, SolverArg::FwLs], "portfolio")?;
    let ratios = match (&common.data, &common.synthetic) {
        (Some(path), _) => read_ratio_matrix(path)?,
        (None, Some(spec)) => {
            let size = synthetic_size(spec, &["n", "p"])?;
            gen_portfolio(as_count(size[0], "n")?, as_count(size[1], "p")?, common.seed)
        }
        (None, None) => unreachable!("checked by validate_common"),
    };
    let started = Instant::now();
    let model = PortfolioModel::new(ratios)?;
    let p = model.dim();
    let problem = CompositeProblem { model: &model, g: ProxSpec::Simplex };
    let x0 = Array1::from_elem(p, 1.0 / p as f64);
    let result = match args.solver {
        SolverArg::ProxNewton => minimize_composite(&problem, &x0, &solve_options(common))?,
        SolverArg::PgBb => pg_bb(&problem, &x0, common.eps, common.max_iter)?,
        SolverArg::Fw => frank_wolfe(&problem, &x0, common.eps, false, common.max_iter)?,
        SolverArg::FwLs => frank_wolfe(&problem, &x0, common.eps, true, common.max_iter)?,
        _ => unreachable!("validated by require_solver"),
    };
    let f = problem.value(&result.x)?;
    let min = result.x.iter().cloned().fold(f64::INFINITY, f64::min);
    let extra = format!(" sum_x={:.15} min_x={min:.3e}", result.x.sum());
    finish(common, &result, f, &extra, started)
}

fn run_bench(args: &BenchArgs) -> CliResult<ExitCode> {
    let ids: Vec<usize> = if args.criterion.is_empty() {
        bench::CRITERIA.iter().map(|c| c.id).collect()
    } else {
        args.criterion.clone()
    };
    if let Some(bad) = ids.iter().find(|id| !(1..=bench::CRITERIA.len()).contains(*id)) {
        return Err(usage(format!("--criterion {bad} is out of range 1..={}", bench::CRITERIA.len())));
    }
    let mut failed = 0;
    for id in ids {
        let outcome = bench::run(id);
        println!("{}", outcome.line());
        if !outcome.passed {
            failed += 1;
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn kernels(args: &KernelArgs) -> CliResult<ExitCode> {
    let (nu, tau) = (args.nu, args.tau);
    println!("omega_bar_bar = {:.15e}", omega_bar_bar(nu, tau)?);
    println!("omega_bar     = {:.15e}", omega_bar(nu, tau)?);
    println!("omega         = {:.15e}", omega(nu, tau)?);
    if tau >= 0.0 {
        let (lo, hi) = kappa_bounds(nu, tau)?;
        println!("kappa         = ({lo:.15e}, {hi:.15e})");
    }
    if (2.0..=3.0).contains(&nu) && (0.0..1.0).contains(&tau) {
        println!("r_nu          = {:.15e}", r_nu(nu, tau)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::FitLogistic(a) => fit_logistic(a),
        Command::FitDwd(a) => fit_dwd(a),
        Command::Portfolio(a) => portfolio(a),
        Command::Bench(a) => run_bench(a),
        Command::Kernels(a) => kernels(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
