//! Objective oracles: generalized linear models, the log-utility
//! portfolio objective, distance-weighted discrimination and plain
//! quadratics.
//!
//! Every model reports certified self-concordance parameters and, when it
//! knows them, a strong-convexity modulus and a gradient Lipschitz
//! constant. [`params_for`] uses those to move a model to order 2 or 3.

use ndarray::{Array1, Array2, Axis};

use crate::atoms::LossAtom;
use crate::error::{Error, Result};
use crate::kernel::{reparam, GscParams, Reparam};
use crate::linops::{symmetric_eigenvalues, SymOp};

/// Above this dimension Hessians are served only as operators.
pub const DEFAULT_DENSE_LIMIT: usize = 2000;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for &(j, v) in row {
                if j >= ncols {
                    return Err(Error::InvalidParams(format!("column {j} out of range {ncols}")));
                }
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows: rows.len(), ncols, indptr, indices, values })
    }

    pub fn from_dense(a: &Array2<f64>) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = a
            .outer_iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
            .collect();
        Self::from_rows(a.ncols(), &rows).expect("indices in range")
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                a[[i, j]] += v;
            }
        }
        a
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn row_dot(&self, i: usize, x: &Array1<f64>) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

/// Design matrix of a GLM.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Dense(Array2<f64>),
    Sparse(CsrMatrix),
}

impl Design {
    pub fn nrows(&self) -> usize {
        match self {
            Design::Dense(a) => a.nrows(),
            Design::Sparse(a) => a.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Design::Dense(a) => a.ncols(),
            Design::Sparse(a) => a.ncols,
        }
    }

    pub fn matvec(&self, x: &Array1<f64>) -> Array1<f64> {
        match self {
            Design::Dense(a) => a.dot(x),
            Design::Sparse(a) => Array1::from_shape_fn(a.nrows, |i| a.row_dot(i, x)),
        }
    }

    pub fn t_matvec(&self, y: &Array1<f64>) -> Array1<f64> {
        match self {
            Design::Dense(a) => a.t().dot(y),
            Design::Sparse(a) => {
                let mut out = Array1::zeros(a.ncols);
                for i in 0..a.nrows {
                    let yi = y[i];
                    if yi != 0.0 {
                        for (j, v) in a.row(i) {
                            out[j] += v * yi;
                        }
                    }
                }
                out
            }
        }
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        match self {
            Design::Dense(a) => a.row(i).dot(&a.row(i)).sqrt(),
            Design::Sparse(a) => a.row_norm(i),
        }
    }

    /// `A^T diag(d) A`.
    pub fn weighted_gram(&self, d: &Array1<f64>) -> Array2<f64> {
        match self {
            Design::Dense(a) => {
                let da = a * &d.view().insert_axis(Axis(1));
                let h = a.t().dot(&da);
                (&h + &h.t()) * 0.5
            }
            Design::Sparse(a) => {
                let mut h = Array2::zeros((a.ncols, a.ncols));
                for i in 0..a.nrows {
                    let di = d[i];
                    if di == 0.0 {
                        continue;
                    }
                    for (j, vj) in a.row(i) {
                        for (k, vk) in a.row(i) {
                            h[[j, k]] += di * vj * vk;
                        }
                    }
                }
                h
            }
        }
    }
}

/// Hessian at a point, dense or as a product operator.
pub enum Curvature<'a> {
    Dense(Array2<f64>),
    Implicit(Box<dyn SymOp + 'a>),
}

impl<'a> SymOp for Curvature<'a> {
    fn dim(&self) -> usize {
        match self {
            Curvature::Dense(a) => a.nrows(),
            Curvature::Implicit(op) => op.dim(),
        }
    }
    fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        match self {
            Curvature::Dense(a) => a.dot(v),
            Curvature::Implicit(op) => op.apply(v),
        }
    }
    fn dense(&self) -> Option<&Array2<f64>> {
        match self {
            Curvature::Dense(a) => Some(a),
            Curvature::Implicit(_) => None,
        }
    }
}

/// Smooth convex objective with certified self-concordance parameters.
pub trait Model {
    fn dim(&self) -> usize;
    fn value(&self, x: &Array1<f64>) -> Result<f64>;
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>>;
    fn curvature(&self, x: &Array1<f64>) -> Result<Curvature<'_>>;
    fn gsc_params(&self) -> GscParams;

    fn hvp(&self, x: &Array1<f64>, v: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.curvature(x)?.apply(v))
    }

    /// Dense Hessian when the model serves one at this size.
    fn hessian(&self, x: &Array1<f64>) -> Result<Option<Array2<f64>>> {
        Ok(match self.curvature(x)? {
            Curvature::Dense(a) => Some(a),
            Curvature::Implicit(_) => None,
        })
    }

    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Order requested by a solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuChoice {
    Native,
    Force2,
    Force3,
}

/// Parameters of `model` expressed at the requested order.
pub fn params_for(model: &dyn Model, choice: NuChoice) -> Result<GscParams> {
    let native = model.gsc_params();
    let p = match choice {
        NuChoice::Native => native,
        NuChoice::Force3 if native.nu == 3.0 => native,
        NuChoice::Force3 => {
            let mu = model.strong_convexity().ok_or_else(|| {
                Error::InvalidParams("order 3 needs a strong convexity modulus".into())
            })?;
            reparam(native, Reparam::StrongConvexity(mu))?
        }
        NuChoice::Force2 if native.nu == 2.0 => native,
        NuChoice::Force2 => {
            let l = model.gradient_lipschitz().ok_or_else(|| {
                Error::InvalidParams("order 2 needs a gradient Lipschitz constant".into())
            })?;
            reparam(native, Reparam::LipschitzGradient(l))?
        }
    };
    p.require_solver_order()?;
    Ok(p)
}

/// `f(x) = sum_i w_i phi(a_i^T x + b_i) + x^T diag(q) x / 2 + c^T x`.
#[derive(Debug, Clone)]
pub struct GlmModel {
    design: Design,
    offsets: Array1<f64>,
    weights: Array1<f64>,
    atom: LossAtom,
    q_diag: Array1<f64>,
    linear: Array1<f64>,
    dense_limit: usize,
    params: GscParams,
}

impl GlmModel {
    pub fn new(
        design: Design,
        offsets: Array1<f64>,
        weights: Array1<f64>,
        atom: LossAtom,
        q_diag: Array1<f64>,
        linear: Array1<f64>,
    ) -> Result<Self> {
        atom.validate()?;
        let ap = atom.params();
        if !(2.0..=3.0).contains(&ap.nu) {
            return Err(Error::InvalidParams(format!(
                "finite-sum models need atoms of order in [2, 3], got {}",
                ap.nu
            )));
        }
        let (n, p) = (design.nrows(), design.ncols());
        if offsets.len() != n || weights.len() != n || q_diag.len() != p || linear.len() != p {
            return Err(Error::InvalidParams("inconsistent model dimensions".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParams("weights must be positive".into()));
        }
        if q_diag.iter().any(|q| !(*q >= 0.0)) {
            return Err(Error::InvalidParams("regularizer must be nonnegative".into()));
        }
        let mut m = 0.0f64;
        for i in 0..n {
            let scale = weights[i].powf(1.0 - ap.nu / 2.0);
            m = m.max(scale * ap.m * design.row_norm(i).powf(3.0 - ap.nu));
        }
        let params = GscParams { m, nu: ap.nu };
        Ok(Self { design, offsets, weights, atom, q_diag, linear, dense_limit: DEFAULT_DENSE_LIMIT, params })
    }

    /// Mean logistic loss over `rows` (labels already folded in) plus
    /// `gamma ||x||^2 / 2`.
    pub fn logistic(design: Design, gamma: f64) -> Result<Self> {
        let (n, p) = (design.nrows(), design.ncols());
        Self::new(
            design,
            Array1::zeros(n),
            Array1::from_elem(n, 1.0 / n as f64),
            LossAtom::Logistic,
            Array1::from_elem(p, gamma),
            Array1::zeros(p),
        )
    }

    pub fn with_dense_limit(mut self, limit: usize) -> Self {
        self.dense_limit = limit;
        self
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn atom(&self) -> LossAtom {
        self.atom
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn q_diag(&self) -> &Array1<f64> {
        &self.q_diag
    }

    /// Linear predictors, checked against the atom's domain.
    pub fn predictors(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.design.ncols() {
            return Err(Error::InvalidParams(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.design.ncols()
            )));
        }
        let z = self.design.matvec(x) + &self.offsets;
        if let Some(row) = z.iter().position(|t| !self.atom.contains(*t)) {
            return Err(Error::OutsideDomain { row });
        }
        Ok(z)
    }

    fn derivative_weights(&self, x: &Array1<f64>, order: usize) -> Result<Array1<f64>> {
        let z = self.predictors(x)?;
        let mut out = Array1::zeros(z.len());
        for i in 0..z.len() {
            out[i] = self.weights[i] * self.atom.eval(z[i], order)?;
        }
        Ok(out)
    }
}

impl Model for GlmModel {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        let z = self.predictors(x)?;
        let mut s = 0.0;
        for i in 0..z.len() {
            s += self.weights[i] * self.atom.value(z[i])?;
        }
        let quad: f64 = x.iter().zip(self.q_diag.iter()).map(|(xi, qi)| qi * xi * xi).sum();
        Ok(s + 0.5 * quad + self.linear.dot(x))
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let d1 = self.derivative_weights(x, 1)?;
        Ok(self.design.t_matvec(&d1) + &(&self.q_diag * x) + &self.linear)
    }

    fn curvature(&self, x: &Array1<f64>) -> Result<Curvature<'_>> {
        let d2 = self.derivative_weights(x, 2)?;
        if self.dim() <= self.dense_limit {
            let mut h = self.design.weighted_gram(&d2);
            for j in 0..self.dim() {
                h[[j, j]] += self.q_diag[j];
            }
            Ok(Curvature::Dense(h))
        } else {
            Ok(Curvature::Implicit(Box::new(GlmHessian { model: self, d2 })))
        }
    }

    fn gsc_params(&self) -> GscParams {
        self.params
    }

    fn strong_convexity(&self) -> Option<f64> {
        let mu = self.q_diag.iter().cloned().fold(f64::INFINITY, f64::min);
        (mu > 0.0 && mu.is_finite()).then_some(mu)
    }

    /// `sup phi'' * sum_i w_i ||a_i||^2 + max q`.
    fn gradient_lipschitz(&self) -> Option<f64> {
        let sup = self.atom.sup_second_derivative()?;
        let rows: f64 = (0..self.design.nrows())
            .map(|i| self.weights[i] * self.design.row_norm(i).powi(2))
            .sum();
        let qmax = self.q_diag.iter().cloned().fold(0.0, f64::max);
        Some(sup * rows + qmax)
    }
}

struct GlmHessian<'a> {
    model: &'a GlmModel,
    d2: Array1<f64>,
}

impl SymOp for GlmHessian<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        let av = self.model.design.matvec(v) * &self.d2;
        self.model.design.t_matvec(&av) + &(&self.model.q_diag * v)
    }
}

/// `f(x) = -sum_i ln(w_i^T x)` over positive price-ratio rows `w_i`.
#[derive(Debug, Clone)]
pub struct PortfolioModel {
    glm: GlmModel,
}

impl PortfolioModel {
    pub fn new(ratios: Array2<f64>) -> Result<Self> {
        if ratios.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParams("price ratios must be positive".into()));
        }
        let (n, p) = ratios.dim();
        let glm = GlmModel::new(
            Design::Dense(ratios),
            Array1::zeros(n),
            Array1::ones(n),
            LossAtom::LogBarrier,
            Array1::zeros(p),
            Array1::zeros(p),
        )?;
        Ok(Self { glm })
    }

    pub fn ratios(&self) -> &Array2<f64> {
        match self.glm.design() {
            Design::Dense(a) => a,
            Design::Sparse(_) => unreachable!("portfolio ratios are stored densely"),
        }
    }
}

impl Model for PortfolioModel {
    fn dim(&self) -> usize {
        self.glm.dim()
    }
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.glm.value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.glm.gradient(x)
    }
    fn curvature(&self, x: &Array1<f64>) -> Result<Curvature<'_>> {
        self.glm.curvature(x)
    }
    fn gsc_params(&self) -> GscParams {
        self.glm.gsc_params()
    }
}

/// Distance-weighted discrimination over `x = [w (p), mu (1), xi (n)]`:
/// `(1/n) sum_i (a_i^T w + mu y_i + xi_i)^(-q) + c^T xi`
/// `+ (g1 ||w||^2 + g2 mu^2 + g3 ||xi||^2) / 2`.
#[derive(Debug, Clone)]
pub struct DwdModel {
    pub a: Array2<f64>,
    pub y: Array1<f64>,
    pub c: Array1<f64>,
    pub q: f64,
    pub gammas: (f64, f64, f64),
    glm: GlmModel,
}

impl DwdModel {
    pub fn new(a: Array2<f64>, y: Array1<f64>, c: Array1<f64>, q: f64, gammas: (f64, f64, f64)) -> Result<Self> {
        let glm = dwd_as_glm(&a, &y, &c, q, gammas)?;
        Ok(Self { a, y, c, q, gammas, glm })
    }

    pub fn glm(&self) -> &GlmModel {
        &self.glm
    }

    /// `w = 0, mu = 0, xi = 1`.
    pub fn start_point(&self) -> Array1<f64> {
        let (n, p) = self.a.dim();
        let mut x = Array1::zeros(p + 1 + n);
        x.slice_mut(ndarray::s![p + 1..]).fill(1.0);
        x
    }

    /// Splits a stacked point into `(w, mu, xi)`.
    pub fn split(&self, x: &Array1<f64>) -> (Array1<f64>, f64, Array1<f64>) {
        let p = self.a.ncols();
        (x.slice(ndarray::s![..p]).to_owned(), x[p], x.slice(ndarray::s![p + 1..]).to_owned())
    }
}

/// Extended rows `(a_i, y_i, e_i)` with a negative-power atom.
pub fn dwd_as_glm(
    a: &Array2<f64>,
    y: &Array1<f64>,
    c: &Array1<f64>,
    q: f64,
    gammas: (f64, f64, f64),
) -> Result<GlmModel> {
    let (n, p) = a.dim();
    if y.len() != n || c.len() != n {
        return Err(Error::InvalidParams("labels and costs must have one entry per row".into()));
    }
    let (g1, g2, g3) = gammas;
    if !(g1 > 0.0 && g2 > 0.0 && g3 > 0.0) {
        return Err(Error::InvalidParams("regularization weights must be positive".into()));
    }
    let dim = p + 1 + n;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let mut r: Vec<(usize, f64)> =
                a.row(i).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect();
            r.push((p, y[i]));
            r.push((p + 1 + i, 1.0));
            r
        })
        .collect();
    let design = Design::Sparse(CsrMatrix::from_rows(dim, &rows)?);
    let mut qd = Array1::from_elem(dim, g3);
    qd.slice_mut(ndarray::s![..p]).fill(g1);
    qd[p] = g2;
    let mut lin = Array1::zeros(dim);
    lin.slice_mut(ndarray::s![p + 1..]).assign(c);
    GlmModel::new(
        design,
        Array1::zeros(n),
        Array1::from_elem(n, 1.0 / n as f64),
        LossAtom::NegPower { q },
        qd,
        lin,
    )
}

impl Model for DwdModel {
    fn dim(&self) -> usize {
        self.glm.dim()
    }
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.glm.value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.glm.gradient(x)
    }
    fn curvature(&self, x: &Array1<f64>) -> Result<Curvature<'_>> {
        self.glm.curvature(x)
    }
    fn gsc_params(&self) -> GscParams {
        self.glm.gsc_params()
    }
    fn strong_convexity(&self) -> Option<f64> {
        self.glm.strong_convexity()
    }
    fn gradient_lipschitz(&self) -> Option<f64> {
        self.glm.gradient_lipschitz()
    }
}

/// `f(x) = x^T A x / 2 + b^T x` with `M = 0`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub nu: f64,
}

impl QuadraticModel {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Self {
        Self { a, b, nu: 2.0 }
    }
}

impl Model for QuadraticModel {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        Ok(0.5 * x.dot(&self.a.dot(x)) + self.b.dot(x))
    }
    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.a.dot(x) + &self.b)
    }
    fn curvature(&self, _x: &Array1<f64>) -> Result<Curvature<'_>> {
        Ok(Curvature::Dense(self.a.clone()))
    }
    fn gsc_params(&self) -> GscParams {
        GscParams { m: 0.0, nu: self.nu }
    }
    fn strong_convexity(&self) -> Option<f64> {
        let ev = symmetric_eigenvalues(&self.a);
        ev.first().copied().filter(|v| *v > 0.0)
    }
    fn gradient_lipschitz(&self) -> Option<f64> {
        symmetric_eigenvalues(&self.a).last().copied()
    }
}
