//! Ambient metrics in a normal coordinate chart, the graph first fundamental
//! form `G(x, z, p)` and the normal field `chi(x, z, p)`.
//!
//! Points of the ambient space are `(x_1, .., x_n, z)`; the metric is an
//! `(n+1) x (n+1)` symmetric matrix with the last index standing for the
//! height direction.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Step of the central difference used for `d/dz g` when a metric has no
/// analytic derivative.
pub const FD_STEP: f64 = 1e-5;

/// Condition number above which the `chi` system is treated as singular.
pub const CHI_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("chi system is singular (condition number {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("quadratic form v^T g v = {value:e} is negative")]
    NegativeQuadraticForm { value: f64 },
    #[error("metric is not symmetric at {point:?}")]
    NotSymmetric { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eig: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// A smooth Riemannian metric on a neighbourhood of the origin of `R^{n+1}`.
pub trait MetricField: Send + Sync {
    /// Graph dimension `n`; the ambient dimension is `n + 1`.
    fn dim(&self) -> usize;

    /// Metric matrix at `point` (length `n + 1`).
    fn eval(&self, point: &[f64]) -> DMatrix<f64>;

    /// Derivative of the metric matrix in the height variable `z`.
    fn eval_dz(&self, point: &[f64]) -> DMatrix<f64> {
        let last = point.len() - 1;
        let mut plus = point.to_vec();
        let mut minus = point.to_vec();
        plus[last] += FD_STEP;
        minus[last] -= FD_STEP;
        (self.eval(&plus) - self.eval(&minus)) / (2.0 * FD_STEP)
    }

    /// Whether `g(0)` is the identity.
    fn normal_at_origin(&self) -> bool {
        false
    }

    /// True when `g` is the identity everywhere. Used to take exact shortcuts.
    fn is_euclidean(&self) -> bool {
        false
    }
}

/// Checks symmetry and positive definiteness of the metric at `point`.
pub fn validate_at(metric: &dyn MetricField, point: &[f64]) -> Result<(), MetricError> {
    let n1 = metric.dim() + 1;
    if point.len() != n1 {
        return Err(MetricError::Dimension {
            expected: n1,
            got: point.len(),
        });
    }
    let g = metric.eval(point);
    for i in 0..n1 {
        for j in 0..i {
            if g[(i, j)] != g[(j, i)] {
                return Err(MetricError::NotSymmetric {
                    point: point.to_vec(),
                });
            }
        }
    }
    let min_eig = g.symmetric_eigenvalues().min();
    let scale = g.amax().max(1.0);
    if min_eig <= 1e-12 * scale {
        return Err(MetricError::NotPositiveDefinite {
            point: point.to_vec(),
            min_eig,
        });
    }
    Ok(())
}

/// First-order data `(x, z, p)` of a graph `z = u(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphJet {
    pub x: Vec<f64>,
    pub z: f64,
    pub p: Vec<f64>,
}

impl GraphJet {
    pub fn new(x: Vec<f64>, z: f64, p: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), p.len());
        Self { x, z, p }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// The ambient point `(x, z)`.
    pub fn point(&self) -> Vec<f64> {
        let mut pt = self.x.clone();
        pt.push(self.z);
        pt
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// `G_ij = g_ij + g_{i,n+1} p_j + g_{j,n+1} p_i + g_{n+1,n+1} p_i p_j` from
/// an already evaluated metric matrix.
pub fn graph_gram(g: &DMatrix<f64>, p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (i, j) = (i.min(j), i.max(j));
        let sym = 0.5 * (g[(i, j)] + g[(j, i)]);
        sym + g[(i, n)] * p[j] + g[(j, n)] * p[i] + g[(n, n)] * p[i] * p[j]
    })
}

/// The graph first fundamental form `G(x, z, p)`.
pub fn assemble_g(metric: &dyn MetricField, jet: &GraphJet) -> DMatrix<f64> {
    graph_gram(&metric.eval(&jet.point()), &jet.p)
}

/// Solves the linear system defining `chi` for an evaluated metric matrix.
pub fn chi_from_matrix(g: &DMatrix<f64>, p: &[f64]) -> Result<DVector<f64>, MetricError> {
    let n = p.len();
    let a = DMatrix::from_fn(n, n, |i, j| g[(i, j)] + g[(j, n)] * p[i]);
    let rhs = DVector::from_fn(n, |i, _| -g[(i, n)] - g[(n, n)] * p[i]);

    let sv = a.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= CHI_CONDITION_LIMIT) {
        return Err(MetricError::SingularSystem { condition });
    }
    let sol = a.lu().solve(&rhs).ok_or(MetricError::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let mut chi = DVector::zeros(n + 1);
    chi.rows_mut(0, n).copy_from(&sol);
    chi[n] = 1.0;
    Ok(chi)
}

/// The normal field `chi = (chi^1, .., chi^n, 1)`.
pub fn solve_chi(metric: &dyn MetricField, jet: &GraphJet) -> Result<DVector<f64>, MetricError> {
    chi_from_matrix(&metric.eval(&jet.point()), &jet.p)
}

/// `sqrt(v^T g v)` for an evaluated metric matrix.
pub fn norm_with(g: &DMatrix<f64>, v: &[f64]) -> Result<f64, MetricError> {
    let n = v.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += g[(i, j)] * v[i] * v[j];
        }
    }
    if q < -1e-14 {
        return Err(MetricError::NegativeQuadraticForm { value: q });
    }
    Ok(q.max(0.0).sqrt())
}

/// `||v||_{g(point)}`.
pub fn g_norm(metric: &dyn MetricField, point: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    norm_with(&metric.eval(point), v)
}

/// `g(u, v)` at `point`.
pub fn g_inner(metric: &dyn MetricField, point: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let g = metric.eval(point);
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[(i, j)] * u[i] * v[j];
        }
    }
    s
}

/// The flat metric.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean {
    pub n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl MetricField for Euclidean {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, _point: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n + 1, self.n + 1)
    }
    fn eval_dz(&self, _point: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.n + 1, self.n + 1)
    }
    fn normal_at_origin(&self) -> bool {
        true
    }
    fn is_euclidean(&self) -> bool {
        true
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Conformally flat metric `e^{2 phi} delta`.
pub struct Conformal {
    n: usize,
    phi: ScalarFn,
    phi_dz: Option<ScalarFn>,
    normal: bool,
}

impl Conformal {
    pub fn new(n: usize, phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let normal = {
            let zero = vec![0.0; n + 1];
            phi(&zero) == 0.0
        };
        Self {
            n,
            phi: Box::new(phi),
            phi_dz: None,
            normal,
        }
    }

    /// Supplies `d phi / dz` so `eval_dz` is analytic.
    pub fn with_dz(mut self, phi_dz: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.phi_dz = Some(Box::new(phi_dz));
        self
    }

    pub fn conformal_factor(&self, point: &[f64]) -> f64 {
        (2.0 * (self.phi)(point)).exp()
    }
}

impl MetricField for Conformal {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, point: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n + 1, self.n + 1) * self.conformal_factor(point)
    }
    fn eval_dz(&self, point: &[f64]) -> DMatrix<f64> {
        match &self.phi_dz {
            Some(dz) => {
                let f = 2.0 * dz(point) * self.conformal_factor(point);
                DMatrix::identity(self.n + 1, self.n + 1) * f
            }
            None => {
                let last = point.len() - 1;
                let mut plus = point.to_vec();
                let mut minus = point.to_vec();
                plus[last] += FD_STEP;
                minus[last] -= FD_STEP;
                (self.eval(&plus) - self.eval(&minus)) / (2.0 * FD_STEP)
            }
        }
    }
    fn normal_at_origin(&self) -> bool {
        self.normal
    }
}

/// A monomial `coef * X^exponents` in the ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(point)
            .fold(self.coef, |acc, (&e, &x)| acc * x.powi(e as i32))
    }

    pub fn eval_d(&self, point: &[f64], axis: usize) -> f64 {
        let e = self.exponents[axis];
        if e == 0 {
            return 0.0;
        }
        let mut exps = self.exponents.clone();
        exps[axis] -= 1;
        Monomial {
            coef: self.coef * e as f64,
            exponents: exps,
        }
        .eval(point)
    }
}

/// `g = I + diag(P_1, .., P_{n+1})` with polynomial diagonal perturbations.
/// Normal at the origin when every monomial has positive total degree.
#[derive(Debug, Clone)]
pub struct DiagonalPolynomial {
    n: usize,
    diag: Vec<Vec<Monomial>>,
}

impl DiagonalPolynomial {
    pub fn new(n: usize, diag: Vec<Vec<Monomial>>) -> Self {
        assert_eq!(diag.len(), n + 1, "one polynomial per ambient coordinate");
        Self { n, diag }
    }
}

impl MetricField for DiagonalPolynomial {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, point: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::identity(self.n + 1, self.n + 1);
        for (i, poly) in self.diag.iter().enumerate() {
            g[(i, i)] += poly.iter().map(|m| m.eval(point)).sum::<f64>();
        }
        g
    }
    fn eval_dz(&self, point: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n + 1, self.n + 1);
        for (i, poly) in self.diag.iter().enumerate() {
            g[(i, i)] = poly.iter().map(|m| m.eval_d(point, self.n)).sum::<f64>();
        }
        g
    }
    fn normal_at_origin(&self) -> bool {
        self.diag
            .iter()
            .flatten()
            .all(|m| m.coef == 0.0 || m.exponents.iter().sum::<u32>() > 0)
    }
}

/// A spatially constant metric.
#[derive(Debug, Clone)]
pub struct ConstantMetric {
    g: DMatrix<f64>,
}

impl ConstantMetric {
    pub fn new(g: DMatrix<f64>) -> Self {
        assert!(g.is_square() && g.nrows() >= 2);
        Self { g }
    }
}

impl MetricField for ConstantMetric {
    fn dim(&self) -> usize {
        self.g.nrows() - 1
    }
    fn eval(&self, _point: &[f64]) -> DMatrix<f64> {
        self.g.clone()
    }
    fn eval_dz(&self, _point: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.g.nrows(), self.g.ncols())
    }
    fn normal_at_origin(&self) -> bool {
        self.g == DMatrix::identity(self.g.nrows(), self.g.ncols())
    }
}

/// Metric given by an arbitrary closure.
pub struct FnMetric<F> {
    n: usize,
    f: F,
}

impl<F> FnMetric<F>
where
    F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F> MetricField for FnMetric<F>
where
    F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, point: &[f64]) -> DMatrix<f64> {
        (self.f)(point)
    }
}

/// Scales another metric by a constant `c^2`.
pub struct Scaled<'a> {
    pub inner: &'a dyn MetricField,
    pub factor: f64,
}

impl MetricField for Scaled<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, point: &[f64]) -> DMatrix<f64> {
        self.inner.eval(point) * (self.factor * self.factor)
    }
    fn eval_dz(&self, point: &[f64]) -> DMatrix<f64> {
        self.inner.eval_dz(point) * (self.factor * self.factor)
    }
}
