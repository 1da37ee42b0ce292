//! Dense univariate polynomials with complex coefficients and root finding
//! through companion-matrix eigenvalues.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Coefficients in ascending order: `c[0] + c[1] x + ..`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c * x^k`.
    pub fn monomial(c: Complex64, k: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Drops leading coefficients below `rel_tol * max|c|`.
    pub fn trimmed(&self, rel_tol: f64) -> Poly {
        let cut = rel_tol * self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= cut) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    /// Degree after trimming exact zeros; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| c.norm() != 0.0)
    }

    /// All complex roots, from the eigenvalues of the companion matrix of the
    /// monic normalisation, each refined by a few Newton steps.
    pub fn roots(&self) -> Vec<Complex64> {
        let p = self.trimmed(1e-14);
        match p.degree() {
            Some(d) if d > 0 => p.roots_with_degree(d),
            _ => vec![],
        }
    }

    /// Roots of the polynomial truncated to degree `deg`, for callers that
    /// know the degree structurally. Empty when that coefficient is zero.
    pub fn roots_with_degree(&self, deg: usize) -> Vec<Complex64> {
        if deg == 0 || self.coeffs.len() <= deg || self.coeffs[deg].norm() == 0.0 {
            return vec![];
        }
        let p = Poly {
            coeffs: self.coeffs[..=deg].to_vec(),
        };
        // substitute x = sigma t so the constant and leading terms match
        let c0 = p.coeffs[0].norm();
        let sigma = if c0 > 0.0 {
            (c0 / p.coeffs[deg].norm()).powf(1.0 / deg as f64)
        } else {
            1.0
        };
        let sigma = if sigma.is_finite() && sigma > 0.0 {
            sigma
        } else {
            1.0
        };
        let scaled: Vec<Complex64> = p
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * sigma.powi(i as i32))
            .collect();
        let lead = scaled[deg];
        let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -scaled[i] / lead;
        }
        // Schur iterations can cycle on spectra symmetric about the origin;
        // a complex shift of the whole matrix breaks the symmetry.
        let bound = 1.0
            + scaled[..deg]
                .iter()
                .fold(0.0f64, |m, c| m.max((c / lead).norm()));
        let identity = DMatrix::<Complex64>::identity(deg, deg);
        let eig = [
            Complex64::new(0.1, 0.05),
            Complex64::new(-0.07, 0.13),
            Complex64::new(0.0, 0.0),
        ]
        .into_iter()
        .find_map(|shift| {
            let shift = shift * bound;
            (&comp + &identity * shift)
                .try_schur(f64::EPSILON, 10_000)
                .and_then(|s| s.eigenvalues())
                .map(|e| e.map(|z| (z - shift) * sigma))
        });
        let Some(eig) = eig else {
            return vec![];
        };
        let dp = p.derivative();
        eig.iter()
            .map(|&z0| {
                let mut z = z0;
                for _ in 0..3 {
                    let d = dp.eval(z);
                    if d.norm() == 0.0 {
                        break;
                    }
                    let step = p.eval(z) / d;
                    let next = z - step;
                    // keep the polish only when it improves the residual
                    if p.eval(next).norm() < p.eval(z).norm() {
                        z = next;
                    } else {
                        break;
                    }
                }
                z
            })
            .collect()
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly {
            coeffs: (0..len)
                .map(|i| *self.coeffs.get(i).unwrap_or(&zero) + *rhs.coeffs.get(i).unwrap_or(&zero))
                .collect(),
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly { coeffs: out }
    }
}

impl Mul<Complex64> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: Complex64) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c * rhs).collect(),
        }
    }
}

/// Largest matrix handled by [`poly_det`].
pub const MAX_DET_SIZE: usize = 16;

/// Determinant of a square matrix of polynomials by cofactor expansion with
/// memoisation over column subsets. Exact up to coefficient rounding; no
/// polynomial division.
pub fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let q = m.len();
    assert!(
        q <= MAX_DET_SIZE,
        "polynomial determinant limited to {MAX_DET_SIZE}x{MAX_DET_SIZE}"
    );
    if q == 0 {
        return Poly::constant(Complex64::new(1.0, 0.0));
    }
    // minors[S] = det of rows 0..|S| restricted to the columns in S
    let mut minors: Vec<Option<Poly>> = vec![None; 1 << q];
    minors[0] = Some(Poly::constant(Complex64::new(1.0, 0.0)));
    for mask in 1usize..(1 << q) {
        let row = mask.count_ones() as usize - 1;
        let mut acc = Poly::zero();
        for col in 0..q {
            if mask & (1 << col) == 0 {
                continue;
            }
            let rest = mask & !(1 << col);
            let minor = minors[rest].as_ref().expect("smaller subsets filled first");
            // columns of S above `col` come after it in the submatrix ordering
            let above = (mask >> (col + 1)).count_ones();
            let term = &m[row][col] * minor;
            acc = if above % 2 == 0 {
                &acc + &term
            } else {
                &acc - &term
            };
        }
        minors[mask] = Some(acc);
    }
    minors[(1 << q) - 1].take().unwrap()
}
