//! Principal linearization of the transformed junction system at the origin.
//!
//! Unknowns are `v_1 = phi_2 - a_1 psi` and `v_k = phi_k - a_k psi`
//! (`k >= 2`), in which the interior operators are diagonal:
//! `(1 + a_k^2) Lap' + mu_k^2 D_nn`. Boundary rows are the two first-order
//! balance conditions followed by the `q - 2` zeroth-order coincidence
//! conditions `phi_h = phi_2`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adn::{Term, WeightedSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizeError {
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("decay exponents need a nonzero tangential frequency")]
    ZeroFrequency,
}

/// Slopes, weights and the shift constant at the origin; indices are 0-based
/// here and 1-based in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionData {
    pub q: usize,
    pub s: usize,
    pub a: Vec<f64>,
    pub theta: Vec<f64>,
    pub c: f64,
    /// Dimension of the sheets; the junction lives in `R^{n+1}`.
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    2
}

impl JunctionData {
    pub fn new(
        q: usize,
        s: usize,
        a: Vec<f64>,
        theta: Vec<f64>,
        c: f64,
    ) -> Result<Self, LinearizeError> {
        let data = Self {
            q,
            s,
            a,
            theta,
            c,
            n: default_n(),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_n(mut self, n: usize) -> Result<Self, LinearizeError> {
        self.n = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), LinearizeError> {
        let bad = |m: String| Err(LinearizeError::InvariantViolation(m));
        if self.q < 3 {
            return bad(format!("q >= 3 (got q = {})", self.q));
        }
        if !(2..self.q).contains(&self.s) {
            return bad(format!(
                "2 <= s <= q - 1 (got s = {}, q = {})",
                self.s, self.q
            ));
        }
        if self.a.len() != self.q || self.theta.len() != self.q {
            return bad(format!("a and theta must have q = {} entries", self.q));
        }
        if self.n < 2 {
            return bad(format!("n >= 2 (got n = {})", self.n));
        }
        if self
            .a
            .iter()
            .chain(&self.theta)
            .chain([&self.c])
            .any(|x| !x.is_finite())
        {
            return bad("all data must be finite".into());
        }
        if let Some(k) = self.theta.iter().position(|&t| !(t > 0.0)) {
            return bad(format!("theta_{} > 0 (got {})", k + 1, self.theta[k]));
        }
        if !(self.a[0] > self.a[1]) {
            return bad(format!(
                "a_1 > a_2 (got a_1 = {}, a_2 = {})",
                self.a[0], self.a[1]
            ));
        }
        let prod = self.c * self.gap();
        if !(prod > 1.0) {
            return bad(format!("C (a_1 - a_2) > 1 (got {prod})"));
        }
        Ok(())
    }

    /// `a_1 - a_2`.
    pub fn gap(&self) -> f64 {
        self.a[0] - self.a[1]
    }

    /// `1 - C (a_1 - a_2)`, negative for admissible data.
    pub fn shift_factor(&self) -> f64 {
        1.0 - self.c * self.gap()
    }

    fn is_plus(&self, k: usize) -> bool {
        k < self.s
    }

    /// `mu_k`, the square root of the normal coefficient for unknown `k`.
    pub fn mu(&self, k: usize) -> f64 {
        if self.is_plus(k) {
            self.gap()
        } else {
            self.gap() / self.shift_factor()
        }
    }
}

/// Decay rates `lambda_k` of `c_k e^{i xi' y' - lambda_k y_n}`.
pub fn decay_exponents(data: &JunctionData, xi: &[f64]) -> Result<Vec<f64>, LinearizeError> {
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(LinearizeError::ZeroFrequency);
    }
    let gap = data.gap();
    Ok((0..data.q)
        .map(|k| {
            let base = (1.0 + data.a[k] * data.a[k]).sqrt() * norm / gap;
            if data.is_plus(k) {
                base
            } else {
                (data.c * gap - 1.0) * base
            }
        })
        .collect())
}

/// `c_k = (a_k - a_2)/(a_1 - a_2) c_1 + (a_1 - a_k)/(a_1 - a_2) c_2`.
pub fn coincidence_coefficients(
    data: &JunctionData,
    c1: Complex64,
    c2: Complex64,
) -> Vec<Complex64> {
    let (a1, a2) = (data.a[0], data.a[1]);
    let gap = a1 - a2;
    data.a
        .iter()
        .enumerate()
        .map(|(k, &ak)| match k {
            0 => c1,
            1 => c2,
            _ => c1 * ((ak - a2) / gap) + c2 * ((a1 - ak) / gap),
        })
        .collect()
}

/// `D = (a_1 - a_2) [(sum w)(sum w a^2) - (sum w a)^2]`, `w_k = theta_k / (1 + a_k^2)`.
/// No ordering of the slopes is assumed.
pub fn coercivity_determinant(theta: &[f64], a: &[f64]) -> f64 {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&t, &ak) in theta.iter().zip(a) {
        let w = t / (1.0 + ak * ak);
        s0 += w;
        s1 += w * ak;
        s2 += w * ak * ak;
    }
    (a[0] - a[1]) * (s0 * s2 - s1 * s1)
}

/// True when all slopes agree to `1e-12` of their spread scale.
pub fn slopes_all_equal(a: &[f64]) -> bool {
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min <= 1e-12 * (1.0 + max.abs().max(min.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearJunctionSystem {
    pub data: JunctionData,
    /// `1 + a_k^2`.
    pub tangential: Vec<f64>,
    /// `mu_k^2`.
    pub normal: Vec<f64>,
    /// Coefficients on `D_n v_k` of the two balance rows.
    pub balance_raw: [Vec<f64>; 2],
    /// Coefficients on `c_k` of the balance rows after substituting the
    /// ansatz and dividing by `-|xi'| / (a_1 - a_2)`.
    pub balance_reduced: [Vec<f64>; 2],
    /// Row `h - 3` holds the coefficients on `v_1..v_q` of `phi_h - phi_2`.
    pub coincidence: Vec<Vec<f64>>,
    pub s_weights: Vec<i32>,
    pub t_weights: Vec<i32>,
    pub r_weights: Vec<i32>,
    /// Maps `v` to `(psi, phi_2, ..., phi_q)`.
    pub to_original: DMatrix<f64>,
}

pub fn principal_linearization(
    data: &JunctionData,
) -> Result<LinearJunctionSystem, LinearizeError> {
    data.validate()?;
    let q = data.q;
    let gap = data.gap();
    let shift = data.shift_factor();
    let tangential: Vec<f64> = data.a.iter().map(|a| 1.0 + a * a).collect();
    let normal: Vec<f64> = (0..q).map(|k| data.mu(k).powi(2)).collect();

    let mut raw = [vec![0.0; q], vec![0.0; q]];
    let mut reduced = [vec![0.0; q], vec![0.0; q]];
    for k in 0..q {
        let ak = data.a[k];
        let side = if data.is_plus(k) { 1.0 } else { -1.0 / shift };
        let base = data.theta[k] / tangential[k].powf(1.5) * side;
        raw[0][k] = base * ak;
        raw[1][k] = base;
        let w = data.theta[k] / tangential[k];
        reduced[0][k] = w * ak;
        reduced[1][k] = w;
    }

    let coincidence = (2..q)
        .map(|h| {
            let mut row = vec![0.0; q];
            row[0] = -(data.a[h] - data.a[1]) / gap;
            row[1] = (data.a[h] - data.a[0]) / gap;
            row[h] = 1.0;
            row
        })
        .collect();

    // psi = (v_2 - v_1) / gap, phi_k = v_k + a_k psi (phi_2 from v_2)
    let mut to_original = DMatrix::zeros(q, q);
    to_original[(0, 0)] = -1.0 / gap;
    to_original[(0, 1)] = 1.0 / gap;
    for k in 1..q {
        to_original[(k, k)] += 1.0;
        to_original[(k, 0)] += -data.a[k] / gap;
        to_original[(k, 1)] += data.a[k] / gap;
    }

    let mut r_weights = vec![-1, -1];
    r_weights.extend(std::iter::repeat_n(-2, q - 2));
    Ok(LinearJunctionSystem {
        data: data.clone(),
        tangential,
        normal,
        balance_raw: raw,
        balance_reduced: reduced,
        coincidence,
        s_weights: vec![0; q],
        t_weights: vec![2; q],
        r_weights,
        to_original,
    })
}

impl LinearJunctionSystem {
    /// The system in the generic weighted form consumed by the ADN checker.
    pub fn to_weighted_system(&self) -> WeightedSystem {
        let q = self.data.q;
        let n = self.data.n;
        let unit = |axis: usize, power: u32| {
            let mut alpha = vec![0u32; n];
            alpha[axis] = power;
            alpha
        };
        let mut interior = Vec::new();
        for k in 0..q {
            for i in 0..n - 1 {
                interior.push(Term::real(k, k, unit(i, 2), self.tangential[k]));
            }
            interior.push(Term::real(k, k, unit(n - 1, 2), self.normal[k]));
        }
        let mut boundary = Vec::new();
        for (h, row) in self.balance_raw.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    boundary.push(Term::real(h, k, unit(n - 1, 1), v));
                }
            }
        }
        for (i, row) in self.coincidence.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    boundary.push(Term::real(i + 2, k, vec![0; n], v));
                }
            }
        }
        WeightedSystem {
            n,
            q,
            m: q,
            l: 0,
            s: self.s_weights.clone(),
            t: self.t_weights.clone(),
            r: self.r_weights.clone(),
            interior,
            boundary,
        }
    }

    /// The 2x2 matrix acting on `(c_1, c_2)` after substituting the
    /// coincidence coefficients into the reduced balance rows. Its
    /// determinant is `D / (a_1 - a_2)^2`.
    pub fn reduced_balance_matrix(&self) -> [[f64; 2]; 2] {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let e1 = coincidence_coefficients(&self.data, one, zero);
        let e2 = coincidence_coefficients(&self.data, zero, one);
        let dot =
            |row: &[f64], c: &[Complex64]| row.iter().zip(c).map(|(r, c)| r * c.re).sum::<f64>();
        [
            [
                dot(&self.balance_reduced[0], &e1),
                dot(&self.balance_reduced[0], &e2),
            ],
            [
                dot(&self.balance_reduced[1], &e1),
                dot(&self.balance_reduced[1], &e2),
            ],
        ]
    }

    /// Plain-text summary: operators, exponents at `|xi'| = 1`, `D`.
    pub fn report(&self) -> String {
        let d = &self.data;
        let mut out = String::new();
        let _ = writeln!(out, "junction q = {} s = {} n = {}", d.q, d.s, d.n);
        let _ = writeln!(out, "C = {:?}", d.c);
        let _ = writeln!(out, "a_1 - a_2 = {:?}", d.gap());
        let _ = writeln!(out, "C (a_1 - a_2) = {:?}", d.c * d.gap());
        let _ = writeln!(
            out,
            "unknowns: v_1 = phi_2 - a_1 psi, v_k = phi_k - a_k psi"
        );
        for k in 0..d.q {
            let _ = writeln!(
                out,
                "interior {}: {:?} Lap' + {:?} D_nn",
                k + 1,
                self.tangential[k],
                self.normal[k]
            );
        }
        let mut xi = vec![0.0; d.n - 1];
        xi[0] = 1.0;
        let lambdas = decay_exponents(d, &xi).expect("unit frequency");
        for (k, l) in lambdas.iter().enumerate() {
            let _ = writeln!(out, "lambda_{} = {:?}", k + 1, l);
        }
        for (h, row) in self.balance_raw.iter().enumerate() {
            let _ = writeln!(out, "balance {}: {:?} . D_n v", h + 1, row);
        }
        for (i, row) in self.coincidence.iter().enumerate() {
            let _ = writeln!(out, "coincidence {}: {:?} . v", i + 3, row);
        }
        let _ = writeln!(out, "D = {:?}", coercivity_determinant(&d.theta, &d.a));
        out
    }
}
