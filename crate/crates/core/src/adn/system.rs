use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::AdnError;
use crate::grid::fmt_f64;
use crate::poly::Poly;

/// One principal coefficient: equation (or boundary row) `row`, unknown
/// `col`, derivative multi-index `alpha` over `y_1..y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub row: usize,
    pub col: usize,
    pub alpha: Vec<u32>,
    pub value: Complex64,
}

impl Term {
    pub fn real(row: usize, col: usize, alpha: Vec<u32>, value: f64) -> Self {
        Self {
            row,
            col,
            alpha,
            value: Complex64::new(value, 0.0),
        }
    }

    pub fn order(&self) -> i32 {
        self.alpha.iter().sum::<u32>() as i32
    }
}

/// A constant-coefficient principal system with weights `s`, `t`, `r`.
///
/// Interior terms are stored with the combined multi-index `alpha + beta`,
/// so `|alpha| = s_k + t_j` for entry `(k, j)`; boundary terms satisfy
/// `|kappa| = t_j + r_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSystem {
    pub n: usize,
    pub q: usize,
    pub m: usize,
    pub l: i32,
    pub s: Vec<i32>,
    pub t: Vec<i32>,
    pub r: Vec<i32>,
    pub interior: Vec<Term>,
    pub boundary: Vec<Term>,
}

impl WeightedSystem {
    /// Checks sizes, index ranges, the four weight inequalities and the
    /// homogeneity of every term.
    pub fn validate(&self) -> Result<(), AdnError> {
        let bad = |msg: String| Err(AdnError::BadWeights(msg));
        if self.n < 2 {
            return bad(format!("dimension n = {} must be at least 2", self.n));
        }
        if self.q == 0 || self.s.len() != self.q || self.t.len() != self.q || self.r.len() != self.m
        {
            return bad("weight vector lengths must be q, q and m".into());
        }
        if self.l > 0 {
            return bad(format!("l = {} must be <= 0", self.l));
        }
        if self.s.iter().max() != Some(&0) {
            return bad("max_k s_k must equal 0".into());
        }
        if self.t.iter().any(|&t| t < -self.l) {
            return bad("min_j t_j must be >= -l".into());
        }
        for &sk in &self.s {
            for &tj in &self.t {
                if sk + tj < 0 {
                    return bad("min_{k,j} (s_k + t_j) must be >= 0".into());
                }
            }
        }
        for &tj in &self.t {
            for &rh in &self.r {
                if tj + rh < 0 {
                    return bad("min_{j,h} (t_j + r_h) must be >= 0".into());
                }
            }
        }
        for (kind, terms, rows) in [("L", &self.interior, self.q), ("B", &self.boundary, self.m)] {
            for term in terms.iter() {
                if term.row >= rows || term.col >= self.q || term.alpha.len() != self.n {
                    return Err(AdnError::BadTerm(format!(
                        "{kind} {} {}: index out of range",
                        term.row + 1,
                        term.col + 1
                    )));
                }
                let want = if kind == "L" {
                    self.s[term.row] + self.t[term.col]
                } else {
                    self.t[term.col] + self.r[term.row]
                };
                if term.order() != want {
                    return Err(AdnError::BadTerm(format!(
                        "{kind} {} {}: order {} but the weights require {want}",
                        term.row + 1,
                        term.col + 1,
                        term.order()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `2m = sum s + sum t`, required for the complementing condition.
    pub fn order_count_matches(&self) -> bool {
        2 * self.m as i32 == self.s.iter().sum::<i32>() + self.t.iter().sum::<i32>()
    }

    pub fn total_order(&self) -> i32 {
        self.s.iter().sum::<i32>() + self.t.iter().sum::<i32>()
    }

    /// Interior symbol at real `xi`, with `D_a -> i xi_a`.
    pub fn symbol(&self, xi: &[f64]) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.q, self.q);
        for term in &self.interior {
            out[(term.row, term.col)] += term.value * monomial_at(&term.alpha, xi);
        }
        out
    }

    /// Interior symbol after the substitution `D' -> i xi'`, `D_n -> -lambda`,
    /// as polynomials in `lambda`.
    pub fn interior_lambda(&self, xi_t: &[f64]) -> Vec<Vec<Poly>> {
        lambda_matrix(&self.interior, self.q, self.q, xi_t)
    }

    /// Boundary rows after the same substitution.
    pub fn boundary_lambda(&self, xi_t: &[f64]) -> Vec<Vec<Poly>> {
        lambda_matrix(&self.boundary, self.m, self.q, xi_t)
    }

    /// Largest coefficient magnitude in each interior row.
    pub fn row_scales(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.q];
        for term in &self.interior {
            out[term.row] = out[term.row].max(term.value.norm());
        }
        out
    }

    /// The same system written in rotated tangential coordinates
    /// `z' = R y'`, with `R` orthogonal of size `n - 1`.
    pub fn rotate_tangential(&self, rot: &DMatrix<f64>) -> WeightedSystem {
        let rotate = |terms: &[Term]| -> Vec<Term> {
            let mut acc: BTreeMap<(usize, usize, Vec<u32>), Complex64> = BTreeMap::new();
            for term in terms {
                for (alpha, c) in rotate_monomial(&term.alpha, rot) {
                    *acc.entry((term.row, term.col, alpha)).or_default() += term.value * c;
                }
            }
            acc.into_iter()
                .filter(|(_, v)| v.norm() > 1e-15)
                .map(|((row, col, alpha), value)| Term {
                    row,
                    col,
                    alpha,
                    value,
                })
                .collect()
        };
        WeightedSystem {
            interior: rotate(&self.interior),
            boundary: rotate(&self.boundary),
            ..self.clone()
        }
    }

    pub fn parse(text: &str) -> Result<Self, AdnError> {
        text.parse()
    }

    /// Line-based text form read back by [`WeightedSystem::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |v: &[i32]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "q {}", self.q);
        let _ = writeln!(out, "m {}", self.m);
        let _ = writeln!(out, "l {}", self.l);
        let _ = writeln!(out, "s {}", list(&self.s));
        let _ = writeln!(out, "t {}", list(&self.t));
        let _ = writeln!(out, "r {}", list(&self.r));
        for (tag, terms) in [("L", &self.interior), ("B", &self.boundary)] {
            for term in terms.iter() {
                let alpha = term
                    .alpha
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = write!(
                    out,
                    "{tag} {} {} {alpha} {}",
                    term.row + 1,
                    term.col + 1,
                    fmt_f64(term.value.re)
                );
                if term.value.im != 0.0 {
                    let _ = write!(out, " {}", fmt_f64(term.value.im));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn monomial_at(alpha: &[u32], xi: &[f64]) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    alpha
        .iter()
        .zip(xi)
        .fold(Complex64::new(1.0, 0.0), |acc, (&a, &x)| {
            acc * (i * x).powu(a)
        })
}

fn lambda_matrix(terms: &[Term], rows: usize, cols: usize, xi_t: &[f64]) -> Vec<Vec<Poly>> {
    let mut out = vec![vec![Poly::zero(); cols]; rows];
    for term in terms {
        let n = term.alpha.len();
        let tangential = term.value * monomial_at(&term.alpha[..n - 1], xi_t);
        let k = term.alpha[n - 1];
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mono = Poly::monomial(tangential * sign, k as usize);
        out[term.row][term.col] = &out[term.row][term.col] + &mono;
    }
    out
}

/// Expands `prod_a (sum_b R_ba d_b)^alpha_a` over the tangential indices;
/// the normal exponent is carried through.
fn rotate_monomial(alpha: &[u32], rot: &DMatrix<f64>) -> Vec<(Vec<u32>, Complex64)> {
    let n = alpha.len();
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    let mut start = vec![0u32; n];
    start[n - 1] = alpha[n - 1];
    acc.insert(start, 1.0);
    for (a, &power) in alpha[..n - 1].iter().enumerate() {
        for _ in 0..power {
            let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
            for (mono, c) in &acc {
                for b in 0..n - 1 {
                    let w = rot[(b, a)];
                    if w == 0.0 {
                        continue;
                    }
                    let mut m2 = mono.clone();
                    m2[b] += 1;
                    *next.entry(m2).or_default() += c * w;
                }
            }
            acc = next;
        }
    }
    acc.into_iter()
        .map(|(k, v)| (k, Complex64::new(v, 0.0)))
        .collect()
}

impl FromStr for WeightedSystem {
    type Err = AdnError;

    fn from_str(text: &str) -> Result<Self, AdnError> {
        let mut n = None;
        let mut q = None;
        let mut m = None;
        let mut l = 0i32;
        let mut s = None;
        let mut t = None;
        let mut r = None;
        let mut raw_terms: Vec<(usize, char, Vec<&str>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |msg: String| AdnError::Parse { line: lineno, msg };
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let key = tokens.next().unwrap();
            let rest: Vec<&str> = tokens.collect();
            let one = |rest: &[&str]| -> Result<i64, AdnError> {
                match rest {
                    [v] => v.parse::<i64>().map_err(|e| err(format!("{v}: {e}"))),
                    _ => Err(err(format!("`{key}` takes exactly one integer"))),
                }
            };
            let ints = |rest: &[&str]| -> Result<Vec<i32>, AdnError> {
                rest.iter()
                    .map(|v| v.parse::<i32>().map_err(|e| err(format!("{v}: {e}"))))
                    .collect()
            };
            match key {
                "n" => {
                    n = Some(
                        usize::try_from(one(&rest)?)
                            .map_err(|_| err("n must be positive".into()))?,
                    )
                }
                "q" => {
                    q = Some(
                        usize::try_from(one(&rest)?)
                            .map_err(|_| err("q must be positive".into()))?,
                    )
                }
                "m" => {
                    m = Some(
                        usize::try_from(one(&rest)?).map_err(|_| err("m must be >= 0".into()))?,
                    )
                }
                "l" => l = one(&rest)? as i32,
                "s" => s = Some(ints(&rest)?),
                "t" => t = Some(ints(&rest)?),
                "r" => r = Some(ints(&rest)?),
                "L" | "B" => raw_terms.push((lineno, key.chars().next().unwrap(), rest)),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| AdnError::Parse {
            line: 0,
            msg: format!("missing `{what}` line"),
        };
        let n = n.ok_or_else(|| missing("n"))?;
        let q = q.ok_or_else(|| missing("q"))?;
        let m = m.ok_or_else(|| missing("m"))?;
        let s = s.ok_or_else(|| missing("s"))?;
        let t = t.ok_or_else(|| missing("t"))?;
        let r = r.unwrap_or_default();
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for (lineno, kind, rest) in raw_terms {
            let err = |msg: String| AdnError::Parse { line: lineno, msg };
            if rest.len() != n + 3 && rest.len() != n + 4 {
                return Err(err(format!(
                    "expected row, column, {n} exponents and a value"
                )));
            }
            let index = |v: &str| -> Result<usize, AdnError> {
                match v.parse::<usize>() {
                    Ok(x) if x >= 1 => Ok(x - 1),
                    _ => Err(err(format!("bad 1-based index `{v}`"))),
                }
            };
            let row = index(rest[0])?;
            let col = index(rest[1])?;
            let alpha = rest[2..2 + n]
                .iter()
                .map(|v| v.parse::<u32>().map_err(|e| err(format!("{v}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{v}: {e}")));
            let re = num(rest[n + 2])?;
            let im = if rest.len() == n + 4 {
                num(rest[n + 3])?
            } else {
                0.0
            };
            let term = Term {
                row,
                col,
                alpha,
                value: Complex64::new(re, im),
            };
            if kind == 'L' {
                interior.push(term);
            } else {
                boundary.push(term);
            }
        }
        let sys = WeightedSystem {
            n,
            q,
            m,
            l,
            s,
            t,
            r,
            interior,
            boundary,
        };
        sys.validate()?;
        Ok(sys)
    }
}

/// `q` copies of the Laplacian with no boundary rows; a starting point for
/// fixtures.
pub fn laplacians(n: usize, q: usize) -> WeightedSystem {
    let mut interior = Vec::new();
    for k in 0..q {
        for a in 0..n {
            let mut alpha = vec![0; n];
            alpha[a] = 2;
            interior.push(Term::real(k, k, alpha, 1.0));
        }
    }
    WeightedSystem {
        n,
        q,
        m: q,
        l: 0,
        s: vec![0; q],
        t: vec![2; q],
        r: vec![-2; q],
        interior,
        boundary: vec![],
    }
}

/// Single Laplacian with the Dirichlet row `v = 0`.
pub fn dirichlet_laplace(n: usize) -> WeightedSystem {
    let mut sys = laplacians(n, 1);
    sys.r = vec![-2];
    sys.boundary = vec![Term::real(0, 0, vec![0; n], 1.0)];
    sys
}

/// Two decoupled Laplacians with rows `v_1 - v_2 = 0` and
/// `D_n v_1 - D_n v_2 = 0`; a nontrivial decaying solution exists.
pub fn identified_pair(n: usize) -> WeightedSystem {
    let mut sys = laplacians(n, 2);
    sys.r = vec![-2, -1];
    let mut dn = vec![0; n];
    dn[n - 1] = 1;
    sys.boundary = vec![
        Term::real(0, 0, vec![0; n], 1.0),
        Term::real(0, 1, vec![0; n], -1.0),
        Term::real(1, 0, dn.clone(), 1.0),
        Term::real(1, 1, dn, -1.0),
    ];
    sys
}

/// `D_11 - D_22` in two variables; not elliptic.
pub fn wave_operator() -> WeightedSystem {
    WeightedSystem {
        n: 2,
        q: 1,
        m: 1,
        l: 0,
        s: vec![0],
        t: vec![2],
        r: vec![-2],
        interior: vec![
            Term::real(0, 0, vec![2, 0], 1.0),
            Term::real(0, 0, vec![0, 2], -1.0),
        ],
        boundary: vec![Term::real(0, 0, vec![0, 0], 1.0)],
    }
}
