use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::system::WeightedSystem;
use super::AdnError;
use crate::poly::{poly_det, Poly, MAX_DET_SIZE};

/// `|det| / scale` at or below this value counts as vanishing.
pub const DET_TOL: f64 = 1e-10;
/// Decaying roots closer than this (relative) are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Size of the tangential nudge used when a cluster is not semisimple.
pub const PERTURBATION: f64 = 1e-6;
/// Seed for Gaussian direction sampling in dimension five and above.
pub const SAMPLE_SEED: u64 = 42;

pub fn default_samples(n: usize) -> usize {
    if n <= 4 {
        64
    } else {
        256
    }
}

/// Quasi-uniform points on the unit sphere of `R^dim`.
pub fn sphere_samples(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2 * k + 1) as f64 / count as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![rad * phi.cos(), rad * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / norm).collect()
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ellipticity {
    Elliptic { min_ratio: f64 },
    NotElliptic { witness: Vec<f64>, ratio: f64 },
}

impl Ellipticity {
    pub fn is_elliptic(&self) -> bool {
        matches!(self, Ellipticity::Elliptic { .. })
    }
}

/// Determinant of the interior symbol at `xi`, rotated by `i^(-sum(s+t))`
/// so that it is real for real coefficients, and the product over rows of
/// `sum |c| |xi^alpha|`, the size each row would have without cancellation.
fn normalized_det(sys: &WeightedSystem, xi: &[f64]) -> (Complex64, f64) {
    let det = sys.symbol(xi).determinant();
    let phase = Complex64::new(0.0, -1.0).powi(sys.total_order());
    let mut rows = vec![0.0f64; sys.q];
    for term in &sys.interior {
        let mag: f64 = term
            .alpha
            .iter()
            .zip(xi)
            .map(|(&a, x)| x.abs().powi(a as i32))
            .product();
        rows[term.row] += term.value.norm() * mag;
    }
    (det * phase, rows.iter().product())
}

fn slerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let v: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn ellipticity_check(sys: &WeightedSystem, samples: usize) -> Result<Ellipticity, AdnError> {
    ellipticity_check_with(sys, samples, DET_TOL)
}

/// [`ellipticity_check`] with the determinant threshold given explicitly.
pub fn ellipticity_check_with(
    sys: &WeightedSystem,
    samples: usize,
    det_tol: f64,
) -> Result<Ellipticity, AdnError> {
    sys.validate()?;
    if sys.q > MAX_DET_SIZE {
        return Err(AdnError::TooLarge(sys.q));
    }
    let points = sphere_samples(sys.n, samples.max(2));
    let mut min_ratio = f64::INFINITY;
    let mut reference: Option<(usize, f64)> = None;
    for (idx, xi) in points.iter().enumerate() {
        let (det, scale) = normalized_det(sys, xi);
        if scale == 0.0 {
            return Ok(Ellipticity::NotElliptic {
                witness: xi.clone(),
                ratio: 0.0,
            });
        }
        let ratio = det.norm() / scale;
        min_ratio = min_ratio.min(ratio);
        if ratio <= det_tol {
            return Ok(Ellipticity::NotElliptic {
                witness: xi.clone(),
                ratio,
            });
        }
        if det.im.abs() > 1e-9 * det.norm() {
            continue;
        }
        match reference {
            None => reference = Some((idx, det.re.signum())),
            Some((first, sign)) if det.re.signum() != sign => {
                let (a, b) = (&points[first], xi);
                if a.iter().zip(b).all(|(x, y)| (x + y).abs() < 1e-12) {
                    continue;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let d = normalized_det(sys, &slerp(a, b, mid)).0.re;
                    if d.signum() == sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let witness = slerp(a, b, 0.5 * (lo + hi));
                let (det, scale) = normalized_det(sys, &witness);
                let ratio = if scale > 0.0 { det.norm() / scale } else { 0.0 };
                return Ok(Ellipticity::NotElliptic { witness, ratio });
            }
            _ => {}
        }
    }
    Ok(Ellipticity::Elliptic { min_ratio })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coercivity {
    Coercive {
        min_ratio: f64,
    },
    /// `null_vector` holds the coefficients on the decaying basis at `xi`
    /// that every boundary row annihilates.
    NotCoercive {
        xi: Vec<f64>,
        roots: Vec<Complex64>,
        null_vector: Vec<Complex64>,
        ratio: f64,
    },
}

impl Coercivity {
    pub fn is_coercive(&self) -> bool {
        matches!(self, Coercivity::Coercive { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementingReport {
    pub verdict: Coercivity,
    pub samples: usize,
    /// Samples whose repeated roots needed the perturbation fallback.
    pub perturbed: usize,
    /// Samples with a repeated decaying root that resolved semisimply.
    pub repeated_roots: usize,
}

/// Decaying solutions at one tangential frequency.
#[derive(Debug, Clone)]
pub struct DecayingBasis {
    pub roots: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub repeated: bool,
}

enum BasisFailure {
    NotSemisimple,
    Error(AdnError),
}

const SVD_MAX_ITER: usize = 10_000;

/// Largest `sum_k |c_k| |lambda|^k` over the entries: the size the entries
/// would have without cancellation.
fn magnitude_scale(m: &[Vec<Poly>], abs_lambda: f64) -> f64 {
    m.iter()
        .flatten()
        .map(|p| {
            p.coeffs()
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * abs_lambda + c.norm())
        })
        .fold(0.0, f64::max)
}

fn eval_matrix(m: &[Vec<Poly>], lambda: Complex64) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j].eval(lambda))
}

fn decaying_basis(sys: &WeightedSystem, xi_t: &[f64]) -> Result<DecayingBasis, BasisFailure> {
    let lmat = sys.interior_lambda(xi_t);
    let det = poly_det(&lmat);
    // degree in lambda is sum(s + t) with leading coefficient det L(e_n),
    // nonzero for elliptic systems; anything above it is cancellation noise
    let all = det.roots_with_degree(sys.total_order().max(0) as usize);
    let decaying: Vec<Complex64> = all.into_iter().filter(|z| z.re > 0.0).collect();
    if decaying.len() != sys.m {
        return Err(BasisFailure::Error(AdnError::DimensionMismatch {
            expected: sys.m,
            found: decaying.len(),
            xi: xi_t.to_vec(),
        }));
    }
    let mut sorted = decaying;
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for z in sorted {
        let joined = clusters.iter_mut().find(|c| {
            let centre = c[0];
            (z - centre).norm() <= CLUSTER_TOL * z.norm().max(centre.norm()).max(1e-300)
        });
        match joined {
            Some(c) => c.push(z),
            None => clusters.push(vec![z]),
        }
    }
    let mut roots = Vec::new();
    let mut vectors = Vec::new();
    let mut repeated = false;
    for cluster in clusters {
        let mult = cluster.len();
        repeated |= mult > 1;
        let lambda = cluster.iter().sum::<Complex64>() / mult as f64;
        let lnum = eval_matrix(&lmat, lambda);
        let Some(svd) = lnum.try_svd(false, true, f64::EPSILON, SVD_MAX_ITER) else {
            return Err(BasisFailure::NotSemisimple);
        };
        let v_t = svd.v_t.expect("requested V^*");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let q = order.len();
        let cutoff = CLUSTER_TOL * magnitude_scale(&lmat, lambda.norm()).max(1e-300);
        if mult > q || svd.singular_values[order[q - mult]] > cutoff {
            return Err(BasisFailure::NotSemisimple);
        }
        for &idx in &order[q - mult..] {
            roots.push(lambda);
            vectors.push(v_t.row(idx).iter().map(|c| c.conj()).collect());
        }
    }
    Ok(DecayingBasis {
        roots,
        vectors,
        repeated,
    })
}

/// The decaying solution space at tangential frequency `xi_t`, with the
/// perturbation fallback for non-semisimple clusters.
pub fn decaying_solutions(
    sys: &WeightedSystem,
    xi_t: &[f64],
) -> Result<(DecayingBasis, bool), AdnError> {
    match decaying_basis(sys, xi_t) {
        Ok(b) => Ok((b, false)),
        Err(BasisFailure::Error(e)) => Err(e),
        Err(BasisFailure::NotSemisimple) => {
            let nudged = nudge(xi_t);
            match decaying_basis(sys, &nudged) {
                Ok(b) => Ok((b, true)),
                Err(BasisFailure::Error(e)) => Err(e),
                Err(BasisFailure::NotSemisimple) => {
                    Err(AdnError::RootMultiplicity { xi: xi_t.to_vec() })
                }
            }
        }
    }
}

fn nudge(xi: &[f64]) -> Vec<f64> {
    let d = xi.len();
    let v: Vec<f64> = (0..d)
        .map(|i| {
            xi[i] + PERTURBATION * ((i + 1) as f64).sqrt() * if i % 2 == 0 { 1.0 } else { -1.0 }
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Boundary rows evaluated on the decaying basis, and `|det|` relative to
/// the product of row magnitudes. A row's magnitude is the largest
/// `sum |b| |lambda_r|^kappa_n |c_j|` over the basis, i.e. its size with
/// `|xi'| = 1` and no cancellation, so a row whose symbol vanishes at `xi'`
/// is not normalised away.
pub fn boundary_matrix(
    sys: &WeightedSystem,
    xi_t: &[f64],
    basis: &DecayingBasis,
) -> (DMatrix<Complex64>, f64) {
    let bmat = sys.boundary_lambda(xi_t);
    let m = sys.m;
    let n = sys.n;
    let mut out = DMatrix::<Complex64>::zeros(m, m);
    let mut row_mag = vec![0.0f64; m];
    for (r, (lambda, c)) in basis.roots.iter().zip(&basis.vectors).enumerate() {
        for h in 0..m {
            out[(h, r)] = (0..sys.q).map(|j| bmat[h][j].eval(*lambda) * c[j]).sum();
        }
        let mut mag = vec![0.0f64; m];
        for term in &sys.boundary {
            mag[term.row] += term.value.norm()
                * lambda.norm().powi(term.alpha[n - 1] as i32)
                * c[term.col].norm();
        }
        for h in 0..m {
            row_mag[h] = row_mag[h].max(mag[h]);
        }
    }
    let rows: f64 = row_mag.iter().product();
    let ratio = if rows > 0.0 {
        out.determinant().norm() / rows
    } else {
        0.0
    };
    (out, ratio)
}

pub fn complementing_check(
    sys: &WeightedSystem,
    samples: usize,
) -> Result<ComplementingReport, AdnError> {
    complementing_check_with(sys, samples, DET_TOL)
}

/// [`complementing_check`] with the determinant threshold given explicitly;
/// it applies to both the ellipticity and the boundary-matrix test.
pub fn complementing_check_with(
    sys: &WeightedSystem,
    samples: usize,
    det_tol: f64,
) -> Result<ComplementingReport, AdnError> {
    sys.validate()?;
    if sys.q > MAX_DET_SIZE {
        return Err(AdnError::TooLarge(sys.q));
    }
    if !sys.order_count_matches() {
        return Err(AdnError::BadWeights(format!(
            "2m = {} differs from sum s + sum t = {}",
            2 * sys.m,
            sys.total_order()
        )));
    }
    if !ellipticity_check_with(sys, samples, det_tol)?.is_elliptic() {
        return Err(AdnError::NotElliptic);
    }
    let points = sphere_samples(sys.n - 1, samples.max(2));
    let mut min_ratio = f64::INFINITY;
    let mut perturbed = 0;
    let mut repeated_roots = 0;
    for xi in &points {
        let (basis, nudged) = decaying_solutions(sys, xi)?;
        perturbed += nudged as usize;
        repeated_roots += basis.repeated as usize;
        let (b, ratio) = boundary_matrix(sys, xi, &basis);
        min_ratio = min_ratio.min(ratio);
        if ratio <= det_tol {
            let null_vector = b
                .clone()
                .try_svd(false, true, f64::EPSILON, SVD_MAX_ITER)
                .map(|svd| {
                    let v_t = svd.v_t.expect("requested V^*");
                    let idx = (0..svd.singular_values.len())
                        .min_by(|&a, &c| svd.singular_values[a].total_cmp(&svd.singular_values[c]))
                        .unwrap();
                    v_t.row(idx).iter().map(|c| c.conj()).collect()
                })
                .unwrap_or_default();
            let verdict = Coercivity::NotCoercive {
                xi: xi.clone(),
                roots: basis.roots.clone(),
                null_vector,
                ratio,
            };
            return Ok(ComplementingReport {
                verdict,
                samples: points.len(),
                perturbed,
                repeated_roots,
            });
        }
    }
    Ok(ComplementingReport {
        verdict: Coercivity::Coercive { min_ratio },
        samples: points.len(),
        perturbed,
        repeated_roots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adn::system::{dirichlet_laplace, identified_pair, laplacians, wave_operator, Term};

    #[test]
    fn sphere_samples_are_unit() {
        for dim in 1..6 {
            for p in sphere_samples(dim, 64) {
                assert!((p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(sphere_samples(1, 64).len(), 2);
    }

    #[test]
    fn laplacian_is_elliptic() {
        for n in 2..6 {
            assert!(ellipticity_check(&laplacians(n, 1), 64)
                .unwrap()
                .is_elliptic());
        }
    }

    #[test]
    fn wave_operator_is_not_elliptic_on_the_cone() {
        match ellipticity_check(&wave_operator(), 64).unwrap() {
            Ellipticity::NotElliptic { witness, ratio } => {
                assert!(ratio < 1e-10);
                assert!((witness[0].abs() - witness[1].abs()).abs() < 1e-9);
            }
            e => panic!("{e:?}"),
        }
        // an odd sample count misses the cone; the sign change still finds it
        match ellipticity_check(&wave_operator(), 7).unwrap() {
            Ellipticity::NotElliptic { witness, ratio } => {
                assert!(ratio < 1e-10);
                assert!((witness[0].abs() - witness[1].abs()).abs() < 1e-9);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn dirichlet_laplace_is_coercive() {
        for n in 2..5 {
            let rep = complementing_check(&dirichlet_laplace(n), 16).unwrap();
            assert!(rep.verdict.is_coercive(), "n = {n}: {rep:?}");
        }
    }

    #[test]
    fn neumann_laplace_is_coercive() {
        let mut sys = dirichlet_laplace(3);
        sys.r = vec![-1];
        sys.boundary = vec![Term::real(0, 0, vec![0, 0, 1], 1.0)];
        assert!(complementing_check(&sys, 16).unwrap().verdict.is_coercive());
    }

    #[test]
    fn tangential_derivative_row_fails_in_n2_only_at_zero() {
        // D_1 v = 0 is complementing for n = 2 (symbol i xi_1 != 0 on S^0)
        let mut sys = dirichlet_laplace(2);
        sys.r = vec![-1];
        sys.boundary = vec![Term::real(0, 0, vec![1, 0], 1.0)];
        assert!(complementing_check(&sys, 16).unwrap().verdict.is_coercive());
        // but not for n = 3: xi' = (0, 1) annihilates it
        let mut sys = dirichlet_laplace(3);
        sys.r = vec![-1];
        sys.boundary = vec![Term::real(0, 0, vec![1, 0, 0], 1.0)];
        assert!(!complementing_check(&sys, 64).unwrap().verdict.is_coercive());
    }

    #[test]
    fn identified_pair_is_not_coercive() {
        let rep = complementing_check(&identified_pair(3), 16).unwrap();
        match rep.verdict {
            Coercivity::NotCoercive { roots, ratio, .. } => {
                assert!(ratio < 1e-10);
                assert!(roots.iter().all(|r| (r - 1.0).norm() < 1e-6));
            }
            v => panic!("{v:?}"),
        }
        assert!(rep.repeated_roots > 0);
    }

    #[test]
    fn wrong_row_count_is_rejected() {
        let mut sys = dirichlet_laplace(2);
        sys.m = 2;
        sys.r = vec![-2, -2];
        sys.boundary.push(Term::real(1, 0, vec![0, 0], 2.0));
        assert!(matches!(
            complementing_check(&sys, 8),
            Err(AdnError::BadWeights(_))
        ));
    }

    #[test]
    fn non_semisimple_root_is_reported() {
        // L = [[Lap, D_nn], [0, Lap]]: det has a double root at |xi'| with a
        // one-dimensional kernel
        let mut sys = laplacians(2, 2);
        sys.interior.push(Term::real(0, 1, vec![0, 2], 1.0));
        sys.r = vec![-2, -2];
        sys.boundary = vec![
            Term::real(0, 0, vec![0, 0], 1.0),
            Term::real(1, 1, vec![0, 0], 1.0),
        ];
        assert!(matches!(
            complementing_check(&sys, 4),
            Err(AdnError::RootMultiplicity { .. })
        ));
    }
}
