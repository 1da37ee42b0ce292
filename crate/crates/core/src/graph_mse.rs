//! Discrete minimal surface operator for graphs in a general metric and the
//! conormal balance residual along the flattened interface `{x_n = 0}`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::grid::{GraphFunction, Side};
use crate::metric::{
    chi_from_matrix, graph_gram, norm_with, Euclidean, GraphJet, MetricError, MetricField,
    CHI_CONDITION_LIMIT,
};

/// Tolerance of the coincidence condition `u_1 = .. = u_q` on the interface.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MseError {
    #[error("G is numerically singular at x = {x:?} (condition {condition:e})")]
    SingularG { x: Vec<f64>, condition: f64 },
    #[error("chi undefined for sheet {sheet}: {source}")]
    SingularChi { sheet: usize, source: MetricError },
    #[error("node {0:?} is not interior")]
    NotInterior(Vec<usize>),
    #[error("a junction needs q >= 3 sheets, got {0}")]
    TooFewSheets(usize),
    #[error("invalid sheet family: {0}")]
    InvalidFamily(String),
    #[error("metric dimension {metric} does not match grid dimension {grid}")]
    Dimension { metric: usize, grid: usize },
}

/// Evaluated geometric quantities of the graph at one jet.
struct GraphGeometry {
    sqrt_det: f64,
    g_inv: DMatrix<f64>,
}

fn geometry(metric_g: &DMatrix<f64>, jet: &GraphJet) -> Result<GraphGeometry, MseError> {
    let gg = graph_gram(metric_g, &jet.p);
    let sv = gg.clone().singular_values();
    let condition = if sv.min() > 0.0 {
        sv.max() / sv.min()
    } else {
        f64::INFINITY
    };
    let det = gg.determinant();
    if !(condition <= CHI_CONDITION_LIMIT) || !(det > 0.0) {
        return Err(MseError::SingularG {
            x: jet.x.clone(),
            condition,
        });
    }
    let g_inv = gg.try_inverse().ok_or(MseError::SingularG {
        x: jet.x.clone(),
        condition: f64::INFINITY,
    })?;
    Ok(GraphGeometry {
        sqrt_det: det.sqrt(),
        g_inv,
    })
}

/// `sqrt(det G) G^{ij} (g_{n+1,n+1} p_j + g_{j,n+1})`, the `p`-gradient of the
/// area integrand.
pub fn area_flux(metric: &dyn MetricField, jet: &GraphJet) -> Result<Vec<f64>, MseError> {
    let n = jet.n();
    let g = metric.eval(&jet.point());
    let geo = geometry(&g, jet)?;
    let v: Vec<f64> = (0..n).map(|j| g[(n, n)] * jet.p[j] + g[(j, n)]).collect();
    Ok((0..n)
        .map(|i| geo.sqrt_det * (0..n).map(|j| geo.g_inv[(i, j)] * v[j]).sum::<f64>())
        .collect())
}

/// `1/2 sqrt(det G) G^{ij} D_z G_ij`, the `z`-derivative of the area integrand.
pub fn area_dz(metric: &dyn MetricField, jet: &GraphJet) -> Result<f64, MseError> {
    if metric.is_euclidean() {
        return Ok(0.0);
    }
    let n = jet.n();
    let pt = jet.point();
    let g = metric.eval(&pt);
    let geo = geometry(&g, jet)?;
    let dzg = graph_gram(&metric.eval_dz(&pt), &jet.p);
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += geo.g_inv[(i, j)] * dzg[(i, j)];
        }
    }
    Ok(0.5 * geo.sqrt_det * tr)
}

fn central(u: &GraphFunction, idx: &[usize], axis: usize) -> f64 {
    let (a, b) = (
        u.shifted(idx, axis, 1).unwrap(),
        u.shifted(idx, axis, -1).unwrap(),
    );
    (a - b) / (2.0 * u.h())
}

/// Jet at the node itself, with central-difference gradient.
pub fn node_jet(u: &GraphFunction, idx: &[usize]) -> GraphJet {
    let p = (0..u.n()).map(|a| central(u, idx, a)).collect();
    GraphJet::new(u.coord(idx), u.at(idx), p)
}

/// Jet at the half node `idx + e_axis / 2`.
fn half_jet(u: &GraphFunction, idx: &[usize], axis: usize) -> GraphJet {
    let h = u.h();
    let mut next = idx.to_vec();
    next[axis] += 1;
    let (u0, u1) = (u.at(idx), u.at(&next));
    let mut x = u.coord(idx);
    x[axis] += 0.5 * h;
    let p = (0..u.n())
        .map(|a| {
            if a == axis {
                (u1 - u0) / h
            } else {
                0.5 * (central(u, idx, a) + central(u, &next, a))
            }
        })
        .collect();
    GraphJet::new(x, 0.5 * (u0 + u1), p)
}

/// Divergence-form minimal surface residual at an interior node: the flux is
/// evaluated at half nodes and differenced, second-order consistent.
pub fn mse_residual(
    metric: &dyn MetricField,
    u: &GraphFunction,
    node: &[usize],
) -> Result<f64, MseError> {
    if metric.dim() != u.n() {
        return Err(MseError::Dimension {
            metric: metric.dim(),
            grid: u.n(),
        });
    }
    if !u.is_interior(node) {
        return Err(MseError::NotInterior(node.to_vec()));
    }
    let h = u.h();
    let mut div = 0.0;
    for axis in 0..u.n() {
        let fwd = area_flux(metric, &half_jet(u, node, axis))?[axis];
        let mut prev = node.to_vec();
        prev[axis] -= 1;
        let bwd = area_flux(metric, &half_jet(u, &prev, axis))?[axis];
        div += (fwd - bwd) / h;
    }
    Ok(div - area_dz(metric, &node_jet(u, node))?)
}

/// Residual at every interior node, as a grid shrunk by one node per side.
pub fn mse_residual_field(
    metric: &dyn MetricField,
    u: &GraphFunction,
) -> Result<GraphFunction, MseError> {
    let shape: Vec<usize> = u.shape().iter().map(|&m| m.saturating_sub(2)).collect();
    let origin: Vec<f64> = u.origin().iter().map(|&o| o + u.h()).collect();
    let len: usize = shape.iter().product();
    let mut out = vec![0.0; len];
    let shell = GraphFunction::new(
        shape.clone(),
        origin.clone(),
        u.h(),
        u.side(),
        vec![0.0; len],
    )
    .map_err(|e| MseError::InvalidFamily(e.to_string()))?;
    for (flat, slot) in out.iter_mut().enumerate() {
        let node: Vec<usize> = shell.unflatten(flat).iter().map(|i| i + 1).collect();
        *slot = mse_residual(metric, u, &node)?;
    }
    GraphFunction::new(shape, origin, u.h(), u.side(), out)
        .map_err(|e| MseError::InvalidFamily(e.to_string()))
}

/// Prescribed mean curvature residual `div(Du / sqrt(1 + |Du|^2)) - Lambda(x, u)`
/// in the flat metric. Vanishes on the lower sphere cap
/// `u = -sqrt(R^2 - |x|^2)` with `Lambda = n / R`.
pub fn pmc_residual(
    u: &GraphFunction,
    lambda: impl Fn(&[f64], f64) -> f64,
    node: &[usize],
) -> Result<f64, MseError> {
    let div = mse_residual(&Euclidean::new(u.n()), u, node)?;
    Ok(div - lambda(&u.coord(node), u.at(node)))
}

/// `q >= 3` graph sheets: `u_1..u_s` over the plus side, `u_{s+1}..u_q` over
/// the minus side, agreeing on the interface.
#[derive(Debug, Clone)]
pub struct SheetFamily {
    s: usize,
    sheets: Vec<GraphFunction>,
    theta: Vec<f64>,
}

impl SheetFamily {
    pub fn new(s: usize, sheets: Vec<GraphFunction>, theta: Vec<f64>) -> Result<Self, MseError> {
        let q = sheets.len();
        if q < 3 {
            return Err(MseError::TooFewSheets(q));
        }
        if !(2..q).contains(&s) {
            return Err(MseError::InvalidFamily(format!(
                "split s = {s} must satisfy 2 <= s < q = {q}"
            )));
        }
        if theta.len() != q || theta.iter().any(|&t| !(t > 0.0)) {
            return Err(MseError::InvalidFamily("need q positive weights".into()));
        }
        let first = &sheets[0];
        let n = first.n();
        for (k, sh) in sheets.iter().enumerate() {
            let want = if k < s { Side::Plus } else { Side::Minus };
            if sh.side() != want {
                return Err(MseError::InvalidFamily(format!(
                    "sheet {} must lie on side {want}",
                    k + 1
                )));
            }
            if sh.n() != n
                || sh.h() != first.h()
                || sh.shape()[..n - 1] != first.shape()[..n - 1]
                || sh.origin()[..n - 1] != first.origin()[..n - 1]
            {
                return Err(MseError::InvalidFamily(format!(
                    "sheet {} has a different tangential grid",
                    k + 1
                )));
            }
            let want_layer = if k < s { 0 } else { sh.shape()[n - 1] - 1 };
            if sh.interface_layer() != Some(want_layer) || sh.shape()[n - 1] < 3 {
                return Err(MseError::InvalidFamily(format!(
                    "sheet {} must end on the interface with at least 3 normal nodes",
                    k + 1
                )));
            }
        }
        let columns = first.column_count();
        let fam = Self { s, sheets, theta };
        for col in 0..columns {
            let v0 = fam.interface_value(0, col);
            for k in 1..q {
                let v = fam.interface_value(k, col);
                if (v - v0).abs() > COINCIDENCE_TOL {
                    return Err(MseError::InvalidFamily(format!(
                        "coincidence fails at interface column {col}: u_1 = {v0}, u_{} = {v}",
                        k + 1
                    )));
                }
            }
        }
        Ok(fam)
    }

    pub fn q(&self) -> usize {
        self.sheets.len()
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn sheets(&self) -> &[GraphFunction] {
        &self.sheets
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn interface_value(&self, k: usize, col: usize) -> f64 {
        let c = self.sheets[k].column(col);
        if k < self.s {
            c[0]
        } else {
            c[c.len() - 1]
        }
    }

    /// One-sided second-order gradient of sheet `k` at the interface node
    /// with tangential index `gamma`.
    pub fn interface_jet(&self, k: usize, gamma: &[usize]) -> GraphJet {
        let u = &self.sheets[k];
        let n = u.n();
        let h = u.h();
        let m = u.shape()[n - 1];
        let layer = if k < self.s { 0 } else { m - 1 };
        let mut idx = gamma.to_vec();
        idx.push(layer);
        let mut p = vec![0.0; n];
        for (a, pa) in p.iter_mut().enumerate().take(n - 1) {
            *pa = match (u.shifted(&idx, a, -1), u.shifted(&idx, a, 1)) {
                (Some(b), Some(f)) => (f - b) / (2.0 * h),
                (None, Some(_)) => {
                    let (u1, u2) = (
                        u.shifted(&idx, a, 1).unwrap(),
                        u.shifted(&idx, a, 2).unwrap(),
                    );
                    (-3.0 * u.at(&idx) + 4.0 * u1 - u2) / (2.0 * h)
                }
                (Some(_), None) => {
                    let (u1, u2) = (
                        u.shifted(&idx, a, -1).unwrap(),
                        u.shifted(&idx, a, -2).unwrap(),
                    );
                    (3.0 * u.at(&idx) - 4.0 * u1 + u2) / (2.0 * h)
                }
                (None, None) => 0.0,
            };
        }
        let u0 = u.at(&idx);
        p[n - 1] = if k < self.s {
            let (u1, u2) = (
                u.shifted(&idx, n - 1, 1).unwrap(),
                u.shifted(&idx, n - 1, 2).unwrap(),
            );
            (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)
        } else {
            let (u1, u2) = (
                u.shifted(&idx, n - 1, -1).unwrap(),
                u.shifted(&idx, n - 1, -2).unwrap(),
            );
            (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h)
        };
        let mut x = u.coord(&idx);
        x[n - 1] = 0.0;
        GraphJet::new(x, u0, p)
    }
}

/// The pair `(sum_+ theta chi^n / |chi|_g - sum_- .., sum_+ theta / |chi|_g - sum_- ..)`
/// from one-sided gradients at the interface node `gamma`; both vanish exactly
/// when the weighted conormals balance there.
pub fn balance_residual(
    metric: &dyn MetricField,
    family: &SheetFamily,
    gamma: &[usize],
    theta_at_node: Option<&[f64]>,
) -> Result<[f64; 2], MseError> {
    let jets: Vec<GraphJet> = (0..family.q())
        .map(|k| family.interface_jet(k, gamma))
        .collect();
    let theta = theta_at_node.unwrap_or(family.theta());
    balance_from_jets(metric, &jets, family.s(), theta)
}

/// Balance pair for explicit first-order data of each sheet at one interface
/// point. Sheets `0..s` are on the plus side.
pub fn balance_from_jets(
    metric: &dyn MetricField,
    jets: &[GraphJet],
    s: usize,
    theta: &[f64],
) -> Result<[f64; 2], MseError> {
    let mut out = [0.0; 2];
    for (k, jet) in jets.iter().enumerate() {
        let n = jet.n();
        let g = metric.eval(&jet.point());
        let chi = chi_from_matrix(&g, &jet.p).map_err(|source| MseError::SingularChi {
            sheet: k + 1,
            source,
        })?;
        let norm = norm_with(&g, chi.as_slice()).map_err(|source| MseError::SingularChi {
            sheet: k + 1,
            source,
        })?;
        let sign = if k < s { 1.0 } else { -1.0 };
        out[0] += sign * theta[k] * chi[n - 1] / norm;
        out[1] += sign * theta[k] / norm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Conformal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sheet(side: Side, a: f64, h: f64) -> GraphFunction {
        GraphFunction::half_grid(side, &[-2.0 * h], &[5], 5, h, move |x| a * x[1]).unwrap()
    }

    fn family(a: &[f64], s: usize, theta: Vec<f64>) -> SheetFamily {
        let sheets = a
            .iter()
            .enumerate()
            .map(|(k, &ak)| sheet(if k < s { Side::Plus } else { Side::Minus }, ak, 0.1))
            .collect();
        SheetFamily::new(s, sheets, theta).unwrap()
    }

    #[test]
    fn affine_graphs_are_minimal() {
        let u = GraphFunction::from_fn(vec![6, 7], vec![-0.3, 0.0], 0.1, Side::Plus, |x| {
            0.7 * x[0] - 1.3 * x[1] + 0.2
        })
        .unwrap();
        let e = Euclidean::new(2);
        for node in u.interior_nodes() {
            assert!(mse_residual(&e, &u, &node).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn conformal_plane_matches_closed_form() {
        // phi = x_1 + z/2, u = 0: the flux vanishes and the residual is
        // -n phi_z e^{n phi} = -e^{2 x_1}.
        let m = Conformal::new(2, |x: &[f64]| x[0] + 0.5 * x[2]);
        let u =
            GraphFunction::from_fn(vec![5, 5], vec![-0.2, 0.0], 0.1, Side::Plus, |_| 0.0).unwrap();
        for node in u.interior_nodes() {
            let x = u.coord(&node);
            let r = mse_residual(&m, &u, &node).unwrap();
            assert!((r + (2.0 * x[0]).exp()).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn pmc_reduces_to_mse_and_plane() {
        let u = GraphFunction::from_fn(vec![5, 5], vec![0.0, 0.0], 0.1, Side::Plus, |x| {
            x[0] * x[1] + x[0] * x[0]
        })
        .unwrap();
        let e = Euclidean::new(2);
        for node in u.interior_nodes() {
            assert_eq!(
                pmc_residual(&u, |_, _| 0.0, &node).unwrap(),
                mse_residual(&e, &u, &node).unwrap()
            );
        }
        let plane =
            GraphFunction::from_fn(vec![4, 4], vec![0.0, 0.0], 0.1, Side::Plus, |x| 0.3 * x[0])
                .unwrap();
        for node in plane.interior_nodes() {
            assert!((pmc_residual(&plane, |_, _| 1.0, &node).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_cap_pmc_is_second_order() {
        let r = |x: &[f64]| -(1.0 - x[0] * x[0] - x[1] * x[1]).sqrt();
        for &h in &[0.05f64, 0.025] {
            let m = (0.6 / h).round() as usize + 1;
            let u = GraphFunction::from_fn(vec![m, m], vec![-0.3, -0.3], h, Side::Plus, r).unwrap();
            for node in u.interior_nodes() {
                let res = pmc_residual(&u, |_, _| 2.0, &node).unwrap();
                assert!(res.abs() < 5.0 * h * h, "h = {h}: {res}");
            }
        }
    }

    #[test]
    fn balanced_120_degree_configuration() {
        let s3 = 3f64.sqrt();
        let fam = family(&[s3, -s3, 0.0], 2, vec![1.0; 3]);
        let r = balance_residual(&Euclidean::new(2), &fam, &[2], None).unwrap();
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn unbalanced_configuration_value() {
        let fam = family(&[1.0, 0.0, -1.0], 2, vec![1.0; 3]);
        let r = balance_residual(&Euclidean::new(2), &fam, &[2], None).unwrap();
        let rt = 0.5f64.sqrt();
        // sheets 1,2 on the plus side, chi = (-a, 1)
        let expected0 = -rt - rt;
        let expected1 = (rt + 1.0) - rt;
        assert!((r[0] - expected0).abs() < 1e-12);
        assert!((r[1] - expected1).abs() < 1e-12);
        assert!((r[0] + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mirror_symmetric_pairs_balance() {
        let fam = family(&[0.8, -0.8, -0.8, 0.8], 2, vec![1.5, 1.5, 1.5, 1.5]);
        let r = balance_residual(&Euclidean::new(2), &fam, &[1], None).unwrap();
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
    }

    #[test]
    fn balance_is_homogeneous_in_theta() {
        let fam = family(&[1.1, -0.3, 0.4], 2, vec![1.0, 2.0, 0.5]);
        let e = Euclidean::new(2);
        let r = balance_residual(&e, &fam, &[2], None).unwrap();
        let r2 = balance_residual(&e, &fam, &[2], Some(&[3.0, 6.0, 1.5])).unwrap();
        assert!((r2[0] - 3.0 * r[0]).abs() < 1e-14 && (r2[1] - 3.0 * r[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_verdict_matches_conormal_vector_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let e = Euclidean::new(2);
        let jets = |a: [f64; 3]| -> Vec<GraphJet> {
            a.iter()
                .map(|&ak| GraphJet::new(vec![0.0, 0.0], 0.0, vec![0.0, ak]))
                .collect()
        };
        for trial in 0..1000 {
            let a: [f64; 3] = if trial % 2 == 0 {
                // balanced triple: rotate the minus-side conormal by +-120 degrees
                let alpha: f64 = rng.gen_range(-0.5..0.5);
                let eta3 = [alpha.cos(), alpha.sin()];
                let rot = |v: [f64; 2], t: f64| {
                    [
                        v[0] * t.cos() - v[1] * t.sin(),
                        v[0] * t.sin() + v[1] * t.cos(),
                    ]
                };
                let e1 = rot(eta3, 2.0 * std::f64::consts::FRAC_PI_3);
                let e2 = rot(eta3, -2.0 * std::f64::consts::FRAC_PI_3);
                let (a1, a2) = (e1[1] / e1[0], e2[1] / e2[0]);
                [a1.max(a2), a1.min(a2), eta3[1] / eta3[0]]
            } else {
                [
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ]
            };
            // oracle: outward conormals in the (x_n, z) plane
            let mut sum = [0.0, 0.0];
            for (k, &ak) in a.iter().enumerate() {
                let w = (1.0 + ak * ak).sqrt();
                let dir = if k < 2 { -1.0 } else { 1.0 };
                sum[0] += dir / w;
                sum[1] += dir * ak / w;
            }
            let oracle_zero = sum[0].hypot(sum[1]) < 1e-9;
            let r = balance_from_jets(&e, &jets(a), 2, &[1.0; 3]).unwrap();
            let zero = r[0].hypot(r[1]) < 1e-9;
            assert_eq!(zero, oracle_zero, "a = {a:?}");
        }
    }

    #[test]
    fn family_validation() {
        let sheets = vec![sheet(Side::Plus, 1.0, 0.1), sheet(Side::Minus, 0.0, 0.1)];
        assert!(matches!(
            SheetFamily::new(1, sheets, vec![1.0; 2]),
            Err(MseError::TooFewSheets(2))
        ));
        let sheets = vec![
            sheet(Side::Plus, 1.0, 0.1),
            sheet(Side::Plus, 0.0, 0.1),
            sheet(Side::Minus, 0.0, 0.1),
        ];
        assert!(SheetFamily::new(1, sheets.clone(), vec![1.0; 3]).is_err());
        assert!(SheetFamily::new(2, sheets.clone(), vec![1.0, 0.0, 1.0]).is_err());
        let mut shifted = sheets.clone();
        shifted[2] =
            GraphFunction::half_grid(Side::Minus, &[-0.2], &[5], 5, 0.1, |x| 1e-6 + x[1]).unwrap();
        assert!(SheetFamily::new(2, shifted, vec![1.0; 3]).is_err());
    }
}
