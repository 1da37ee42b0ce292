use nalgebra::{DMatrix, Matrix2, Matrix3x2};

use super::mesh::{cross, norm, scale, sub, SheetMeshState, Vec3};
use super::JunctionError;
use crate::metric::MetricField;

/// Triangles at or below this area count as degenerate.
pub const MIN_AREA: f64 = 1e-14;
/// Step of the per-triangle finite differences used for non-Euclidean
/// metrics.
pub const METRIC_FD_STEP: f64 = 1e-6;

fn euclidean_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Area of the triangle in the metric frozen at its centroid:
/// `1/2 sqrt(det(E^T g E))` with edge matrix `E = [b - a, c - a]`.
fn metric_area(metric: &dyn MetricField, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let centroid: Vec<f64> = (0..3).map(|i| (a[i] + b[i] + c[i]) / 3.0).collect();
    let g = metric.eval(&centroid);
    let e = Matrix3x2::from_fn(|i, j| if j == 0 { b[i] - a[i] } else { c[i] - a[i] });
    let g3 = nalgebra::Matrix3::from_fn(|i, j| g[(i, j)]);
    let gram: Matrix2<f64> = e.transpose() * g3 * e;
    0.5 * gram.determinant().max(0.0).sqrt()
}

fn use_exact(metric: Option<&dyn MetricField>) -> Option<&dyn MetricField> {
    metric.filter(|m| !m.is_euclidean())
}

pub fn triangle_area(metric: Option<&dyn MetricField>, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    match use_exact(metric) {
        None => euclidean_area(a, b, c),
        Some(m) => metric_area(m, a, b, c),
    }
}

/// Gradient of the triangle area with respect to its three corners.
pub fn triangle_area_gradient(
    metric: Option<&dyn MetricField>,
    a: Vec3,
    b: Vec3,
    c: Vec3,
) -> [Vec3; 3] {
    match use_exact(metric) {
        None => {
            let nrm = cross(sub(b, a), sub(c, a));
            let len = norm(nrm);
            if len == 0.0 {
                return [[0.0; 3]; 3];
            }
            let n = scale(nrm, 1.0 / len);
            [
                scale(cross(n, sub(c, b)), 0.5),
                scale(cross(n, sub(a, c)), 0.5),
                scale(cross(n, sub(b, a)), 0.5),
            ]
        }
        Some(m) => {
            let mut pts = [a, b, c];
            let mut out = [[0.0; 3]; 3];
            for v in 0..3 {
                for i in 0..3 {
                    let x0 = pts[v][i];
                    pts[v][i] = x0 + METRIC_FD_STEP;
                    let fp = metric_area(m, pts[0], pts[1], pts[2]);
                    pts[v][i] = x0 - METRIC_FD_STEP;
                    let fm = metric_area(m, pts[0], pts[1], pts[2]);
                    pts[v][i] = x0;
                    out[v][i] = (fp - fm) / (2.0 * METRIC_FD_STEP);
                }
            }
            out
        }
    }
}

/// Neumaier-compensated sum in the given order.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn flat_triangles(state: &SheetMeshState) -> Vec<(usize, usize, [usize; 3])> {
    state
        .sheets
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.iter().enumerate().map(move |(i, t)| (k, i, *t)))
        .collect()
}

#[cfg(feature = "parallel")]
fn map_triangles<T: Send>(
    tris: &[(usize, usize, [usize; 3])],
    f: impl Fn(&(usize, usize, [usize; 3])) -> T + Sync + Send,
) -> Vec<T> {
    use rayon::prelude::*;
    tris.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_triangles<T: Send>(
    tris: &[(usize, usize, [usize; 3])],
    f: impl Fn(&(usize, usize, [usize; 3])) -> T + Sync + Send,
) -> Vec<T> {
    tris.iter().map(f).collect()
}

/// Per-sheet areas; fails on any degenerate triangle.
pub fn sheet_areas(
    state: &SheetMeshState,
    metric: Option<&dyn MetricField>,
) -> Result<Vec<f64>, JunctionError> {
    let tris = flat_triangles(state);
    let p = &state.positions;
    let areas = map_triangles(&tris, |&(_, _, t)| {
        triangle_area(metric, p[t[0]], p[t[1]], p[t[2]])
    });
    let mut per_sheet: Vec<Vec<f64>> = vec![Vec::new(); state.q()];
    for (&(k, i, _), &a) in tris.iter().zip(&areas) {
        if !(a > MIN_AREA) {
            return Err(JunctionError::DegenerateTriangle {
                sheet: k + 1,
                triangle: i,
                area: a,
            });
        }
        per_sheet[k].push(a);
    }
    Ok(per_sheet.into_iter().map(compensated_sum).collect())
}

/// `sum_k theta_k |M_k|`.
pub fn total_weighted_area(
    state: &SheetMeshState,
    metric: Option<&dyn MetricField>,
) -> Result<f64, JunctionError> {
    let areas = sheet_areas(state, metric)?;
    Ok(compensated_sum(
        areas.iter().zip(&state.theta).map(|(a, t)| a * t),
    ))
}

/// Weighted area gradient at every vertex, before role projection.
/// Triangles are processed in parallel and scattered in a fixed order.
pub fn raw_gradient(state: &SheetMeshState, metric: Option<&dyn MetricField>) -> Vec<Vec3> {
    let tris = flat_triangles(state);
    let p = &state.positions;
    let grads = map_triangles(&tris, |&(_, _, t)| {
        triangle_area_gradient(metric, p[t[0]], p[t[1]], p[t[2]])
    });
    let mut out = vec![[0.0; 3]; p.len()];
    for (&(k, _, t), g) in tris.iter().zip(&grads) {
        let w = state.theta[k];
        for c in 0..3 {
            for i in 0..3 {
                out[t[c]][i] += w * g[c][i];
            }
        }
    }
    out
}

/// Gradient with the fixed and plane-constrained components removed.
pub fn projected_gradient(state: &SheetMeshState, metric: Option<&dyn MetricField>) -> Vec<Vec3> {
    raw_gradient(state, metric)
        .into_iter()
        .zip(&state.roles)
        .map(|(g, r)| r.project(g))
        .collect()
}

/// Metric evaluated at a vertex as a 3x3 matrix; identity when absent.
pub(crate) fn metric_at(metric: Option<&dyn MetricField>, x: Vec3) -> DMatrix<f64> {
    match metric {
        Some(m) if !m.is_euclidean() => m.eval(&x),
        _ => DMatrix::identity(3, 3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::mesh::{half_disks, y_wire, YWireSpec};
    use crate::metric::{Conformal, Euclidean};

    #[test]
    fn euclidean_gradient_matches_differences() {
        let (a, b, c) = ([0.1, 0.2, -0.3], [1.0, 0.4, 0.2], [0.3, 1.1, 0.5]);
        let g = triangle_area_gradient(None, a, b, c);
        let mut pts = [a, b, c];
        for v in 0..3 {
            for i in 0..3 {
                let x0 = pts[v][i];
                pts[v][i] = x0 + 1e-6;
                let fp = euclidean_area(pts[0], pts[1], pts[2]);
                pts[v][i] = x0 - 1e-6;
                let fm = euclidean_area(pts[0], pts[1], pts[2]);
                pts[v][i] = x0;
                assert!((g[v][i] - (fp - fm) / 2e-6).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conformal_area_scales() {
        let m = Conformal::new(2, |_| 0.5f64.ln());
        let (a, b, c) = ([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        // g = e^{2 phi} I = I/4 scales areas by 1/4
        assert!((triangle_area(Some(&m), a, b, c) - 0.125).abs() < 1e-15);
        let e = Euclidean::new(2);
        assert_eq!(triangle_area(Some(&e), a, b, c), 0.5);
        let g = triangle_area_gradient(Some(&m), a, b, c);
        let exact = triangle_area_gradient(None, a, b, c);
        for v in 0..3 {
            for i in 0..3 {
                assert!((g[v][i] - 0.25 * exact[v][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unit_square_area() {
        let st = crate::junction::mesh::book(90.0, 4, &[1.0, 1.0]).unwrap();
        let areas = sheet_areas(&st, None).unwrap();
        assert!((areas[0] - 1.0).abs() < 1e-12 && (areas[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_disks_total() {
        let st = half_disks(&[0.0, 120.0, 240.0], &[1.0; 3], 1.0, 4096).unwrap();
        let v = total_weighted_area(&st, None).unwrap();
        assert!((v - 1.5 * std::f64::consts::PI).abs() < 1e-6, "{v}");
    }

    #[test]
    fn weights_are_linear() {
        let mut st = y_wire(&YWireSpec {
            radial_cells: 4,
            vertical_cells: 4,
            ..Default::default()
        })
        .unwrap();
        let v = total_weighted_area(&st, None).unwrap();
        st.theta = st.theta.iter().map(|t| 2.0 * t).collect();
        assert_eq!(total_weighted_area(&st, None).unwrap(), 2.0 * v);
    }

    #[test]
    fn degenerate_triangle_is_reported() {
        let mut st = y_wire(&YWireSpec {
            radial_cells: 2,
            vertical_cells: 2,
            ..Default::default()
        })
        .unwrap();
        let t = st.sheets[0][0];
        st.positions[t[1]] = st.positions[t[0]];
        assert!(matches!(
            total_weighted_area(&st, None),
            Err(JunctionError::DegenerateTriangle { .. })
        ));
    }
}
