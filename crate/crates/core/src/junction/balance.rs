use super::energy::{metric_at, projected_gradient};
use super::mesh::{norm, sub, SheetMeshState, Vec3, VertexRole};
use super::JunctionError;
use crate::metric::MetricField;

fn g_dot(g: &nalgebra::DMatrix<f64>, a: Vec3, b: Vec3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i] * g[(i, j)] * b[j];
        }
    }
    s
}

/// Polyline tangent at position `i` (central difference, one-sided at the
/// ends).
fn tangent(state: &SheetMeshState, i: usize) -> Vec3 {
    let line = &state.polyline;
    let p = |k: usize| state.positions[line[k]];
    let (a, b) = if i == 0 {
        (p(0), p(1))
    } else if i + 1 == line.len() {
        (p(i - 1), p(i))
    } else {
        (p(i - 1), p(i + 1))
    };
    sub(b, a)
}

/// Outward unit conormal of sheet `k` at polyline position `i`: the
/// area-weighted unit directions from the vertex to the centroids of its
/// triangle fan, made orthogonal to the polyline tangent, normalized and
/// reversed.
pub fn conormal(
    state: &SheetMeshState,
    metric: Option<&dyn MetricField>,
    k: usize,
    i: usize,
) -> Result<Vec3, JunctionError> {
    let v = state.polyline[i];
    let x = state.positions[v];
    let p = &state.positions;
    let mut u = [0.0; 3];
    let mut found = false;
    for t in state.sheets[k].iter().filter(|t| t.contains(&v)) {
        found = true;
        let centroid: Vec3 = std::array::from_fn(|c| (p[t[0]][c] + p[t[1]][c] + p[t[2]][c]) / 3.0);
        let dir = sub(centroid, x);
        let len = norm(dir);
        let area = super::energy::triangle_area(metric, p[t[0]], p[t[1]], p[t[2]]);
        if len > 0.0 {
            for c in 0..3 {
                u[c] += area * dir[c] / len;
            }
        }
    }
    if !found {
        return Err(JunctionError::DanglingVertex {
            vertex: v,
            sheet: k + 1,
        });
    }
    let g = metric_at(metric, x);
    let tau = tangent(state, i);
    let tt = g_dot(&g, tau, tau);
    let coef = if tt > 0.0 {
        g_dot(&g, u, tau) / tt
    } else {
        0.0
    };
    let proj: Vec3 = std::array::from_fn(|c| u[c] - coef * tau[c]);
    let len = g_dot(&g, proj, proj).sqrt();
    if !(len > 0.0) {
        return Err(JunctionError::DanglingVertex {
            vertex: v,
            sheet: k + 1,
        });
    }
    Ok(std::array::from_fn(|c| -proj[c] / len))
}

/// `sum_k theta_k eta_k` at polyline position `i`.
pub fn conormal_balance(
    state: &SheetMeshState,
    metric: Option<&dyn MetricField>,
    i: usize,
) -> Result<Vec3, JunctionError> {
    let mut out = [0.0; 3];
    for k in 0..state.q() {
        let eta = conormal(state, metric, k, i)?;
        for c in 0..3 {
            out[c] += state.theta[k] * eta[c];
        }
    }
    Ok(out)
}

/// Largest `g`-norm of the balance residual over polyline vertices that are
/// free to move (pinned or plane-constrained ends excluded).
pub fn max_balance(
    state: &SheetMeshState,
    metric: Option<&dyn MetricField>,
) -> Result<f64, JunctionError> {
    let mut worst = 0.0f64;
    for i in 0..state.polyline.len() {
        if state.roles[state.polyline[i]] != VertexRole::Free {
            continue;
        }
        let r = conormal_balance(state, metric, i)?;
        let g = metric_at(metric, state.positions[state.polyline[i]]);
        worst = worst.max(g_dot(&g, r, r).sqrt());
    }
    Ok(worst)
}

/// Pairwise angles in degrees between the conormals at one polyline vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleRow {
    pub position: usize,
    pub vertex: usize,
    pub angles: Vec<Vec<f64>>,
}

impl AngleRow {
    pub fn angle(&self, i: usize, j: usize) -> f64 {
        self.angles[i][j]
    }
}

pub fn angle_report(
    state: &SheetMeshState,
    metric: Option<&dyn MetricField>,
) -> Result<Vec<AngleRow>, JunctionError> {
    let q = state.q();
    (0..state.polyline.len())
        .map(|i| {
            let etas = (0..q)
                .map(|k| conormal(state, metric, k, i))
                .collect::<Result<Vec<_>, _>>()?;
            let g = metric_at(metric, state.positions[state.polyline[i]]);
            let angles = (0..q)
                .map(|a| {
                    (0..q)
                        .map(|b| {
                            if a == b {
                                0.0
                            } else {
                                g_dot(&g, etas[a], etas[b])
                                    .clamp(-1.0, 1.0)
                                    .acos()
                                    .to_degrees()
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(AngleRow {
                position: i,
                vertex: state.polyline[i],
                angles,
            })
        })
        .collect()
}

/// Largest projected gradient over free vertices off the polyline, each
/// divided by the mean length of its incident edges.
pub fn interior_gradient_density(state: &SheetMeshState, metric: Option<&dyn MetricField>) -> f64 {
    let grad = projected_gradient(state, metric);
    let nv = state.positions.len();
    let mut edge_sum = vec![0.0; nv];
    let mut edge_count = vec![0usize; nv];
    let p = &state.positions;
    for t in state.sheets.iter().flatten() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let l = norm(sub(p[a], p[b]));
            edge_sum[a] += l;
            edge_sum[b] += l;
            edge_count[a] += 1;
            edge_count[b] += 1;
        }
    }
    let on_line: std::collections::HashSet<usize> = state.polyline.iter().copied().collect();
    (0..nv)
        .filter(|v| {
            state.roles[*v] == VertexRole::Free && !on_line.contains(v) && edge_count[*v] > 0
        })
        .map(|v| norm(grad[v]) / (edge_sum[v] / edge_count[v] as f64))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::mesh::{book, y_wire, YWireSpec};

    fn y(angles: &[f64], theta: &[f64]) -> SheetMeshState {
        y_wire(&YWireSpec {
            angles_deg: angles.to_vec(),
            theta: theta.to_vec(),
            radial_cells: 4,
            vertical_cells: 4,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn symmetric_y_balances() {
        let st = y(&[0.0, 120.0, 240.0], &[1.0; 3]);
        for i in 0..st.polyline.len() {
            assert!(norm(conormal_balance(&st, None, i).unwrap()) < 1e-10);
        }
        for row in angle_report(&st, None).unwrap() {
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                assert!((row.angle(a, b) - 120.0).abs() < 1e-8);
                assert_eq!(row.angle(a, b), row.angle(b, a));
            }
        }
    }

    #[test]
    fn conormal_points_away_from_sheet() {
        let st = y(&[0.0, 120.0, 240.0], &[1.0; 3]);
        let eta = conormal(&st, None, 0, 2).unwrap();
        assert!((eta[0] + 1.0).abs() < 1e-12 && eta[1].abs() < 1e-12 && eta[2].abs() < 1e-12);
    }

    #[test]
    fn coincident_pair_leaves_one_conormal() {
        let st = y(&[0.0, 0.0, 180.0], &[1.0; 3]);
        for i in 0..st.polyline.len() {
            assert!((norm(conormal_balance(&st, None, i).unwrap()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_linear_in_weights() {
        let a = y(&[0.0, 90.0, 225.0], &[1.0, 2.0, 0.5]);
        let b = y(&[0.0, 90.0, 225.0], &[3.0, 6.0, 1.5]);
        let (ra, rb) = (
            conormal_balance(&a, None, 2).unwrap(),
            conormal_balance(&b, None, 2).unwrap(),
        );
        for c in 0..3 {
            assert!((rb[c] - 3.0 * ra[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_book() {
        let st = book(90.0, 4, &[1.0, 1.0]).unwrap();
        for row in angle_report(&st, None).unwrap() {
            assert!((row.angle(0, 1) - 90.0).abs() < 1e-10);
        }
    }
}
