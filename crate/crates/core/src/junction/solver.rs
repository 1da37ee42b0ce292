use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::energy::{projected_gradient, total_weighted_area};
use super::mesh::{cross, dot, norm, sub, SheetMeshState, Vec3, VertexRole};
use super::JunctionError;
use crate::metric::MetricField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop when the largest per-vertex projected gradient is below this.
    pub tolerance: f64,
    /// Number of correction pairs kept by L-BFGS.
    pub memory: usize,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    pub max_halvings: usize,
    /// Largest vertex move of a trial step, as a fraction of the shortest
    /// edge of the initial mesh.
    pub max_step_fraction: f64,
    /// Polyline edge-length equalization period; 0 disables it.
    pub equalize_every: usize,
    /// Period of tangential smoothing of the vertices off the polyline;
    /// 0 disables it.
    pub smooth_every: usize,
    /// Fraction of the way each vertex moves toward its neighbour average.
    pub smooth_weight: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tolerance: 1e-6,
            memory: 10,
            armijo: 1e-4,
            max_halvings: 50,
            max_step_fraction: 0.5,
            equalize_every: 50,
            smooth_every: 10,
            smooth_weight: 0.5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), JunctionError> {
        if !(self.tolerance > 0.0)
            || !(self.armijo > 0.0 && self.armijo < 1.0)
            || !(self.max_step_fraction > 0.0)
            || !(0.0..=1.0).contains(&self.smooth_weight)
        {
            return Err(JunctionError::Invalid("tolerance and step fraction must be positive, Armijo constant and smoothing weight in range".into()));
        }
        if self.memory == 0 || self.max_halvings == 0 {
            return Err(JunctionError::Invalid(
                "memory and max_halvings must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub max_gradient: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub state: SheetMeshState,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
}

fn max_vertex_norm(g: &[Vec3]) -> f64 {
    g.iter().map(|v| norm(*v)).fold(0.0, f64::max)
}

fn flat_dot(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dot(*x, *y)).sum()
}

fn min_edge(state: &SheetMeshState) -> f64 {
    let p = &state.positions;
    state
        .sheets
        .iter()
        .flatten()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| norm(sub(p[a], p[b])))
        .fold(f64::INFINITY, f64::min)
}

/// Moves `x` along `d` by `alpha`, keeping plane-constrained vertices
/// exactly on their planes.
fn stepped(state: &SheetMeshState, d: &[Vec3], alpha: f64) -> SheetMeshState {
    let mut out = state.clone();
    for ((x, dv), role) in out.positions.iter_mut().zip(d).zip(&state.roles) {
        match role {
            VertexRole::Fixed => {}
            VertexRole::Free => {
                for i in 0..3 {
                    x[i] += alpha * dv[i];
                }
            }
            VertexRole::Plane { normal, offset } => {
                for i in 0..3 {
                    x[i] += alpha * dv[i];
                }
                let off = dot(*x, *normal) - offset;
                for i in 0..3 {
                    x[i] -= off * normal[i];
                }
            }
        }
    }
    out
}

/// Vertex neighbourhoods used by tangential smoothing.
struct Smoother {
    /// For each smoothable vertex: its neighbours and incident triangles.
    entries: Vec<(usize, Vec<usize>, Vec<[usize; 3]>)>,
}

impl Smoother {
    fn new(state: &SheetMeshState) -> Self {
        let nv = state.positions.len();
        let on_line: std::collections::HashSet<usize> = state.polyline.iter().copied().collect();
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); nv];
        let mut tris: Vec<Vec<[usize; 3]>> = vec![Vec::new(); nv];
        for t in state.sheets.iter().flatten() {
            for c in 0..3 {
                tris[t[c]].push(*t);
                for d in 0..3 {
                    if c != d {
                        nbrs[t[c]].push(t[d]);
                    }
                }
            }
        }
        let mut entries = Vec::new();
        for v in 0..nv {
            if on_line.contains(&v) || state.roles[v] == VertexRole::Fixed || tris[v].is_empty() {
                continue;
            }
            let mut nb = std::mem::take(&mut nbrs[v]);
            nb.sort_unstable();
            nb.dedup();
            // a plane-constrained vertex only averages along its own plane
            if let VertexRole::Plane { .. } = state.roles[v] {
                nb.retain(|&u| state.roles[u] == state.roles[v]);
                if nb.len() < 2 {
                    continue;
                }
            }
            entries.push((v, nb, std::mem::take(&mut tris[v])));
        }
        Self { entries }
    }

    /// Moves every smoothable vertex toward its neighbour average, keeping
    /// only the component tangent to the surface and allowed by its role.
    fn apply(&self, state: &SheetMeshState, weight: f64) -> SheetMeshState {
        let p = &state.positions;
        let mut out = state.clone();
        for (v, nb, tris) in &self.entries {
            let mut avg = [0.0; 3];
            for &u in nb {
                for c in 0..3 {
                    avg[c] += p[u][c] / nb.len() as f64;
                }
            }
            let mut nrm = [0.0; 3];
            for t in tris {
                let n = cross(sub(p[t[1]], p[t[0]]), sub(p[t[2]], p[t[0]]));
                for c in 0..3 {
                    nrm[c] += n[c];
                }
            }
            let len = norm(nrm);
            if len == 0.0 {
                continue;
            }
            let n = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
            let mut delta = sub(avg, p[*v]);
            let dn = dot(delta, n);
            for c in 0..3 {
                delta[c] = weight * (delta[c] - dn * n[c]);
            }
            let delta = state.roles[*v].project(delta);
            out.positions[*v] = [
                p[*v][0] + delta[0],
                p[*v][1] + delta[1],
                p[*v][2] + delta[2],
            ];
        }
        out
    }
}

/// True when some triangle's orientation reverses between the two states.
fn has_flip(before: &SheetMeshState, after: &SheetMeshState) -> bool {
    let (p, q) = (&before.positions, &after.positions);
    before.sheets.iter().flatten().any(|t| {
        let n0 = cross(sub(p[t[1]], p[t[0]]), sub(p[t[2]], p[t[0]]));
        let n1 = cross(sub(q[t[1]], q[t[0]]), sub(q[t[2]], q[t[0]]));
        !(dot(n0, n1) > 0.0)
    })
}

/// Energy of a trial state, counting orientation flips as degenerate.
fn trial_energy(
    current: &SheetMeshState,
    trial: &SheetMeshState,
    metric: Option<&dyn MetricField>,
) -> Result<f64, JunctionError> {
    if has_flip(current, trial) {
        return Err(JunctionError::DegenerateTriangle {
            sheet: 0,
            triangle: 0,
            area: 0.0,
        });
    }
    total_weighted_area(trial, metric)
}

/// Redistributes the movable interior polyline vertices to equal arc length
/// along the current polyline. Returns `None` when some interior polyline
/// vertex is not free.
pub fn equalized_polyline(state: &SheetMeshState) -> Option<SheetMeshState> {
    let line = &state.polyline;
    let m = line.len();
    if m < 3
        || line[1..m - 1]
            .iter()
            .any(|&v| state.roles[v] != VertexRole::Free)
    {
        return None;
    }
    let pts: Vec<Vec3> = line.iter().map(|&v| state.positions[v]).collect();
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + norm(sub(w[1], w[0])));
    }
    let total = cum[m - 1];
    let mut out = state.clone();
    let mut seg = 0;
    for i in 1..m - 1 {
        let target = total * i as f64 / (m - 1) as f64;
        while seg + 1 < m - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 {
            (target - cum[seg]) / len
        } else {
            0.0
        };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.positions[line[i]] = [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ];
    }
    Some(out)
}

fn lbfgs_direction(
    g: &[Vec3],
    memory: &VecDeque<(Vec<Vec3>, Vec<Vec3>, f64)>,
    roles: &[VertexRole],
) -> Vec<Vec3> {
    let mut q: Vec<Vec3> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * flat_dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            for c in 0..3 {
                qi[c] -= a * yi[c];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = flat_dot(s, y) / flat_dot(y, y);
        for qi in q.iter_mut() {
            for x in qi.iter_mut() {
                *x *= gamma;
            }
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * flat_dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            for c in 0..3 {
                qi[c] += (a - b) * si[c];
            }
        }
    }
    q.iter()
        .zip(roles)
        .map(|(v, r)| r.project([-v[0], -v[1], -v[2]]))
        .collect()
}

/// L-BFGS on the weighted area with Armijo backtracking. Every accepted
/// step, and every accepted polyline equalization, lowers the energy.
pub fn minimize(
    initial: &SheetMeshState,
    config: &OptimizerConfig,
    metric: Option<&dyn MetricField>,
) -> Result<MinimizeOutcome, JunctionError> {
    config.validate()?;
    initial.validate()?;
    let mut state = initial.clone();
    let mut energy = total_weighted_area(&state, metric)?;
    let mut grad = projected_gradient(&state, metric);
    let mut gmax = max_vertex_norm(&grad);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        energy,
        max_gradient: gmax,
        step: 0.0,
    }];
    let max_move = config.max_step_fraction * min_edge(&state);
    let mut memory: VecDeque<(Vec<Vec3>, Vec<Vec3>, f64)> = VecDeque::new();
    let smoother = Smoother::new(&state);
    let mut iteration = 0;

    while gmax >= config.tolerance && iteration < config.max_iterations {
        iteration += 1;
        let mut d = lbfgs_direction(&grad, &memory, &state.roles);
        let mut slope = flat_dot(&grad, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = grad.iter().map(|v| [-v[0], -v[1], -v[2]]).collect();
            slope = flat_dot(&grad, &d);
        }
        let dmax = max_vertex_norm(&d);
        let mut alpha = if dmax > max_move {
            max_move / dmax
        } else {
            1.0
        };
        let mut accepted = None;
        let mut last_degenerate = false;
        for _ in 0..config.max_halvings {
            let trial = stepped(&state, &d, alpha);
            match trial_energy(&state, &trial, metric) {
                Ok(e) if e <= energy + config.armijo * alpha * slope => {
                    accepted = Some((trial, e));
                    break;
                }
                Ok(_) => last_degenerate = false,
                Err(JunctionError::DegenerateTriangle { .. }) => last_degenerate = true,
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        let Some((mut next, mut e_next)) = accepted else {
            if !memory.is_empty() {
                // retry from steepest descent before giving up
                memory.clear();
                iteration -= 1;
                continue;
            }
            return Err(if last_degenerate {
                JunctionError::MeshCollapse { iteration }
            } else {
                JunctionError::LineSearchFailure {
                    iteration,
                    max_gradient: gmax,
                }
            });
        };
        if config.smooth_every > 0 && iteration % config.smooth_every == 0 {
            // keep the smoothed state only if the combined move still meets
            // the sufficient-decrease test against the previous energy
            let smoothed = smoother.apply(&next, config.smooth_weight);
            if let Ok(e_s) = trial_energy(&state, &smoothed, metric) {
                if e_s <= energy + config.armijo * alpha * slope && !has_flip(&next, &smoothed) {
                    next = smoothed;
                    e_next = e_s;
                }
            }
        }
        let g_next = projected_gradient(&next, metric);
        let s: Vec<Vec3> = next
            .positions
            .iter()
            .zip(&state.positions)
            .map(|(a, b)| sub(*a, *b))
            .collect();
        let y: Vec<Vec3> = g_next.iter().zip(&grad).map(|(a, b)| sub(*a, *b)).collect();
        let sy = flat_dot(&s, &y);
        if sy > 1e-12 * flat_dot(&s, &s).sqrt() * flat_dot(&y, &y).sqrt() && sy > 0.0 {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > config.memory {
                memory.pop_front();
            }
        }
        state = next;
        energy = e_next;
        grad = g_next;
        gmax = max_vertex_norm(&grad);

        if config.equalize_every > 0 && iteration % config.equalize_every == 0 {
            if let Some(eq) = equalized_polyline(&state) {
                if let Ok(e_eq) = trial_energy(&state, &eq, metric) {
                    if e_eq <= energy {
                        state = eq;
                        energy = e_eq;
                        grad = projected_gradient(&state, metric);
                        gmax = max_vertex_norm(&grad);
                        memory.clear();
                    }
                }
            }
        }
        trace.push(TraceEntry {
            iteration,
            energy,
            max_gradient: gmax,
            step: alpha,
        });
    }
    Ok(MinimizeOutcome {
        converged: gmax < config.tolerance,
        state,
        trace,
        iterations: iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::mesh::{y_wire, YWireSpec};

    #[test]
    fn stationary_start_takes_no_iterations() {
        let spec = YWireSpec {
            angles_deg: vec![0.0, 120.0, 240.0],
            radial_cells: 8,
            vertical_cells: 8,
            ..Default::default()
        };
        let out = minimize(&y_wire(&spec).unwrap(), &OptimizerConfig::default(), None).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }

    #[test]
    fn energy_trace_is_monotone() {
        let spec = YWireSpec {
            radial_cells: 6,
            vertical_cells: 6,
            jitter: 0.2,
            ..Default::default()
        };
        let cfg = OptimizerConfig {
            max_iterations: 300,
            ..Default::default()
        };
        let out = minimize(&y_wire(&spec).unwrap(), &cfg, None).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!(out.trace.last().unwrap().energy < out.trace[0].energy);
    }

    #[test]
    fn equalization_keeps_endpoints() {
        let mut st = y_wire(&YWireSpec {
            radial_cells: 2,
            vertical_cells: 4,
            ..Default::default()
        })
        .unwrap();
        st.positions[st.polyline[1]][2] += 0.1;
        let eq = equalized_polyline(&st).unwrap();
        let p: Vec<Vec3> = eq.polyline.iter().map(|&v| eq.positions[v]).collect();
        assert_eq!(p[0], st.positions[st.polyline[0]]);
        let lens: Vec<f64> = p.windows(2).map(|w| norm(sub(w[1], w[0]))).collect();
        assert!(lens.iter().all(|l| (l - lens[0]).abs() < 1e-12));
    }
}
