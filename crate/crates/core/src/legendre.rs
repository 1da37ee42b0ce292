//! Partial Legendre (hodograph) transform `y = (x', w(x))` with
//! `w = u_1 - u_2`, its inverse `x_n = psi(y)`, the shifted inverse
//! `x_n = psi(y) - C y_n` onto the minus side, and the chain rules between
//! the two coordinate systems.
//!
//! Columns are interpolated by cubic Lagrange polynomials along `x_n`;
//! `psi` is the exact inverse of that interpolant, so the transform and its
//! inverse agree to solver precision at every node.

use thiserror::Error;

use crate::grid::{GraphFunction, Side};

/// Jacobian denominators below this magnitude are rejected.
pub const JACOBIAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegendreError {
    #[error("grids of u_1 and u_2 differ or are not plus-side grids")]
    GridMismatch,
    #[error("w = u_1 - u_2 is not strictly increasing in x_n on column {column} at node {index}")]
    NotMonotone { column: usize, index: usize },
    #[error("w = {value:e} on the interface at column {column}; it must vanish there")]
    NotOnInterface { column: usize, value: f64 },
    #[error("degenerate Jacobian: denominator {denominator:e}")]
    DegenerateJacobian { denominator: f64 },
    #[error("mapped point x_n = {x_n} at column {column} lies outside the source grid")]
    OutOfDomain { column: usize, x_n: f64 },
    #[error("grid too small: {0}")]
    TooSmall(String),
    #[error("k = {k} must be in 1..=q with the split s = {s}")]
    BadIndex { k: usize, s: usize },
}

/// Cubic (or lower, for short columns) Lagrange interpolation of a column
/// of nodal values at `x`; returns the value and the derivative.
pub fn column_interp(start: f64, h: f64, vals: &[f64], x: f64) -> (f64, f64) {
    let m = vals.len();
    let order = m.min(4);
    let t = (x - start) / h;
    let cell = (t.floor().max(0.0) as usize).min(m.saturating_sub(2));
    let first = cell.saturating_sub(1).min(m - order);
    let nodes: Vec<f64> = (first..first + order)
        .map(|i| start + i as f64 * h)
        .collect();
    let mut value = 0.0;
    let mut deriv = 0.0;
    for j in 0..order {
        let mut denom = 1.0;
        let mut basis = 1.0;
        let mut dbasis = 0.0;
        for l in 0..order {
            if l == j {
                continue;
            }
            denom *= nodes[j] - nodes[l];
            // product rule: d/dx prod (x - x_l)
            dbasis = dbasis * (x - nodes[l]) + basis;
            basis *= x - nodes[l];
        }
        value += vals[first + j] * basis / denom;
        deriv += vals[first + j] * dbasis / denom;
    }
    (value, deriv)
}

/// Solves `P(x) = y` where `P` is the column interpolant, for `y` between the
/// first and last (strictly increasing) values.
fn invert_column(start: f64, h: f64, vals: &[f64], y: f64) -> f64 {
    let m = vals.len();
    let i = vals
        .partition_point(|&v| v <= y)
        .saturating_sub(1)
        .min(m - 2);
    if vals[i] == y {
        return start + i as f64 * h;
    }
    let (mut lo, mut hi) = (start + i as f64 * h, start + (i + 1) as f64 * h);
    let mut x = lo + (y - vals[i]) / (vals[i + 1] - vals[i]) * h;
    for _ in 0..100 {
        let (p, dp) = column_interp(start, h, vals, x);
        let f = p - y;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = if dp > 0.0 {
            x - f / dp
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// The hodograph map built from two plus-side sheets.
#[derive(Debug, Clone)]
pub struct HodographMap {
    w: GraphFunction,
    psi: GraphFunction,
    dpsi_dyn: Vec<f64>,
    c: f64,
}

/// Builds `psi` on the largest `y`-rectangle inside the image of the plus
/// side, with the same spacing as the source grid. `C` is twice the largest
/// discrete `D_{y_n} psi`.
pub fn forward_transform(
    u1: &GraphFunction,
    u2: &GraphFunction,
) -> Result<HodographMap, LegendreError> {
    if u1.side() != Side::Plus
        || u2.side() != Side::Plus
        || u1.shape() != u2.shape()
        || u1.origin() != u2.origin()
        || u1.h() != u2.h()
        || u1.interface_layer() != Some(0)
    {
        return Err(LegendreError::GridMismatch);
    }
    let n = u1.n();
    let h = u1.h();
    let m = u1.shape()[n - 1];
    if m < 2 {
        return Err(LegendreError::TooSmall(
            "need at least two normal nodes".into(),
        ));
    }
    let values: Vec<f64> = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(a, b)| a - b)
        .collect();
    let w = GraphFunction::new(
        u1.shape().to_vec(),
        u1.origin().to_vec(),
        h,
        Side::Plus,
        values,
    )
    .map_err(|_| LegendreError::GridMismatch)?;

    let mut ymax = f64::INFINITY;
    for col in 0..w.column_count() {
        let c = w.column(col);
        if c[0].abs() > 1e-12 {
            return Err(LegendreError::NotOnInterface {
                column: col,
                value: c[0],
            });
        }
        if let Some(i) = c.windows(2).position(|p| !(p[1] > p[0])) {
            return Err(LegendreError::NotMonotone {
                column: col,
                index: i + 1,
            });
        }
        ymax = ymax.min(c[m - 1]);
    }
    let ny = (ymax / h * (1.0 + 1e-12)).floor() as usize + 1;
    if ny < 2 {
        return Err(LegendreError::TooSmall(
            "image of the plus side is thinner than one cell".into(),
        ));
    }

    let mut shape = w.shape()[..n - 1].to_vec();
    shape.push(ny);
    let mut origin = w.origin()[..n - 1].to_vec();
    origin.push(0.0);
    let len: usize = shape.iter().product();
    let mut psi = GraphFunction::new(shape, origin, h, Side::Plus, vec![0.0; len])
        .map_err(|_| LegendreError::GridMismatch)?;
    let mut dpsi_dyn = vec![0.0; len];
    let x0 = w.origin()[n - 1];
    let mut psi_vals = vec![0.0; len];
    for col in 0..w.column_count() {
        let c = w.column(col);
        for j in 0..ny {
            let y = (j as f64 * h).min(c[m - 1]);
            let x = invert_column(x0, h, c, y);
            let (_, dw) = column_interp(x0, h, c, x);
            if !(dw > JACOBIAN_FLOOR) {
                return Err(LegendreError::NotMonotone {
                    column: col,
                    index: j,
                });
            }
            psi_vals[col * ny + j] = x;
            dpsi_dyn[col * ny + j] = 1.0 / dw;
        }
    }
    psi = GraphFunction::new(
        psi.shape().to_vec(),
        psi.origin().to_vec(),
        h,
        Side::Plus,
        psi_vals,
    )
    .map_err(|_| LegendreError::GridMismatch)?;
    let c = 2.0 * dpsi_dyn.iter().fold(0.0f64, |a, &b| a.max(b));
    let map = HodographMap {
        w,
        psi,
        dpsi_dyn,
        c,
    };
    debug_assert!(map.dpsi_dyn.iter().all(|&d| d > 0.0 && d < map.c));
    Ok(map)
}

impl HodographMap {
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `psi` on the `y`-grid.
    pub fn psi(&self) -> &GraphFunction {
        &self.psi
    }

    /// `w = u_1 - u_2` on the source grid.
    pub fn w(&self) -> &GraphFunction {
        &self.w
    }

    /// Uses an explicit `C` instead of the default; it must exceed every
    /// discrete `D_{y_n} psi`.
    pub fn with_c(mut self, c: f64) -> Result<Self, LegendreError> {
        let max = self.dpsi_dyn.iter().fold(0.0f64, |a, &b| a.max(b));
        if !(c > max) {
            return Err(LegendreError::DegenerateJacobian {
                denominator: max - c,
            });
        }
        self.c = c;
        Ok(self)
    }

    fn n(&self) -> usize {
        self.w.n()
    }

    /// `D_{y_n} psi` at a `y`-grid node.
    pub fn dpsi_dyn(&self, y_node: &[usize]) -> f64 {
        self.dpsi_dyn[self.psi.flatten(y_node)]
    }

    /// `psi(y', y_n)` for tangential column `col` and any `y_n` in the image
    /// of that column.
    pub fn psi_at(&self, col: usize, y_n: f64) -> f64 {
        let n = self.n();
        invert_column(self.w.origin()[n - 1], self.w.h(), self.w.column(col), y_n)
    }

    /// `D_{y_n} psi` off the grid.
    pub fn dpsi_dyn_at(&self, col: usize, y_n: f64) -> f64 {
        let n = self.n();
        let x = self.psi_at(col, y_n);
        1.0 / column_interp(self.w.origin()[n - 1], self.w.h(), self.w.column(col), x).1
    }

    /// Largest composition error of the two maps: `|psi(y', w(x)) - x_n|`
    /// over source nodes whose image lies in the `psi` grid, and
    /// `|w(y', psi(y)) - y_n|` over `psi` nodes.
    pub fn roundtrip_error(&self) -> f64 {
        let n = self.n();
        let (start, h) = (self.w.origin()[n - 1], self.w.h());
        let top = self.psi.origin()[n - 1] + (self.psi.shape()[n - 1] - 1) as f64 * h;
        let mut worst = 0.0f64;
        for flat in 0..self.w.len() {
            let node = self.w.unflatten(flat);
            let y_n = self.w.at(&node);
            if y_n <= top {
                let col = self.w.column_of(&node[..n - 1]);
                worst = worst.max((self.psi_at(col, y_n) - self.w.coord(&node)[n - 1]).abs());
            }
        }
        for flat in 0..self.psi.len() {
            let node = self.psi.unflatten(flat);
            let col = self.psi.column_of(&node[..n - 1]);
            let back = column_interp(start, h, self.w.column(col), self.psi.at(&node)).0;
            worst = worst.max((back - self.psi.coord(&node)[n - 1]).abs());
        }
        worst
    }

    /// Forward map of a source node: `(x', w(x))`.
    pub fn forward(&self, x_node: &[usize]) -> Vec<f64> {
        let mut y = self.w.coord(x_node);
        let n = y.len();
        y[n - 1] = self.w.at(x_node);
        y
    }

    /// Image of a `y`-grid node in the plus side, `(y', psi(y))`.
    pub fn inverse_plus(&self, y_node: &[usize]) -> Vec<f64> {
        let mut x = self.psi.coord(y_node);
        let n = x.len();
        x[n - 1] = self.psi.at(y_node);
        x
    }

    /// Image of a `y`-grid node in the minus side, `(y', psi(y) - C y_n)`.
    pub fn inverse_minus(&self, y_node: &[usize]) -> Vec<f64> {
        let y = self.psi.coord(y_node);
        let n = y.len();
        let mut x = y.clone();
        x[n - 1] = self.psi.at(y_node) - self.c * y[n - 1];
        x
    }

    /// `D_{y_i} psi` for tangential `axis` by second-order differences on the
    /// `psi` grid.
    fn dpsi_tangential(&self, y_node: &[usize], axis: usize) -> f64 {
        let g = &self.psi;
        let h = g.h();
        let v0 = g.at(y_node);
        match (g.shifted(y_node, axis, -1), g.shifted(y_node, axis, 1)) {
            (Some(b), Some(f)) => (f - b) / (2.0 * h),
            (None, Some(f)) => match g.shifted(y_node, axis, 2) {
                Some(f2) => (-3.0 * v0 + 4.0 * f - f2) / (2.0 * h),
                None => (f - v0) / h,
            },
            (Some(b), None) => match g.shifted(y_node, axis, -2) {
                Some(b2) => (3.0 * v0 - 4.0 * b + b2) / (2.0 * h),
                None => (v0 - b) / h,
            },
            (None, None) => 0.0,
        }
    }
}

/// Coefficients of the chain rule at one `y`-node:
/// `d/dx_i = d/dy_i + tangential[i] d/dy_n` and `d/dx_n = normal d/dy_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRule {
    pub side: Side,
    pub dpsi_dyn: f64,
    pub dpsi_dy: Vec<f64>,
    /// `D_{y_n} psi` on the plus side, `D_{y_n} psi - C` on the minus side.
    pub denominator: f64,
    pub tangential: Vec<f64>,
    pub normal: f64,
    /// `Dw` in `x` coordinates; plus side only.
    pub dw_dx: Option<Vec<f64>>,
}

impl ChainRule {
    /// Converts a `y`-gradient into the `x`-gradient.
    pub fn apply(&self, grad_y: &[f64]) -> Vec<f64> {
        let n = grad_y.len();
        let mut out: Vec<f64> = (0..n - 1)
            .map(|i| grad_y[i] + self.tangential[i] * grad_y[n - 1])
            .collect();
        out.push(self.normal * grad_y[n - 1]);
        out
    }
}

pub fn transform_derivatives(
    map: &HodographMap,
    side: Side,
    y_node: &[usize],
) -> Result<ChainRule, LegendreError> {
    let n = map.n();
    let dpsi_dyn = map.dpsi_dyn(y_node);
    let dpsi_dy: Vec<f64> = (0..n - 1).map(|a| map.dpsi_tangential(y_node, a)).collect();
    let denominator = match side {
        Side::Plus => dpsi_dyn,
        Side::Minus => dpsi_dyn - map.c,
    };
    if dpsi_dyn.abs() < JACOBIAN_FLOOR {
        return Err(LegendreError::DegenerateJacobian {
            denominator: dpsi_dyn,
        });
    }
    if denominator.abs() < JACOBIAN_FLOOR {
        return Err(LegendreError::DegenerateJacobian { denominator });
    }
    let tangential = dpsi_dy.iter().map(|d| -d / denominator).collect();
    let dw_dx = (side == Side::Plus).then(|| {
        let mut v: Vec<f64> = dpsi_dy.iter().map(|d| -d / dpsi_dyn).collect();
        v.push(1.0 / dpsi_dyn);
        v
    });
    Ok(ChainRule {
        side,
        dpsi_dyn,
        dpsi_dy,
        denominator,
        tangential,
        normal: 1.0 / denominator,
        dw_dx,
    })
}

/// `phi_k(y) = u_k(y', psi(y))` for `k <= s` and `u_k(y', psi(y) - C y_n)` for
/// `k > s` (1-based `k`), sampled on the `y`-grid with cubic interpolation
/// along the source columns.
pub fn compose_phi(
    map: &HodographMap,
    u_k: &GraphFunction,
    k: usize,
    s: usize,
) -> Result<GraphFunction, LegendreError> {
    if k == 0 || s == 0 {
        return Err(LegendreError::BadIndex { k, s });
    }
    let n = map.n();
    let want = if k <= s { Side::Plus } else { Side::Minus };
    if u_k.side() != want
        || u_k.n() != n
        || u_k.h() != map.w.h()
        || u_k.shape()[..n - 1] != map.w.shape()[..n - 1]
        || u_k.origin()[..n - 1] != map.w.origin()[..n - 1]
    {
        return Err(LegendreError::GridMismatch);
    }
    let h = u_k.h();
    let start = u_k.origin()[n - 1];
    let end = start + (u_k.shape()[n - 1] - 1) as f64 * h;
    let slack = 1e-12 * (1.0 + end.abs().max(start.abs()));
    let psi = &map.psi;
    let mut out = vec![0.0; psi.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let node = psi.unflatten(flat);
        let x_n = if k <= s {
            map.inverse_plus(&node)[n - 1]
        } else {
            map.inverse_minus(&node)[n - 1]
        };
        let col = psi.column_of(&node[..n - 1]);
        if x_n < start - slack || x_n > end + slack {
            return Err(LegendreError::OutOfDomain { column: col, x_n });
        }
        *slot = column_interp(start, h, u_k.column(col), x_n.clamp(start, end)).0;
    }
    GraphFunction::new(
        psi.shape().to_vec(),
        psi.origin().to_vec(),
        h,
        Side::Plus,
        out,
    )
    .map_err(|_| LegendreError::GridMismatch)
}
