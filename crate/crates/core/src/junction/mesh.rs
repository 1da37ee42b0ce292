use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::JunctionError;

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// How a vertex may move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VertexRole {
    /// Pinned to a wire.
    Fixed,
    Free,
    /// Slides in the plane `normal . x = offset` (`normal` is a unit vector).
    Plane {
        normal: Vec3,
        offset: f64,
    },
}

impl VertexRole {
    /// Removes the forbidden components of a displacement or gradient.
    pub fn project(&self, v: Vec3) -> Vec3 {
        match self {
            VertexRole::Fixed => [0.0; 3],
            VertexRole::Free => v,
            VertexRole::Plane { normal, .. } => sub(v, scale(*normal, dot(v, *normal))),
        }
    }
}

/// `q` triangulated sheets over one shared vertex store. The junction
/// polyline is an ordered list of vertex indices used by every sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetMeshState {
    pub positions: Vec<Vec3>,
    pub roles: Vec<VertexRole>,
    pub sheets: Vec<Vec<[usize; 3]>>,
    pub polyline: Vec<usize>,
    pub theta: Vec<f64>,
}

impl SheetMeshState {
    pub fn q(&self) -> usize {
        self.sheets.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    /// Number of distinct vertices referenced by sheet `k`.
    pub fn sheet_vertex_count(&self, k: usize) -> usize {
        let mut used = vec![false; self.positions.len()];
        for t in &self.sheets[k] {
            for &v in t {
                used[v] = true;
            }
        }
        used.iter().filter(|&&u| u).count()
    }

    /// Structural checks: indices, weights, polyline membership of every
    /// sheet, and roles.
    pub fn validate(&self) -> Result<(), JunctionError> {
        let bad = |m: String| Err(JunctionError::Invalid(m));
        let nv = self.positions.len();
        if self.roles.len() != nv {
            return bad("one role per vertex".into());
        }
        if self.sheets.len() < 2 {
            return bad(format!(
                "need at least two sheets (got {})",
                self.sheets.len()
            ));
        }
        if self.theta.len() != self.sheets.len()
            || self.theta.iter().any(|&t| !(t > 0.0 && t.is_finite()))
        {
            return bad("need one positive weight per sheet".into());
        }
        if self.polyline.len() < 2 {
            return bad("polyline needs at least two vertices".into());
        }
        if self.positions.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite vertex position".into());
        }
        for (k, sheet) in self.sheets.iter().enumerate() {
            if sheet.is_empty() {
                return bad(format!("sheet {} has no triangles", k + 1));
            }
            if sheet.iter().flatten().any(|&v| v >= nv) {
                return bad(format!("sheet {} references a missing vertex", k + 1));
            }
            for &p in &self.polyline {
                if !sheet.iter().any(|t| t.contains(&p)) {
                    return Err(JunctionError::DanglingVertex {
                        vertex: p,
                        sheet: k + 1,
                    });
                }
            }
        }
        for role in &self.roles {
            if let VertexRole::Plane { normal, .. } = role {
                if (norm(*normal) - 1.0).abs() > 1e-12 {
                    return bad("plane normals must be unit vectors".into());
                }
            }
        }
        Ok(())
    }

    /// Applies `x -> R x + t` to every vertex and constraint plane.
    pub fn transformed(&self, rot: &[[f64; 3]; 3], shift: Vec3) -> SheetMeshState {
        let apply = |x: Vec3| -> Vec3 {
            let mut out = shift;
            for i in 0..3 {
                for j in 0..3 {
                    out[i] += rot[i][j] * x[j];
                }
            }
            out
        };
        let rotate = |x: Vec3| sub(apply(x), shift);
        let roles = self
            .roles
            .iter()
            .map(|r| match *r {
                VertexRole::Plane { normal, offset } => {
                    let n2 = rotate(normal);
                    VertexRole::Plane {
                        normal: n2,
                        offset: offset + dot(n2, shift),
                    }
                }
                other => other,
            })
            .collect();
        SheetMeshState {
            positions: self.positions.iter().map(|&x| apply(x)).collect(),
            roles,
            sheets: self.sheets.clone(),
            polyline: self.polyline.clone(),
            theta: self.theta.clone(),
        }
    }
}

/// Straight vertical wires at `radius` around a common axis, sheets ruled
/// from the axis to each wire, and horizontal side edges sliding in the
/// planes `z = +-half_height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YWireSpec {
    pub angles_deg: Vec<f64>,
    pub theta: Vec<f64>,
    pub radius: f64,
    pub half_height: f64,
    pub radial_cells: usize,
    pub vertical_cells: usize,
    /// Random in-plane displacement of movable vertices, in cells.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for YWireSpec {
    fn default() -> Self {
        Self {
            angles_deg: vec![0.0, 90.0, 225.0],
            theta: vec![1.0; 3],
            radius: 1.0,
            half_height: 0.5,
            radial_cells: 32,
            vertical_cells: 32,
            jitter: 0.0,
            seed: 42,
        }
    }
}

pub fn y_wire(spec: &YWireSpec) -> Result<SheetMeshState, JunctionError> {
    let q = spec.angles_deg.len();
    if spec.theta.len() != q {
        return Err(JunctionError::Invalid("one weight per wire".into()));
    }
    if spec.radial_cells < 1
        || spec.vertical_cells < 1
        || !(spec.radius > 0.0)
        || !(spec.half_height > 0.0)
    {
        return Err(JunctionError::Invalid(
            "cell counts, radius and height must be positive".into(),
        ));
    }
    let (nr, nz) = (spec.radial_cells, spec.vertical_cells);
    let z = |j: usize| -spec.half_height + 2.0 * spec.half_height * j as f64 / nz as f64;
    let slide = |j: usize| VertexRole::Plane {
        normal: [0.0, 0.0, 1.0],
        offset: z(j),
    };
    let side = |j: usize| j == 0 || j == nz;

    let mut positions = Vec::new();
    let mut roles = Vec::new();
    for j in 0..=nz {
        positions.push([0.0, 0.0, z(j)]);
        roles.push(if side(j) { slide(j) } else { VertexRole::Free });
    }
    let polyline: Vec<usize> = (0..=nz).collect();
    let mut sheets = Vec::with_capacity(q);
    for &deg in &spec.angles_deg {
        let (s, c) = deg.to_radians().sin_cos();
        let base = positions.len();
        // index of grid node (i, j); i = 0 is the axis
        let id = |i: usize, j: usize| {
            if i == 0 {
                j
            } else {
                base + (i - 1) * (nz + 1) + j
            }
        };
        for i in 1..=nr {
            let r = spec.radius * i as f64 / nr as f64;
            for j in 0..=nz {
                positions.push([r * c, r * s, z(j)]);
                roles.push(if i == nr {
                    VertexRole::Fixed
                } else if side(j) {
                    slide(j)
                } else {
                    VertexRole::Free
                });
            }
        }
        let mut tris = Vec::with_capacity(2 * nr * nz);
        for i in 1..=nr {
            for j in 0..nz {
                let (a, b, cc, d) = (id(i - 1, j), id(i, j), id(i, j + 1), id(i - 1, j + 1));
                tris.push([a, b, cc]);
                tris.push([a, cc, d]);
            }
        }
        sheets.push(tris);
    }
    if spec.jitter > 0.0 {
        let cell = (spec.radius / nr as f64).min(2.0 * spec.half_height / nz as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for (x, role) in positions.iter_mut().zip(&roles) {
            let d: Vec3 = [
                rng.gen_range(-1.0..1.0) * spec.jitter * cell,
                rng.gen_range(-1.0..1.0) * spec.jitter * cell,
                rng.gen_range(-1.0..1.0) * spec.jitter * cell,
            ];
            *x = add(*x, role.project(d));
        }
    }
    let state = SheetMeshState {
        positions,
        roles,
        sheets,
        polyline,
        theta: spec.theta.clone(),
    };
    state.validate()?;
    Ok(state)
}

/// Half-disks of `radius` hinged on the `z`-axis diameter, one per angle,
/// triangulated as fans from the centre with `segments` boundary edges each.
/// Rim vertices are fixed; the diameter is the junction polyline.
pub fn half_disks(
    angles_deg: &[f64],
    theta: &[f64],
    radius: f64,
    segments: usize,
) -> Result<SheetMeshState, JunctionError> {
    if segments < 2 {
        return Err(JunctionError::Invalid("need at least two segments".into()));
    }
    let mut positions = vec![[0.0, 0.0, -radius], [0.0, 0.0, 0.0], [0.0, 0.0, radius]];
    let mut roles = vec![VertexRole::Fixed, VertexRole::Free, VertexRole::Fixed];
    let mut sheets = Vec::new();
    for &deg in angles_deg {
        let (s, c) = deg.to_radians().sin_cos();
        let base = positions.len();
        for i in 1..segments {
            let phi = std::f64::consts::PI * i as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            positions.push([radius * sp * c, radius * sp * s, -radius * cp]);
            roles.push(VertexRole::Fixed);
        }
        let rim = |i: usize| match i {
            0 => 0,
            i if i == segments => 2,
            i => base + i - 1,
        };
        sheets.push((0..segments).map(|i| [1, rim(i), rim(i + 1)]).collect());
    }
    let state = SheetMeshState {
        positions,
        roles,
        sheets,
        polyline: vec![0, 1, 2],
        theta: theta.to_vec(),
    };
    state.validate()?;
    Ok(state)
}

/// The unit square `[0,1]^2 x {0}` split into `2 cells^2` triangles, boundary
/// fixed, attached to a second copy rotated by `angle_deg` about the
/// `x = 0` edge so that the pair forms a book with that spine.
pub fn book(angle_deg: f64, cells: usize, theta: &[f64]) -> Result<SheetMeshState, JunctionError> {
    let mut positions = Vec::new();
    let mut roles = Vec::new();
    for j in 0..=cells {
        positions.push([0.0, 0.0, j as f64 / cells as f64]);
        roles.push(VertexRole::Fixed);
    }
    let mut sheets = Vec::new();
    for &deg in &[0.0, angle_deg] {
        let (s, c) = f64::to_radians(deg).sin_cos();
        let base = positions.len();
        let id = |i: usize, j: usize| {
            if i == 0 {
                j
            } else {
                base + (i - 1) * (cells + 1) + j
            }
        };
        for i in 1..=cells {
            let r = i as f64 / cells as f64;
            for j in 0..=cells {
                positions.push([r * c, r * s, j as f64 / cells as f64]);
                let boundary = i == cells || j == 0 || j == cells;
                roles.push(if boundary {
                    VertexRole::Fixed
                } else {
                    VertexRole::Free
                });
            }
        }
        let mut tris = Vec::new();
        for i in 1..=cells {
            for j in 0..cells {
                let (a, b, cc, d) = (id(i - 1, j), id(i, j), id(i, j + 1), id(i - 1, j + 1));
                tris.push([a, b, cc]);
                tris.push([a, cc, d]);
            }
        }
        sheets.push(tris);
    }
    let state = SheetMeshState {
        positions,
        roles,
        sheets,
        polyline: (0..=cells).collect(),
        theta: theta.to_vec(),
    };
    state.validate()?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_wire_counts() {
        let st = y_wire(&YWireSpec::default()).unwrap();
        assert_eq!(st.q(), 3);
        assert_eq!(st.polyline.len(), 33);
        for k in 0..3 {
            assert_eq!(st.sheet_vertex_count(k), 33 * 33);
            assert_eq!(st.sheets[k].len(), 2 * 32 * 32);
        }
        assert_eq!(st.vertex_count(), 33 + 3 * 32 * 33);
    }

    #[test]
    fn roles_project() {
        let r = VertexRole::Plane {
            normal: [0.0, 0.0, 1.0],
            offset: 0.5,
        };
        assert_eq!(r.project([1.0, 2.0, 3.0]), [1.0, 2.0, 0.0]);
        assert_eq!(VertexRole::Fixed.project([1.0, 2.0, 3.0]), [0.0; 3]);
    }

    #[test]
    fn jitter_respects_roles() {
        let spec = YWireSpec {
            jitter: 0.3,
            radial_cells: 4,
            vertical_cells: 4,
            ..Default::default()
        };
        let st = y_wire(&spec).unwrap();
        for (x, role) in st.positions.iter().zip(&st.roles) {
            if let VertexRole::Plane { normal, offset } = role {
                assert!((dot(*x, *normal) - offset).abs() < 1e-15);
            }
        }
        assert_eq!(st, y_wire(&spec).unwrap());
    }

    #[test]
    fn transformed_keeps_planes_consistent() {
        let st = y_wire(&YWireSpec {
            radial_cells: 3,
            vertical_cells: 3,
            ..Default::default()
        })
        .unwrap();
        let (s, c) = 0.3f64.sin_cos();
        let rot = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]];
        let moved = st.transformed(&rot, [0.2, -1.0, 3.0]);
        for (x, role) in moved.positions.iter().zip(&moved.roles) {
            if let VertexRole::Plane { normal, offset } = role {
                assert!((dot(*x, *normal) - offset).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dangling_polyline_vertex_is_rejected() {
        let mut st = y_wire(&YWireSpec {
            radial_cells: 2,
            vertical_cells: 2,
            ..Default::default()
        })
        .unwrap();
        st.positions.push([9.0; 3]);
        st.roles.push(VertexRole::Free);
        st.polyline.push(st.positions.len() - 1);
        assert!(matches!(
            st.validate(),
            Err(JunctionError::DanglingVertex { .. })
        ));
    }
}
