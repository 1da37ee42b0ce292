//! Mesh files: one OFF file per sheet (`sheet_<k>.off`, local vertex
//! numbering) plus `polyline.txt`, which lists for each junction vertex its
//! local index in every sheet, the weights, and the non-free vertex roles.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::balance::AngleRow;
use super::mesh::{SheetMeshState, Vec3, VertexRole};
use super::solver::TraceEntry;
use super::JunctionError;
use crate::grid::fmt_f64;

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> JunctionError {
    JunctionError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Global vertex ids used by sheet `k`, in increasing order.
fn sheet_vertices(state: &SheetMeshState, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = state.sheets[k].iter().flatten().copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn off_string(state: &SheetMeshState, k: usize) -> String {
    let verts = sheet_vertices(state, k);
    let local: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "OFF");
    let _ = writeln!(out, "{} {} 0", verts.len(), state.sheets[k].len());
    for &g in &verts {
        let p = state.positions[g];
        let _ = writeln!(out, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
    }
    for t in &state.sheets[k] {
        let _ = writeln!(out, "3 {} {} {}", local[&t[0]], local[&t[1]], local[&t[2]]);
    }
    out
}

/// Parses an OFF triangle mesh.
pub fn parse_off(text: &str, file: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), JunctionError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "OFF")) => {}
        Some((n, _)) => return Err(parse_err(file, n, "expected `OFF` header")),
        None => return Err(parse_err(file, 0, "empty file")),
    }
    let (n, counts) = lines
        .next()
        .ok_or_else(|| parse_err(file, 0, "missing counts"))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(file, n, format!("bad count `{t}`")))
        })
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(parse_err(file, n, "expected vertex and face counts"));
    }
    let mut verts = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err(file, 0, "missing vertex lines"))?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| parse_err(file, n, format!("bad coordinate `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        if v.len() != 3 {
            return Err(parse_err(file, n, "vertices need three coordinates"));
        }
        verts.push([v[0], v[1], v[2]]);
    }
    let mut faces = Vec::with_capacity(counts[1]);
    for _ in 0..counts[1] {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err(file, 0, "missing face lines"))?;
        let f: Vec<usize> = l
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| parse_err(file, n, format!("bad index `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        if f.len() != 4 || f[0] != 3 || f[1..].iter().any(|&i| i >= verts.len()) {
            return Err(parse_err(
                file,
                n,
                "faces must be triangles `3 i j k` with valid indices",
            ));
        }
        faces.push([f[1], f[2], f[3]]);
    }
    Ok((verts, faces))
}

pub fn polyline_string(state: &SheetMeshState) -> String {
    let locals: Vec<HashMap<usize, usize>> = (0..state.q())
        .map(|k| {
            sheet_vertices(state, k)
                .into_iter()
                .enumerate()
                .map(|(i, g)| (g, i))
                .collect()
        })
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "q {}", state.q());
    let _ = writeln!(
        out,
        "theta {}",
        state
            .theta
            .iter()
            .map(|t| fmt_f64(*t))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for &v in &state.polyline {
        let idx: Vec<String> = locals.iter().map(|m| m[&v].to_string()).collect();
        let _ = writeln!(out, "p {}", idx.join(" "));
    }
    for (k, local) in locals.iter().enumerate() {
        let mut entries: Vec<(usize, usize)> = local.iter().map(|(&g, &l)| (l, g)).collect();
        entries.sort_unstable();
        for (l, g) in entries {
            match state.roles[g] {
                VertexRole::Free => {}
                VertexRole::Fixed => {
                    let _ = writeln!(out, "fixed {} {l}", k + 1);
                }
                VertexRole::Plane { normal, offset } => {
                    let _ = writeln!(
                        out,
                        "slide {} {l} {} {} {} {}",
                        k + 1,
                        fmt_f64(normal[0]),
                        fmt_f64(normal[1]),
                        fmt_f64(normal[2]),
                        fmt_f64(offset)
                    );
                }
            }
        }
    }
    out
}

pub fn write_mesh_dir(state: &SheetMeshState, dir: &Path) -> Result<(), JunctionError> {
    fs::create_dir_all(dir)?;
    for k in 0..state.q() {
        fs::write(
            dir.join(format!("sheet_{}.off", k + 1)),
            off_string(state, k),
        )?;
    }
    fs::write(dir.join("polyline.txt"), polyline_string(state))?;
    Ok(())
}

/// Rebuilds a state from [`write_mesh_dir`] output; junction vertices take
/// their position from the first sheet.
pub fn read_mesh_dir(dir: &Path) -> Result<SheetMeshState, JunctionError> {
    let pfile = "polyline.txt";
    let text = fs::read_to_string(dir.join(pfile))?;
    let mut q = None;
    let mut theta = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut role_lines: Vec<(usize, usize, usize, VertexRole)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let ints = |t: &[&str]| -> Result<Vec<usize>, JunctionError> {
            t.iter()
                .map(|x| {
                    x.parse()
                        .map_err(|_| parse_err(pfile, n, format!("bad integer `{x}`")))
                })
                .collect()
        };
        let floats = |t: &[&str]| -> Result<Vec<f64>, JunctionError> {
            t.iter()
                .map(|x| {
                    x.parse()
                        .map_err(|_| parse_err(pfile, n, format!("bad number `{x}`")))
                })
                .collect()
        };
        match tok[0] {
            "q" => {
                q = Some(
                    ints(&tok[1..])?
                        .first()
                        .copied()
                        .ok_or_else(|| parse_err(pfile, n, "missing q"))?,
                )
            }
            "theta" => theta = floats(&tok[1..])?,
            "p" => rows.push(ints(&tok[1..])?),
            "fixed" if tok.len() == 3 => {
                let v = ints(&tok[1..])?;
                role_lines.push((n, v[0], v[1], VertexRole::Fixed));
            }
            "slide" if tok.len() == 7 => {
                let v = ints(&tok[1..3])?;
                let f = floats(&tok[3..])?;
                role_lines.push((
                    n,
                    v[0],
                    v[1],
                    VertexRole::Plane {
                        normal: [f[0], f[1], f[2]],
                        offset: f[3],
                    },
                ));
            }
            other => return Err(parse_err(pfile, n, format!("unexpected line `{other}`"))),
        }
    }
    let q = q.ok_or_else(|| parse_err(pfile, 0, "missing `q` line"))?;
    if rows.iter().any(|r| r.len() != q) {
        return Err(parse_err(
            pfile,
            0,
            "every `p` line needs one index per sheet",
        ));
    }
    // junction vertices take global ids 0..rows.len()
    let mut positions: Vec<Vec3> = vec![[0.0; 3]; rows.len()];
    let mut roles: Vec<VertexRole> = vec![VertexRole::Free; rows.len()];
    let mut sheets = Vec::with_capacity(q);
    let mut globals: Vec<Vec<usize>> = Vec::with_capacity(q);
    let polyline: Vec<usize> = (0..rows.len()).collect();
    for k in 0..q {
        let name = format!("sheet_{}.off", k + 1);
        let (verts, faces) = parse_off(&fs::read_to_string(dir.join(&name))?, &name)?;
        let shared: HashMap<usize, usize> =
            rows.iter().enumerate().map(|(g, r)| (r[k], g)).collect();
        let mut map = Vec::with_capacity(verts.len());
        for (l, p) in verts.iter().enumerate() {
            match shared.get(&l) {
                Some(&g) => {
                    if k == 0 {
                        positions[g] = *p;
                    }
                    map.push(g);
                }
                None => {
                    map.push(positions.len());
                    positions.push(*p);
                    roles.push(VertexRole::Free);
                }
            }
        }
        sheets.push(
            faces
                .iter()
                .map(|f| [map[f[0]], map[f[1]], map[f[2]]])
                .collect(),
        );
        globals.push(map);
    }
    for (n, k, l, role) in role_lines {
        let g = globals
            .get(k.wrapping_sub(1))
            .and_then(|m| m.get(l))
            .ok_or_else(|| parse_err(pfile, n, "role refers to a missing sheet vertex"))?;
        roles[*g] = role;
    }
    let state = SheetMeshState {
        positions,
        roles,
        sheets,
        polyline,
        theta,
    };
    state.validate()?;
    Ok(state)
}

pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], w: W) -> Result<(), JunctionError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["iteration", "energy", "max_gradient", "step"])?;
    for e in trace {
        wr.write_record([
            e.iteration.to_string(),
            fmt_f64(e.energy),
            fmt_f64(e.max_gradient),
            fmt_f64(e.step),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_angles_csv<W: Write>(rows: &[AngleRow], w: W) -> Result<(), JunctionError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["position", "vertex", "sheet_i", "sheet_j", "angle_deg"])?;
    for row in rows {
        let q = row.angles.len();
        for i in 0..q {
            for j in i + 1..q {
                wr.write_record([
                    row.position.to_string(),
                    row.vertex.to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    fmt_f64(row.angles[i][j]),
                ])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::mesh::{half_disks, y_wire, YWireSpec};

    fn tmpdir(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("plateau-io-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn mesh_dir_round_trip() {
        let spec = YWireSpec {
            radial_cells: 3,
            vertical_cells: 4,
            jitter: 0.2,
            ..Default::default()
        };
        let st = y_wire(&spec).unwrap();
        let dir = tmpdir("y");
        write_mesh_dir(&st, &dir).unwrap();
        let back = read_mesh_dir(&dir).unwrap();
        assert_eq!(back.polyline.len(), st.polyline.len());
        assert_eq!(back.theta, st.theta);
        for k in 0..st.q() {
            assert_eq!(off_string(&back, k), off_string(&st, k));
        }
        assert_eq!(polyline_string(&back), polyline_string(&st));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn round_trip_with_fixed_junction_ends() {
        let st = half_disks(&[0.0, 120.0, 240.0], &[1.0, 2.0, 3.0], 1.0, 8).unwrap();
        let dir = tmpdir("disk");
        write_mesh_dir(&st, &dir).unwrap();
        let back = read_mesh_dir(&dir).unwrap();
        assert_eq!(polyline_string(&back), polyline_string(&st));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn off_parse_errors() {
        assert!(matches!(
            parse_off("OFF\n1 1 0\n0 0\n", "x"),
            Err(JunctionError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", "x"),
            Err(JunctionError::Parse { line: 6, .. })
        ));
    }
}
