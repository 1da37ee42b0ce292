use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use plateau::adn::{
    complementing_check_with, default_samples, ellipticity_check_with, AdnError, Coercivity,
    Ellipticity, WeightedSystem, DET_TOL,
};
use plateau::graph_mse::{mse_residual_field, pmc_residual};
use plateau::grid::{GraphFunction, Side};
use plateau::junction::{
    angle_report, interior_gradient_density, max_balance, minimize, read_mesh_dir,
    total_weighted_area, write_angles_csv, write_mesh_dir, write_trace_csv, y_wire,
};
use plateau::legendre::forward_transform;
use plateau::linearize::principal_linearization;
use plateau::metric::Euclidean;

use crate::config::{load_junction, load_solve_config};
use crate::{io_err, CliError, Outcome, RunConfig, Status, Surface};

/// Writes `bytes` to `name` inside the output directory, if there is one.
fn emit(cfg: &RunConfig, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let Some(dir) = &cfg.out else {
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))
}

fn finish(cfg: &RunConfig, status: Status, report: String) -> Result<Outcome, CliError> {
    emit(cfg, "report.txt", report.as_bytes())?;
    Ok(Outcome { status, report })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn check_coercivity(cfg: &RunConfig, system: &Path) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(system).map_err(io_err(system))?;
    let sys = WeightedSystem::parse(&text).map_err(|source| CliError::Adn {
        path: system.to_path_buf(),
        source,
    })?;
    let samples = cfg.samples.unwrap_or_else(|| default_samples(sys.n));
    let tol = cfg.tol.unwrap_or(DET_TOL);
    let mut out = String::new();
    let _ = writeln!(out, "system: n = {} q = {} m = {}", sys.n, sys.q, sys.m);
    let _ = writeln!(out, "samples: {samples}  threshold: {tol:e}");

    match ellipticity_check_with(&sys, samples, tol)? {
        Ellipticity::NotElliptic { witness, ratio } => {
            let _ = writeln!(out, "ellipticity: NotElliptic");
            let _ = writeln!(
                out,
                "  witness xi = {}  |det| ratio = {ratio:e}",
                fmt_vec(&witness)
            );
            let _ = writeln!(out, "coercivity: not checked");
            return finish(cfg, Status::Failed, out);
        }
        Ellipticity::Elliptic { min_ratio } => {
            let _ = writeln!(out, "ellipticity: Elliptic (min ratio {min_ratio:e})");
        }
    }
    let report = match complementing_check_with(&sys, samples, tol) {
        Ok(r) => r,
        Err(AdnError::DimensionMismatch {
            expected,
            found,
            xi,
        }) => {
            let _ = writeln!(out, "coercivity: NotCoercive");
            let _ = writeln!(
                out,
                "  {found} decaying solutions for {expected} boundary rows at xi' = {}",
                fmt_vec(&xi)
            );
            return finish(cfg, Status::Failed, out);
        }
        Err(e) => return Err(e.into()),
    };
    let _ = writeln!(
        out,
        "frequencies: {}  perturbed: {}  with repeated roots: {}",
        report.samples, report.perturbed, report.repeated_roots
    );
    let status = match &report.verdict {
        Coercivity::Coercive { min_ratio } => {
            let _ = writeln!(
                out,
                "coercivity: Coercive (min boundary ratio {min_ratio:e})"
            );
            Status::Success
        }
        Coercivity::NotCoercive {
            xi,
            roots,
            null_vector,
            ratio,
        } => {
            let _ = writeln!(out, "coercivity: NotCoercive");
            let _ = writeln!(
                out,
                "  witness xi' = {}  boundary ratio = {ratio:e}",
                fmt_vec(xi)
            );
            for (r, c) in roots.iter().zip(null_vector) {
                let _ = writeln!(
                    out,
                    "  root {:.6}{:+.6}i  coefficient {:.6}{:+.6}i",
                    r.re, r.im, c.re, c.im
                );
            }
            Status::Failed
        }
    };
    finish(cfg, status, out)
}

pub fn linearize(cfg: &RunConfig, junction: &Path) -> Result<Outcome, CliError> {
    let data = load_junction(junction)?;
    let lin = principal_linearization(&data)?;
    emit(
        cfg,
        "system.txt",
        lin.to_weighted_system().to_text().as_bytes(),
    )?;
    finish(cfg, Status::Success, lin.report())
}

pub fn solve_junction(cfg: &RunConfig, config: &Path) -> Result<Outcome, CliError> {
    let mut sc = load_solve_config(config)?;
    if let Some(t) = cfg.tol {
        sc.optimizer.tolerance = t;
    }
    let initial = match (&mut sc.wire, &sc.mesh) {
        (Some(wire), _) => {
            if cfg.seed_given {
                wire.seed = cfg.seed;
            }
            y_wire(wire)?
        }
        (None, Some(dir)) => read_mesh_dir(dir)?,
        (None, None) => unreachable!("checked when loading"),
    };
    let outcome = minimize(&initial, &sc.optimizer, None)?;
    let st = &outcome.state;
    let energy = total_weighted_area(st, None)?;
    let balance = max_balance(st, None)?;
    let angles = angle_report(st, None)?;

    if let Some(dir) = &cfg.out {
        write_mesh_dir(st, dir)?;
        let mut trace = Vec::new();
        write_trace_csv(&outcome.trace, &mut trace)?;
        emit(cfg, "trace.csv", &trace)?;
        let mut table = Vec::new();
        write_angles_csv(&angles, &mut table)?;
        emit(cfg, "angles.csv", &table)?;
    }

    let mut out = String::new();
    let counts: Vec<usize> = (0..st.q()).map(|k| st.sheet_vertex_count(k)).collect();
    let _ = writeln!(
        out,
        "sheets: {}  vertices per sheet: {counts:?}  junction vertices: {}",
        st.q(),
        st.polyline.len()
    );
    let _ = writeln!(out, "theta: {:?}", st.theta);
    let _ = writeln!(out, "iterations: {}", outcome.iterations);
    let _ = writeln!(out, "converged: {}", outcome.converged);
    let _ = writeln!(out, "energy: {energy:.12}");
    let _ = writeln!(out, "max|Σθη| = {balance:.3e}");
    let _ = writeln!(
        out,
        "max|Σθη| {} 1e-3",
        if balance < 1e-3 { "<" } else { ">=" }
    );
    let _ = writeln!(
        out,
        "interior gradient density: {:.3e}",
        interior_gradient_density(st, None)
    );
    let _ = writeln!(out, "dihedral angles along the junction (deg):");
    for i in 0..st.q() {
        for j in i + 1..st.q() {
            let vals = angles.iter().map(|r| r.angle(i, j));
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(out, "  {}-{}: {lo:.4} .. {hi:.4}", i + 1, j + 1);
        }
    }
    let status = if outcome.converged {
        Status::Success
    } else {
        Status::Failed
    };
    finish(cfg, status, out)
}

/// Grid and exact solution of a built-in test surface at spacing `h`.
fn surface_grid(surface: Surface, h: f64) -> Result<GraphFunction, CliError> {
    let (origin, len) = match surface {
        Surface::Catenoid => ([1.5, -0.25], 0.5),
        Surface::Scherk | Surface::SphereCap => ([-0.5, -0.5], 1.0),
    };
    let nodes = (len / h).round() as usize + 1;
    if nodes < 3 {
        return Err(CliError::Usage(format!(
            "spacing {h} leaves no interior nodes"
        )));
    }
    let f = move |x: &[f64]| match surface {
        Surface::Catenoid => (x[0] * x[0] + x[1] * x[1]).sqrt().acosh(),
        Surface::Scherk => (x[1].cos() / x[0].cos()).ln(),
        Surface::SphereCap => -(4.0 - x[0] * x[0] - x[1] * x[1]).sqrt(),
    };
    GraphFunction::from_fn(vec![nodes, nodes], origin.to_vec(), h, Side::Plus, f).map_err(
        |source| CliError::Grid {
            path: "<built-in>".into(),
            source,
        },
    )
}

fn residual_field(surface: Option<Surface>, u: &GraphFunction) -> Result<GraphFunction, CliError> {
    let mut field = mse_residual_field(&Euclidean::new(u.n()), u)?;
    if surface != Some(Surface::SphereCap) {
        return Ok(field);
    }
    // prescribed mean curvature n/R = 1 for the lower cap of radius 2
    for flat in 0..field.len() {
        let node: Vec<usize> = field.unflatten(flat).iter().map(|i| i + 1).collect();
        let inner = field.unflatten(flat);
        field.set(&inner, pmc_residual(u, |_, _| 1.0, &node)?);
    }
    Ok(field)
}

fn grid_csv(g: &GraphFunction) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    g.write_csv(&mut buf).map_err(|source| CliError::Grid {
        path: "<output>".into(),
        source,
    })?;
    Ok(buf)
}

pub fn mse_residual(
    cfg: &RunConfig,
    grid: Option<&Path>,
    surface: Surface,
    h: f64,
    levels: usize,
) -> Result<Outcome, CliError> {
    let mut out = String::new();
    if let Some(path) = grid {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let u = GraphFunction::read_csv(file).map_err(|source| CliError::Grid {
            path: path.to_path_buf(),
            source,
        })?;
        let field = residual_field(None, &u)?;
        let sup = field.max_abs();
        emit(cfg, "residual.csv", &grid_csv(&field)?)?;
        let _ = writeln!(out, "grid: {} nodes, h = {}", u.len(), u.h());
        let _ = writeln!(out, "sup residual: {sup:.6e}");
        let status = match cfg.tol {
            Some(t) if sup > t => Status::Failed,
            _ => Status::Success,
        };
        return finish(cfg, status, out);
    }
    if levels < 2 {
        return Err(CliError::Usage(
            "a convergence study needs at least two levels".into(),
        ));
    }
    let _ = writeln!(out, "surface: {surface:?}");
    let mut csv = String::from("h,sup_residual,ratio\n");
    let mut prev: Option<f64> = None;
    let mut finest = None;
    let mut ratios = Vec::new();
    for level in 0..levels {
        let hl = h / (1u64 << level) as f64;
        let field = residual_field(Some(surface), &surface_grid(surface, hl)?)?;
        let sup = field.max_abs();
        let ratio = prev.map(|p| p / sup);
        if let Some(r) = ratio {
            ratios.push(r);
        }
        let rtext = ratio.map(|r| format!("{r:.4}")).unwrap_or_default();
        let _ = writeln!(csv, "{hl},{sup:e},{rtext}");
        let _ = writeln!(
            out,
            "h = {hl:<10} sup residual = {sup:.6e}  ratio = {rtext}"
        );
        prev = Some(sup);
        finest = Some(field);
    }
    emit(cfg, "convergence.csv", csv.as_bytes())?;
    if let Some(field) = finest {
        emit(cfg, "residual.csv", &grid_csv(&field)?)?;
    }
    let tol = cfg.tol.unwrap_or(0.2);
    let second_order = ratios.iter().all(|r| (r / 4.0 - 1.0).abs() <= tol);
    let _ = writeln!(
        out,
        "second order (ratio 4 within {:.0}%): {second_order}",
        100.0 * tol
    );
    finish(
        cfg,
        if second_order {
            Status::Success
        } else {
            Status::Failed
        },
        out,
    )
}

/// Built-in pair of sheets with slopes `0.9` and `-0.6` at the interface.
fn builtin_sheets(h: f64) -> Result<(GraphFunction, GraphFunction, f64), CliError> {
    let nodes = (0.5 / h).round() as usize + 1;
    let columns = (0.4 / h).round() as usize + 1;
    let make = |f: &dyn Fn(&[f64]) -> f64| {
        GraphFunction::half_grid(Side::Plus, &[-0.2], &[columns], nodes, h, f).map_err(|source| {
            CliError::Grid {
                path: "<built-in>".into(),
                source,
            }
        })
    };
    let u1 = make(&|x| 0.9 * x[1] + 0.2 * x[0] * x[1] * x[1] + 0.15 * x[1].powi(3))?;
    let u2 = make(&|x| -0.6 * x[1] - 0.1 * x[1].powi(3))?;
    Ok((u1, u2, 1.5))
}

fn read_grid(path: &Path) -> Result<GraphFunction, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    GraphFunction::read_csv(file).map_err(|source| CliError::Grid {
        path: path.to_path_buf(),
        source,
    })
}

pub fn legendre_roundtrip(
    cfg: &RunConfig,
    pair: Option<(&Path, &Path)>,
    h: f64,
) -> Result<Outcome, CliError> {
    let (u1, u2, gap) = match pair {
        Some((a, b)) => {
            let (u1, u2) = (read_grid(a)?, read_grid(b)?);
            (u1, u2, None)
        }
        None => {
            let (u1, u2, gap) = builtin_sheets(h)?;
            (u1, u2, Some(gap))
        }
    };
    let map = forward_transform(&u1, &u2)?;
    let err = map.roundtrip_error();
    let tol = cfg.tol.unwrap_or(1e-10);
    let n = u1.n();
    // interface slope gap from the first column when no closed form is known
    let gap = gap.unwrap_or_else(|| {
        let w = map.w();
        let col = w.column(0);
        (-3.0 * col[0] + 4.0 * col[1] - col[2]) / (2.0 * w.h())
    });
    let psi = map.psi();
    // psi node on the interface closest to the tangential origin
    let mut node: Vec<usize> = (0..n - 1)
        .map(|a| {
            (-psi.origin()[a] / psi.h())
                .round()
                .clamp(0.0, (psi.shape()[a] - 1) as f64) as usize
        })
        .collect();
    node.push(0);
    let slope = map.dpsi_dyn(&node);
    emit(cfg, "psi.csv", &grid_csv(psi)?)?;
    emit(cfg, "w.csv", &grid_csv(map.w())?)?;
    let mut out = String::new();
    let _ = writeln!(out, "psi grid: {:?} nodes, h = {}", psi.shape(), psi.h());
    let _ = writeln!(
        out,
        "C = {:.12}  C (a_1 - a_2) = {:.12}",
        map.c(),
        map.c() * gap
    );
    let _ = writeln!(out, "D_yn psi(0) (a_1 - a_2) = {:.12}", slope * gap);
    let _ = writeln!(out, "max roundtrip error = {err:.3e} (threshold {tol:e})");
    finish(
        cfg,
        if err < tol {
            Status::Success
        } else {
            Status::Failed
        },
        out,
    )
}
