//! Discrete weighted-area minimization for sheets meeting along a shared,
//! movable junction polyline.

mod balance;
mod energy;
mod io;
mod mesh;
mod solver;

use thiserror::Error;

pub use balance::{
    angle_report, conormal, conormal_balance, interior_gradient_density, max_balance, AngleRow,
};
pub use energy::{
    projected_gradient, raw_gradient, sheet_areas, total_weighted_area, triangle_area,
    triangle_area_gradient, METRIC_FD_STEP, MIN_AREA,
};
pub use io::{
    off_string, parse_off, polyline_string, read_mesh_dir, write_angles_csv, write_mesh_dir,
    write_trace_csv,
};
pub use mesh::{book, half_disks, y_wire, SheetMeshState, Vec3, VertexRole, YWireSpec};
pub use solver::{equalized_polyline, minimize, MinimizeOutcome, OptimizerConfig, TraceEntry};

#[derive(Debug, Error)]
pub enum JunctionError {
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("triangle {triangle} of sheet {sheet} is degenerate (area {area:e})")]
    DegenerateTriangle {
        sheet: usize,
        triangle: usize,
        area: f64,
    },
    #[error("mesh collapsed during the line search at iteration {iteration}")]
    MeshCollapse { iteration: usize },
    #[error("line search failed after all halvings at iteration {iteration} (max gradient {max_gradient:e})")]
    LineSearchFailure { iteration: usize, max_gradient: f64 },
    #[error("junction vertex {vertex} has no triangle in sheet {sheet}")]
    DanglingVertex { vertex: usize, sheet: usize },
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
