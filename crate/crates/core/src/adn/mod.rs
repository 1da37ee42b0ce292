//! Ellipticity and the complementing (Lopatinskii-Shapiro) condition for
//! constant-coefficient systems with Agmon-Douglis-Nirenberg weights.
//!
//! Derivatives `D_a` act on `e^{i xi . y}` as `i xi_a`; on the boundary
//! ansatz `c e^{i xi' . y' - lambda y_n}` the normal derivative becomes
//! `-lambda` and decaying solutions have `Re lambda > 0`.

mod check;
mod system;

use thiserror::Error;

pub use check::{
    boundary_matrix, complementing_check, complementing_check_with, decaying_solutions,
    default_samples, ellipticity_check, ellipticity_check_with, sphere_samples, Coercivity,
    ComplementingReport, DecayingBasis, Ellipticity, CLUSTER_TOL, DET_TOL, PERTURBATION,
};
pub use system::{
    dirichlet_laplace, identified_pair, laplacians, wave_operator, Term, WeightedSystem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdnError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("bad term: {0}")]
    BadTerm(String),
    #[error("system is not elliptic")]
    NotElliptic,
    #[error(
        "repeated decaying root without a full eigenspace at xi' = {xi:?}, also after perturbation"
    )]
    RootMultiplicity { xi: Vec<f64> },
    #[error("decaying solution space has dimension {found}, expected {expected} (xi' = {xi:?})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        xi: Vec<f64>,
    },
    #[error("{0} unknowns exceed the supported system size")]
    TooLarge(usize),
}
