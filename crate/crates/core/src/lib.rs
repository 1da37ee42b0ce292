//! Stationary junctions of minimal graph sheets meeting along a common
//! codimension-one interface.
//!
//! The crate provides the metric minimal-surface operator on graphs, the
//! weighted conormal balance along the junction, the partial Legendre
//! (hodograph) transform that flattens the junction, the linearized
//! transmission problem in the new coordinates, an ellipticity and
//! complementing-condition checker for weighted systems, and a discrete
//! weighted-area minimizer for triangulated junctions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adn;
pub mod graph_mse;
pub mod grid;
pub mod junction;
pub mod legendre;
pub mod linearize;
pub mod metric;
pub mod poly;
