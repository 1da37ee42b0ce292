//! Browser bindings for the demo page in `www/`: a small Y-junction solve,
//! the linearization report of a junction, and the determinant `D`.

use plateau::adn::complementing_check;
use plateau::junction::{angle_report, max_balance, minimize, y_wire, OptimizerConfig, YWireSpec};
use plateau::linearize::{coercivity_determinant, principal_linearization, JunctionData};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct SolveResult {
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    pub balance: f64,
    /// `[min, max]` of each pair angle along the junction, pairs in
    /// `(1,2), (1,3), (2,3)` order.
    pub angles: Vec<[f64; 2]>,
    pub positions: Vec<[f64; 3]>,
    pub sheets: Vec<Vec<[usize; 3]>>,
    pub polyline: Vec<usize>,
    pub energies: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct LinearizeResult {
    pub report: String,
    pub determinant: f64,
    pub coercive: bool,
}

pub fn solve_y_native(
    angles_deg: Vec<f64>,
    theta: Vec<f64>,
    cells: usize,
    tolerance: f64,
) -> Result<SolveResult, String> {
    let spec = YWireSpec {
        angles_deg,
        theta,
        radial_cells: cells,
        vertical_cells: cells,
        ..Default::default()
    };
    let initial = y_wire(&spec).map_err(|e| e.to_string())?;
    let config = OptimizerConfig {
        tolerance,
        ..Default::default()
    };
    let out = minimize(&initial, &config, None).map_err(|e| e.to_string())?;
    let st = &out.state;
    let rows = angle_report(st, None).map_err(|e| e.to_string())?;
    let mut angles = Vec::new();
    for i in 0..st.q() {
        for j in i + 1..st.q() {
            let vals = rows.iter().map(|r| r.angle(i, j));
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            angles.push([lo, hi]);
        }
    }
    Ok(SolveResult {
        iterations: out.iterations,
        converged: out.converged,
        energy: out.trace.last().map_or(f64::NAN, |t| t.energy),
        balance: max_balance(st, None).map_err(|e| e.to_string())?,
        angles,
        positions: st.positions.clone(),
        sheets: st.sheets.clone(),
        polyline: st.polyline.clone(),
        energies: out.trace.iter().map(|t| t.energy).collect(),
    })
}

pub fn linearize_native(
    s: usize,
    a: Vec<f64>,
    theta: Vec<f64>,
    c: f64,
) -> Result<LinearizeResult, String> {
    let data = JunctionData::new(a.len(), s, a, theta, c).map_err(|e| e.to_string())?;
    let lin = principal_linearization(&data).map_err(|e| e.to_string())?;
    let verdict = complementing_check(&lin.to_weighted_system(), 16).map_err(|e| e.to_string())?;
    Ok(LinearizeResult {
        report: lin.report(),
        determinant: coercivity_determinant(&data.theta, &data.a),
        coercive: verdict.verdict.is_coercive(),
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

/// Minimizes a Y-wire with `cells x cells` sheets; returns JSON.
#[wasm_bindgen]
pub fn solve_y(
    angles_deg: Vec<f64>,
    theta: Vec<f64>,
    cells: usize,
    tolerance: f64,
) -> Result<String, JsError> {
    let r = solve_y_native(angles_deg, theta, cells, tolerance).map_err(|e| JsError::new(&e))?;
    to_json(&r)
}

#[wasm_bindgen]
pub fn linearize(s: usize, a: Vec<f64>, theta: Vec<f64>, c: f64) -> Result<String, JsError> {
    let r = linearize_native(s, a, theta, c).map_err(|e| JsError::new(&e))?;
    to_json(&r)
}

#[wasm_bindgen]
pub fn determinant(theta: Vec<f64>, a: Vec<f64>) -> f64 {
    coercivity_determinant(&theta, &a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_y_meets_at_120() {
        let r = solve_y_native(vec![0.0, 120.0, 240.0], vec![1.0; 3], 6, 1e-6).unwrap();
        assert!(r.converged);
        for [lo, hi] in r.angles {
            assert!((lo - 120.0).abs() < 1.0 && (hi - 120.0).abs() < 1.0);
        }
        assert!(r.energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reference_junction() {
        let r = linearize_native(2, vec![1.0, -1.0, 0.0], vec![1.0; 3], 1.0).unwrap();
        assert_eq!(r.determinant, 4.0);
        assert!(r.coercive);
        assert!(r.report.contains("D = 4.0"));
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(linearize_native(2, vec![0.5; 3], vec![1.0; 3], 10.0).is_err());
        assert!(solve_y_native(vec![0.0, 120.0], vec![1.0; 3], 6, 1e-6).is_err());
    }
}
