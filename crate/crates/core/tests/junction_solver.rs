use plateau::junction::{
    angle_report, interior_gradient_density, max_balance, minimize, read_mesh_dir,
    total_weighted_area, write_mesh_dir, y_wire, OptimizerConfig, SheetMeshState, YWireSpec,
};

fn y(angles: &[f64], theta: &[f64], cells: usize) -> SheetMeshState {
    y_wire(&YWireSpec {
        angles_deg: angles.to_vec(),
        theta: theta.to_vec(),
        radial_cells: cells,
        vertical_cells: cells,
        ..Default::default()
    })
    .unwrap()
}

fn solve(st: &SheetMeshState, tol: f64) -> plateau::junction::MinimizeOutcome {
    let cfg = OptimizerConfig {
        tolerance: tol,
        ..Default::default()
    };
    let out = minimize(st, &cfg, None).unwrap();
    assert!(
        out.converged,
        "no convergence after {} iterations",
        out.iterations
    );
    out
}

fn mid_angles(st: &SheetMeshState) -> Vec<Vec<f64>> {
    let rows = angle_report(st, None).unwrap();
    rows[rows.len() / 2].angles.clone()
}

#[test]
fn small_y_reaches_120_degrees_monotonically() {
    let out = solve(&y(&[0.0, 90.0, 225.0], &[1.0; 3], 8), 1e-7);
    for pair in out.trace.windows(2) {
        assert!(pair[1].energy <= pair[0].energy);
    }
    for row in angle_report(&out.state, None).unwrap() {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert!((row.angle(a, b) - 120.0).abs() < 1.0, "{:?}", row.angles);
        }
    }
    let balance = max_balance(&out.state, None).unwrap();
    assert!(balance < 1e-3);
    assert!(balance < 10.0 * interior_gradient_density(&out.state, None).max(1e-7));
}

#[test]
fn weighted_y_matches_unit_conormal_balance() {
    let out = solve(&y(&[0.0, 120.0, 240.0], &[2.0, 2.0, 3.0], 8), 1e-7);
    let expect = (1.0f64 / 8.0).acos().to_degrees();
    let angles = mid_angles(&out.state);
    assert!(
        (angles[0][1] - expect).abs() < 1.0,
        "{} vs {expect}",
        angles[0][1]
    );
    // 2 eta_1 + 2 eta_2 + 3 eta_3 = 0 fixes the other two angles
    let other = 180.0 - 0.5 * expect;
    assert!((angles[0][2] - other).abs() < 1.0 && (angles[1][2] - other).abs() < 1.0);
}

#[test]
fn rigid_motion_moves_the_solution_rigidly() {
    let base = y(&[0.0, 90.0, 225.0], &[1.0; 3], 6);
    let (a, b) = (0.7f64, -0.4f64);
    let rz = [
        [a.cos(), -a.sin(), 0.0],
        [a.sin(), a.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ];
    let rx = [
        [1.0, 0.0, 0.0],
        [0.0, b.cos(), -b.sin()],
        [0.0, b.sin(), b.cos()],
    ];
    let mut rot = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rot[i][j] = (0..3).map(|k| rx[i][k] * rz[k][j]).sum();
        }
    }
    let moved = base.transformed(&rot, [0.3, -1.2, 2.5]);
    let (s0, s1) = (solve(&base, 1e-11), solve(&moved, 1e-11));
    let (e0, e1) = (
        total_weighted_area(&s0.state, None).unwrap(),
        total_weighted_area(&s1.state, None).unwrap(),
    );
    assert!((e0 - e1).abs() < 1e-10, "{e0} vs {e1}");
    let (r0, r1) = (
        angle_report(&s0.state, None).unwrap(),
        angle_report(&s1.state, None).unwrap(),
    );
    for (x, y) in r0.iter().zip(&r1) {
        for (u, v) in x.angles.iter().flatten().zip(y.angles.iter().flatten()) {
            assert!((u - v).abs() < 1e-8, "{u} vs {v}");
        }
    }
}

#[test]
fn refinement_changes_angles_little() {
    let coarse = solve(&y(&[0.0, 100.0, 210.0], &[1.0, 1.5, 1.2], 6), 1e-8);
    let fine = solve(&y(&[0.0, 100.0, 210.0], &[1.0, 1.5, 1.2], 12), 1e-8);
    let (a, b) = (mid_angles(&coarse.state), mid_angles(&fine.state));
    for (u, v) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((u - v).abs() < 0.5, "{u} vs {v}");
    }
}

#[test]
fn weight_scaling_keeps_the_minimizer() {
    let st = y(&[0.0, 90.0, 225.0], &[1.0, 2.0, 1.5], 6);
    let mut scaled = st.clone();
    scaled.theta.iter_mut().for_each(|t| *t *= 4.0);
    let (a, b) = (solve(&st, 1e-7), solve(&scaled, 4e-7));
    let (ra, rb) = (mid_angles(&a.state), mid_angles(&b.state));
    for (u, v) in ra.iter().flatten().zip(rb.iter().flatten()) {
        assert!((u - v).abs() < 1e-4);
    }
}

#[test]
fn mesh_directory_roundtrip() {
    let out = solve(&y(&[0.0, 90.0, 225.0], &[1.0; 3], 4), 1e-7);
    let dir = tempfile::tempdir().unwrap();
    write_mesh_dir(&out.state, dir.path()).unwrap();
    let back = read_mesh_dir(dir.path()).unwrap();
    assert_eq!(back.theta, out.state.theta);
    assert_eq!(back.q(), 3);
    let (e0, e1) = (
        total_weighted_area(&out.state, None).unwrap(),
        total_weighted_area(&back, None).unwrap(),
    );
    assert!((e0 - e1).abs() < 1e-12);
    let again = minimize(
        &back,
        &OptimizerConfig {
            tolerance: 1e-6,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert_eq!(again.iterations, 0);
}
