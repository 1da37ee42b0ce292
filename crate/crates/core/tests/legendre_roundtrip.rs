use plateau::grid::{GraphFunction, Side};
use plateau::legendre::{compose_phi, forward_transform, transform_derivatives};
use proptest::prelude::*;

const H: f64 = 0.02;

fn plus(f: impl Fn(&[f64]) -> f64) -> GraphFunction {
    GraphFunction::half_grid(Side::Plus, &[-0.2], &[21], 26, H, f).unwrap()
}

/// `w = d x_n + b x_n^2 + e x_1 x_n + f sin(3 x_n) x_n`, with `D_{x_n} w`
/// kept inside `[0.5, 2]` on the grid.
fn synthetic(d: f64, b: f64, e: f64, f: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| d * x[1] + b * x[1] * x[1] + e * x[0] * x[1] + f * (3.0 * x[1]).sin() * x[1]
}

fn max_roundtrip_error(w: &GraphFunction) -> f64 {
    let map = forward_transform(w, &plus(|_| 0.0)).unwrap();
    let mut worst = 0.0f64;
    // x -> y -> x
    for flat in 0..w.len() {
        let node = w.unflatten(flat);
        let y = map.forward(&node);
        let col = w.column_of(&node[..1]);
        if y[1] <= map.psi().coord(&[0, map.psi().shape()[1] - 1])[1] {
            worst = worst.max((map.psi_at(col, y[1]) - w.coord(&node)[1]).abs());
        }
    }
    // y -> x -> y
    let psi = map.psi();
    for flat in 0..psi.len() {
        let node = psi.unflatten(flat);
        let x = map.inverse_plus(&node);
        let col = psi.column_of(&node[..1]);
        let start = w.origin()[1];
        let back = plateau::legendre::column_interp(start, H, w.column(col), x[1]).0;
        worst = worst.max((back - psi.coord(&node)[1]).abs());
    }
    worst
}

#[test]
fn roundtrip_on_fixed_samples() {
    for &(d, b, e, f) in &[
        (1.0, 0.0, 0.0, 0.0),
        (0.6, 0.5, 0.2, 0.05),
        (1.9, -0.8, -0.3, 0.0),
        (1.2, 0.3, 0.4, -0.1),
    ] {
        let err = max_roundtrip_error(&plus(synthetic(d, b, e, f)));
        assert!(err < 1e-10, "{err} for {:?}", (d, b, e, f));
    }
}

#[test]
fn origin_slope_matches_gap() {
    for &(a1, a2) in &[(0.9, -0.6), (2.0, 1.5), (0.3, -1.4)] {
        let u1 = plus(move |x| a1 * x[1] + 0.2 * x[0] * x[1] * x[1]);
        let u2 = plus(move |x| a2 * x[1] - 0.1 * x[1].powi(3));
        let map = forward_transform(&u1, &u2).unwrap();
        let col = map.psi().column_of(&[10]);
        assert!(map.psi().coord(&[10, 0])[0].abs() < 1e-12);
        let d = map.dpsi_dyn(&map.psi().unflatten(col * map.psi().shape()[1]));
        assert!((d * (a1 - a2) - 1.0).abs() < 1e-8, "{}", d * (a1 - a2));
        assert!(map.c() * (a1 - a2) > 1.0);
    }
}

#[test]
fn chain_rule_recovers_inverse_slope() {
    let map = forward_transform(&plus(synthetic(1.5, 0.0, 0.0, 0.0)), &plus(|_| 0.0)).unwrap();
    let rule = transform_derivatives(&map, Side::Plus, &[5, 5]).unwrap();
    assert!((rule.normal - 1.5).abs() < 1e-10);
    let grad = rule.apply(&[0.0, 1.0]);
    assert!((grad[1] - 1.5).abs() < 1e-10);
    let phi = compose_phi(&map, &plus(|x| x[0]), 2, 2).unwrap();
    assert!(phi
        .values()
        .iter()
        .zip(0..)
        .all(|(v, flat)| (v - phi.coord(&phi.unflatten(flat))[0]).abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn roundtrip_is_exact_to_round_off(d in 0.8f64..1.6, b in -0.5f64..0.5, e in -0.5f64..0.5, f in -0.05f64..0.05) {
        prop_assert!(max_roundtrip_error(&plus(synthetic(d, b, e, f))) < 1e-10);
    }
}
