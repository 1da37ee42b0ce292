use nalgebra::DMatrix;
use num_complex::Complex64;
use plateau::adn::{
    complementing_check, decaying_solutions, dirichlet_laplace, ellipticity_check, identified_pair,
    laplacians, wave_operator, AdnError, Coercivity, Ellipticity, Term, WeightedSystem,
};
use plateau::linearize::{coercivity_determinant, principal_linearization, JunctionData};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(rng: &mut ChaCha8Rng, n: usize) -> JunctionData {
    let q = rng.gen_range(3..=5);
    let s = rng.gen_range(2..q);
    let mut a: Vec<f64> = (0..q).map(|_| rng.gen_range(-3.0..3.0)).collect();
    if a[0] <= a[1] {
        a.swap(0, 1);
    }
    if a[0] - a[1] < 1e-2 {
        a[0] += 0.5;
    }
    let theta = (0..q).map(|_| rng.gen_range(0.1..5.0)).collect();
    let c = rng.gen_range(1.05..4.0) / (a[0] - a[1]);
    JunctionData::new(q, s, a, theta, c)
        .unwrap()
        .with_n(n)
        .unwrap()
}

fn junction_system(data: &JunctionData) -> WeightedSystem {
    principal_linearization(data).unwrap().to_weighted_system()
}

/// Replaces both balance rows with copies of the first coincidence row.
fn duplicated_coincidence(data: &JunctionData) -> WeightedSystem {
    let mut sys = junction_system(data);
    let copy: Vec<Term> = sys
        .boundary
        .iter()
        .filter(|t| t.row == 2)
        .cloned()
        .collect();
    sys.boundary.retain(|t| t.row >= 2);
    for row in 0..2 {
        sys.boundary.extend(copy.iter().cloned().map(|mut t| {
            t.row = row;
            t
        }));
    }
    sys.r[0] = -2;
    sys.r[1] = -2;
    sys
}

#[test]
fn fixtures_have_their_verdicts() {
    assert!(complementing_check(&dirichlet_laplace(2), 64)
        .unwrap()
        .verdict
        .is_coercive());
    assert!(complementing_check(&dirichlet_laplace(3), 64)
        .unwrap()
        .verdict
        .is_coercive());
    assert!(!complementing_check(&identified_pair(2), 64)
        .unwrap()
        .verdict
        .is_coercive());
    match ellipticity_check(&wave_operator(), 64).unwrap() {
        Ellipticity::NotElliptic { witness, ratio } => {
            assert!(ratio < 1e-10);
            assert!((witness[0].abs() - witness[1].abs()).abs() < 1e-8);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        complementing_check(&wave_operator(), 64),
        Err(AdnError::NotElliptic)
    ));
}

#[test]
fn random_junctions_are_coercive() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..100 {
        let data = random_data(&mut rng, 2 + i % 2);
        assert!(coercivity_determinant(&data.theta, &data.a) > 0.0);
        let report = complementing_check(&junction_system(&data), 32).unwrap();
        assert!(
            report.verdict.is_coercive(),
            "{data:?}: {:?}",
            report.verdict
        );
    }
}

#[test]
fn duplicated_coincidence_rows_fail() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let data = random_data(&mut rng, 2);
        match complementing_check(&duplicated_coincidence(&data), 32) {
            Ok(r) => assert!(matches!(r.verdict, Coercivity::NotCoercive { .. })),
            Err(e) => assert!(matches!(e, AdnError::DimensionMismatch { .. }), "{e}"),
        }
    }
}

#[test]
fn diagonal_roots_have_closed_form() {
    let mut sys = laplacians(3, 2);
    for t in sys.interior.iter_mut() {
        let normal = t.alpha[2] == 2;
        let scale = match (t.row, normal) {
            (0, true) => 4.0,
            (1, false) => 9.0,
            _ => 1.0,
        };
        t.value *= scale;
    }
    let xi = [0.6, 0.8];
    let (basis, _) = decaying_solutions(&sys, &xi).unwrap();
    let mut roots: Vec<f64> = basis.roots.iter().map(|r| r.re).collect();
    roots.sort_by(f64::total_cmp);
    // 4 lambda^2 = 1 and lambda^2 = 9
    assert!(
        (roots[0] - 0.5).abs() < 1e-10 && (roots[1] - 3.0).abs() < 1e-10,
        "{roots:?}"
    );
    assert!(basis.roots.iter().all(|r| r.im.abs() < 1e-10));
}

fn verdict(sys: &WeightedSystem) -> bool {
    complementing_check(sys, 24).unwrap().verdict.is_coercive()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn verdict_survives_row_and_unknown_scaling(seed in 0u64..10_000, row_scale in 0.01f64..100.0, col_scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_data(&mut rng, 2);
        for base in [junction_system(&data), duplicated_coincidence(&data)] {
            let expect = verdict(&base);
            let mut sys = base.clone();
            let (row, col) = (rng.gen_range(0..sys.q), rng.gen_range(0..sys.q));
            for t in sys.interior.iter_mut() {
                if t.row == row { t.value *= row_scale; }
                if t.col == col { t.value *= col_scale; }
            }
            for t in sys.boundary.iter_mut() {
                if t.col == col { t.value *= col_scale; }
            }
            prop_assert_eq!(verdict(&sys), expect);
        }
    }

    #[test]
    fn verdict_survives_tangential_rotation(seed in 0u64..10_000, angle in 0.0f64..6.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_data(&mut rng, 3);
        let rot = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
        for base in [junction_system(&data), dirichlet_laplace(3), identified_pair(3)] {
            prop_assert_eq!(verdict(&base.rotate_tangential(&rot)), verdict(&base));
        }
    }

    #[test]
    fn text_form_roundtrips(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = junction_system(&random_data(&mut rng, 2));
        let back = WeightedSystem::parse(&sys.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), sys.to_text());
        prop_assert_eq!(back.boundary.len(), sys.boundary.len());
        let xi = [0.3, -0.4];
        prop_assert!((back.symbol(&xi) - sys.symbol(&xi)).iter().all(|z: &Complex64| z.norm() < 1e-15));
    }
}
