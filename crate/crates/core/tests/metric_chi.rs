use nalgebra::DMatrix;
use plateau::metric::{
    assemble_g, chi_from_matrix, solve_chi, ConstantMetric, Euclidean, GraphJet, MetricField,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5
}

/// `g(tau_i, chi)` with `tau_i = e_i + p_i e_{n+1}`.
fn tangent_products(g: &DMatrix<f64>, p: &[f64], chi: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|i| {
            let mut tau = vec![0.0; n + 1];
            tau[i] = 1.0;
            tau[n] = p[i];
            let mut s = 0.0;
            for a in 0..=n {
                for b in 0..=n {
                    s += tau[a] * g[(a, b)] * chi[b];
                }
            }
            s
        })
        .collect()
}

#[test]
fn euclidean_chi_is_minus_p_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let n = rng.gen_range(1..5);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let jet = GraphJet::new(vec![0.0; n], 0.0, p.clone());
        let chi = solve_chi(&Euclidean::new(n), &jet).unwrap();
        for i in 0..n {
            assert_eq!(chi[i], -p[i]);
        }
        assert_eq!(chi[n], 1.0);
    }
}

#[test]
fn chi_is_orthogonal_for_random_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.gen_range(1..4);
        let g = random_spd(&mut rng, n + 1);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let chi = chi_from_matrix(&g, &p).unwrap();
        for r in tangent_products(&g, &p, chi.as_slice()) {
            assert!(r.abs() < 1e-10, "{r}");
        }
    }
}

proptest! {
    #[test]
    fn graph_gram_is_spd(seed in 0u64..10_000, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_spd(&mut rng, n + 1);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let metric = ConstantMetric::new(g);
        let big = assemble_g(&metric, &GraphJet::new(vec![0.0; n], 0.0, p));
        prop_assert_eq!(big.clone(), big.transpose());
        prop_assert!(big.cholesky().is_some());
    }

    #[test]
    fn chi_is_invariant_under_metric_scaling(seed in 0u64..10_000, factor in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_spd(&mut rng, 3);
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let a = chi_from_matrix(&g, &p).unwrap();
        let b = chi_from_matrix(&(g * factor), &p).unwrap();
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn chi_last_component_is_one(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = ConstantMetric::new(random_spd(&mut rng, 3));
        let jet = GraphJet::new(vec![0.3, -0.1], 0.2, vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
        prop_assert_eq!(metric.dim(), 2);
        prop_assert_eq!(solve_chi(&metric, &jet).unwrap()[2], 1.0);
    }
}
