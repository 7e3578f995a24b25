use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use lambda_saga::asymptotics::solve_lyapunov;
use lambda_saga::linalg::dist_sq;
use lambda_saga::problem::{
    solve_minimizer, FiniteSumProblem, LogisticProblem, NewtonOptions, QuadraticProblem,
};

fn rows_of(p: &LogisticProblem) -> Vec<Vec<f64>> {
    (0..p.num_components()).map(|k| p.feature(k).to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn component_order_does_not_matter(seed in 0u64..1000, shift in 1usize..30, x in proptest::collection::vec(-2.0..2.0f64, 3)) {
        let p = LogisticProblem::synthetic(30, &[0.4, -0.8, 0.2], 1.5, seed).unwrap();
        let mut rows = rows_of(&p);
        let mut labels = p.labels().to_vec();
        rows.rotate_left(shift);
        labels.rotate_left(shift);
        rows.swap(0, 7);
        labels.swap(0, 7);
        let permuted = LogisticProblem::from_rows(rows, labels).unwrap();
        prop_assert!((p.value(&x) - permuted.value(&x)).abs() <= 1e-12);
        prop_assert!(dist_sq(&p.full_gradient(&x), &permuted.full_gradient(&x)).sqrt() <= 1e-12);

        let q = QuadraticProblem::seeded(12, 3, 1.0, seed).unwrap();
        let mut anchors: Vec<Vec<f64>> = (0..12).map(|k| q.anchor(k).to_vec()).collect();
        anchors.reverse();
        let qr = QuadraticProblem::new(anchors).unwrap();
        prop_assert!((q.value(&x) - qr.value(&x)).abs() <= 1e-12);
        prop_assert!(dist_sq(&q.full_gradient(&x), &qr.full_gradient(&x)).sqrt() <= 1e-12);
    }

    #[test]
    fn covariance_scales_exactly_with_one_minus_lambda_squared(
        diag in proptest::collection::vec(0.55..4.0f64, 3),
        off in -0.1..0.1f64,
        g in proptest::collection::vec(-1.0..1.0f64, 9),
    ) {
        let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        h[(0, 1)] = off;
        h[(1, 0)] = off;
        let b = DMatrix::from_row_slice(3, 3, &g);
        let gamma = &b * b.transpose();
        let Ok(base) = solve_lyapunov(&h, &gamma, 0.0) else { return Ok(()) };
        for i in 0..=10 {
            let lambda = i as f64 / 10.0;
            let cov = solve_lyapunov(&h, &gamma, lambda).unwrap();
            let w = (1.0 - lambda) * (1.0 - lambda);
            prop_assert_eq!(cov.sigma.clone(), &base.sigma * w);
        }
    }
}

#[test]
fn logistic_lp_bounds_over_ten_thousand_points() {
    let p = LogisticProblem::synthetic(60, &[1.0, -0.5, 0.25, 0.0], 1.0, 77).unwrap();
    let x_star = solve_minimizer(&p, NewtonOptions::default()).unwrap();
    let grads: Vec<Vec<f64>> = (0..60).map(|k| p.component_gradient(k, &x_star)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for power in [1u32, 2] {
        let lp = p.lipschitz_constant_p(power).unwrap();
        let mut violations = 0;
        for i in 0..10_000 {
            let scale = [0.01, 0.3, 3.0][i % 3];
            let x: Vec<f64> = x_star
                .iter()
                .map(|c| c + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let lhs = (0..60)
                .map(|k| dist_sq(&p.component_gradient(k, &x), &grads[k]).powi(power as i32))
                .sum::<f64>()
                / 60.0;
            if lhs > lp * dist_sq(&x, &x_star).powi(power as i32) {
                violations += 1;
            }
        }
        assert_eq!(violations, 0, "p = {power}");
    }
}
