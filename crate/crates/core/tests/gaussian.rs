use approx::assert_relative_eq;
use ib_distill::gaussian::{batch_bottleneck_matrix, closed_form_rd, distortion_from_projection, rate_from_projection};
use ib_distill::model::{entropy_triple, GaussianModel};
use proptest::prelude::*;

#[test]
fn scalar_closed_form() {
    // k = 1: λ = 3/4, β_c = 4; at β = 8 the single component is active.
    let m = GaussianModel::scalar(1.0, 1.0).unwrap();
    let (below, _) = closed_form_rd(&m, 1, 3.9).unwrap();
    assert_eq!(below.rate, 0.0);
    assert_eq!(below.n_active, 0);
    let (p, sol) = closed_form_rd(&m, 1, 8.0).unwrap();
    // rate = ½ log((β−1)(1−λ)/λ) = ½ log(7/3).
    assert_relative_eq!(p.rate, 0.5 * (7.0f64 / 3.0).ln(), epsilon = 1e-12);
    assert_eq!(sol.n_active, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn curve_is_monotone_and_bracketed(d in 1usize..6, seed in 0u64..500, k in 1usize..40, b1 in 1.0f64..200.0, step in 0.0f64..100.0) {
        let m = GaussianModel::random(d, seed).unwrap();
        let t = entropy_triple(&m, k).unwrap();
        let (p1, _) = closed_form_rd(&m, k, b1).unwrap();
        let (p2, _) = closed_form_rd(&m, k, b1 + step).unwrap();
        prop_assert!(p2.rate >= p1.rate - 1e-12);
        prop_assert!(p2.distortion <= p1.distortion + 1e-12);
        for p in [p1, p2] {
            prop_assert!(p.distortion >= t.h_x_given_data - 1e-8 && p.distortion <= t.h_x + 1e-8);
        }
    }

    #[test]
    fn projection_reproduces_the_point(d in 1usize..6, seed in 0u64..500, k in 1usize..40, beta in 1.0f64..1000.0) {
        let m = GaussianModel::random(d, seed).unwrap();
        let (p, sol) = closed_form_rd(&m, k, beta).unwrap();
        let dist = distortion_from_projection(&m, k, &sol.a_matrix, &sol.sigma_z).unwrap();
        let rate = rate_from_projection(&m, k, &sol.a_matrix, &sol.sigma_z).unwrap();
        prop_assert!((dist - p.distortion).abs() < 1e-8);
        prop_assert!((rate - p.rate).abs() < 1e-8);
    }

    #[test]
    fn eigenvalues_lie_in_unit_interval(d in 1usize..7, seed in 0u64..500, k in 1usize..100) {
        let m = GaussianModel::random(d, seed).unwrap();
        let s = batch_bottleneck_matrix(&m, k).unwrap().spectrum;
        prop_assert!(s.eigenvalues.iter().all(|&l| l > 0.0 && l < 1.0));
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}
