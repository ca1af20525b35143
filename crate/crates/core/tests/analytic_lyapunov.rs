use approx::assert_relative_eq;
use gcp_core::analytic::{
    classify_model_b, classify_regime, critical_alpha, critical_alpha_asymptotic, critical_alpha_bisect,
    critical_alpha_zero, gap12_large_n, gap12_large_n_factored, gap_lower_bound, lambda1, lambda1_large_n,
    lambda1_with_path, lambda_k_beta0, model_b_critical_gamma, rho_critical, RegimeKind,
};
use gcp_core::special::{digamma, exp_integral_e1, PhiEvalPath};
use gcp_core::Params;
use proptest::prelude::*;

const EULER: f64 = 0.577_215_664_901_532_9;

fn p(n: usize, alpha: f64, beta: f64) -> Params {
    Params::new(n, 1, alpha, beta).unwrap()
}

fn psi(x: f64) -> f64 {
    digamma(x).unwrap()
}

#[test]
fn beta0_value() {
    let l = lambda1(&p(5, 1.0, 0.0)).unwrap();
    assert_relative_eq!(l, 0.5 * (0.4f64.ln() + 1.0 - EULER), epsilon = 1e-14);
    assert!((l + 0.2468).abs() < 1e-4);
}

#[test]
fn odd_population_closed_forms() {
    for (alpha, beta) in [(1.0, 0.2), (3.0, 0.5), (0.2, 0.9)] {
        let q = p(3, alpha, beta);
        let z = q.z();
        let e1 = exp_integral_e1(z).unwrap();
        assert_relative_eq!(lambda1(&q).unwrap(), beta.ln() + e1 / 2.0, epsilon = 1e-12);

        let q = p(5, alpha, beta);
        let z = q.z();
        let e1 = exp_integral_e1(z).unwrap();
        let expected = beta.ln() + e1 / 2.0 + (1.0 - (-z).exp()) / (2.0 * z);
        assert_relative_eq!(lambda1(&q).unwrap(), expected, epsilon = 1e-11);
    }
}

#[test]
fn seven_and_nine() {
    // closed forms for N = 7 and N = 9 in terms of z
    for (alpha, beta) in [(1.0, 0.3), (2.0, 0.6)] {
        let q = p(7, alpha, beta);
        let z = q.z();
        let e1 = exp_integral_e1(z).unwrap();
        let ez = (-z).exp();
        let n7 = beta.ln() + e1 / 2.0 + (2.0 - ez) / (2.0 * z) - (1.0 - ez) / (2.0 * z * z);
        assert_relative_eq!(lambda1(&q).unwrap(), n7, epsilon = 1e-10);

        let q = p(9, alpha, beta);
        let z = q.z();
        let e1 = exp_integral_e1(z).unwrap();
        let ez = (-z).exp();
        let n9 = beta.ln() + e1 / 2.0 + (3.0 - ez) / (2.0 * z) - (3.0 - ez) / (2.0 * z * z) + (1.0 - ez) / (z * z * z);
        assert_relative_eq!(lambda1(&q).unwrap(), n9, epsilon = 1e-10);
    }
}

#[test]
fn paths_agree_for_odd_n() {
    for n in [3, 5, 7, 9, 11] {
        for (alpha, beta) in [(0.5, 0.1), (1.0, 0.5), (4.0, 0.8), (0.05, 0.95)] {
            let q = p(n, alpha, beta);
            let series = lambda1_with_path(&q, PhiEvalPath::Series).unwrap();
            let closed = lambda1_with_path(&q, PhiEvalPath::ClosedOdd).unwrap();
            let auto = lambda1(&q).unwrap();
            assert!((series - closed).abs() < 1e-9, "N = {n}, alpha = {alpha}, beta = {beta}");
            assert!((series - auto).abs() < 1e-9);
        }
    }
}

#[test]
fn critical_point_is_root() {
    for n in [3, 4, 5, 10] {
        let a: f64 = critical_alpha_zero(n).unwrap();
        assert!(lambda1(&p(n, a, 0.0)).unwrap().abs() < 1e-13);
    }
}

#[test]
fn large_n_limit() {
    assert_eq!(lambda1_large_n(1.0, 0.0), 0.0);
    assert_relative_eq!(lambda1_large_n(1.0, 0.5), 0.5 * 0.5f64.ln(), epsilon = 1e-15);
    assert!((lambda1(&p(500, 2.0, 0.3)).unwrap() - lambda1_large_n(2.0, 0.3)).abs() < 0.01);
}

#[test]
fn beta0_spectrum() {
    let l: Vec<f64> = (1..5).map(|k| lambda_k_beta0(1.0, 5, k).unwrap()).collect();
    let expected: Vec<f64> = [2.0, 1.5, 1.0, 0.5].iter().map(|&m| 0.5 * (0.4f64.ln() + psi(m))).collect();
    for (a, b) in l.iter().zip(&expected) {
        assert_relative_eq!(*a, *b, epsilon = 1e-14);
    }
    assert!(l.windows(2).all(|w| w[0] > w[1]));
    assert_relative_eq!(l[0], lambda1(&p(5, 1.0, 0.0)).unwrap(), epsilon = 1e-12);
    assert!(lambda_k_beta0(1.0, 5, 0).is_err());
    assert!(lambda_k_beta0(1.0, 5, 5).is_err());
}

#[test]
fn gap_bound_values() {
    assert_relative_eq!(gap_lower_bound(&p(3, 1.0, 0.0), 1).unwrap(), 0.0375, epsilon = 1e-15);
    for k in 1..=3 {
        let b = gap_lower_bound(&p(5, 2.0, 0.0), k).unwrap();
        assert_relative_eq!(b, 0.15 / ((5 - k) as f64).powi(2), epsilon = 1e-15);
    }
    assert!(gap_lower_bound(&p(5, 1.0, 0.5), 4).is_err());
    assert!(gap_lower_bound(&p(5, 1.0, 0.5), 0).is_err());
}

#[test]
fn gap12_beta0() {
    assert_relative_eq!(gap12_large_n(&p(8, 1.0, 0.0)), 1.0 / 16.0, epsilon = 1e-15);
}

#[test]
fn gap12_relative_error_decays_like_inverse_n() {
    // exact gap at beta = 0 is (psi((N-1)/2) - psi((N-2)/2)) / 2 = (1 + 5/(2N) + ...) / (2N)
    let rel = |n: usize| {
        let nf = n as f64;
        let exact = 0.5 * (psi((nf - 1.0) / 2.0) - psi((nf - 2.0) / 2.0));
        (gap12_large_n(&p(n, 1.0, 0.0)) - exact).abs() / exact
    };
    let errs: Vec<f64> = [10, 100, 1000, 10_000].iter().map(|&n| rel(n)).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    for (n, e) in [10, 100, 1000, 10_000].iter().zip(&errs) {
        assert!((*n as f64 * e - 2.5).abs() < 0.6, "N = {n}: relative error {e}");
    }
    assert!(rel(130) < 0.02);
}

proptest! {
    #[test]
    fn gap12_forms_agree(alpha in 0.01f64..50.0, beta in 0.0f64..0.99, n in 2usize..200) {
        let q = p(n, alpha, beta);
        prop_assert!((gap12_large_n(&q) - gap12_large_n_factored(&q)).abs() <= 1e-14 * gap12_large_n(&q).max(1e-300) + 1e-17);
    }

    #[test]
    fn lambda1_increasing_in_alpha(alpha in 0.01f64..50.0, beta in 0.0f64..0.99, n in 3usize..40) {
        let q = p(n, alpha, beta);
        let a = lambda1(&q).unwrap();
        let b = lambda1(&p(n, alpha * 1.001, beta)).unwrap();
        // near the alpha -> 0 floor log(beta) the increase drops below double resolution
        let resolved = a - beta.ln() > 1e-9 * a.abs().max(1.0);
        let increasing = if resolved { b > a } else { b >= a };
        prop_assert!(increasing, "a = {}, b = {}", a, b);
    }

    #[test]
    fn gap_bound_non_negative(alpha in 0.01f64..50.0, beta in 0.0f64..0.99, n in 3usize..40, k in 1usize..38) {
        prop_assume!(k <= n - 2);
        prop_assert!(gap_lower_bound(&p(n, alpha, beta), k).unwrap() >= 0.0);
    }
}

#[test]
fn critical_alpha_examples() {
    let a3: f64 = critical_alpha(0.0, 3, 1e-12).unwrap();
    assert_relative_eq!(a3, 1.5 * EULER.exp(), epsilon = 1e-14);
    assert!((a3 - 2.6717).abs() < 1e-4);
    let a0: f64 = critical_alpha_zero(5).unwrap();
    for i in 1..10 {
        let beta = i as f64 / 10.0;
        let a = critical_alpha(beta, 5, 1e-12).unwrap();
        assert!(a < a0 / (1.0 - beta).powi(2), "beta = {beta}");
        assert!(lambda1(&p(5, a, beta)).unwrap().abs() <= 1e-9);
    }
}

#[test]
fn bisection_matches_closed_form() {
    for n in 3..=12 {
        let exact: f64 = critical_alpha_zero(n).unwrap();
        assert!((critical_alpha_bisect(0.0, n, 1e-12).unwrap() - exact).abs() < 1e-8, "N = {n}");
        assert_relative_eq!(exact, n as f64 / 2.0 * (-psi((n as f64 - 1.0) / 2.0)).exp(), epsilon = 1e-12);
    }
}

#[test]
fn asymptotic_critical_alpha() {
    assert_relative_eq!(critical_alpha_asymptotic(0.9, 4).unwrap(), 80.0, epsilon = 1e-9);
    assert!(critical_alpha_asymptotic(0.5, 3).is_err());
    let ratios: Vec<f64> = [0.9, 0.99, 0.999]
        .iter()
        .map(|&b| critical_alpha(b, 6, 1e-12).unwrap() / critical_alpha_asymptotic(b, 6).unwrap())
        .collect();
    assert!(ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()));
    assert!((ratios[2] - 1.0).abs() < 0.01);
    let v: Vec<f64> = (0..20).map(|i| critical_alpha_asymptotic(i as f64 / 20.0, 6).unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn rho_critical_decreasing() {
    for n in [3, 5, 9] {
        let r: Vec<f64> = (0..10).map(|i| rho_critical(i as f64 / 10.0, n, 1e-12).unwrap()).collect();
        assert_relative_eq!(r[0], critical_alpha_zero::<f64>(n).unwrap(), epsilon = 1e-12);
        assert!(r.windows(2).all(|w| w[1] < w[0]), "N = {n}: {r:?}");
    }
}

#[test]
fn two_person_rho_critical_advisory() {
    // no proof exists for N = 2; report the shape without asserting it
    let r: Vec<f64> = (0..10).map(|i| rho_critical(i as f64 / 10.0, 2, 1e-12).unwrap()).collect();
    let decreasing = r.windows(2).all(|w| w[1] < w[0]);
    eprintln!("N = 2 rho_cr on beta = 0, 0.1, ..., 0.9: {r:?} (decreasing: {decreasing})");
}

#[test]
fn regimes() {
    let a: f64 = critical_alpha_zero(5).unwrap();
    assert_eq!(classify_regime(&p(5, 0.5 * a, 0.0), 1e-9).unwrap().kind, RegimeKind::Subcritical);
    assert_eq!(classify_regime(&p(5, a, 0.0), 1e-9).unwrap().kind, RegimeKind::Critical);
    assert_eq!(classify_regime(&p(5, 2.0 * a, 0.0), 1e-9).unwrap().kind, RegimeKind::Supercritical);
}

#[test]
fn regime_stable_under_small_perturbation() {
    for beta in [0.0, 0.3, 0.7] {
        let a = critical_alpha(beta, 6, 1e-12).unwrap();
        for da in [-1e-12, 0.0, 1e-12] {
            let kind = classify_regime(&p(6, a + da, beta), 1e-9).unwrap().kind;
            assert_eq!(kind, RegimeKind::Critical, "beta = {beta}, shift {da}");
        }
    }
}

#[test]
fn model_b_boundary() {
    assert_eq!(model_b_critical_gamma::<f64>(3).unwrap(), 0.0);
    assert_eq!(model_b_critical_gamma::<f64>(2).unwrap(), -0.25);
    let v: Vec<f64> = (2..200).map(|n| model_b_critical_gamma(n).unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|g| *g < 0.5));
    assert_eq!(classify_model_b(0.1, 3, 1e-9).unwrap().kind, RegimeKind::Subcritical);
    assert_eq!(classify_model_b(-0.1, 3, 1e-9).unwrap().kind, RegimeKind::Supercritical);
    assert_eq!(classify_model_b(0.45, 30, 0.01).unwrap().kind, RegimeKind::Critical);
}
