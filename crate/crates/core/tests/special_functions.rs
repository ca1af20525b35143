use gcp_core::special::quadrature::integrate;
use gcp_core::special::{
    digamma, exp_integral_e1, phi, phi_asymptotic, phi_closed_odd, phi_integral, phi_prime,
    phi_prime_recurrence_residual, phi_series, PhiEvalPath,
};
use gcp_core::Error;

const EULER: f64 = 0.577_215_664_901_532_9;

fn psi(x: f64) -> f64 {
    digamma(x).unwrap()
}

fn e1(x: f64) -> f64 {
    exp_integral_e1(x).unwrap()
}

fn series(m: f64, x: f64) -> f64 {
    phi_series(m, x).unwrap().value
}

#[test]
fn digamma_identities() {
    assert!((psi(1.0) + EULER).abs() < 1e-14);
    assert!((psi(0.5) + EULER + 2.0 * 2f64.ln()).abs() < 1e-14);
    for m in [0.5, 1.0, 2.5, 7.0] {
        assert!((psi(m + 1.0) - psi(m) - 1.0 / m).abs() < 1e-13, "m = {m}");
    }
    // reflection-free reference values
    assert!((psi(10.0) - 2.251_752_589_066_721).abs() < 1e-14);
    assert!((psi(0.1) + 10.423_754_940_411_076).abs() < 1e-12);
}

#[test]
fn digamma_rejects_non_positive() {
    for x in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(digamma(x), Err(Error::Domain { .. })), "x = {x}");
    }
}

#[test]
fn e1_integral_identity() {
    // E1(x) = int_0^x (1 - e^-u)/u du - gamma - log x
    for x in [0.1, 1.0, 5.0] {
        let q = integrate(|u: f64| -(-u).exp_m1() / u, 0.0, x, 0.0, 1e-14, 200).unwrap();
        let rhs = q.value - EULER - x.ln();
        assert!((e1(x) - rhs).abs() < 1e-12 * e1(x).max(1e-3), "x = {x}");
    }
}

#[test]
fn e1_against_quadrature() {
    // int_1^inf e^-u/u du on the substitution u = 1/s
    let q = integrate(|s: f64| (-1.0 / s).exp() / s, 0.0, 1.0, 0.0, 1e-14, 200).unwrap();
    assert!((e1(1.0) - q.value).abs() < 1e-13);
    assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
}

#[test]
fn e1_decreasing_to_zero() {
    let xs: Vec<f64> = (1..400).map(|i| 0.05 * i as f64).collect();
    let v: Vec<f64> = xs.iter().map(|&x| e1(x)).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]));
    assert!(e1(700.0) < 1e-300);
    assert!(exp_integral_e1(0.0).is_err());
    assert!(exp_integral_e1(-1.0).is_err());
}

#[test]
fn phi_at_zero_is_digamma() {
    for m in [0.5, 1.0, 3.0] {
        for path in [PhiEvalPath::Series, PhiEvalPath::Integral] {
            assert!((phi(m, 0.0, path).unwrap() - psi(m)).abs() < 1e-14, "m = {m} {path:?}");
        }
    }
}

#[test]
fn phi_one_is_log_plus_e1() {
    for x in [0.5_f64, 2.0, 10.0] {
        let oracle = x.ln() + e1(x);
        for path in [PhiEvalPath::Series, PhiEvalPath::Integral, PhiEvalPath::ClosedOdd] {
            assert!((phi(1.0, x, path).unwrap() - oracle).abs() < 1e-11, "x = {x} {path:?}");
        }
    }
}

#[test]
fn closed_form_two() {
    for x in [0.3_f64, 1.0, 4.0, 25.0] {
        let oracle = x.ln() + e1(x) + (1.0 - (-x).exp()) / x;
        assert!((phi_closed_odd(2.0, x).unwrap() - oracle).abs() < 1e-13);
        assert!((series(2.0, x) - oracle).abs() < 1e-11);
    }
}

#[test]
fn series_integral_agreement_grid() {
    for twice_m in 1..=20 {
        let m = twice_m as f64 / 2.0;
        for x in [0.0, 0.1, 1.0, 10.0, 50.0] {
            let s = series(m, x);
            let i = phi_integral(m, x).unwrap();
            assert!((s - i).abs() < 1e-9, "m = {m}, x = {x}: {s} vs {i}");
        }
    }
}

#[test]
fn closed_form_agrees_with_series() {
    for m in 1..=6 {
        for x in [0.2, 1.0, 5.0, 20.0] {
            let c = phi_closed_odd(m as f64, x).unwrap();
            assert!((c - series(m as f64, x)).abs() < 1e-9, "m = {m}, x = {x}");
        }
    }
}

#[test]
fn closed_form_rejects_bad_arguments() {
    assert!(matches!(phi_closed_odd(2.5, 1.0), Err(Error::Usage(_))));
    assert!(phi_closed_odd(2.0, -1.0).is_err());
}

#[test]
fn asymptotic_expansion() {
    assert_eq!(phi_asymptotic(1.0, 7.0).unwrap(), 7f64.ln());
    for m in [2.0, 3.0, 5.0] {
        for x in [50.0, 100.0, 400.0, 1000.0] {
            let diff = (series(m, x) - phi_asymptotic(m, x).unwrap()).abs();
            assert!(diff <= 10.0 / (x * x), "m = {m}, x = {x}: {diff}");
        }
        // next correction is O(m^2 / x^2), so the ratio approaches one like 1/x
        for x in [50.0, 200.0, 1000.0] {
            let ratio = (series(m, x) - x.ln()) * x / (m - 1.0);
            assert!((ratio - 1.0).abs() <= m * m / x + 1e-8, "m = {m}, x = {x}: {ratio}");
        }
    }
}

#[test]
fn derivative_identities() {
    for m in [0.5_f64, 1.0, 2.0, 4.5] {
        assert!((phi_prime(m, 0.0).unwrap() - 1.0_f64 / m).abs() < 1e-14);
    }
    for m in [1.0, 1.5, 3.0, 6.0] {
        for i in 1..60 {
            let x = 0.25 * i as f64;
            let xp = x * phi_prime(m, x).unwrap();
            assert!(xp <= (1.0 - (-x).exp()) * (1.0 + 1e-13), "m = {m}, x = {x}");
        }
    }
    for (m, x) in [(1.0_f64, 2.0_f64), (2.5, 0.3), (4.0, 10.0)] {
        assert!(phi_prime_recurrence_residual(m, x).unwrap().abs() < 1e-10);
    }
}

#[test]
fn derivative_matches_finite_difference() {
    for m in [0.5, 2.0, 3.5] {
        for x in [0.5_f64, 3.0, 12.0] {
            let h = 1e-3 * x.max(1.0);
            let fd = (series(m, x - 2.0 * h) - 8.0 * series(m, x - h) + 8.0 * series(m, x + h)
                - series(m, x + 2.0 * h))
                / (12.0 * h);
            assert!((fd - phi_prime(m, x).unwrap()).abs() < 1e-8, "m = {m}, x = {x}");
        }
    }
}

#[test]
fn strictly_increasing() {
    for m in [0.5, 1.0, 2.5, 5.0] {
        let v: Vec<f64> = (0..200).map(|i| series(m, 0.3 * i as f64)).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "m = {m}");
        assert!((0..200).all(|i| phi_prime(m, 0.3 * i as f64).unwrap() > 0.0));
    }
}

#[test]
fn tail_bound_is_honest() {
    // compare against a reference summed far past the stopping point
    for (m, x) in [(0.5, 3.0), (2.0, 40.0), (4.5, 200.0), (1.0, 1e4)] {
        let s = phi_series(m, x).unwrap();
        let reference = long_series(m, x);
        assert!(
            (s.value - reference).abs() <= s.error_bound + 4.0 * f64::EPSILON * reference.abs().max(1.0),
            "m = {m}, x = {x}"
        );
    }
}

/// Plain Poisson sum over `[mode - 40 sqrt(x) - 40, mode + 40 sqrt(x) + 40]` in log space.
fn long_series(m: f64, x: f64) -> f64 {
    let spread = 40.0 * x.sqrt() + 40.0;
    let lo = (x - spread).max(0.0) as usize;
    let hi = (x + spread) as usize;
    let mut total = 0.0;
    let mut weight = 0.0;
    for j in lo..=hi {
        let jf = j as f64;
        let lw = if x > 0.0 {
            jf * x.ln() - x - ln_factorial(j)
        } else if j == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        let w = lw.exp();
        total += w * psi(jf + m);
        weight += w;
    }
    total / weight
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[test]
fn generic_over_f32() {
    let v: f32 = digamma(1.0f32).unwrap();
    assert!((v + EULER as f32).abs() < 1e-6);
    let p: f32 = phi(2.0f32, 1.5f32, PhiEvalPath::Series).unwrap();
    assert!((p as f64 - series(2.0, 1.5)).abs() < 1e-5);
}
